#pragma once

// Flat JSON run configuration for the experiment driver.

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "fio_apply.hpp"
#include "hamiltonian.hpp"
#include "reference_solver.hpp"

namespace hkprop {

struct AxisSpec {
    double min = 0.0;
    double max = 0.0;
    int n = 0;
};

struct RunConfig {
    ModelSpec model;
    std::vector<double> eps{0.01};
    double t_final = 1.0;
    double dt = 1e-3;
    double dt_ref = 1e-3;
    double L = 8.0;
    std::optional<int> n_x;
    std::optional<AxisSpec> q_axis;
    std::optional<AxisSpec> p_axis;
    double phase_spacing = 0.5;
    double phase_extent = 9.0;
    cplx theta_x = 1.0;
    cplx theta_y = 1.0;
    std::string method = "hk";
    std::string state = "coherent";
    double q0 = 1.0, p0 = 0.0;
    double q1 = -1.0, p1 = 0.0;
    int n_bumps = 5;
    std::uint64_t seed = 1;
    std::optional<double> ehrenfest_c;
    bool dump = false;

    nlohmann::json source; // the parsed document, hashed for provenance
};

namespace detail {

inline double get_number(const nlohmann::json &j, const std::string &key) {
    if (!j.is_number()) throw Error(ErrorCode::ConfigError, "'" + key + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw Error(ErrorCode::ConfigError, "'" + key + "' must be finite");
    return v;
}

inline int get_int(const nlohmann::json &j, const std::string &key) {
    const double v = get_number(j, key);
    if (v != std::floor(v)) throw Error(ErrorCode::ConfigError, "'" + key + "' must be an integer");
    return static_cast<int>(v);
}

inline std::string get_string(const nlohmann::json &j, const std::string &key) {
    if (!j.is_string()) throw Error(ErrorCode::ConfigError, "'" + key + "' must be a string");
    return j.get<std::string>();
}

// Either a real number or a two-element array [re, im].
inline cplx get_complex(const nlohmann::json &j, const std::string &key) {
    if (j.is_number()) return {get_number(j, key), 0.0};
    if (j.is_array() && j.size() == 2) return {get_number(j[0], key), get_number(j[1], key)};
    throw Error(ErrorCode::ConfigError, "'" + key + "' must be a number or [re, im]");
}

} // namespace detail

inline const std::set<std::string> &known_methods() {
    static const std::set<std::string> m{"hk", "fga", "tga", "reference", "identity"};
    return m;
}

inline RunConfig parse_config(const nlohmann::json &doc) {
    using namespace detail;
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    RunConfig c;
    c.source = doc;
    std::optional<double> q_min, q_max, p_min, p_max;
    std::optional<int> n_q, n_p;

    for (const auto &[key, v] : doc.items()) {
        if (key == "potential") c.model.name = get_string(v, key);
        else if (key == "omega") c.model.omega = get_number(v, key);
        else if (key == "a") c.model.a = get_number(v, key);
        else if (key == "A") c.model.A = get_number(v, key);
        else if (key == "sigma") c.model.sigma = get_number(v, key);
        else if (key == "h1_const") c.model.h1_const = get_number(v, key);
        else if (key == "eps") {
            c.eps.clear();
            if (v.is_array())
                for (const auto &e : v) c.eps.push_back(get_number(e, key));
            else c.eps.push_back(get_number(v, key));
        } else if (key == "t_final") c.t_final = get_number(v, key);
        else if (key == "dt") c.dt = get_number(v, key);
        else if (key == "dt_ref") c.dt_ref = get_number(v, key);
        else if (key == "L") c.L = get_number(v, key);
        else if (key == "n_x") c.n_x = get_int(v, key);
        else if (key == "q_min") q_min = get_number(v, key);
        else if (key == "q_max") q_max = get_number(v, key);
        else if (key == "n_q") n_q = get_int(v, key);
        else if (key == "p_min") p_min = get_number(v, key);
        else if (key == "p_max") p_max = get_number(v, key);
        else if (key == "n_p") n_p = get_int(v, key);
        else if (key == "phase_spacing") c.phase_spacing = get_number(v, key);
        else if (key == "phase_extent") c.phase_extent = get_number(v, key);
        else if (key == "theta_x") c.theta_x = get_complex(v, key);
        else if (key == "theta_y") c.theta_y = get_complex(v, key);
        else if (key == "method") c.method = get_string(v, key);
        else if (key == "state") c.state = get_string(v, key);
        else if (key == "q0") c.q0 = get_number(v, key);
        else if (key == "p0") c.p0 = get_number(v, key);
        else if (key == "q1") c.q1 = get_number(v, key);
        else if (key == "p1") c.p1 = get_number(v, key);
        else if (key == "n_bumps") c.n_bumps = get_int(v, key);
        else if (key == "seed") {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                throw Error(ErrorCode::ConfigError, "'seed' must be a non-negative integer");
            c.seed = v.get<std::uint64_t>();
        } else if (key == "ehrenfest_c") c.ehrenfest_c = get_number(v, key);
        else if (key == "dump") {
            if (!v.is_boolean()) throw Error(ErrorCode::ConfigError, "'dump' must be a boolean");
            c.dump = v.get<bool>();
        } else throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    }

    if (c.eps.empty()) throw Error(ErrorCode::ConfigError, "eps list is empty");
    for (double e : c.eps)
        if (!(e > 0.0 && e <= 1.0)) throw Error(ErrorCode::ConfigError, "eps values must lie in (0, 1]");
    if (!(c.dt > 0) || !(c.dt_ref > 0)) throw Error(ErrorCode::ConfigError, "dt and dt_ref must be positive");
    if (!(c.L > 0)) throw Error(ErrorCode::ConfigError, "L must be positive");
    if (c.n_x && (*c.n_x < 2 || !is_power_of_two(static_cast<std::size_t>(*c.n_x))))
        throw Error(ErrorCode::ConfigError, "n_x must be a power of two");
    if (!(c.phase_spacing > 0) || !(c.phase_extent > 0))
        throw Error(ErrorCode::ConfigError, "phase_spacing and phase_extent must be positive");
    if (!known_methods().contains(c.method)) throw Error(ErrorCode::ConfigError, "unknown method '" + c.method + "'");
    if (c.state != "coherent" && c.state != "two_bump" && c.state != "random")
        throw Error(ErrorCode::ConfigError, "state must be coherent, two_bump or random");
    if (c.n_bumps < 1) throw Error(ErrorCode::ConfigError, "n_bumps must be positive");
    if (c.ehrenfest_c && !(*c.ehrenfest_c > 0)) throw Error(ErrorCode::ConfigError, "ehrenfest_c must be positive");

    auto axis = [](std::optional<double> lo, std::optional<double> hi, std::optional<int> n,
                   const char *name) -> std::optional<AxisSpec> {
        const int given = lo.has_value() + hi.has_value() + n.has_value();
        if (given == 0) return std::nullopt;
        if (given != 3) throw Error(ErrorCode::ConfigError, std::string(name) + " axis needs min, max and n together");
        if (*n < 2 || !(*hi > *lo)) throw Error(ErrorCode::ConfigError, std::string(name) + " axis needs n >= 2, max > min");
        return AxisSpec{*lo, *hi, *n};
    };
    c.q_axis = axis(q_min, q_max, n_q, "q");
    c.p_axis = axis(p_min, p_max, n_p, "p");
    if (c.q_axis.has_value() != c.p_axis.has_value())
        throw Error(ErrorCode::ConfigError, "q and p axes must be given together");

    builtin(c.model, 1); // validates the model parameters
    make_widths(CMatrix::Constant(1, 1, c.theta_x), CMatrix::Constant(1, 1, c.theta_y));
    return c;
}

inline RunConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

/// 64-bit FNV-1a of the canonical (key-sorted, compact) JSON dump, as hex.
inline std::string config_hash(const RunConfig &c) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : c.source.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline WidthPair config_widths(const RunConfig &c) {
    return make_widths(CMatrix::Constant(1, 1, c.theta_x), CMatrix::Constant(1, 1, c.theta_y));
}

/// Run time for one eps: the fixed t_final, or c log(1/eps) in Ehrenfest mode.
inline double run_time(const RunConfig &c, double eps) {
    return c.ehrenfest_c ? *c.ehrenfest_c * std::log(1.0 / eps) : c.t_final;
}

/// Largest |p| the initial Husimi density reaches within phase_extent deviations.
inline double momentum_reach(const RunConfig &c, double eps) {
    const double spread = c.phase_extent * std::sqrt(eps * c.theta_y.real() / 2.0);
    double reach = std::abs(c.p0);
    if (c.state == "two_bump") reach = std::max(reach, std::abs(c.p1));
    if (c.state == "random") reach = 1.0;
    if (c.p_axis) reach = std::max(std::abs(c.p_axis->min), std::abs(c.p_axis->max));
    return reach + spread;
}

/// Spectral box for one eps. Unless n_x is set, the node count is the
/// smallest power of two (at least 2048) giving 16 points per wavelength
/// 2 pi eps / p at the momentum reach of the initial state.
inline SpectralDomain config_domain(const RunConfig &c, double eps) {
    SpectralDomain dom;
    dom.L = c.L;
    dom.eps = eps;
    dom.dt = c.dt_ref;
    if (c.n_x) {
        dom.n = *c.n_x;
    } else {
        const double dx_max = 2.0 * std::numbers::pi * eps / (16.0 * std::max(momentum_reach(c, eps), 1e-12));
        int n = 2048;
        while (2.0 * c.L / n > dx_max) n *= 2;
        dom.n = n;
    }
    dom.validate();
    return dom;
}

inline WaveFunction normalized(WaveFunction psi) {
    const double n = l2_norm(psi);
    if (!(n > 0)) throw Error(ErrorCode::ConfigError, "initial state has zero norm");
    for (auto &v : psi.values) v /= n;
    return psi;
}

/// Initial datum on the spectral grid: a coherent state, a two-bump
/// superposition, or a seeded random superposition of n_bumps coherent states.
inline WaveFunction initial_state(const RunConfig &c, double eps, const SpatialGrid &grid) {
    if (c.state == "coherent") return coherent_state(c.q0, c.p0, eps, grid);
    WaveFunction psi = WaveFunction::zeros(grid, eps);
    auto add = [&](const WaveFunction &g, cplx coef) {
        for (int i = 0; i < grid.n; ++i) psi.values[i] += coef * g.values[i];
    };
    if (c.state == "two_bump") {
        add(coherent_state(c.q0, c.p0, eps, grid), 1.0);
        add(coherent_state(c.q1, c.p1, eps, grid), 1.0);
        return normalized(psi);
    }
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> pos(-1.0, 1.0), phase(0.0, 2.0 * std::numbers::pi);
    for (int k = 0; k < c.n_bumps; ++k) {
        const double q = c.q0 + pos(rng);
        const double p = c.p0 + pos(rng);
        const double r = 1.0 + 0.5 * pos(rng);
        const double a = phase(rng);
        add(coherent_state(q, p, eps, grid), std::polar(r, a));
    }
    return normalized(psi);
}

/// The configured phase-space grid, or the automatic one around psi.
inline BundleGrid config_bundle_grid(const RunConfig &c, const WaveFunction &psi) {
    if (c.q_axis) {
        BundleGrid g;
        g.q.push_back(UniformAxis::from_range(c.q_axis->min, c.q_axis->max, c.q_axis->n));
        g.p.push_back(UniformAxis::from_range(c.p_axis->min, c.p_axis->max, c.p_axis->n));
        g.validate();
        return g;
    }
    return auto_bundle_grid(psi, c.theta_y.real(), {c.phase_spacing, c.phase_extent});
}

} // namespace hkprop
