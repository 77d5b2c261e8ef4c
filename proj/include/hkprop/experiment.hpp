#pragma once

// Experiment pipelines behind the `hk` driver. Every run produces an error
// table (one row per eps, time and method, measured against the spectral
// reference) and a JSON summary with diagnostics.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "fio_apply.hpp"
#include "reference_solver.hpp"

namespace hkprop {

inline constexpr const char *kTableHeader = "eps,t,method,l2_error,norm_defect,wall_time_s,config_hash";

struct ErrorRow {
    double eps = 0.0;
    double t = 0.0;
    std::string method;
    double l2_error = 0.0;
    double norm_defect = 0.0;
    double wall_time_s = 0.0;
    std::string config_hash;
    bool slope_row = false; // eps column reads "slope"; error columns hold fitted exponents
};

struct ErrorTable {
    std::vector<ErrorRow> rows;
    nlohmann::json summary = nlohmann::json::object();

    /// Orders data rows by (method, eps, t); slope rows stay last.
    void sort_rows() {
        std::stable_sort(rows.begin(), rows.end(), [](const ErrorRow &a, const ErrorRow &b) {
            return std::tie(a.slope_row, a.method, a.eps, a.t) < std::tie(b.slope_row, b.method, b.eps, b.t);
        });
    }
};

struct RunContext {
    std::filesystem::path out_dir;  // empty: write nothing
    unsigned threads = 1;
    bool deterministic = false;      // record zero wall time so tables are byte-identical
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double> &x, const std::vector<double> &y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::BadShape, "slope fit needs two or more points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(std::max(y[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline void print_table(const ErrorTable &table, std::ostream &out) {
    out << kTableHeader << '\n';
    for (const auto &r : table.rows)
        out << (r.slope_row ? std::string("slope") : format_double(r.eps)) << ',' << format_double(r.t) << ','
            << r.method << ',' << format_double(r.l2_error) << ',' << format_double(r.norm_defect) << ','
            << format_double(r.wall_time_s) << ',' << r.config_hash << '\n';
}

inline void write_table(const ErrorTable &table, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
    print_table(table, out);
}

namespace detail {

class Stopwatch {
  public:
    explicit Stopwatch(bool disabled) : disabled_(disabled), start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        if (disabled_) return 0.0;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    bool disabled_;
    std::chrono::steady_clock::time_point start_;
};

inline std::string eps_tag(std::size_t index) { return "eps" + std::to_string(index); }

inline void ensure_dir(const RunContext &ctx) {
    if (!ctx.out_dir.empty()) std::filesystem::create_directories(ctx.out_dir);
}

inline void finish(ErrorTable &table, const RunContext &ctx, const std::string &name) {
    table.sort_rows();
    if (ctx.out_dir.empty()) return;
    ensure_dir(ctx);
    write_table(table, ctx.out_dir / (name + ".csv"));
    std::ofstream js(ctx.out_dir / (name + "_summary.json"));
    if (!js) throw Error(ErrorCode::ConfigError, "cannot write summary in " + ctx.out_dir.string());
    js << table.summary.dump(2) << '\n';
}

struct MethodOutput {
    WaveFunction psi;
    nlohmann::json diagnostics = nlohmann::json::object();
};

inline HkOptions hk_options(const RunConfig &c, const WaveFunction &psi0, const RunContext &ctx) {
    HkOptions o;
    o.dt = c.dt;
    o.threads = ctx.threads;
    o.grid = config_bundle_grid(c, psi0);
    return o;
}

inline MethodOutput run_method(const RunConfig &c, const HamiltonianModel &model, const std::string &method,
                               const WaveFunction &psi0, double t, const RunContext &ctx) {
    MethodOutput out;
    const WidthPair widths = config_widths(c);
    if (method == "identity") {
        const BundleGrid grid = config_bundle_grid(c, psi0);
        out.psi = identity_apply(psi0, widths, grid, ctx.threads);
        out.diagnostics["nodes"] = grid.size();
        out.diagnostics["boundary_fbi_mass"] = boundary_fbi_fraction(fbi_analyze(psi0, grid, widths.theta_y, ctx.threads));
    } else if (method == "hk" || method == "fga") {
        const HkResult r = propagate_hk(model, psi0, t, widths, method == "hk" ? Symbol::hk : Symbol::fga,
                                        hk_options(c, psi0, ctx));
        out.psi = r.psi;
        out.diagnostics["nodes"] = r.nodes;
        out.diagnostics["boundary_fbi_mass"] = r.boundary_fbi_mass;
        out.diagnostics["mass_leak"] = r.mass_leak;
        out.diagnostics["min_z_floor_ratio"] = r.min_z_floor_ratio;
        if (r.mass_leak)
            std::cerr << "warning: MassLeak, boundary FBI mass " << format_double(r.boundary_fbi_mass) << '\n';
    } else if (method == "tga") {
        if (c.state != "coherent") throw Error(ErrorCode::ConfigError, "tga needs a coherent initial state");
        if (c.theta_x != cplx{1.0} || c.theta_y != cplx{1.0})
            throw Error(ErrorCode::ConfigError, "tga supports identity widths only");
        const TgaResult r = propagate_tga(model, c.q0, c.p0, psi0.eps, t, c.dt, psi0.grid);
        out.psi = r.psi;
        out.diagnostics["width"] = {r.width.real(), r.width.imag()};
    } else if (method == "reference") {
        out.psi = split_step_propagate(model, psi0, t, config_domain(c, psi0.eps));
    } else {
        throw Error(ErrorCode::ConfigError, "unknown method '" + method + "'");
    }
    return out;
}

struct Prepared {
    SpectralDomain domain;
    WaveFunction psi0;
};

inline Prepared prepare(const RunConfig &c, double eps) {
    Prepared p;
    p.domain = config_domain(c, eps);
    p.psi0 = initial_state(c, eps, p.domain.grid());
    return p;
}

// Adds one row per method for a single eps, each compared with the reference.
inline void measure(const RunConfig &c, const HamiltonianModel &model, const std::vector<std::string> &methods,
                    std::size_t eps_index, const RunContext &ctx, ErrorTable &table, nlohmann::json &diag) {
    const double eps = c.eps[eps_index];
    const double t = run_time(c, eps);
    const Prepared prep = prepare(c, eps);
    const double n0 = l2_norm(prep.psi0);

    const WaveFunction truth = split_step_propagate(model, prep.psi0, t, prep.domain);
    for (const auto &m : methods) {
        const Stopwatch watch(ctx.deterministic);
        const MethodOutput out = run_method(c, model, m, prep.psi0, t, ctx);
        const double wall = watch.seconds();
        table.rows.push_back({eps, t, m, l2_error(out.psi, truth) / n0, std::abs(l2_norm(out.psi) - n0) / n0, wall,
                              config_hash(c)});
        nlohmann::json d = out.diagnostics;
        d["eps"] = eps;
        d["t"] = t;
        d["method"] = m;
        diag.push_back(d);
        if (!ctx.out_dir.empty()) {
            ensure_dir(ctx);
            write_wavefunction(out.psi, ctx.out_dir / ("psi_" + m + "_" + eps_tag(eps_index)));
        }
    }
}

} // namespace detail

/// Analysis followed by synthesis with the identity flow.
inline ErrorTable run_identity(const RunConfig &c, const RunContext &ctx = {}) {
    ErrorTable table;
    nlohmann::json diag = nlohmann::json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        const double eps = c.eps[i];
        const detail::Prepared prep = detail::prepare(c, eps);
        const double n0 = l2_norm(prep.psi0);
        const detail::Stopwatch watch(ctx.deterministic);
        const detail::MethodOutput out = detail::run_method(c, builtin(c.model, 1), "identity", prep.psi0, 0.0, ctx);
        const double wall = watch.seconds();
        table.rows.push_back({eps, 0.0, "identity", l2_error(out.psi, prep.psi0) / n0,
                              std::abs(l2_norm(out.psi) - n0) / n0, wall, config_hash(c)});
        nlohmann::json d = out.diagnostics;
        d["eps"] = eps;
        diag.push_back(d);
        if (c.dump && !ctx.out_dir.empty()) {
            detail::ensure_dir(ctx);
            const BundleGrid grid = config_bundle_grid(c, prep.psi0);
            write_fbi_field(fbi_analyze(prep.psi0, grid, config_widths(c).theta_y, ctx.threads),
                            ctx.out_dir / ("fbi_" + detail::eps_tag(i) + ".csv"));
        }
    }
    table.summary["command"] = "identity";
    table.summary["config_hash"] = config_hash(c);
    table.summary["runs"] = diag;
    detail::finish(table, ctx, "identity");
    return table;
}

/// The configured method at every eps, compared with the reference.
inline ErrorTable run_propagate(const RunConfig &c, const RunContext &ctx = {}) {
    const HamiltonianModel model = builtin(c.model, 1);
    ErrorTable table;
    nlohmann::json diag = nlohmann::json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        detail::measure(c, model, {c.method}, i, ctx, table, diag);
        if (c.dump && !ctx.out_dir.empty() && (c.method == "hk" || c.method == "fga")) {
            const detail::Prepared prep = detail::prepare(c, c.eps[i]);
            const BundleGrid grid = config_bundle_grid(c, prep.psi0);
            BundleOptions bopt;
            bopt.threads = ctx.threads;
            bopt.flow.record_stride = std::max(1, static_cast<int>(std::lround(0.01 / c.dt)));
            write_records(evolve_bundle(model, grid, run_time(c, c.eps[i]), c.dt, bopt),
                          ctx.out_dir / ("flow_" + detail::eps_tag(i) + ".csv"));
        }
    }
    table.summary["command"] = "propagate";
    table.summary["config_hash"] = config_hash(c);
    table.summary["runs"] = diag;
    detail::finish(table, ctx, "propagate");
    return table;
}

/// Error classification of an eps sweep.
struct ConvergenceReport {
    double slope = 0.0;
    double norm_defect_slope = 0.0;
    std::vector<double> ratios; // err(eps_k) / err(eps_{k+1})
    std::string regime;         // "exact regime", "convergent" or "non-convergent"
};

inline ConvergenceReport classify_sweep(const std::vector<double> &eps, const std::vector<double> &err,
                                        const std::vector<double> &norm_defect) {
    ConvergenceReport r;
    r.slope = loglog_slope(eps, err);
    r.norm_defect_slope = loglog_slope(eps, norm_defect);
    for (std::size_t k = 0; k + 1 < err.size(); ++k) r.ratios.push_back(err[k] / err[k + 1]);
    if (*std::max_element(err.begin(), err.end()) <= 1e-4) r.regime = "exact regime";
    else if (r.ratios.back() <= 1.3) r.regime = "non-convergent";
    else r.regime = "convergent";
    return r;
}

/// eps sweep of the configured method with a fitted log-log slope row.
inline ErrorTable run_converge(const RunConfig &c, const RunContext &ctx = {}) {
    if (c.eps.size() < 3) throw Error(ErrorCode::ConfigError, "converge needs at least three eps values");
    for (std::size_t k = 0; k + 1 < c.eps.size(); ++k)
        if (std::abs(c.eps[k + 1] - 0.5 * c.eps[k]) > 1e-9 * c.eps[k])
            throw Error(ErrorCode::ConfigError, "each eps must halve the previous one");
    if (c.method == "identity" || c.method == "reference")
        throw Error(ErrorCode::ConfigError, "converge compares hk, fga or tga against the reference");

    const HamiltonianModel model = builtin(c.model, 1);
    ErrorTable table;
    nlohmann::json diag = nlohmann::json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) detail::measure(c, model, {c.method}, i, ctx, table, diag);

    std::vector<double> err, nd;
    for (const auto &r : table.rows) {
        err.push_back(r.l2_error);
        nd.push_back(std::max(r.norm_defect, 1e-300));
    }
    const ConvergenceReport rep = classify_sweep(c.eps, err, nd);
    ErrorRow slope_row;
    slope_row.slope_row = true;
    slope_row.t = c.ehrenfest_c ? 0.0 : c.t_final;
    slope_row.method = c.method;
    slope_row.l2_error = rep.slope;
    slope_row.norm_defect = rep.norm_defect_slope;
    slope_row.config_hash = config_hash(c);
    table.rows.push_back(slope_row);

    table.summary["command"] = "converge";
    table.summary["config_hash"] = config_hash(c);
    table.summary["method"] = c.method;
    table.summary["slope"] = rep.slope;
    table.summary["norm_defect_slope"] = rep.norm_defect_slope;
    table.summary["ratios"] = rep.ratios;
    table.summary["regime"] = rep.regime;
    if (c.ehrenfest_c) table.summary["ehrenfest_c"] = *c.ehrenfest_c;
    table.summary["runs"] = diag;
    std::cout << c.method << ": slope " << format_double(rep.slope) << " (" << rep.regime << ")\n";
    detail::finish(table, ctx, "converge");
    return table;
}

/// hk, fga and tga side by side at every eps.
inline ErrorTable run_compare(const RunConfig &c, const RunContext &ctx = {}) {
    if (c.state != "coherent") throw Error(ErrorCode::ConfigError, "compare needs a coherent initial state");
    const HamiltonianModel model = builtin(c.model, 1);
    ErrorTable table;
    nlohmann::json diag = nlohmann::json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) detail::measure(c, model, {"hk", "fga", "tga"}, i, ctx, table, diag);
    table.summary["command"] = "compare";
    table.summary["config_hash"] = config_hash(c);
    table.summary["runs"] = diag;
    detail::finish(table, ctx, "compare");
    return table;
}

/// Reference solutions. The error column is the change when dt_ref is halved.
inline ErrorTable run_reference(const RunConfig &c, const RunContext &ctx = {}) {
    const HamiltonianModel model = builtin(c.model, 1);
    ErrorTable table;
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        const double eps = c.eps[i];
        const double t = run_time(c, eps);
        const detail::Prepared prep = detail::prepare(c, eps);
        const double n0 = l2_norm(prep.psi0);
        const detail::Stopwatch watch(ctx.deterministic);
        const WaveFunction coarse = split_step_propagate(model, prep.psi0, t, prep.domain);
        const double wall = watch.seconds();
        SpectralDomain fine_dom = prep.domain;
        fine_dom.dt *= 0.5;
        const WaveFunction fine = split_step_propagate(model, prep.psi0, t, fine_dom);
        table.rows.push_back({eps, t, "reference", l2_error(coarse, fine) / n0, std::abs(l2_norm(coarse) - n0) / n0,
                              wall, config_hash(c)});
        if (!ctx.out_dir.empty()) {
            detail::ensure_dir(ctx);
            write_wavefunction(coarse, ctx.out_dir / ("psi_reference_" + detail::eps_tag(i)));
        }
    }
    table.summary["command"] = "reference";
    table.summary["config_hash"] = config_hash(c);
    detail::finish(table, ctx, "reference");
    return table;
}

} // namespace hkprop
