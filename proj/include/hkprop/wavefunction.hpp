#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "complex_matrix.hpp"
#include "errors.hpp"
#include "fft.hpp"

namespace hkprop {

/// Uniform nodes x_i = x_min + i * dx, i = 0 .. n-1, with x_{n-1} = x_max.
struct SpatialGrid {
    double x_min = -1.0;
    double x_max = 1.0;
    int n = 2;

    double dx() const { return (x_max - x_min) / (n - 1); }
    double x(int i) const { return x_min + dx() * i; }
    double weight(int i) const { return (i == 0 || i == n - 1) ? 0.5 * dx() : dx(); }

    bool same_as(const SpatialGrid &o) const {
        const double tol = 1e-12 * std::max({1.0, std::abs(x_min), std::abs(x_max)});
        return n == o.n && std::abs(x_min - o.x_min) <= tol && std::abs(x_max - o.x_max) <= tol;
    }

    /// Nodes of the periodic box [-L, L) with n points (the endpoint L is the
    /// image of -L and is not stored).
    static SpatialGrid periodic(double L, int n) { return {-L, L - 2.0 * L / n, n}; }
};

struct WaveFunction {
    SpatialGrid grid;
    double eps = 1.0;
    std::vector<cplx> values;

    static WaveFunction zeros(const SpatialGrid &g, double eps) { return {g, eps, std::vector<cplx>(g.n)}; }

    int size() const { return grid.n; }

    void validate() const {
        if (grid.n < 2 || !(grid.x_max > grid.x_min))
            throw Error(ErrorCode::BadShape, "wavefunction grid needs n >= 2 and x_max > x_min");
        if (values.size() != static_cast<std::size_t>(grid.n))
            throw Error(ErrorCode::BadShape, "wavefunction sample count differs from grid size");
        if (!(eps > 0)) throw Error(ErrorCode::ConfigError, "eps must be positive");
        for (const auto &v : values)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw Error(ErrorCode::NonFiniteState, "wavefunction has non-finite samples");
    }
};

inline double l2_norm(const WaveFunction &psi) {
    double s = 0.0;
    for (int i = 0; i < psi.size(); ++i) s += psi.grid.weight(i) * std::norm(psi.values[i]);
    return std::sqrt(s);
}

/// <a, b> = integral of conj(a) b.
inline cplx inner_product(const WaveFunction &a, const WaveFunction &b) {
    if (!a.grid.same_as(b.grid)) throw Error(ErrorCode::GridMismatch, "inner product of different grids");
    cplx s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a.grid.weight(i) * std::conj(a.values[i]) * b.values[i];
    return s;
}

inline double l2_error(const WaveFunction &a, const WaveFunction &b) {
    if (!a.grid.same_as(b.grid)) throw Error(ErrorCode::GridMismatch, "l2_error of different grids");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a.grid.weight(i) * std::norm(a.values[i] - b.values[i]);
    return std::sqrt(s);
}

/// Normalised Gaussian (pi eps)^{-1/4} (Re theta)^{1/4} exp(-theta (x-q)^2/2eps + i p (x-q)/eps).
inline WaveFunction coherent_state(double q, double p, double eps, cplx theta, const SpatialGrid &grid) {
    if (!(eps > 0)) throw Error(ErrorCode::ConfigError, "eps must be positive");
    if (!(theta.real() > 0)) throw Error(ErrorCode::RealPartNotPD, "coherent state width needs Re theta > 0");
    const double margin = 6.0 * std::sqrt(eps);
    if (q - margin < grid.x_min || q + margin > grid.x_max)
        throw Error(ErrorCode::BoxTooSmall, "box does not contain the centre with a 6 sqrt(eps) margin");
    const double norm = std::pow(std::numbers::pi * eps, -0.25) * std::pow(theta.real(), 0.25);
    WaveFunction psi = WaveFunction::zeros(grid, eps);
    for (int i = 0; i < grid.n; ++i) {
        const double y = grid.x(i) - q;
        psi.values[i] = norm * std::exp(-theta * (y * y) / (2.0 * eps) + kI * (p * y / eps));
    }
    return psi;
}

inline WaveFunction coherent_state(double q, double p, double eps, const SpatialGrid &grid) {
    return coherent_state(q, p, eps, cplx{1.0, 0.0}, grid);
}

struct Observables {
    double norm = 0.0;
    double mean_x = 0.0;
    double mean_p = 0.0;
    double var_x = 0.0;
    double var_p = 0.0;
};

/// Norm, <x> and <p> with p = -i eps d/dx evaluated spectrally on the
/// zero-padded samples. Zero states report zero moments.
inline Observables observables(const WaveFunction &psi) {
    Observables o;
    double mass = 0.0, mx = 0.0, mxx = 0.0;
    for (int i = 0; i < psi.size(); ++i) {
        const double w = psi.grid.weight(i) * std::norm(psi.values[i]);
        const double x = psi.grid.x(i);
        mass += w;
        mx += w * x;
        mxx += w * x * x;
    }
    o.norm = std::sqrt(mass);
    if (mass == 0.0) return o;
    o.mean_x = mx / mass;
    o.var_x = std::max(0.0, mxx / mass - o.mean_x * o.mean_x);

    std::size_t m = 1;
    while (m < static_cast<std::size_t>(psi.size())) m <<= 1;
    std::vector<cplx> buf(m, cplx{});
    std::copy(psi.values.begin(), psi.values.end(), buf.begin());
    fft_inplace(buf);
    const double dx = psi.grid.dx();
    const double dk = 2.0 * std::numbers::pi / (static_cast<double>(m) * dx);
    for (std::size_t j = 0; j < m; ++j) {
        double k = 0.0;
        if (j < m / 2) k = dk * static_cast<double>(j);
        else if (j > m / 2) k = -dk * static_cast<double>(m - j);
        buf[j] *= kI * k;
    }
    fft_inplace(buf, true);
    cplx mp = 0.0;
    double mpp = 0.0;
    for (int i = 0; i < psi.size(); ++i) {
        const cplx p_psi = -kI * psi.eps * buf[i];
        mp += psi.grid.weight(i) * std::conj(psi.values[i]) * p_psi;
        mpp += psi.grid.weight(i) * std::norm(p_psi);
    }
    o.mean_p = mp.real() / mass;
    o.var_p = std::max(0.0, mpp / mass - o.mean_p * o.mean_p);
    return o;
}

// ---------------------------------------------------------------------------
// File format: <stem>.csv with header "x,re,im" plus a <stem>.json sidecar
// holding {x_min, x_max, n_x, eps}.

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_wavefunction(const WaveFunction &psi, const std::filesystem::path &stem) {
    std::filesystem::path csv = stem, side = stem;
    csv += ".csv";
    side += ".json";
    std::ofstream out(csv);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + csv.string());
    out << "x,re,im\n";
    for (int i = 0; i < psi.size(); ++i)
        out << format_double(psi.grid.x(i)) << ',' << format_double(psi.values[i].real()) << ','
            << format_double(psi.values[i].imag()) << '\n';
    nlohmann::json meta = {{"x_min", psi.grid.x_min}, {"x_max", psi.grid.x_max}, {"n_x", psi.grid.n}, {"eps", psi.eps}};
    std::ofstream js(side);
    if (!js) throw Error(ErrorCode::ConfigError, "cannot write " + side.string());
    js << meta.dump(2) << '\n';
}

inline WaveFunction read_wavefunction(const std::filesystem::path &stem) {
    std::filesystem::path csv = stem, side = stem;
    csv += ".csv";
    side += ".json";
    std::ifstream js(side);
    if (!js) throw Error(ErrorCode::ConfigError, "cannot read " + side.string());
    const nlohmann::json meta = nlohmann::json::parse(js);
    WaveFunction psi;
    psi.grid = {meta.at("x_min").get<double>(), meta.at("x_max").get<double>(), meta.at("n_x").get<int>()};
    psi.eps = meta.at("eps").get<double>();

    std::ifstream in(csv);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + csv.string());
    std::string line;
    std::getline(in, line);
    if (line != "x,re,im") throw Error(ErrorCode::ConfigError, "unexpected wavefunction header '" + line + "'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string xs, re, im;
        std::getline(ss, xs, ',');
        std::getline(ss, re, ',');
        std::getline(ss, im, ',');
        psi.values.emplace_back(std::stod(re), std::stod(im));
    }
    psi.validate();
    return psi;
}

} // namespace hkprop
