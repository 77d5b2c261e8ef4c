#pragma once

// Fourier integral operators with complex phase acting on one-dimensional
// wavefunctions. The triple (q, p, y) integral is evaluated in two stages:
//
//   analysis   c(q,p) = sum_y w_y N_y exp(-Ty (y-q)^2/2eps - i p (y-q)/eps) psi(y)
//   synthesis  out(x) = C w_qp sum_(q,p) u e^{iS/eps} c(q,p)
//                        N_x exp(-Tx (x-X)^2/2eps + i Xi (x-X)/eps)
//
// with N = (pi eps)^{-1/4} (Re T)^{1/4} and C = (2 pi eps)^{-1} 2^{-1/2}
// (Re Tx Re Ty)^{-1/4}, which is exactly the (2 pi eps)^{-3/2} kernel constant
// once the two Gaussian normalisations are pulled out.

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <vector>

#include "complex_matrix.hpp"
#include "flow.hpp"
#include "hk_symbol.hpp"
#include "parallel.hpp"
#include "wavefunction.hpp"

namespace hkprop {

/// exp(-kGaussianCut) is the relative size below which Gaussian tails are dropped.
inline constexpr double kGaussianCut = 45.0;

inline double gaussian_window(double eps, double re_theta) { return std::sqrt(2.0 * kGaussianCut * eps / re_theta); }

inline double gaussian_normalisation(double eps, double re_theta) {
    return std::pow(std::numbers::pi * eps, -0.25) * std::pow(re_theta, 0.25);
}

struct FbiField {
    BundleGrid grid;
    double eps = 1.0;
    ConeMatrix theta_y = ConeMatrix::identity(1);
    std::vector<cplx> coeffs;
};

/// Phase-space point reached by one bundle trajectory at the synthesis time.
struct PhasePoint {
    double X = 0.0;
    double Xi = 0.0;
    double S = 0.0;
};

inline PhasePoint snapshot(const TrajectoryRecord &rec, std::size_t k) {
    return {rec.X[k][0], rec.Xi[k][0], rec.S[k]};
}

namespace detail {

inline void require_1d(const BundleGrid &grid) {
    grid.validate();
    if (grid.dim() != 1) throw Error(ErrorCode::BadShape, "wavefunction operators are one-dimensional");
}

inline std::pair<int, int> window_indices(const SpatialGrid &g, double centre, double radius) {
    const double dx = g.dx();
    const int lo = std::max(0, static_cast<int>(std::ceil((centre - radius - g.x_min) / dx)));
    const int hi = std::min(g.n - 1, static_cast<int>(std::floor((centre + radius - g.x_min) / dx)));
    return {lo, hi};
}

} // namespace detail

inline FbiField fbi_analyze(const WaveFunction &psi, const BundleGrid &grid, const ConeMatrix &theta_y,
                            unsigned threads = 1) {
    detail::require_1d(grid);
    psi.validate();
    if (theta_y.dim() != 1) throw Error(ErrorCode::BadShape, "theta_y must be 1x1");
    const auto &qa = grid.q[0];
    const double tol = 1e-9 * psi.grid.dx();
    if (qa.start < psi.grid.x_min - tol || qa.last() > psi.grid.x_max + tol)
        throw Error(ErrorCode::GridMismatch, "phase-space q-range exceeds the wavefunction box");

    const double eps = psi.eps;
    const cplx ty = theta_y.matrix()(0, 0);
    const double radius = gaussian_window(eps, ty.real());
    const double norm = gaussian_normalisation(eps, ty.real());

    FbiField field{grid, eps, theta_y, std::vector<cplx>(grid.size())};
    parallel_for(grid.size(), threads, [&](std::size_t node) {
        Vec q, p;
        grid.node(node, q, p);
        const auto [lo, hi] = detail::window_indices(psi.grid, q[0], radius);
        cplx acc = 0.0;
        for (int i = lo; i <= hi; ++i) {
            const double y = psi.grid.x(i) - q[0];
            acc += psi.grid.weight(i) * std::exp(-ty * (y * y / (2.0 * eps)) - kI * (p[0] * y / eps)) * psi.values[i];
        }
        field.coeffs[node] = norm * acc;
    });
    return field;
}

/// Share of |c|^2 carried by the outermost ring of grid nodes.
inline double boundary_fbi_fraction(const FbiField &field) {
    double edge = 0.0, total = 0.0;
    for (std::size_t i = 0; i < field.coeffs.size(); ++i) {
        const double m = std::norm(field.coeffs[i]);
        total += m;
        if (field.grid.on_boundary(i)) edge += m;
    }
    return total > 0 ? edge / total : 0.0;
}

inline WaveFunction fio_synthesize(const FbiField &field, const std::vector<PhasePoint> &points,
                                   const std::vector<cplx> &u, const ConeMatrix &theta_x, const SpatialGrid &out_grid,
                                   unsigned threads = 1) {
    detail::require_1d(field.grid);
    if (points.size() != field.coeffs.size() || u.size() != field.coeffs.size())
        throw Error(ErrorCode::GridMismatch, "trajectory count differs from the FBI grid");
    if (theta_x.dim() != 1) throw Error(ErrorCode::BadShape, "theta_x must be 1x1");

    const double eps = field.eps;
    const cplx tx = theta_x.matrix()(0, 0);
    const double re_ty = field.theta_y.matrix()(0, 0).real();
    const double constant = field.grid.weight() / (2.0 * std::numbers::pi * eps) / std::sqrt(2.0) *
                            std::pow(tx.real() * re_ty, -0.25) * gaussian_normalisation(eps, tx.real());
    const double radius = gaussian_window(eps, tx.real());

    const std::size_t n_nodes = points.size();
    std::vector<cplx> amp(n_nodes);
    std::vector<int> lo(n_nodes), hi(n_nodes);
    for (std::size_t k = 0; k < n_nodes; ++k) {
        amp[k] = constant * u[k] * field.coeffs[k] * std::polar(1.0, points[k].S / eps);
        std::tie(lo[k], hi[k]) = detail::window_indices(out_grid, points[k].X, radius);
    }

    // Output chunks own disjoint x ranges and sum nodes in grid order, so the
    // result does not depend on the number of threads.
    constexpr int kChunk = 128;
    const int n_chunks = (out_grid.n + kChunk - 1) / kChunk;
    WaveFunction out = WaveFunction::zeros(out_grid, eps);
    parallel_for(static_cast<std::size_t>(n_chunks), threads, [&](std::size_t c) {
        const int c_lo = static_cast<int>(c) * kChunk;
        const int c_hi = std::min(out_grid.n - 1, c_lo + kChunk - 1);
        for (std::size_t k = 0; k < n_nodes; ++k) {
            if (amp[k] == cplx{} ) continue;
            const int a = std::max(lo[k], c_lo), b = std::min(hi[k], c_hi);
            const PhasePoint &pt = points[k];
            for (int i = a; i <= b; ++i) {
                const double y = out_grid.x(i) - pt.X;
                out.values[i] += amp[k] * std::exp(-tx * (y * y / (2.0 * eps)) + kI * (pt.Xi * y / eps));
            }
        }
    });
    return out;
}

inline std::vector<PhasePoint> identity_points(const BundleGrid &grid) {
    std::vector<PhasePoint> pts(grid.size());
    Vec q, p;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        grid.node(i, q, p);
        pts[i] = {q[0], p[0], 0.0};
    }
    return pts;
}

/// The operator with kappa = id and u = det(Theta_x + Theta_y)^{1/2}; reproduces psi up to quadrature error.
inline WaveFunction identity_apply(const WaveFunction &psi, const WidthPair &widths, const BundleGrid &grid,
                                   unsigned threads = 1) {
    const FbiField field = fbi_analyze(psi, grid, widths.theta_y, threads);
    const std::vector<cplx> u(grid.size(), prefactor_seed(widths));
    return fio_synthesize(field, identity_points(grid), u, widths.theta_x, psi.grid, threads);
}

struct AutoGridOptions {
    double spacing = 0.5;      // node spacing in units of sqrt(eps)
    double extent_sigmas = 9.0; // half-width in Husimi standard deviations
};

/// Rectangle centred on the Husimi mean of psi (for FBI width theta_y) that
/// spans extent_sigmas standard deviations per axis, clipped to the box.
inline BundleGrid auto_bundle_grid(const WaveFunction &psi, double re_theta_y = 1.0, const AutoGridOptions &opt = {}) {
    const Observables o = observables(psi);
    const double eps = psi.eps;
    const double h = opt.spacing * std::sqrt(eps);
    const double sq = std::sqrt(o.var_x + eps / (2.0 * re_theta_y));
    const double sp = std::sqrt(o.var_p + eps * re_theta_y / 2.0);
    auto axis = [&](double mean, double sigma, double lo_clip, double hi_clip) {
        const int half = static_cast<int>(std::ceil(opt.extent_sigmas * sigma / h));
        int i0 = -half, i1 = half;
        while (mean + i0 * h < lo_clip) ++i0;
        while (mean + i1 * h > hi_clip) --i1;
        if (i1 <= i0) throw Error(ErrorCode::BoxTooSmall, "phase-space grid collapsed after clipping to the box");
        return UniformAxis{mean + i0 * h, h, i1 - i0 + 1};
    };
    const double inf = std::numeric_limits<double>::infinity();
    BundleGrid g;
    g.q.push_back(axis(o.mean_x, sq, psi.grid.x_min, psi.grid.x_max));
    g.p.push_back(axis(o.mean_p, sp, -inf, inf));
    return g;
}

enum class Symbol { hk, fga };

struct HkOptions {
    double dt = 1e-3;
    double record_dt = 0.01; // sampling interval kept in the trajectory records
    unsigned threads = 1;
    std::optional<BundleGrid> grid; // automatic when empty
    AutoGridOptions auto_grid;
    double mass_leak_threshold = 1e-6;
    Tolerances tol;
};

struct HkResult {
    WaveFunction psi;
    double boundary_fbi_mass = 0.0;
    bool mass_leak = false;
    double min_z_floor_ratio = std::numeric_limits<double>::infinity();
    std::size_t nodes = 0;
};

/// Herman-Kluk (or frozen-Gaussian) approximation of exp(-i H t / eps) psi0,
/// sampled on psi0's grid: analysis, bundle flow, prefactor, synthesis.
inline HkResult propagate_hk(const HamiltonianModel &model, const WaveFunction &psi0, double t_final,
                             const WidthPair &widths, Symbol symbol, const HkOptions &opt = {}) {
    if (model.dim != 1 || widths.dim() != 1) throw Error(ErrorCode::BadShape, "propagate_hk is one-dimensional");
    const BundleGrid grid = opt.grid ? *opt.grid : auto_bundle_grid(psi0, widths.theta_y.real()(0, 0), opt.auto_grid);
    const FbiField field = fbi_analyze(psi0, grid, widths.theta_y, opt.threads);

    HkResult res;
    res.nodes = grid.size();
    res.boundary_fbi_mass = boundary_fbi_fraction(field);
    res.mass_leak = res.boundary_fbi_mass > opt.mass_leak_threshold;

    BundleOptions bopt;
    bopt.threads = opt.threads;
    bopt.flow.record_stride = std::max(1, static_cast<int>(std::lround(opt.record_dt / opt.dt)));
    const auto records = evolve_bundle(model, grid, t_final, opt.dt, bopt);

    const cplx frozen = fga_symbol(widths, opt.tol);
    std::vector<PhasePoint> pts(records.size());
    std::vector<cplx> u(records.size());
    std::vector<double> floor_ratio(records.size(), std::numeric_limits<double>::infinity());
    parallel_for(records.size(), opt.threads, [&](std::size_t i) {
        const auto &rec = records[i];
        for (const auto &f : rec.F) floor_ratio[i] = std::min(floor_ratio[i], z_floor_ratio(zmatrix(f, widths), widths));
        pts[i] = snapshot(rec, rec.size() - 1);
        u[i] = symbol == Symbol::hk ? hk_prefactor_closed(rec, widths, opt.tol).u0.back() : frozen;
    });
    for (double r : floor_ratio) res.min_z_floor_ratio = std::min(res.min_z_floor_ratio, r);
    res.psi = fio_synthesize(field, pts, u, widths.theta_x, psi0.grid, opt.threads);
    return res;
}

/// ||HK(t1 + t2) psi - HK(t2) HK(t1) psi|| / ||psi||. The second stage always
/// uses an automatic grid around the intermediate state.
inline double group_defect(const HamiltonianModel &model, const WaveFunction &psi0, double t1, double t2,
                           const WidthPair &widths, const HkOptions &opt = {}) {
    const WaveFunction direct = propagate_hk(model, psi0, t1 + t2, widths, Symbol::hk, opt).psi;
    const WaveFunction half = propagate_hk(model, psi0, t1, widths, Symbol::hk, opt).psi;
    HkOptions second = opt;
    second.grid.reset();
    const WaveFunction composed = propagate_hk(model, half, t2, widths, Symbol::hk, second).psi;
    return l2_error(direct, composed) / l2_norm(psi0);
}

struct TgaResult {
    WaveFunction psi;
    cplx width;       // Theta at t_final
    cplx frame_root;  // branch-tracked det(dX/dq + i dX/dp)^{1/2}
    PhasePoint centre;
};

/// Thawed Gaussian: a single trajectory carrying the coherent state g_(q,p)
/// with its width and amplitude updated from the flow Jacobian.
inline TgaResult propagate_tga(const HamiltonianModel &model, double q, double p, double eps, double t_final,
                               double dt, const SpatialGrid &grid, const Tolerances &tol = {}) {
    if (model.dim != 1) throw Error(ErrorCode::BadShape, "propagate_tga is one-dimensional");
    if (!(eps > 0)) throw Error(ErrorCode::ConfigError, "eps must be positive");
    Vec q0(1), p0(1);
    q0 << q;
    p0 << p;
    const TrajectoryRecord rec = integrate_trajectory(model, q0, p0, t_final, dt);
    BranchState state = branch_sqrt_init(tga_frame_det(rec.F.front()), 1.0, tol);
    for (const auto &f : rec.F) state = branch_sqrt_step(state, tga_frame_det(f), tol).first;

    TgaResult res;
    res.width = tga_width(rec.F.back()).matrix()(0, 0);
    res.frame_root = state.current_value;
    res.centre = snapshot(rec, rec.size() - 1);
    res.psi = WaveFunction::zeros(grid, eps);
    const cplx amp = std::pow(std::numbers::pi * eps, -0.25) / res.frame_root * std::polar(1.0, res.centre.S / eps);
    for (int i = 0; i < grid.n; ++i) {
        const double y = grid.x(i) - res.centre.X;
        res.psi.values[i] = amp * std::exp(-res.width * (y * y / (2.0 * eps)) + kI * (res.centre.Xi * y / eps));
    }
    return res;
}

/// FBI coefficients as CSV "q,p,re,im".
inline void write_fbi_field(const FbiField &field, const std::filesystem::path &path) {
    detail::require_1d(field.grid);
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
    out << "q,p,re,im\n";
    Vec q, p;
    for (std::size_t i = 0; i < field.coeffs.size(); ++i) {
        field.grid.node(i, q, p);
        out << format_double(q[0]) << ',' << format_double(p[0]) << ',' << format_double(field.coeffs[i].real())
            << ',' << format_double(field.coeffs[i].imag()) << '\n';
    }
}

/// Trajectory samples as CSV "q0,p0,t,X,Xi,S,F11,F12,F21,F22" (d = 1).
inline void write_records(const std::vector<TrajectoryRecord> &records, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
    out << "q0,p0,t,X,Xi,S,F11,F12,F21,F22\n";
    for (const auto &r : records) {
        if (r.dim() != 1) throw Error(ErrorCode::BadShape, "record dump supports d = 1 only");
        for (std::size_t k = 0; k < r.size(); ++k) {
            const auto &f = r.F[k];
            out << format_double(r.q0[0]) << ',' << format_double(r.p0[0]) << ',' << format_double(r.times[k]) << ','
                << format_double(r.X[k][0]) << ',' << format_double(r.Xi[k][0]) << ',' << format_double(r.S[k]) << ','
                << format_double(f(0, 0)) << ',' << format_double(f(0, 1)) << ',' << format_double(f(1, 0)) << ','
                << format_double(f(1, 1)) << '\n';
        }
    }
}

} // namespace hkprop
