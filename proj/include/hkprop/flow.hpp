#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hamiltonian.hpp"
#include "parallel.hpp"

namespace hkprop {

/// One phase-space initial point evolved under h0, sampled on a time grid.
///
/// F follows the block layout (dX/dq, dX/dp; dXi/dq, dXi/dp) with rows indexing
/// output components, so F(0) = id and F(t)^T J F(t) = J.
struct TrajectoryRecord {
    Vec q0, p0;
    std::vector<double> times;
    std::vector<Vec> X, Xi;
    std::vector<double> S;
    std::vector<PhaseMat> F;
    std::vector<double> h1_phase; // accumulated integral of h1 along the path

    std::size_t size() const { return times.size(); }
    int dim() const { return static_cast<int>(q0.size()); }
};

inline PhaseMat symplectic_form(int d) {
    PhaseMat j = PhaseMat::Zero(2 * d, 2 * d);
    j.topRightCorner(d, d) = Mat::Identity(d, d);
    j.bottomLeftCorner(d, d) = -Mat::Identity(d, d);
    return j;
}

/// ||F^T J F - J||_F
template <class Derived>
double symplectic_defect(const Eigen::MatrixBase<Derived> &f) {
    if (f.rows() != f.cols() || f.rows() % 2 != 0 || f.rows() == 0)
        throw Error(ErrorCode::BadShape, "symplectic_defect needs a square matrix of even size");
    const int d = static_cast<int>(f.rows() / 2);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    j.topRightCorner(d, d).setIdentity();
    j.bottomLeftCorner(d, d) = -Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd fd = f.template cast<double>();
    return (fd.transpose() * j * fd - j).norm();
}

namespace detail {

struct FlowState {
    Vec x, xi;
    PhaseMat f;
    double s = 0.0;
    double phase = 0.0;
};

inline FlowState flow_rhs(const HamiltonianModel &model, double t, const FlowState &y) {
    const int d = model.dim;
    const PotentialValue pv = model.eval_potential(y.x);
    FlowState dy;
    dy.x = y.xi;
    dy.xi = -pv.gradient;
    // J * block-diag(Hess V, id) * F = (F_bottom ; -Hess V * F_top)
    dy.f.resize(2 * d, 2 * d);
    dy.f.topRows(d) = y.f.bottomRows(d);
    dy.f.bottomRows(d) = -pv.hessian * y.f.topRows(d);
    const double kinetic = 0.5 * y.xi.squaredNorm();
    dy.s = y.xi.squaredNorm() - (kinetic + pv.value);
    dy.phase = model.h1(t, y.x, y.xi);
    return dy;
}

inline FlowState axpy(const FlowState &y, double h, const FlowState &k) {
    FlowState r;
    r.x = y.x + h * k.x;
    r.xi = y.xi + h * k.xi;
    r.f = y.f + h * k.f;
    r.s = y.s + h * k.s;
    r.phase = y.phase + h * k.phase;
    return r;
}

inline void rk4_step(const HamiltonianModel &model, double t, double h, FlowState &y) {
    const FlowState k1 = flow_rhs(model, t, y);
    const FlowState k2 = flow_rhs(model, t + 0.5 * h, axpy(y, 0.5 * h, k1));
    const FlowState k3 = flow_rhs(model, t + 0.5 * h, axpy(y, 0.5 * h, k2));
    const FlowState k4 = flow_rhs(model, t + h, axpy(y, h, k3));
    const double w = h / 6.0;
    y.x += w * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    y.xi += w * (k1.xi + 2 * k2.xi + 2 * k3.xi + k4.xi);
    y.f += w * (k1.f + 2 * k2.f + 2 * k3.f + k4.f);
    y.s += w * (k1.s + 2 * k2.s + 2 * k3.s + k4.s);
    y.phase += w * (k1.phase + 2 * k2.phase + 2 * k3.phase + k4.phase);
}

inline bool finite(const FlowState &y) {
    return y.x.allFinite() && y.xi.allFinite() && y.f.allFinite() && std::isfinite(y.s) &&
           std::isfinite(y.phase);
}

} // namespace detail

struct FlowOptions {
    int record_stride = 1; // keep every n-th step (the final time is always kept)
};

/// Classical RK4 co-integration of (X, Xi, F, S, int h1) from (q0, p0).
/// Negative t_final integrates backwards. A t_final that is not a multiple of
/// dt ends with one shortened step.
inline TrajectoryRecord integrate_trajectory(const HamiltonianModel &model, const Vec &q0, const Vec &p0,
                                             double t_final, double dt, const FlowOptions &opt = {}) {
    const int d = model.dim;
    if (q0.size() != d || p0.size() != d) throw Error(ErrorCode::BadShape, "initial point dimension mismatch");
    if (!(dt > 0)) throw Error(ErrorCode::ConfigError, "dt must be positive");
    if (opt.record_stride < 1) throw Error(ErrorCode::ConfigError, "record_stride must be >= 1");

    const double span = std::abs(t_final);
    const double sign = t_final < 0 ? -1.0 : 1.0;
    const long n_steps = span == 0.0 ? 0 : static_cast<long>(std::ceil(span / dt - 1e-9));

    TrajectoryRecord rec;
    rec.q0 = q0;
    rec.p0 = p0;
    const std::size_t expected = static_cast<std::size_t>(n_steps / opt.record_stride + 2);
    rec.times.reserve(expected);
    rec.X.reserve(expected);
    rec.Xi.reserve(expected);
    rec.S.reserve(expected);
    rec.F.reserve(expected);
    rec.h1_phase.reserve(expected);

    detail::FlowState y;
    y.x = q0;
    y.xi = p0;
    y.f = PhaseMat::Identity(2 * d, 2 * d);

    auto push = [&](double t) {
        rec.times.push_back(t);
        rec.X.push_back(y.x);
        rec.Xi.push_back(y.xi);
        rec.S.push_back(y.s);
        rec.F.push_back(y.f);
        rec.h1_phase.push_back(y.phase);
    };
    push(0.0);

    for (long k = 0; k < n_steps; ++k) {
        const double t = sign * static_cast<double>(k) * dt;
        const double t_next = (k + 1 == n_steps) ? t_final : sign * static_cast<double>(k + 1) * dt;
        detail::rk4_step(model, t, t_next - t, y);
        if (!detail::finite(y))
            throw Error(ErrorCode::NonFiniteState, "trajectory diverged at t = " + std::to_string(t_next));
        if ((k + 1) % opt.record_stride == 0 || k + 1 == n_steps) push(t_next);
    }
    return rec;
}

struct UniformAxis {
    double start = 0.0;
    double step = 1.0;
    int n = 1;

    double point(int i) const { return start + step * i; }
    double last() const { return point(n - 1); }

    static UniformAxis from_range(double min, double max, int n) {
        if (n < 2 || !(max > min)) throw Error(ErrorCode::ConfigError, "axis needs n >= 2 and max > min");
        return {min, (max - min) / (n - 1), n};
    }
};

/// Tensor-product (q, p) quadrature grid. Nodes are ordered with q axes before
/// p axes and the last axis varying fastest.
struct BundleGrid {
    std::vector<UniformAxis> q, p;

    int dim() const { return static_cast<int>(q.size()); }

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto &a : q) n *= static_cast<std::size_t>(a.n);
        for (const auto &a : p) n *= static_cast<std::size_t>(a.n);
        return n;
    }

    double weight() const {
        double w = 1.0;
        for (const auto &a : q) w *= a.step;
        for (const auto &a : p) w *= a.step;
        return w;
    }

    void validate() const {
        if (q.empty() || q.size() != p.size() || q.size() > static_cast<std::size_t>(kMaxDim))
            throw Error(ErrorCode::BadShape, "bundle grid needs matching q and p axes");
        for (const auto *axes : {&q, &p})
            for (const auto &a : *axes)
                if (!(a.step > 0) || a.n < 1) throw Error(ErrorCode::ConfigError, "bundle axes need positive spacing");
    }

    /// Per-axis indices of a node, in (q..., p...) order.
    std::vector<int> indices(std::size_t node) const {
        const int d = dim();
        std::vector<int> idx(2 * d);
        for (int k = 2 * d - 1; k >= 0; --k) {
            const auto &ax = k < d ? q[k] : p[k - d];
            idx[k] = static_cast<int>(node % static_cast<std::size_t>(ax.n));
            node /= static_cast<std::size_t>(ax.n);
        }
        return idx;
    }

    void node(std::size_t i, Vec &qv, Vec &pv) const {
        const int d = dim();
        const auto idx = indices(i);
        qv.resize(d);
        pv.resize(d);
        for (int k = 0; k < d; ++k) {
            qv[k] = q[k].point(idx[k]);
            pv[k] = p[k].point(idx[d + k]);
        }
    }

    bool on_boundary(std::size_t i) const {
        const int d = dim();
        const auto idx = indices(i);
        for (int k = 0; k < 2 * d; ++k) {
            const auto &ax = k < d ? q[k] : p[k - d];
            if (ax.n > 1 && (idx[k] == 0 || idx[k] == ax.n - 1)) return true;
        }
        return false;
    }
};

struct BundleOptions {
    FlowOptions flow;
    unsigned threads = 1;
};

/// integrate_trajectory over every grid node; output order matches node order.
inline std::vector<TrajectoryRecord> evolve_bundle(const HamiltonianModel &model, const BundleGrid &grid,
                                                   double t_final, double dt, const BundleOptions &opt = {}) {
    grid.validate();
    if (grid.dim() != model.dim) throw Error(ErrorCode::BadShape, "grid and model dimension differ");
    std::vector<TrajectoryRecord> out(grid.size());
    parallel_for(out.size(), opt.threads, [&](std::size_t i) {
        Vec q, p;
        grid.node(i, q, p);
        try {
            out[i] = integrate_trajectory(model, q, p, t_final, dt, opt.flow);
        } catch (const Error &e) {
            throw Error(e.code(), "bundle node " + std::to_string(i) + ": " + e.what());
        }
    });
    return out;
}

} // namespace hkprop
