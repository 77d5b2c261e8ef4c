#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "errors.hpp"

namespace hkprop {

/// Largest configuration-space dimension supported by the flow types. Bounded
/// dynamic Eigen types keep the per-stage arithmetic free of heap traffic.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using PhaseVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2 * kMaxDim, 1>;
using PhaseMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2 * kMaxDim, 2 * kMaxDim>;

struct PotentialValue {
    double value = 0.0;
    Vec gradient;
    Mat hessian;
};

struct H0Value {
    double value = 0.0;
    PhaseVec gradient; // (grad_x, grad_xi)
    PhaseMat hessian;  // block-diag(Hess V, id)
};

/// h(t, x, xi) = |xi|^2 / 2 + V(x) + eps * h1(t, x, xi).
struct HamiltonianModel {
    int dim = 1;
    std::string name;
    std::function<void(const Vec &x, PotentialValue &out)> potential;
    // Empty means h1 == 0.
    std::function<double(double t, const Vec &x, const Vec &xi)> subprincipal;

    PotentialValue eval_potential(const Vec &x) const {
        PotentialValue out;
        out.gradient.resize(dim);
        out.hessian.resize(dim, dim);
        potential(x, out);
        return out;
    }

    double V(const Vec &x) const { return eval_potential(x).value; }

    double h0(const Vec &x, const Vec &xi) const { return 0.5 * xi.squaredNorm() + V(x); }

    double h1(double t, const Vec &x, const Vec &xi) const {
        return subprincipal ? subprincipal(t, x, xi) : 0.0;
    }

    bool has_subprincipal() const { return static_cast<bool>(subprincipal); }
};

inline H0Value eval_h0(const HamiltonianModel &model, const Vec &x, const Vec &xi) {
    const int d = model.dim;
    const PotentialValue pv = model.eval_potential(x);
    H0Value out;
    out.value = 0.5 * xi.squaredNorm() + pv.value;
    out.gradient.resize(2 * d);
    out.gradient.head(d) = pv.gradient;
    out.gradient.tail(d) = xi;
    out.hessian = PhaseMat::Zero(2 * d, 2 * d);
    out.hessian.topLeftCorner(d, d) = pv.hessian;
    out.hessian.bottomRightCorner(d, d) = Mat::Identity(d, d);
    return out;
}

struct ModelSpec {
    std::string name = "harmonic";
    double omega = 1.0;
    double a = 1.0;
    double A = 1.0;
    double sigma = 1.0;
    double h1_const = 0.0;
};

/// Built-in subquadratic potentials with analytic derivatives:
///   free           V = 0
///   harmonic       V = omega^2 |x|^2 / 2
///   torsional      V = a * sum_k (1 - cos x_k)
///   gaussian_well  V = -A exp(-|x|^2 / (2 sigma^2))
inline HamiltonianModel builtin(const ModelSpec &spec, int d) {
    if (d < 1 || d > kMaxDim)
        throw Error(ErrorCode::BadShape, "dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    HamiltonianModel m;
    m.dim = d;
    m.name = spec.name;
    if (spec.name == "free") {
        m.potential = [](const Vec &, PotentialValue &out) {
            out.value = 0.0;
            out.gradient.setZero();
            out.hessian.setZero();
        };
    } else if (spec.name == "harmonic") {
        if (!(spec.omega > 0)) throw Error(ErrorCode::ConfigError, "omega must be positive");
        const double w2 = spec.omega * spec.omega;
        m.potential = [w2](const Vec &x, PotentialValue &out) {
            out.value = 0.5 * w2 * x.squaredNorm();
            out.gradient = w2 * x;
            out.hessian = w2 * Mat::Identity(x.size(), x.size());
        };
    } else if (spec.name == "torsional") {
        if (!(spec.a > 0)) throw Error(ErrorCode::ConfigError, "a must be positive");
        const double a = spec.a;
        m.potential = [a](const Vec &x, PotentialValue &out) {
            out.value = 0.0;
            out.hessian.setZero();
            for (Eigen::Index k = 0; k < x.size(); ++k) {
                out.value += a * (1.0 - std::cos(x[k]));
                out.gradient[k] = a * std::sin(x[k]);
                out.hessian(k, k) = a * std::cos(x[k]);
            }
        };
    } else if (spec.name == "gaussian_well") {
        if (!(spec.A > 0) || !(spec.sigma > 0))
            throw Error(ErrorCode::ConfigError, "A and sigma must be positive");
        const double amp = spec.A, s2 = spec.sigma * spec.sigma;
        m.potential = [amp, s2](const Vec &x, PotentialValue &out) {
            const double g = -amp * std::exp(-0.5 * x.squaredNorm() / s2);
            out.value = g;
            out.gradient = -(g / s2) * x;
            const Eigen::Index n = x.size();
            out.hessian = (g / (s2 * s2)) * (x * x.transpose()) - (g / s2) * Mat::Identity(n, n);
        };
    } else {
        throw Error(ErrorCode::UnknownModel, "unknown potential '" + spec.name + "'");
    }
    if (spec.h1_const != 0.0) {
        const double c = spec.h1_const;
        m.subprincipal = [c](double, const Vec &, const Vec &) { return c; };
    }
    return m;
}

struct SubquadraticReport {
    double max_hessian_norm = 0.0;
    double max_third_deriv_norm = 0.0;
    Vec box_lo;
    Vec box_hi;
};

inline double symmetric_norm2(const Mat &m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Samples a uniform lattice over the box and reports the largest spectral
/// norm of Hess V and of its directional derivatives (central differences of
/// the analytic Hessian). Diagnostic only: sampling cannot bound a supremum.
inline SubquadraticReport subquadratic_probe(const HamiltonianModel &model, const Vec &lo, const Vec &hi,
                                             int n_samples) {
    const int d = model.dim;
    if (lo.size() != d || hi.size() != d)
        throw Error(ErrorCode::BadShape, "probe box dimension mismatch");
    SubquadraticReport rep;
    rep.box_lo = lo;
    rep.box_hi = hi;
    const int per_axis = std::max(2, static_cast<int>(std::ceil(std::pow(std::max(n_samples, 2), 1.0 / d))));
    long total = 1;
    for (int k = 0; k < d; ++k) total *= per_axis;

    constexpr double h = 1e-4;
    Vec x(d);
    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        for (int k = d - 1; k >= 0; --k) {
            const int i = static_cast<int>(rem % per_axis);
            rem /= per_axis;
            x[k] = lo[k] + (hi[k] - lo[k]) * i / (per_axis - 1);
        }
        const PotentialValue pv = model.eval_potential(x);
        rep.max_hessian_norm = std::max(rep.max_hessian_norm, symmetric_norm2(pv.hessian));
        for (int k = 0; k < d; ++k) {
            Vec xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const Mat dh = (model.eval_potential(xp).hessian - model.eval_potential(xm).hessian) / (2 * h);
            rep.max_third_deriv_norm = std::max(rep.max_third_deriv_norm, symmetric_norm2(dh));
        }
    }
    return rep;
}

} // namespace hkprop
