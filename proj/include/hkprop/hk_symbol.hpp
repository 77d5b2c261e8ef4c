#pragma once

// Leading-order Herman-Kluk symbol: the Z matrix built from the flow Jacobian,
// the prefactor u0 (branch-tracked closed form and its ODE), the constant
// frozen-Gaussian symbol and the thawed-Gaussian width.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/LU>

#include "complex_matrix.hpp"
#include "flow.hpp"

namespace hkprop {

struct WidthPair {
    ConeMatrix theta_x;
    ConeMatrix theta_y;

    static WidthPair identity(int d) { return {ConeMatrix::identity(d), ConeMatrix::identity(d)}; }
    int dim() const { return static_cast<int>(theta_x.dim()); }
};

inline WidthPair make_widths(const CMatrix &theta_x, const CMatrix &theta_y) {
    if (theta_x.rows() != theta_y.rows()) throw Error(ErrorCode::BadShape, "width matrices differ in size");
    return {cone_check(theta_x), cone_check(theta_y)};
}

/// Z = (i Theta_y^{-1}  id) F^T (-i Theta_x  id)^T. The map is linear in F, so
/// the same product applied to dF/dt yields dZ/dt.
template <class Derived>
CMatrix zmatrix(const Eigen::MatrixBase<Derived> &f, const WidthPair &w) {
    const Eigen::Index d = w.theta_x.dim();
    if (f.rows() != 2 * d || f.cols() != 2 * d) throw Error(ErrorCode::BadShape, "Jacobian must be 2d x 2d");
    const CMatrix &tx = w.theta_x.matrix();
    const CMatrix ty_inv = w.theta_y.matrix().inverse();
    CMatrix left(d, 2 * d);
    left << kI * ty_inv, CMatrix::Identity(d, d);
    CMatrix right(2 * d, d);
    right << -kI * tx, CMatrix::Identity(d, d);
    const CMatrix ft = f.transpose().template cast<cplx>();
    return left * ft * right;
}

template <class D1, class D2>
CMatrix zmatrix_dot(const Eigen::MatrixBase<D1> &f, const Eigen::MatrixBase<D2> &f_dot, const WidthPair &w) {
    if (f.rows() != f_dot.rows() || f.cols() != f_dot.cols())
        throw Error(ErrorCode::BadShape, "F and dF/dt shapes differ");
    return zmatrix(f_dot, w);
}

/// dF/dt = J Hess h0(X) F along the flow.
inline PhaseMat jacobian_rate(const HamiltonianModel &model, const Vec &x, const PhaseMat &f) {
    const int d = model.dim;
    const PotentialValue pv = model.eval_potential(x);
    PhaseMat df(2 * d, 2 * d);
    df.topRows(d) = f.bottomRows(d);
    df.bottomRows(d) = -pv.hessian * f.topRows(d);
    return df;
}

/// |det Z|^2 divided by its guaranteed lower bound 2^d det(Re Theta_x) det(Re Theta_y^{-1}),
/// which is 2^d det(Re Theta_x) / det(Re Theta_y) when Theta_y is real.
inline double z_floor_ratio(const CMatrix &z, const WidthPair &w) {
    const int d = w.dim();
    const RMatrix re_ty_inv = w.theta_y.matrix().inverse().real();
    const double floor = std::pow(2.0, d) * w.theta_x.real().determinant() * re_ty_inv.determinant();
    return std::norm(z.determinant()) / floor;
}

enum class PrefactorMethod { closed_form, ode };

struct PrefactorPath {
    std::vector<double> times;
    std::vector<cplx> u0;
    PrefactorMethod method = PrefactorMethod::closed_form;
};

/// det(Theta_x + Theta_y)^{1/2}, branch fixed through the cone square root.
inline cplx prefactor_seed(const WidthPair &w, const Tolerances &tol = {}) {
    return cone_sqrt_det(cone_check(w.theta_x.matrix() + w.theta_y.matrix(), tol), tol);
}

/// u0(t) = (det Theta_y Z(t))^{1/2} exp(-i int h1), square root continued
/// sample by sample from the seed.
inline PrefactorPath hk_prefactor_closed(const TrajectoryRecord &rec, const WidthPair &w,
                                         const Tolerances &tol = {}) {
    if (rec.size() == 0) throw Error(ErrorCode::BadShape, "empty trajectory record");
    const CMatrix &ty = w.theta_y.matrix();
    const cplx seed = prefactor_seed(w, tol);

    const cplx w0 = (ty * zmatrix(rec.F.front(), w)).determinant();
    const cplx expected = (w.theta_x.matrix() + ty).determinant();
    if (!(std::abs(w0 - expected) <= 1e-10 * std::abs(expected)))
        throw Error(ErrorCode::InconsistentSeed, "det(Theta_y Z(0)) differs from det(Theta_x + Theta_y)");

    PrefactorPath path;
    path.method = PrefactorMethod::closed_form;
    path.times = rec.times;
    path.u0.reserve(rec.size());
    BranchState state = branch_sqrt_init(w0, seed, tol);
    for (std::size_t k = 0; k < rec.size(); ++k) {
        const cplx wk = (ty * zmatrix(rec.F[k], w)).determinant();
        auto [next, root] = branch_sqrt_step(state, wk, tol);
        state = next;
        path.u0.push_back(root * std::exp(-kI * rec.h1_phase[k]));
    }
    return path;
}

namespace detail {

// Rate g(t) in du/dt = g(t) u.
inline cplx prefactor_rate(const HamiltonianModel &model, const WidthPair &w, double t, const Vec &x,
                           const Vec &xi, const PhaseMat &f) {
    const CMatrix z = zmatrix(f, w);
    const CMatrix zd = zmatrix(jacobian_rate(model, x, f), w);
    const cplx tr = z.partialPivLu().solve(zd).trace();
    return 0.5 * tr - kI * model.h1(t, x, xi);
}

} // namespace detail

/// RK4 for du/dt = u [tr(Z^{-1} dZ/dt)/2 - i h1(t, X, Xi)] on the record's
/// time grid. Midpoint states come from cubic Hermite interpolation of the
/// stored samples using their exact time derivatives.
inline PrefactorPath hk_prefactor_ode(const TrajectoryRecord &rec, const HamiltonianModel &model,
                                      const WidthPair &w, const Tolerances &tol = {}) {
    if (rec.size() == 0) throw Error(ErrorCode::BadShape, "empty trajectory record");
    PrefactorPath path;
    path.method = PrefactorMethod::ode;
    path.times = rec.times;
    path.u0.reserve(rec.size());
    cplx u = prefactor_seed(w, tol);
    path.u0.push_back(u);
    for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
        const double t0 = rec.times[k], t1 = rec.times[k + 1], h = t1 - t0;
        const Vec &x0 = rec.X[k], &x1 = rec.X[k + 1];
        const Vec &xi0 = rec.Xi[k], &xi1 = rec.Xi[k + 1];
        const PhaseMat &f0 = rec.F[k], &f1 = rec.F[k + 1];
        const Vec a0 = -model.eval_potential(x0).gradient;
        const Vec a1 = -model.eval_potential(x1).gradient;
        const PhaseMat fd0 = jacobian_rate(model, x0, f0);
        const PhaseMat fd1 = jacobian_rate(model, x1, f1);
        const Vec xm = 0.5 * (x0 + x1) + (h / 8.0) * (xi0 - xi1);
        const Vec xim = 0.5 * (xi0 + xi1) + (h / 8.0) * (a0 - a1);
        const PhaseMat fm = 0.5 * (f0 + f1) + (h / 8.0) * (fd0 - fd1);

        const cplx g0 = detail::prefactor_rate(model, w, t0, x0, xi0, f0);
        const cplx gm = detail::prefactor_rate(model, w, t0 + 0.5 * h, xm, xim, fm);
        const cplx g1 = detail::prefactor_rate(model, w, t1, x1, xi1, f1);
        const cplx k1 = g0 * u;
        const cplx k2 = gm * (u + 0.5 * h * k1);
        const cplx k3 = gm * (u + 0.5 * h * k2);
        const cplx k4 = g1 * (u + h * k3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(u.real()) || !std::isfinite(u.imag()))
            throw Error(ErrorCode::NonFiniteState, "prefactor ODE diverged");
        path.u0.push_back(u);
    }
    return path;
}

/// Constant frozen-Gaussian symbol det(Theta_x + Theta_y)^{1/2}; 2^{d/2} for identity widths.
inline cplx fga_symbol(const WidthPair &w, const Tolerances &tol = {}) { return prefactor_seed(w, tol); }

/// Thawed-Gaussian width -i (dXi/dq + i dXi/dp)(dX/dq + i dX/dp)^{-1}.
template <class Derived>
ConeMatrix tga_width(const Eigen::MatrixBase<Derived> &f) {
    if (f.rows() != f.cols() || f.rows() % 2 != 0 || f.rows() == 0)
        throw Error(ErrorCode::BadShape, "Jacobian must be 2d x 2d");
    const Eigen::Index d = f.rows() / 2;
    const Eigen::MatrixXd fd = f.template cast<double>();
    const CMatrix q = fd.topLeftCorner(d, d).template cast<cplx>() + kI * fd.topRightCorner(d, d).template cast<cplx>();
    const CMatrix p =
        fd.bottomLeftCorner(d, d).template cast<cplx>() + kI * fd.bottomRightCorner(d, d).template cast<cplx>();
    Eigen::FullPivLU<CMatrix> lu(q);
    if (!lu.isInvertible()) throw Error(ErrorCode::SingularFrame, "dX/dq + i dX/dp is singular");
    // P Q^{-1} is symmetric for symplectic F (Q = A + iB, P = C + iD in block form).
    const CMatrix theta = -kI * p * lu.inverse();
    Tolerances loose;
    loose.symmetry = 1e-9 * std::max(1.0, theta.cwiseAbs().maxCoeff());
    const ConeMatrix checked = cone_check(theta, loose);
    return cone_check(0.5 * (checked.matrix() + checked.matrix().transpose()));
}

/// det(dX/dq + i dX/dp), the scalar whose inverse square root is the TGA amplitude.
template <class Derived>
cplx tga_frame_det(const Eigen::MatrixBase<Derived> &f) {
    const Eigen::Index d = f.rows() / 2;
    const Eigen::MatrixXd fd = f.template cast<double>();
    const CMatrix q = fd.topLeftCorner(d, d).template cast<cplx>() + kI * fd.topRightCorner(d, d).template cast<cplx>();
    return q.determinant();
}

} // namespace hkprop
