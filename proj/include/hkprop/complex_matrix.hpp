#pragma once

// Complex symmetric matrices with positive definite real part (the "cone"),
// their square roots inside the cone, and branch-continuous scalar square
// roots along sampled time paths.

#include <cmath>
#include <complex>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "errors.hpp"

namespace hkprop {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;

inline constexpr cplx kI{0.0, 1.0};

struct Tolerances {
    double symmetry = 1e-12;      // entrywise |M - M^T|
    double root_residual = 1e-10; // relative residual of a square root
    double zero_floor = 1e-14;    // |w| below which a scalar branch is undefined
};

class ConeMatrix;
ConeMatrix cone_check(const CMatrix &m, const Tolerances &tol = {});
ConeMatrix cone_sqrt(const ConeMatrix &m, const Tolerances &tol = {});

/// A validated member of the cone. Only cone_check and cone_sqrt construct it.
class ConeMatrix {
  public:
    const CMatrix &matrix() const noexcept { return m_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }
    RMatrix real() const { return m_.real(); }

    static ConeMatrix identity(Eigen::Index d) { return ConeMatrix(CMatrix::Identity(d, d)); }

  private:
    explicit ConeMatrix(CMatrix m) : m_(std::move(m)) {}
    CMatrix m_;

    friend ConeMatrix cone_check(const CMatrix &, const Tolerances &);
    friend ConeMatrix cone_sqrt(const ConeMatrix &, const Tolerances &);
};

inline ConeMatrix cone_check(const CMatrix &m, const Tolerances &tol) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw Error(ErrorCode::BadShape, "cone matrix must be square and nonempty");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= tol.symmetry))
        throw Error(ErrorCode::NotSymmetric, "asymmetry " + std::to_string(asym));
    const RMatrix re = m.real();
    Eigen::LLT<RMatrix> llt(re);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::RealPartNotPD, "Cholesky of the real part failed");
    return ConeMatrix(m);
}

/// Square root of an upper triangular matrix with spectrum in Re z > 0, using
/// principal scalar roots on the diagonal (Bjorck-Hammarling recurrence).
inline CMatrix upper_triangular_sqrt(const CMatrix &t) {
    const Eigen::Index n = t.rows();
    CMatrix r = CMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        r(j, j) = std::sqrt(t(j, j));
        for (Eigen::Index i = j - 1; i >= 0; --i) {
            cplx s = t(i, j);
            for (Eigen::Index k = i + 1; k < j; ++k)
                s -= r(i, k) * r(k, j);
            r(i, j) = s / (r(i, i) + r(j, j));
        }
    }
    return r;
}

/// The unique square root of M that lies in the cone.
///
/// The spectrum of a cone matrix lies in the open right half plane, so the
/// principal branch applied through a complex Schur form coincides with the
/// holomorphic functional calculus definition. The result is symmetrised to
/// remove rounding asymmetry and then re-validated.
inline ConeMatrix cone_sqrt(const ConeMatrix &m, const Tolerances &tol) {
    Eigen::ComplexSchur<CMatrix> schur(m.matrix());
    if (schur.info() != Eigen::Success)
        throw Error(ErrorCode::ConvergenceFailure, "complex Schur iteration did not converge");
    const CMatrix &u = schur.matrixU();
    const CMatrix root_t = upper_triangular_sqrt(schur.matrixT());
    CMatrix root = u * root_t * u.adjoint();
    root = 0.5 * (root + root.transpose()).eval();

    const double residual = (root * root - m.matrix()).norm() / m.matrix().norm();
    if (!(residual <= tol.root_residual))
        throw Error(ErrorCode::ConvergenceFailure, "square root residual " + std::to_string(residual));
    Eigen::LLT<RMatrix> llt(root.real());
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::ConvergenceFailure, "square root left the cone");
    return ConeMatrix(root);
}

/// det(M)^{1/2} with the branch fixed by det(cone_sqrt(M)).
inline cplx cone_sqrt_det(const ConeMatrix &m, const Tolerances &tol = {}) {
    return cone_sqrt(m, tol).matrix().determinant();
}

// ---------------------------------------------------------------------------
// Branch-continuous scalar square roots.
//
// Contract: consecutive samples w_k, w_{k+1} must not wind by more than pi
// around the origin relative to each other; the caller's time grid has to be
// fine enough for that. Each step picks whichever of the two roots lies
// closer to the previously tracked root.

struct BranchState {
    cplx current_value;     // tracked root
    cplx previous_argument; // last w
};

inline BranchState branch_sqrt_init(cplx w0, cplx root0, const Tolerances &tol = {}) {
    if (std::abs(w0) < tol.zero_floor)
        throw Error(ErrorCode::ZeroCrossing, "seed argument is zero");
    if (!(std::abs(root0 * root0 - w0) <= tol.root_residual * std::abs(w0)))
        throw Error(ErrorCode::InconsistentSeed, "seed root does not square to the seed argument");
    return {root0, w0};
}

inline std::pair<BranchState, cplx> branch_sqrt_step(const BranchState &state, cplx w_new,
                                                     const Tolerances &tol = {}) {
    if (!(std::abs(w_new) >= tol.zero_floor))
        throw Error(ErrorCode::ZeroCrossing, "|w| fell below the branch floor");
    cplx r = std::sqrt(w_new);
    if (std::abs(r - state.current_value) > std::abs(r + state.current_value))
        r = -r;
    return {BranchState{r, w_new}, r};
}

} // namespace hkprop
