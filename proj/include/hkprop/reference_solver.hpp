#pragma once

// Strang-split Fourier solver for i eps dpsi/dt = -eps^2/2 psi'' + V psi on a
// periodic box. Used as the oracle for every error measurement.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "fft.hpp"
#include "hamiltonian.hpp"
#include "wavefunction.hpp"

namespace hkprop {

struct SpectralDomain {
    double L = 8.0;  // box [-L, L)
    int n = 2048;    // power of two
    double eps = 0.1;
    double dt = 1e-3;

    SpatialGrid grid() const { return SpatialGrid::periodic(L, n); }

    void validate() const {
        if (!is_power_of_two(static_cast<std::size_t>(n)) || n < 2)
            throw Error(ErrorCode::ConfigError, "spectral grid size must be a power of two");
        if (!(L > 0) || !(eps > 0) || !(dt > 0))
            throw Error(ErrorCode::ConfigError, "spectral domain needs positive L, eps and dt");
    }
};

struct SplitStepOptions {
    double boundary_threshold = 1e-10; // allowed mass fraction in the outer 5% strips
    int check_every = 100;
};

/// Fraction of |psi|^2 in the outer 5% of the box on either side.
inline double boundary_mass_fraction(const WaveFunction &psi) {
    const int strip = std::max(1, psi.size() / 20);
    double edge = 0.0, total = 0.0;
    for (int i = 0; i < psi.size(); ++i) {
        const double m = std::norm(psi.values[i]);
        total += m;
        if (i < strip || i >= psi.size() - strip) edge += m;
    }
    return total > 0 ? edge / total : 0.0;
}

inline WaveFunction split_step_propagate(const HamiltonianModel &model, const WaveFunction &psi0, double t_final,
                                         const SpectralDomain &dom, const SplitStepOptions &opt = {}) {
    dom.validate();
    if (model.dim != 1) throw Error(ErrorCode::BadShape, "reference solver is one-dimensional");
    const SpatialGrid grid = dom.grid();
    if (!psi0.grid.same_as(grid)) throw Error(ErrorCode::GridMismatch, "initial state is not on the spectral grid");
    if (std::abs(psi0.eps - dom.eps) > 1e-15 * dom.eps)
        throw Error(ErrorCode::GridMismatch, "initial state eps differs from the domain eps");

    const int n = dom.n;
    const long steps = t_final == 0.0 ? 0 : static_cast<long>(std::ceil(std::abs(t_final) / dom.dt - 1e-9));
    const double h = steps > 0 ? t_final / static_cast<double>(steps) : 0.0;

    std::vector<cplx> half_potential(n), kinetic(n);
    Vec x(1);
    for (int i = 0; i < n; ++i) {
        x[0] = grid.x(i);
        half_potential[i] = std::exp(-kI * (model.V(x) * h / (2.0 * dom.eps)));
        const int m = i < n / 2 ? i : i - n;
        const double k = std::numbers::pi * m / dom.L;
        kinetic[i] = std::exp(-kI * (dom.eps * k * k * h / 2.0));
    }

    WaveFunction psi = psi0;
    auto &v = psi.values;
    auto check = [&](long step) {
        const double frac = boundary_mass_fraction(psi);
        if (frac > opt.boundary_threshold)
            throw Error(ErrorCode::BoundaryMass, "boundary mass fraction " + format_double(frac) + " at step " +
                                                     std::to_string(step));
    };
    check(0);
    for (long s = 0; s < steps; ++s) {
        for (int i = 0; i < n; ++i) v[i] *= half_potential[i];
        fft_inplace(v);
        for (int i = 0; i < n; ++i) v[i] *= kinetic[i];
        fft_inplace(v, true);
        for (int i = 0; i < n; ++i) v[i] *= half_potential[i];
        if ((s + 1) % opt.check_every == 0) check(s + 1);
    }
    check(steps);
    return psi;
}

} // namespace hkprop
