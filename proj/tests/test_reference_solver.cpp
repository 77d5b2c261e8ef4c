#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hkprop/fft.hpp"
#include "hkprop/reference_solver.hpp"
#include "oracles.hpp"

using namespace hkprop;

namespace {

constexpr double kPi = std::numbers::pi;

HamiltonianModel model(const std::string &name) {
    ModelSpec s;
    s.name = name;
    return builtin(s, 1);
}

std::vector<cplx> naive_dft(const std::vector<cplx> &x) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx s = 0;
        for (std::size_t j = 0; j < n; ++j)
            s += x[j] * std::polar(1.0, -2 * kPi * static_cast<double>((j * k) % n) / static_cast<double>(n));
        out[k] = s;
    }
    return out;
}

} // namespace

TEST(Fft, MatchesNaiveDft) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    for (std::size_t n : {1u, 2u, 4u, 8u, 64u, 256u, 1024u}) {
        std::vector<cplx> x(n);
        for (auto &v : x) v = {n01(rng), n01(rng)};
        const auto want = naive_dft(x);
        auto got = x;
        fft_inplace(got);
        double err = 0, scale = 0;
        for (std::size_t k = 0; k < n; ++k) {
            err = std::max(err, std::abs(got[k] - want[k]));
            scale = std::max(scale, std::abs(want[k]));
        }
        EXPECT_LE(err, 1e-12 * std::max(1.0, scale)) << n;
        fft_inplace(got, true);
        for (std::size_t j = 0; j < n; ++j) EXPECT_LE(std::abs(got[j] - x[j]), 1e-13) << n;
    }
}

TEST(Fft, RejectsNonPowerOfTwo) {
    std::vector<cplx> x(12);
    EXPECT_THROW(fft_inplace(x), Error);
    EXPECT_FALSE(is_power_of_two(0));
    EXPECT_TRUE(is_power_of_two(1));
}

TEST(L2Error, Examples) {
    const double eps = 0.05;
    const auto grid = SpatialGrid::periodic(8, 2048);
    const auto g = coherent_state(0, 0, eps, grid);
    EXPECT_EQ(l2_error(g, g), 0.0);
    EXPECT_NEAR(l2_error(g, WaveFunction::zeros(grid, eps)), l2_norm(g), 1e-15);
    const double q = 0.3;
    EXPECT_NEAR(l2_error(g, coherent_state(q, 0, eps, grid)), std::sqrt(2 - 2 * std::exp(-q * q / (4 * eps))), 1e-12);
    try {
        l2_error(g, coherent_state(0, 0, eps, SpatialGrid::periodic(8, 1024)));
        ADD_FAILURE();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
    }
}

TEST(Observables, CoherentStateMoments) {
    const double eps = 0.02;
    const auto o = observables(coherent_state(0.7, -0.4, eps, SpatialGrid::periodic(8, 2048)));
    EXPECT_NEAR(o.norm, 1.0, 1e-8);
    EXPECT_NEAR(o.mean_x, 0.7, 1e-8);
    EXPECT_NEAR(o.mean_p, -0.4, 1e-8);
    EXPECT_NEAR(o.var_x, eps / 2, 1e-8);
    EXPECT_NEAR(o.var_p, eps / 2, 1e-8);
}

TEST(Observables, ZeroState) {
    const auto o = observables(WaveFunction::zeros(SpatialGrid::periodic(4, 64), 0.1));
    EXPECT_EQ(o.norm, 0.0);
    EXPECT_EQ(o.mean_x, 0.0);
    EXPECT_EQ(o.mean_p, 0.0);
}

TEST(SplitStep, FreeMatchesClosedForm) {
    SpectralDomain dom;
    dom.eps = 0.05;
    const double q = -0.5, p = 0.8;
    const auto psi0 = coherent_state(q, p, dom.eps, dom.grid());
    const auto out = split_step_propagate(model("free"), psi0, 1.0, dom);
    EXPECT_LE(l2_error(out, oracle::free_gaussian(1.0, q, p, dom.eps, dom.grid())), 1e-8);
    const auto o = observables(out);
    EXPECT_NEAR(o.mean_x, q + p, 1e-8);
}

TEST(SplitStep, HarmonicCentreFollowsRotation) {
    SpectralDomain dom;
    dom.eps = 0.05;
    const auto psi0 = coherent_state(1, 0, dom.eps, dom.grid());
    for (double t : {0.5, 1.0, 2.0}) {
        const auto o = observables(split_step_propagate(model("harmonic"), psi0, t, dom));
        EXPECT_NEAR(o.mean_x, std::cos(t), 1e-6);
        EXPECT_NEAR(o.mean_p, -std::sin(t), 1e-6);
    }
}

TEST(SplitStep, NormPreservedOverManySteps) {
    SpectralDomain dom;
    dom.eps = 0.1;
    dom.n = 1024;
    const auto psi0 = coherent_state(0, 0.3, dom.eps, dom.grid());
    for (const char *name : {"harmonic", "torsional"}) {
        const auto out = split_step_propagate(model(name), psi0, 10.0, dom); // 10^4 steps
        EXPECT_NEAR(l2_norm(out), l2_norm(psi0), 1e-12) << name;
    }
}

TEST(SplitStep, StrangSecondOrder) {
    SpectralDomain dom;
    dom.eps = 0.1;
    dom.n = 1024;
    const auto psi0 = coherent_state(1, 0, dom.eps, dom.grid());
    auto run = [&](double dt) {
        SpectralDomain d = dom;
        d.dt = dt;
        return split_step_propagate(model("torsional"), psi0, 1.0, d);
    };
    const auto fine = run(1e-4);
    const double ratio = l2_error(run(0.04), fine) / l2_error(run(0.02), fine);
    EXPECT_GT(ratio, 4 * 0.75);
    EXPECT_LT(ratio, 4 * 1.25);
}

TEST(SplitStep, OracleQualitySelfConvergence) {
    // Halving both dx and dt (box fixed) at the acceptance settings.
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        SpectralDomain dom;
        dom.eps = eps;
        dom.dt = 2.5e-4;
        SpectralDomain fine = dom;
        fine.n *= 2;
        fine.dt /= 2;
        const auto a = split_step_propagate(model("torsional"), coherent_state(1, 0, eps, dom.grid()), 1.0, dom);
        const auto b = split_step_propagate(model("torsional"), coherent_state(1, 0, eps, fine.grid()), 1.0, fine);
        WaveFunction b_coarse = WaveFunction::zeros(dom.grid(), eps);
        for (int i = 0; i < dom.n; ++i) b_coarse.values[i] = b.values[2 * i];
        EXPECT_LE(l2_error(a, b_coarse), 1e-7) << eps;
    }
}

TEST(SplitStep, BoundaryMassIsLoud) {
    SpectralDomain dom;
    dom.L = 3.0;
    dom.n = 256;
    dom.eps = 0.1;
    const auto psi0 = coherent_state(0, 1.5, dom.eps, dom.grid());
    try {
        split_step_propagate(model("free"), psi0, 2.0, dom);
        ADD_FAILURE();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::BoundaryMass);
    }
}

TEST(SplitStep, DomainValidation) {
    SpectralDomain dom;
    dom.n = 1000;
    EXPECT_THROW(dom.validate(), Error);
    SpectralDomain ok;
    const auto psi0 = coherent_state(0, 0, 0.2, SpatialGrid::periodic(8, 1024));
    EXPECT_THROW(split_step_propagate(model("free"), psi0, 1.0, ok), Error);
}
