#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "taxflow/spectral.hpp"

using namespace taxflow;
using taxflow::testing::cached_optimum;
using taxflow::testing::half_edges;
using taxflow::testing::wavy_sigma;

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

const Spectrum& unit_rod() {
    static const Spectrum s = eigensolve(GridFunction(Grid(0.0, 1.0, 401), 1.0), 6);
    return s;
}

double l2_sq(const GridFunction& f) { return integrate(f * f); }

// CN steps toward zero from z0 on a source-free operator, up to t = 1/lambda1.
FrozenRun decay_run(const DiffusionOperator& op, const GridFunction& z0, double lambda1, double share) {
    const double kmax = std::min(decay_step_limit(op, lambda1), share / lambda1);
    const auto steps = static_cast<std::size_t>(std::ceil(1.0 / (lambda1 * kmax)));
    const std::vector<double> zero(op.grid().size(), 0.0);
    return run_frozen(op, zero, z0, 1.0 / (lambda1 * static_cast<double>(steps)), steps);
}

}  // namespace

TEST(Eigensolve, HomogeneousRodFirstEigenvalue) {
    const auto& s = unit_rod();
    EXPECT_NEAR(s.values[1], kPi2, 0.005 * kPi2);
    const auto c = GridFunction::sample(s.grid, [](double y) { return std::sqrt(2.0) * std::cos(std::numbers::pi * y); });
    EXPECT_NEAR(integrate(s.functions[1] * c), 1.0, 1e-4);
}

TEST(Eigensolve, ConstantModeHasZeroEigenvalue) {
    const auto& s = unit_rod();
    EXPECT_LT(std::abs(s.values[0]), 1e-8);
    for (std::size_t i = 0; i < s.grid.size(); ++i) EXPECT_NEAR(s.functions[0][i], 1.0, 1e-8);
    EXPECT_GT(s.values[1], 0.0);
    for (std::size_t j = 1; j < s.values.size(); ++j) EXPECT_GT(s.values[j], s.values[j - 1]);
}

TEST(Eigensolve, EigenfunctionsAreOrthonormal) {
    const auto& s = unit_rod();
    for (std::size_t a = 0; a < s.functions.size(); ++a)
        for (std::size_t b = 0; b < s.functions.size(); ++b)
            EXPECT_NEAR(integrate(s.functions[a] * s.functions[b]), a == b ? 1.0 : 0.0, 1e-8);
}

TEST(Eigensolve, WavyConductivityOrthonormal) {
    const Grid g(0.0, 6.0, 601);
    const auto s = eigensolve(g, half_edges(g, wavy_sigma), 20);
    for (std::size_t a = 0; a < s.functions.size(); ++a)
        for (std::size_t b = a; b < s.functions.size(); ++b)
            EXPECT_NEAR(integrate(s.functions[a] * s.functions[b]), a == b ? 1.0 : 0.0, 1e-8);
}

TEST(Eigensolve, RejectsInvalidRequests) {
    const Grid g(0.0, 1.0, 101);
    auto half = half_edges(g, [](double) { return 1.0; });
    EXPECT_THROW(eigensolve(g, half, 26), Error);
    EXPECT_THROW(eigensolve(g, half, 0), Error);
    half[50] = 0.0;
    EXPECT_THROW(eigensolve(g, half, 5), Error);
}

TEST(Eigensolve, StiffnessIsSymmetric) {
    const Grid g(0.0, 6.0, 301);
    const DiffusionOperator op(g, half_edges(g, wavy_sigma));
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        const double a = g.weight(i) * op.upper()[i], b = g.weight(i + 1) * op.lower()[i + 1];
        EXPECT_NEAR(a, b, 1e-15 * std::abs(a));
    }
}

TEST(Eigensolve, FirstEigenvalueConvergesAtSecondOrder) {
    double lam[3];
    int k = 0;
    for (std::size_t n : {101, 201, 401}) {
        const Grid g(0.0, 6.0, n);
        lam[k++] = eigensolve(g, half_edges(g, wavy_sigma), 2).values[1];
    }
    const double d1 = lam[1] - lam[0], d2 = lam[2] - lam[1];
    EXPECT_GT(d1 * d2, 0.0);  // one-sided
    EXPECT_NEAR(d2 / d1, 0.25, 0.03);
}

TEST(Rayleigh, HomogeneousRod) { EXPECT_NEAR(rayleigh_lambda1(GridFunction(Grid(0.0, 1.0, 401), 1.0)), kPi2, 0.005 * kPi2); }

TEST(Rayleigh, AgreesWithEigensolve) {
    const Grid g(0.0, 6.0, 601);
    const auto half = half_edges(g, wavy_sigma);
    const double l1 = eigensolve(g, half, 2).values[1];
    EXPECT_NEAR(rayleigh_lambda1(g, half), l1, 1e-8 * l1);
    EXPECT_NEAR(rayleigh_lambda1(GridFunction(Grid(0.0, 1.0, 401), 1.0)), unit_rod().values[1], 1e-8 * kPi2);
}

TEST(Rayleigh, ScalesWithConductivity) {
    const Grid g(0.0, 6.0, 301);
    auto half = half_edges(g, wavy_sigma);
    const double l1 = rayleigh_lambda1(g, half);
    for (double& c : half) c *= 3.5;
    EXPECT_NEAR(rayleigh_lambda1(g, half), 3.5 * l1, 1e-10 * l1);
}

TEST(Rayleigh, CosineAttainsTheBound) {
    const double a = 0.5, b = 2.5;
    const Grid g(a, b, 401);
    const double w = std::numbers::pi / (b - a);
    const auto f = GridFunction::sample(g, [&](double y) { return std::cos(w * (y - a)); });
    const auto fp = GridFunction::sample(g, [&](double y) { return -w * std::sin(w * (y - a)); });
    EXPECT_NEAR(rayleigh_quotient(GridFunction(g, 1.0), f, fp), kPi2 / ((b - a) * (b - a)), 1e-12);
}

TEST(Rayleigh, DiscreteQuotientBoundsFirstEigenvalueFromAbove) {
    const Grid g(0.0, 6.0, 301);
    const auto half = half_edges(g, wavy_sigma);
    const double l1 = eigensolve(g, half, 2).values[1];
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        double c[4];
        for (double& x : c) x = nd(rng);
        const auto f = GridFunction::sample(g, [&](double y) {
            double v = 0.0;
            for (int m = 0; m < 4; ++m) v += c[m] * std::cos((m + 1) * std::numbers::pi * y / 6.0);
            return v;
        });
        EXPECT_GE(rayleigh_quotient(g, half, f), l1 * (1.0 - 1e-12));
    }
}

TEST(Decay, StationaryStartHasZeroMargin) {
    const Grid g(0.0, 1.0, 201);
    const DiffusionOperator op(GridFunction(g, 1.0));
    const auto run = decay_run(op, GridFunction(g, 0.0), kPi2, 0.05);
    EXPECT_EQ(decay_certificate(run, GridFunction(g, 0.0), kPi2), 0.0);
}

TEST(Decay, SingleModeDecaysAtTwiceTheEigenvalue) {
    const auto& s = unit_rod();
    const DiffusionOperator op(GridFunction(s.grid, 1.0));
    const double l1 = s.values[1], a = 0.3;
    const auto run = decay_run(op, s.functions[1] * a, l1, 0.02);
    const double D = l2_sq(run.states.back());
    EXPECT_NEAR(D / (a * a * std::exp(-2.0)), 1.0, 1e-4);
    EXPECT_GE(decay_certificate(run, GridFunction(s.grid, 0.0), l1), -1e-8);
}

TEST(Decay, MixtureDecaysStrictlyFaster) {
    const auto& s = unit_rod();
    const DiffusionOperator op(GridFunction(s.grid, 1.0));
    const double l1 = s.values[1];
    const auto z0 = s.functions[1] * 0.2 + s.functions[3] * 0.1;
    const auto run = decay_run(op, z0, l1, 0.02);
    const double d0 = l2_sq(z0);
    for (std::size_t k = 1; k < run.states.size(); ++k)
        EXPECT_GT(std::exp(-2.0 * l1 * run.times[k]) * d0 - l2_sq(run.states[k]), 0.0) << run.times[k];
}

TEST(Decay, RandomTaperedStartsCertify) {
    const Grid g(0.0, 6.0, 401);
    const auto half = half_edges(g, wavy_sigma);
    const DiffusionOperator op(g, half);
    const double l1 = eigensolve(g, half, 2).values[1];
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        double c[6];
        for (double& x : c) x = nd(rng);
        auto z = GridFunction::sample(g, [&](double y) {
            const double u = y / 6.0;
            double v = 0.0;
            for (int m = 0; m < 6; ++m) v += c[m] * std::sin((m + 1) * std::numbers::pi * u) / (m + 1);
            return 0.1 * v * two_sided_taper(y, 0.0, 6.0, 0.3);
        });
        z = z + (-integrate(z) / g.span());
        EXPECT_GE(decay_certificate(decay_run(op, z, l1, 0.05), GridFunction(g, 0.0), l1), -1e-8) << trial;
    }
}

TEST(Decay, SeriesMatchesSolver) {
    const Grid g(0.0, 6.0, 401);
    const auto half = half_edges(g, wavy_sigma);
    const DiffusionOperator op(g, half);
    const auto s = eigensolve(g, half, 20);
    const double l1 = s.values[1];
    auto z0 = GridFunction::sample(g, [](double y) {
        return (0.3 * std::sin(y) + 0.1 * std::cos(2.5 * y)) * two_sided_taper(y, 0.0, 6.0, 0.3);
    });
    z0 = z0 + (-integrate(z0) / g.span());
    const auto run = decay_run(op, z0, l1, 0.005);
    const auto a = mode_coefficients(s, z0);
    const auto series = series_evolution(s, a, run.times.back());
    EXPECT_LT(std::sqrt(l2_sq(series - run.states.back())), 1e-4);
}

TEST(Component, PicksLongestConductingRun) {
    const std::vector<double> half{0.0, 1.0, 1.0, 0.0, 2.0, 2.0, 2.0, 0.0};
    const auto [a, b] = conducting_component(half);
    EXPECT_EQ(a, 4u);
    EXPECT_EQ(b, 7u);
    const Grid g(0.0, 16.0, 17);
    EXPECT_THROW(restrict_to_component(g, std::vector<double>(16, 0.0)), Error);
}

TEST(Component, OptimalConductivitySpectrum) {
    const auto& res = cached_optimum(401);
    const auto c = restrict_to_component(res.tax.grid(), res.snapshot.sigma_half);
    for (double h : c.half) ASSERT_GT(h, 0.0);
    EXPECT_EQ(c.grid.lo(), res.tax.grid().node(c.offset));
    const auto s = eigensolve(c.grid, c.half, 10);
    EXPECT_LT(std::abs(s.values[0]), 1e-8);
    EXPECT_GT(s.values[1], 0.0);
    EXPECT_NEAR(rayleigh_lambda1(c.grid, c.half), s.values[1], 1e-8 * s.values[1]);
}
