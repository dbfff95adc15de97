#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "taxflow/fairness.hpp"

using namespace taxflow;
using taxflow::testing::cached_optimum;
using taxflow::testing::default_economy;

namespace {

constexpr std::size_t kN = 1601;

const FairnessReport& optimal_report() {
    static const FairnessReport rep = [] {
        const auto& res = cached_optimum(kN);
        const Grid& g = res.tax.grid();
        return fairness_report(res.tax, res.snapshot, res.report.interior_begin + 1, fairness_probes(g), fairness_times(g));
    }();
    return rep;
}

GridFunction bumped(const GridFunction& T, double x, double amp) {
    return T + GridFunction::sample(T.grid(), [&](double y) { return amp * std::exp(-std::pow((y - x) / 0.6, 2)); });
}

}  // namespace

TEST(Fairness, ProbeLatticeCoversInterior) {
    const Grid g(0.05, 5.5, kN);
    const auto p = fairness_probes(g);
    ASSERT_EQ(p.size(), 5u);
    EXPECT_NEAR(g.node(p.front()), g.lo() + 0.1 * g.span(), g.step());
    EXPECT_NEAR(g.node(p.back()), g.hi() - 0.1 * g.span(), g.step());
    const auto t = fairness_times(g);
    ASSERT_EQ(t.size(), 4u);
    EXPECT_NEAR(t.back(), 0.05 * g.span() * g.span(), 1e-14);
    for (std::size_t k = 1; k < t.size(); ++k) EXPECT_NEAR(t[k], 2.0 * t[k - 1], 1e-14);
}

TEST(Fairness, InvariantAtOptimum) {
    const auto& rep = optimal_report();
    ASSERT_EQ(rep.points.size(), 20u);
    for (const auto& p : rep.points) {
        EXPECT_TRUE(std::isfinite(p.residual) && p.residual >= 0.0);
        EXPECT_LT(p.residual, 1e-3 * rep.tax_scale) << "x " << p.x << " t " << p.t;
    }
}

TEST(Fairness, MarginalInvariantAtOptimum) {
    const auto& rep = optimal_report();
    for (const auto& p : rep.points) EXPECT_LT(p.marginal_residual, 5e-3 * rep.slope_scale) << "x " << p.x << " t " << p.t;
}

TEST(Fairness, SplitVariesButSumDoesNot) {
    const auto& rep = optimal_report();
    EXPECT_LT(rep.max_time_spread(), 2e-3 * rep.tax_scale);
    // Each term on its own moves with t.
    for (std::size_t a = 0; a < rep.probes.size(); ++a) {
        const auto& first = rep.points[a * rep.times.size()];
        const auto& last = rep.points[a * rep.times.size() + rep.times.size() - 1];
        EXPECT_GT(last.mechanical - first.mechanical, 1e-3);
    }
}

TEST(Fairness, ResidualVanishesAtTimeZero) {
    const auto& res = cached_optimum(kN);
    const std::size_t x = fairness_probes(res.tax.grid())[2];
    const double ts[] = {0.0, 1e-3};
    const auto ker = fairness_kernel(res.snapshot, res.report.interior_begin + 1, x, ts);
    EXPECT_EQ(fairness_residual(res.tax, res.snapshot, ker, 0), 0.0);
    EXPECT_LT(fairness_residual(res.tax, res.snapshot, ker, 1), 1e-6);
}

TEST(Fairness, LaplacianKernelDifferentiatesTestFunction) {
    // sigma = 1: d/dx int q_t(x, y) y^2 dy = 2x exactly in the continuum, so 1 at x = 0.5.
    const Grid g(0.0, 1.0, 1001);
    const DiffusionOperator op(GridFunction(g, 1.0));
    const auto f = GridFunction::sample(g, [](double y) { return y * y; });
    const std::size_t x = g.nearest(0.5);
    const double ts[] = {1e-3, 4e-3};
    const auto lo = solve_kernel(op, x - 1, ts), hi = solve_kernel(op, x + 1, ts);
    for (std::size_t k = 0; k < 2; ++k) {
        const double d = (integrate(hi.slices[k] * f) - integrate(lo.slices[k] * f)) / (2.0 * g.step());
        EXPECT_NEAR(d, 1.0, 1e-3) << ts[k];
    }
}

TEST(Fairness, BumpBreaksInvarianceLinearly) {
    const auto& res = cached_optimum(kN);
    const Economy eco = default_economy(kN);
    const auto& rep = optimal_report();
    const std::size_t x = rep.probes[2];
    const std::size_t one[] = {x};
    double base = 0.0;
    for (std::size_t k = 0; k < rep.times.size(); ++k) base = std::max(base, rep.points[2 * rep.times.size() + k].residual);

    double r[2];
    int i = 0;
    for (double amp : {0.005, 0.01}) {
        const auto Tb = bumped(res.tax, res.tax.grid().node(x), amp);
        const auto sb = build_snapshot(Tb, eco);
        r[i++] = fairness_report(Tb, sb, res.report.interior_begin + 1, one, rep.times).max_residual();
    }
    EXPECT_GE(r[0], 10.0 * base);
    EXPECT_GE(r[1], 10.0 * base);
    EXPECT_NEAR(r[1] / r[0], 2.0, 0.1);
}

TEST(Fairness, RejectsMismatchedKernel) {
    const auto& res = cached_optimum(kN);
    const Economy eco = default_economy(kN);
    const auto other = build_snapshot(bumped(res.tax, 2.0, 0.005), eco);
    const double ts[] = {0.01};
    const auto ker = fairness_kernel(other, 0, 800, ts);
    EXPECT_THROW(fairness_residual(res.tax, res.snapshot, ker, 0), Error);
}

TEST(Fairness, RejectsProbeInsidePinnedZone) {
    const auto& res = cached_optimum(kN);
    const std::size_t bad[] = {res.report.interior_begin};
    const double ts[] = {0.01};
    EXPECT_THROW(fairness_report(res.tax, res.snapshot, res.report.interior_begin + 1, bad, ts), Error);
}
