#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "taxflow/model.hpp"

using namespace taxflow;

namespace {

// Lognormal density and C2 ramp written out independently of the library.
double lognormal_pdf(double x, double mu, double s) {
    const double z = (std::log(x) - mu) / s;
    return std::exp(-0.5 * z * z) / (x * s * std::sqrt(2.0 * std::numbers::pi));
}

double ramp(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u - std::sin(2.0 * std::numbers::pi * u) / (2.0 * std::numbers::pi);
}

double raw_skill_density(double t, const SkillSpec& s) {
    const double w = s.taper * (s.theta_max - s.theta_min);
    return lognormal_pdf(t, s.log_mean, s.log_sd) * ramp((t - s.theta_min) / w) * ramp((s.theta_max - t) / w);
}

// Composite Simpson rule with m (even) panels.
template <class F>
double simpson(F&& f, double a, double b, std::size_t m) {
    const double h = (b - a) / static_cast<double>(m);
    double s = f(a) + f(b);
    for (std::size_t i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
    return s * h / 3.0;
}

double trapezoid_skill_mass(const SkillModel& m, std::size_t n) {
    const double a = m.theta_min(), b = m.theta_max(), h = (b - a) / static_cast<double>(n - 1);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += ((k == 0 || k + 1 == n) ? 0.5 : 1.0) * m.density(a + h * static_cast<double>(k));
    return s * h;
}

}  // namespace

TEST(Derivative, ConstantHasZeroSlope) {
    const Grid g(1.0, 2.0, 101);
    const auto d = derivative(GridFunction(g, 3.7));
    EXPECT_LT(sup_norm(d), 1e-12);
}

TEST(Derivative, ExactForAffine) {
    const Grid g(1.0, 2.0, 101);
    const auto d = derivative(GridFunction::sample(g, [](double y) { return y; }));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(d[i], 1.0, 1e-10) << i;
}

TEST(Derivative, ExactForQuadraticInInterior) {
    const Grid g(1.0, 2.0, 101);
    const auto d = derivative(GridFunction::sample(g, [](double y) { return y * y; }));
    for (std::size_t i = 1; i + 1 < g.size(); ++i) EXPECT_NEAR(d[i], 2.0 * g.node(i), 1e-10) << i;
    // One-sided second-order ends are exact for quadratics as well.
    EXPECT_NEAR(d[0], 2.0, 1e-10);
    EXPECT_NEAR(d[100], 4.0, 1e-10);
}

TEST(SecondDifference, ExactForQuadratic) {
    const Grid g(0.5, 4.5, 401);
    const auto d2 = second_difference(GridFunction::sample(g, [](double y) { return 0.1 * y * y; }));
    for (std::size_t i = 1; i + 1 < g.size(); ++i) EXPECT_NEAR(d2[i], 0.2, 1e-9);
}

TEST(Integrate, UnitConstant) { EXPECT_NEAR(integrate(GridFunction(Grid(0.0, 1.0, 101), 1.0)), 1.0, 1e-14); }

TEST(Integrate, AffineIsExact) {
    EXPECT_NEAR(integrate(GridFunction::sample(Grid(0.0, 1.0, 101), [](double y) { return y; })), 0.5, 1e-14);
}

TEST(Integrate, QuadraticErrorMatchesTrapezoidFormula) {
    const Grid g(0.0, 1.0, 101);
    const double I = integrate(GridFunction::sample(g, [](double y) { return y * y; }));
    EXPECT_NEAR(I, 1.0 / 3.0, 2e-5);
    // The trapezoid error for y^2 is exactly h^2 (b - a) / 6.
    const double h = g.step();
    EXPECT_NEAR(I - 1.0 / 3.0, h * h / 6.0, 1e-13);
}

TEST(Integrate, FundamentalTheoremOnAffine) {
    const Grid g(0.5, 4.5, 81);
    const auto f = GridFunction::sample(g, [](double y) { return 2.0 - 0.75 * y; });
    const auto back = cumulative_integral(derivative(f));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(back[i], f[i] - f[0], 1e-12);
    const auto slope = derivative(cumulative_integral(f));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(slope[i], f[i], 1e-10);
}

TEST(GridFunction, RejectsNonFiniteValues) {
    const Grid g(0.0, 1.0, 16);
    std::vector<double> v(16, 0.0);
    v[3] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(GridFunction(g, v), Error);
    v[3] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(GridFunction(g, v), Error);
    EXPECT_THROW(GridFunction(g, std::numeric_limits<double>::infinity()), Error);
    EXPECT_THROW(GridFunction::sample(g, [](double y) { return 1.0 / (y - y); }), Error);
}

TEST(GridFunction, ArithmeticKeepsValuesFinite) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    const Grid g(0.0, 1.0, 64);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = GridFunction::sample(g, [&](double) { return u(rng); });
        const auto b = GridFunction::sample(g, [&](double) { return u(rng); });
        for (const auto& f : {a + b, a - b, a * b, a * 2.5, a + 1.0, derivative(a), cumulative_integral(b)})
            for (double x : f.values()) ASSERT_TRUE(std::isfinite(x));
    }
}

TEST(Grid, RejectsTooFewNodes) {
    try {
        Grid g(0.05, 5.5, 2);
        FAIL() << "grid with 2 nodes accepted";
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "grid.n below minimum 16");
    }
}

TEST(Grid, NodesHitBothEnds) {
    const Grid g(0.05, 5.5, 1601);
    EXPECT_EQ(g.node(0), 0.05);
    EXPECT_EQ(g.node(1600), 5.5);
    EXPECT_EQ(g.nearest(g.node(777)), 777u);
}

TEST(SkillDensity, VanishesAtBothEnds) {
    const SkillModel m;
    EXPECT_EQ(m.density(m.theta_min()), 0.0);
    EXPECT_EQ(m.density(m.theta_max()), 0.0);
}

TEST(SkillDensity, UntaperedInteriorMatchesNormalizedLognormal) {
    const SkillSpec spec;
    const SkillModel m(spec);
    const double Z = simpson([&](double t) { return raw_skill_density(t, spec); }, spec.theta_min, spec.theta_max, 20000);
    // The lognormal mode exp(mu - s^2) lies inside the untapered band.
    const double mode = std::exp(spec.log_mean - spec.log_sd * spec.log_sd);
    EXPECT_NEAR(m.density(mode), lognormal_pdf(mode, spec.log_mean, spec.log_sd) / Z, 1e-10);
    for (double t = spec.theta_min; t <= spec.theta_max; t += 0.01) EXPECT_LE(m.density(t), m.density(mode) + 1e-14);
    for (double t : {0.7, 1.3, 2.2, 2.8}) EXPECT_NEAR(m.density(t), raw_skill_density(t, spec) / Z, 1e-10) << t;
}

TEST(SkillDensity, IntegratesToOne) {
    const SkillModel m;
    EXPECT_NEAR(trapezoid_skill_mass(m, 2001), 1.0, 1e-8);
}

TEST(SkillDensity, QuadratureErrorFallsAtLeastSecondOrder) {
    const SkillModel m;
    const double e1 = std::abs(trapezoid_skill_mass(m, 101) - 1.0);
    const double e2 = std::abs(trapezoid_skill_mass(m, 201) - 1.0);
    EXPECT_GT(e1, 0.0);
    EXPECT_LE(e2, 0.3 * e1);
}

TEST(SkillDensity, CdfIsMonotoneAndMatchesQuadrature) {
    const SkillSpec spec;
    const SkillModel m(spec);
    const double Z = simpson([&](double t) { return raw_skill_density(t, spec); }, spec.theta_min, spec.theta_max, 20000);
    double prev = 0.0;
    for (double t = 0.5; t <= 3.0; t += 0.05) {
        const double c = m.cdf(t);
        EXPECT_GE(c, prev);
        prev = c;
    }
    EXPECT_EQ(m.cdf(spec.theta_min), 0.0);
    EXPECT_EQ(m.cdf(spec.theta_max), 1.0);
    for (double t : {0.9, 1.5, 2.4}) {
        const double oracle = simpson([&](double s) { return raw_skill_density(s, spec); }, spec.theta_min, t, 20000) / Z;
        EXPECT_NEAR(m.cdf(t), oracle, 1e-10) << t;
    }
}

TEST(SkillModel, RejectsInvalidSpecs) {
    SkillSpec s;
    s.theta_min = 0.0;
    EXPECT_THROW(SkillModel{s}, Error);
    s = {};
    s.theta_max = 0.4;
    EXPECT_THROW(SkillModel{s}, Error);
    s = {};
    s.taper = 0.6;
    EXPECT_THROW(SkillModel{s}, Error);
    EXPECT_THROW(Preferences(0.0), Error);
}
