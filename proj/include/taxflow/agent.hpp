#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "taxflow/error.hpp"
#include "taxflow/model.hpp"
#include "taxflow/parallel.hpp"

namespace taxflow {

// Smooth interpolant of a gridded tax; supplies T, T' and T'' between nodes.
class TaxSchedule {
public:
    explicit TaxSchedule(const GridFunction& tax)
        : tax_(tax),
          spline_(std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
              tax.vec().data(), tax.size(), tax.grid().lo(), tax.grid().step())) {}

    const GridFunction& tax() const { return tax_; }
    const Grid& grid() const { return tax_.grid(); }

    double value(double y) const { return (*spline_)(clamp(y)); }
    double slope(double y) const { return spline_->prime(clamp(y)); }
    double curvature(double y) const { return spline_->double_prime(clamp(y)); }

private:
    double clamp(double y) const {
        require(y >= grid().lo() - 1e-12 && y <= grid().hi() + 1e-12, "income outside the tax grid");
        return std::clamp(y, grid().lo(), grid().hi());
    }

    GridFunction tax_;
    std::shared_ptr<const boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

struct BruteForceOptions {
    std::size_t mesh = 400;
};

// Global maximizer of theta*l - T(theta*l) - v(l) over the labor range that keeps income on the grid.
inline double solve_labor_bruteforce(double theta, const TaxSchedule& T, const Preferences& prefs,
                                     BruteForceOptions opt = {}) {
    require(theta > 0.0, "skill must be positive");
    require(opt.mesh >= 8, "labor mesh too coarse");
    const double lo = T.grid().lo() / theta, hi = T.grid().hi() / theta;
    auto utility = [&](double l) { return theta * l - T.value(theta * l) - prefs.v(l); };

    const std::size_t m = opt.mesh;
    const double dl = (hi - lo) / static_cast<double>(m);
    std::vector<double> u(m + 1);
    for (std::size_t j = 0; j <= m; ++j) u[j] = utility(j == m ? hi : lo + dl * static_cast<double>(j));

    auto refine = [&](std::size_t j) {
        const double a = lo + dl * static_cast<double>(j == 0 ? 0 : j - 1);
        const double b = j == m ? hi : lo + dl * static_cast<double>(std::min(j + 1, m));
        auto r = boost::math::tools::brent_find_minima([&](double l) { return -utility(l); }, a, b,
                                                        std::numeric_limits<double>::digits / 2);
        return std::pair{r.first, -r.second};
    };

    std::size_t best = 0;
    for (std::size_t j = 1; j <= m; ++j)
        if (u[j] > u[best]) best = j;
    auto [l_best, u_best] = refine(best);

    const double scale = 1.0 + std::abs(u_best);
    for (std::size_t j = 0; j <= m; ++j) {
        if (j + 2 > best && j < best + 2) continue;
        const bool peak = (j == 0 || u[j] >= u[j - 1]) && (j == m || u[j] >= u[j + 1]);
        if (!peak || u[best] - u[j] > 1e-6 * scale) continue;
        double dip = u[j];
        for (std::size_t k = std::min(j, best); k <= std::max(j, best); ++k) dip = std::min(dip, u[k]);
        if (dip >= u[j] - 1e-14 * scale) continue;  // same plateau
        auto [l_other, u_other] = refine(j);
        if (std::abs(u_other - u_best) <= 1e-10 * scale)
            throw Error("non-unique optimum: labor choices " + std::to_string(std::min(l_best, l_other)) + " and " +
                        std::to_string(std::max(l_best, l_other)) + " tie");
        if (u_other > u_best) {
            l_best = l_other;
            u_best = u_other;
        }
    }
    return l_best;
}

struct FocOptions {
    bool verify = true;
    double agreement = 1e-6;
    BruteForceOptions brute{};
};

// Root of theta*(1 - T'(theta*l)) = v'(l), seeded by the untaxed solution and checked against the brute-force optimum.
inline double solve_labor_foc(double theta, const TaxSchedule& T, const Preferences& prefs, FocOptions opt = {}) {
    require(theta > 0.0, "skill must be positive");
    const double lo = T.grid().lo() / theta, hi = T.grid().hi() / theta;
    auto g = [&](double l) { return theta * (1.0 - T.slope(theta * l)) - prefs.v1(l); };
    if (!(g(lo) > 0.0 && g(hi) < 0.0)) throw Error("no sign change in the first-order-condition bracket");

    const double seed = std::clamp(prefs.untaxed_labor(theta), lo, hi);
    double l = seed;
    bool ok = false;
    try {
        std::uintmax_t iters = 100;
        l = boost::math::tools::newton_raphson_iterate(
            [&](double x) { return std::pair{g(x), -theta * theta * T.curvature(theta * x) - prefs.v2(x)}; }, seed,
            lo, hi, std::numeric_limits<double>::digits - 4, iters);
        ok = std::abs(g(l)) <= 1e-10 * (1.0 + theta);
    } catch (const boost::math::evaluation_error&) {
    }
    if (!ok) {
        // Newton stalled on a non-concave stretch: fall back to bracketing.
        boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 4);
        std::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(g, lo, hi, tol, it);
        l = 0.5 * (r.first + r.second);
    }
    if (1.0 - T.slope(theta * l) <= 0.0) throw Error("retention rate not positive at the agent's income");
    if (opt.verify) {
        const double lb = solve_labor_bruteforce(theta, T, prefs, opt.brute);
        if (std::abs(l - lb) > opt.agreement * l)
            throw Error("first-order root " + std::to_string(l) + " disagrees with the brute-force optimum " +
                        std::to_string(lb) + " at skill " + std::to_string(theta) + " (multiple local optima)");
    }
    return l;
}

// Exogenous environment: income grid, preferences, skills and the discretization knobs of the agent side.
struct Economy {
    Grid grid;
    Preferences prefs;
    SkillModel skills;
    std::size_t n_theta = 801;
    double sigma_taper = 0.02;  // fraction of the income span over which sigma is cut off at each end
    FocOptions foc{};
    bool strict = true;  // false lets degenerate nodes through; used for intermediate solver iterates

    Economy(Grid g, Preferences p, SkillModel s, std::size_t nt = 801, double taper = 0.02)
        : grid(g), prefs(p), skills(std::move(s)), n_theta(nt), sigma_taper(taper) {
        require(grid.lo() > 0.0, "income grid must start above zero");
        require(n_theta >= 16, "skills.n below minimum 16");
        require(sigma_taper > 0.0 && sigma_taper < 0.25, "grid.sigma_taper must lie in (0, 0.25)");
    }

    std::vector<double> theta_nodes() const {
        std::vector<double> t(n_theta);
        const double a = skills.theta_min(), b = skills.theta_max();
        for (std::size_t k = 0; k < n_theta; ++k)
            t[k] = k + 1 == n_theta ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(n_theta - 1);
        return t;
    }

    // Trapezoid weights times h(theta), normalized to sum 1.
    std::vector<double> theta_weights() const {
        auto t = theta_nodes();
        std::vector<double> w(n_theta);
        double s = 0.0;
        for (std::size_t k = 0; k < n_theta; ++k) {
            w[k] = ((k == 0 || k + 1 == n_theta) ? 0.5 : 1.0) * skills.density(t[k]);
            s += w[k];
        }
        for (double& x : w) x /= s;
        return w;
    }
};

// Sufficient statistics induced by one tax, frozen at flow time t.
struct EconomySnapshot {
    double t = 0.0;
    GridFunction tax;
    TaxSchedule schedule;
    double e0 = 0.5;

    std::vector<double> theta;
    std::vector<double> labor;
    std::vector<double> y_of_theta;
    std::vector<double> theta_weight;
    std::vector<double> structural_elasticity;

    GridFunction phi;    // income density, unit mass
    GridFunction Phi;    // its running integral
    GridFunction eps;    // compensated income response
    GridFunction p;      // local progressivity
    GridFunction sigma;  // eps * phi with the edge cutoff applied
    std::vector<double> sigma_half;  // the same product evaluated on half-edges from the half-edge slope
    double raw_mass = 1.0;

    const Grid& grid() const { return tax.grid(); }
};

inline GridFunction progressivity(const GridFunction& T) {
    const GridFunction d1 = derivative(T), d2 = second_difference(T);
    const Grid& g = T.grid();
    std::vector<double> p(T.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = 1.0 - d1[i];
        if (r <= 0.0) throw Error("retention rate not positive at y = " + std::to_string(g.node(i)));
        p[i] = g.node(i) * d2[i] / r;
    }
    return GridFunction(g, std::move(p));
}

// Solves every skill node, then maps the skill density onto the income grid through the inverse
// of the agent's first-order condition, using the same grid derivatives that enter eps.
inline EconomySnapshot build_snapshot(const GridFunction& T, const Economy& eco, double t = 0.0) {
    require(T.grid() == eco.grid, "tax lives on a different grid than the economy");
    const Grid& g = eco.grid;
    const double e0 = eco.prefs.e0;
    TaxSchedule sched(T);

    auto theta = eco.theta_nodes();
    std::vector<double> labor(theta.size());
    parallel_for(theta.size(), [&](std::size_t k) { labor[k] = solve_labor_foc(theta[k], sched, eco.prefs, eco.foc); });
    std::vector<double> y(theta.size()), e(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        y[k] = theta[k] * labor[k];
        e[k] = eco.prefs.structural_elasticity(labor[k]);
        if (k > 0 && !(y[k] > y[k - 1])) throw Error("income map not one-to-one: y(theta) fails to increase");
    }

    const GridFunction d1 = derivative(T), d2 = second_difference(T);
    const std::size_t n = g.size();
    std::vector<double> phi(n, 0.0), eps(n, 0.0), pv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double yi = g.node(i);
        const double r = 1.0 - d1[i];
        if (r <= 0.0) throw Error("marginal tax rate reaches 1 at y = " + std::to_string(yi));
        pv[i] = yi * d2[i] / r;
        const double denom = 1.0 + pv[i] * e0;
        const double th = std::pow(std::pow(yi, 1.0 / e0) / r, e0 / (1.0 + e0));
        const bool inside = th > eco.skills.theta_min() && th < eco.skills.theta_max();
        if (!inside) {
            eps[i] = denom > 0.0 ? (yi / r) * e0 / denom : 0.0;
            continue;
        }
        if (denom <= 0.0) {
            if (eco.strict) throw Error("elasticity denominator 1 + p*e not positive at y = " + std::to_string(yi));
            eps[i] = 0.0;
        } else {
            eps[i] = (yi / r) * e0 / denom;
        }
        const double l = yi / th;
        phi[i] = eco.skills.density(th) * denom / ((1.0 + e0) * l);
    }
    GridFunction phi_raw(g, phi);
    const double mass = integrate(phi_raw);
    if (!(std::abs(mass - 1.0) < 1e-3) && eco.strict)
        throw Error("income density mass defect " + std::to_string(mass - 1.0) + " exceeds 1e-3");
    for (double& x : phi) x /= mass;

    GridFunction phi_f(g, std::move(phi));
    GridFunction eps_f(g, std::move(eps));
    GridFunction sigma = eps_f * phi_f * edge_taper(g, eco.sigma_taper);
    GridFunction Phi = cumulative_integral(phi_f);

    // eps * phi = e0 theta h(theta) / ((1 + e0) r): no curvature enters, so each half-edge value
    // depends on that edge's slope alone.
    std::vector<double> sh(n - 1, 0.0);
    const double width = eco.sigma_taper * g.span();
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double ym = 0.5 * (g.node(j) + g.node(j + 1));
        const double r = 1.0 - (T[j + 1] - T[j]) / g.step();
        if (r <= 0.0) throw Error("marginal tax rate reaches 1 at y = " + std::to_string(ym));
        const double th = std::pow(std::pow(ym, 1.0 / e0) / r, e0 / (1.0 + e0));
        if (th <= eco.skills.theta_min() || th >= eco.skills.theta_max()) continue;
        sh[j] = e0 * th * eco.skills.density(th) / ((1.0 + e0) * r) / mass * two_sided_taper(ym, g.lo(), g.hi(), width);
    }

    return EconomySnapshot{t,
                           T,
                           std::move(sched),
                           e0,
                           std::move(theta),
                           std::move(labor),
                           std::move(y),
                           eco.theta_weights(),
                           std::move(e),
                           std::move(phi_f),
                           std::move(Phi),
                           std::move(eps_f),
                           GridFunction(g, std::move(pv)),
                           std::move(sigma),
                           std::move(sh),
                           mass};
}

}  // namespace taxflow
