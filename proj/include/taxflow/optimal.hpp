#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "taxflow/agent.hpp"
#include "taxflow/error.hpp"
#include "taxflow/model.hpp"
#include "taxflow/revenue.hpp"
#include "taxflow/stencil.hpp"

namespace taxflow {

struct OptimalOptions {
    double damping = 0.5;
    double tol = 1e-10;
    std::size_t max_iter = 5000;
    double retention_floor = 0.02;
    double interior_quantile = 0.02;  // the formula is applied where the income c.d.f. exceeds this
    double initial_rate = 0.3;
};

// Mass above each half-edge: S_{j+1/2} = sum_{i>j} V_i phi_i.
inline std::vector<double> tail_mass(const EconomySnapshot& snap) {
    const Grid& g = snap.grid();
    const std::size_t n = g.size();
    std::vector<double> s(n - 1);
    double acc = 0.0;
    for (std::size_t i = n - 1; i >= 1; --i) {
        acc += g.weight(i) * snap.phi[i];
        s[i - 1] = acc;
    }
    return s;
}

struct SaezUpdate {
    std::vector<double> half_slope;  // T' on half-edges
    GridFunction slope;              // same, averaged onto nodes
    std::size_t interior_begin = 0;  // first half-edge where the formula applies
};

namespace detail {

struct SaezTargets {
    std::vector<double> raw;  // (1 - Phi)/sigma on interior half-edges, 0 above the support
    std::vector<double> tail;
    std::vector<double> half_sigma;
    std::size_t begin = 0;
};

inline SaezTargets saez_targets(const EconomySnapshot& snap, double quantile) {
    SaezTargets out;
    out.tail = tail_mass(snap);
    out.half_sigma = snap.sigma_half;
    const std::size_t m = out.tail.size();
    std::size_t b = 0;
    while (b < m && 1.0 - out.tail[b] < quantile) ++b;
    require(b < m, "income distribution has no interior above the configured quantile");
    out.begin = b;
    out.raw.assign(m, 0.0);
    for (std::size_t j = b; j < m; ++j) {
        const double s = out.tail[j];
        if (s <= 1e-14) continue;
        if (!(out.half_sigma[j] > 0.0))
            throw Error("income density below floor on the interior at y = " +
                        std::to_string(snap.grid().node(j)));
        out.raw[j] = s / out.half_sigma[j];
    }
    return out;
}

inline GridFunction half_to_nodes(const Grid& g, const std::vector<double>& half) {
    const std::size_t n = g.size();
    std::vector<double> v(n);
    v[0] = half[0];
    v[n - 1] = half[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) v[i] = 0.5 * (half[i - 1] + half[i]);
    return GridFunction(g, std::move(v));
}

inline GridFunction integrate_slopes(const Grid& g, const std::vector<double>& half, double level = 0.0) {
    std::vector<double> T(g.size());
    T[0] = level;
    for (std::size_t j = 0; j < half.size(); ++j) T[j + 1] = T[j] + g.step() * half[j];
    return GridFunction(g, std::move(T));
}

}  // namespace detail

// T' = (1 - Phi)/(eps phi) on the interior, continued as a constant below it, clipped at the retention floor.
inline SaezUpdate saez_update(const EconomySnapshot& snap, const OptimalOptions& opt = {}) {
    auto tg = detail::saez_targets(snap, opt.interior_quantile);
    std::vector<double> s = tg.raw;
    for (std::size_t j = 0; j < tg.begin; ++j) s[j] = s[tg.begin];
    for (double& x : s) x = std::min(x, 1.0 - opt.retention_floor);
    GridFunction nodes = detail::half_to_nodes(snap.grid(), s);
    return SaezUpdate{std::move(s), std::move(nodes), tg.begin};
}

struct FixedPointReport {
    std::size_t iterations = 0;
    std::vector<double> update_history;
    double foc_residual = 0.0;  // sup over interior half-edges of |sigma T' - (1 - Phi)|
    bool converged = false;
    std::size_t interior_begin = 0;
};

// Integrated first-order condition on the interior half-edges.
inline double flux_residual(const EconomySnapshot& snap, std::size_t begin) {
    const auto tail = tail_mass(snap);
    const auto& half = snap.sigma_half;
    const double h = snap.grid().step();
    double m = 0.0;
    for (std::size_t j = begin; j < tail.size(); ++j)
        m = std::max(m, std::abs(half[j] * (snap.tax[j + 1] - snap.tax[j]) / h - tail[j]));
    return m;
}

struct OptimalResult {
    GridFunction tax;
    EconomySnapshot snapshot;
    FixedPointReport report;
};

// Damped fixed-point iteration on half-edge slopes. Each sweep moves toward
// T'/(1-T') = (1 - Phi)/(sigma r) with r the current retention rate; the fixed point is the
// formula itself, and the retention form keeps the sweep contractive where sigma is small.
inline OptimalResult solve_optimal(const Economy& eco, const OptimalOptions& opt = {}) {
    require(opt.damping > 0.0 && opt.damping <= 1.0, "optimal.damping must lie in (0, 1]");
    require(opt.tol > 0.0, "optimal.tol must be positive");
    require(opt.retention_floor > 0.0 && opt.retention_floor < 1.0, "optimal.retention_floor must lie in (0, 1)");
    require(opt.initial_rate >= 0.0 && opt.initial_rate < 1.0 - opt.retention_floor,
            "optimal.initial_rate must lie below the retention ceiling");
    const Grid& g = eco.grid;
    const double cap = 1.0 - opt.retention_floor;
    std::vector<double> s(g.size() - 1, opt.initial_rate);

    // Intermediate iterates may give some agents a second local optimum; only the final
    // schedule is checked against the brute-force oracle.
    Economy sweep = eco;
    sweep.foc.verify = false;
    sweep.strict = false;

    FixedPointReport rep;
    for (std::size_t it = 1;; ++it) {
        if (it > opt.max_iter)
            throw Error("optimal tax iteration exceeded max_iter = " + std::to_string(opt.max_iter));
        GridFunction T = detail::integrate_slopes(g, s);
        EconomySnapshot snap = build_snapshot(T, sweep);
        auto tg = detail::saez_targets(snap, opt.interior_quantile);
        std::vector<double> next(s.size(), 0.0);
        for (std::size_t j = tg.begin; j < s.size(); ++j) {
            const double G = tg.raw[j] / (1.0 - s[j]);
            next[j] = std::min(G / (1.0 + G), cap);
        }
        for (std::size_t j = 0; j < tg.begin; ++j) next[j] = next[tg.begin];
        double upd = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double d = opt.damping * (next[j] - s[j]);
            s[j] += d;
            upd = std::max(upd, std::abs(d));
        }
        rep.update_history.push_back(upd);
        rep.iterations = it;
        if (upd < opt.tol) {
            // The step size alone can stop short of the certificate where retention is small.
            const double res = flux_residual(build_snapshot(detail::integrate_slopes(g, s), sweep),
                                             detail::saez_targets(snap, opt.interior_quantile).begin);
            if (res < opt.tol) break;
        }
    }

    GridFunction T = detail::integrate_slopes(g, s);
    EconomySnapshot snap = build_snapshot(T, eco);
    auto tg = detail::saez_targets(snap, opt.interior_quantile);
    rep.interior_begin = tg.begin;
    rep.foc_residual = flux_residual(snap, tg.begin);
    rep.converged = rep.foc_residual < 10.0 * opt.tol;
    for (std::size_t j = tg.begin; j < s.size(); ++j)
        if (s[j] >= cap - 1e-12) throw Error("retention floor binds on the interior at y = " + std::to_string(g.node(j)));
    if (!rep.converged)
        throw Error("optimal tax fails its first-order certificate: residual " + std::to_string(rep.foc_residual));
    return OptimalResult{std::move(T), std::move(snap), std::move(rep)};
}

// Node range [begin, end) on which the differential optimality condition is certified.
struct NodeRange {
    std::size_t begin = 0, end = 0;
};

// Income nodes whose five-point stencil for Lambda lies inside the image of the central share of
// skill nodes; this excludes the images of the tapered skill ends and the continuation zone.
inline NodeRange certified_interior(const EconomySnapshot& snap, double share = 0.9) {
    const std::size_t m = snap.theta.size();
    const auto skip = static_cast<std::size_t>(std::floor(0.5 * (1.0 - share) * static_cast<double>(m)));
    const double lo = snap.y_of_theta[skip], hi = snap.y_of_theta[m - 1 - skip];
    const Grid& g = snap.grid();
    NodeRange r{g.size(), 0};
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i < 2 || i + 2 >= g.size() || g.node(i - 2) < lo || g.node(i + 2) > hi) continue;
        r.begin = std::min(r.begin, i);
        r.end = i + 1;
    }
    require(r.end > r.begin, "certified interior is empty");
    return r;
}

// sup |phi + (T' eps phi)'| over the range, relative to sup phi.
inline double foc_residual(const EconomySnapshot& snap, NodeRange r) {
    const GridFunction lam = steepest_direction(snap, snap.tax);
    double m = 0.0;
    for (std::size_t i = r.begin; i < r.end; ++i) m = std::max(m, std::abs(lam[i]));
    return m / sup_norm(snap.phi);
}

struct DiamondReport {
    double max_gap = 0.0;
    double theta_at_max = 0.0;
    double top_lhs = 0.0;  // T'/(1-T') at the top skill
    double top_rhs = 0.0;
};

// Compares T'/(1-T') at y(theta) with (1 + 1/e0)(1 - F)/(theta f) on the central share of skill nodes.
inline DiamondReport diamond_check(const EconomySnapshot& snap, const Economy& eco, double share = 0.9) {
    const std::size_t n = snap.theta.size();
    const auto skip = static_cast<std::size_t>(std::floor(0.5 * (1.0 - share) * static_cast<double>(n)));
    const double e0 = eco.prefs.e0;
    auto lhs = [&](std::size_t k) {
        const double tp = snap.schedule.slope(snap.y_of_theta[k]);
        if (tp >= 1.0) throw Error("marginal rate reaches 1 in the Diamond check");
        return tp / (1.0 - tp);
    };
    DiamondReport rep;
    for (std::size_t k = skip; k + skip < n; ++k) {
        const double th = snap.theta[k];
        const double rhs = (1.0 + 1.0 / e0) * (1.0 - eco.skills.cdf(th)) / (th * eco.skills.density(th));
        const double gap = std::abs(lhs(k) - rhs) / std::abs(rhs);
        if (gap > rep.max_gap) {
            rep.max_gap = gap;
            rep.theta_at_max = th;
        }
    }
    rep.top_lhs = lhs(n - 1);
    rep.top_rhs = 0.0;
    return rep;
}

}  // namespace taxflow
