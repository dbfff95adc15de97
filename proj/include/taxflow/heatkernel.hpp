#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "taxflow/error.hpp"
#include "taxflow/model.hpp"
#include "taxflow/parallel.hpp"
#include "taxflow/stencil.hpp"

namespace taxflow {

struct KernelOptions {
    double cfl = 0.25;              // time step as a multiple of the grid step
    std::size_t startup_steps = 2;  // backward Euler steps before Crank-Nicolson
    double undershoot = 1e-10;      // slices below -undershoot trigger the backward Euler fallback
    double mass_tol = 1e-6;
};

// q_t(x, .) at each requested time, stored as densities on the grid.
struct HeatKernelSolution {
    Grid grid;
    std::size_t source = 0;
    std::vector<double> times;
    std::vector<GridFunction> slices;
    std::vector<double> half;  // conductivity on half-edges
    std::size_t pinned = 0;
    double min_value = 0.0;
    bool fallback = false;  // true if every step was backward Euler
    // Time integral of sum_y p_s(y) w(y) up to each requested time, for an optional weight w.
    std::vector<double> accumulated;

    double x() const { return grid.node(source); }
    double mass(std::size_t k) const { return integrate(slices[k]); }
};

namespace detail {

inline HeatKernelSolution run_kernel(const DiffusionOperator& op, std::size_t source, std::span<const double> times,
                                     const KernelOptions& opt, std::span<const double> weight, bool all_implicit) {
    const Grid& g = op.grid();
    const std::size_t n = g.size();
    std::vector<double> p(n, 0.0);
    p[source] = 1.0;
    const double kmax = opt.cfl * g.step();

    HeatKernelSolution sol{g, source, {times.begin(), times.end()}, {}, {op.half().begin(), op.half().end()},
                           op.pinned(), 0.0, all_implicit, {}};
    double t = 0.0, acc = 0.0;
    std::size_t steps = 0;
    for (double target : times) {
        const double gap = target - t;
        const auto m = gap > 0.0 ? static_cast<std::size_t>(std::ceil(gap / kmax - 1e-9)) : 0;
        for (std::size_t j = 0; j < m; ++j) {
            const double k = gap / static_cast<double>(m);
            const double theta = (all_implicit || steps < opt.startup_steps) ? 1.0 : 0.5;
            std::vector<double> next = op.step_transpose(p, k, theta);
            if (!weight.empty()) {
                double a = 0.0, b = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    a += p[i] * weight[i];
                    b += next[i] * weight[i];
                }
                acc += k * ((1.0 - theta) * a + theta * b);
            }
            p = std::move(next);
            ++steps;
            double mass = 0.0;
            for (double v : p) mass += v;
            if (std::abs(mass - 1.0) > opt.mass_tol)
                throw Error("heat kernel mass drifted to " + std::to_string(mass) + " at t = " + std::to_string(t));
        }
        t = target;
        std::vector<double> q(n);
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = p[i] / g.weight(i);
            sol.min_value = std::min(sol.min_value, q[i]);
        }
        sol.slices.emplace_back(g, std::move(q));
        sol.accumulated.push_back(acc);
    }
    return sol;
}

}  // namespace detail

// Forward equation for the mass distribution started from a unit mass at `source`. Crank-Nicolson
// after a backward Euler startup; falls back to backward Euler throughout if a slice undershoots.
inline HeatKernelSolution solve_kernel(const DiffusionOperator& op, std::size_t source, std::span<const double> times,
                                       const KernelOptions& opt = {}, std::span<const double> weight = {}) {
    const Grid& g = op.grid();
    require(source < g.size(), "kernel source outside grid");
    require(opt.cfl > 0.0, "kernel.cfl must be positive");
    require(weight.empty() || weight.size() == g.size(), "accumulation weight length does not match grid");
    for (std::size_t k = 0; k < times.size(); ++k) {
        require(std::isfinite(times[k]) && times[k] >= 0.0, "kernel times must be finite and nonnegative");
        require(k == 0 || times[k] > times[k - 1], "kernel times must be strictly ascending");
    }
    auto sol = detail::run_kernel(op, source, times, opt, weight, false);
    if (sol.min_value < -opt.undershoot) sol = detail::run_kernel(op, source, times, opt, weight, true);
    return sol;
}

inline HeatKernelSolution solve_kernel(const GridFunction& sigma, std::size_t source, std::span<const double> times,
                                       const KernelOptions& opt = {}) {
    return solve_kernel(DiffusionOperator(sigma), source, times, opt);
}

// L1 norm of q_{t+s}(x, .) - int q_t(x, z) q_s(z, .) dz, with q_s(z, .) solved from every node z.
inline double semigroup_residual(const DiffusionOperator& op, std::size_t source, double t, double s,
                                 const KernelOptions& opt = {}, std::size_t max_nodes = 2001) {
    const Grid& g = op.grid();
    const std::size_t n = g.size();
    require(n <= max_nodes, "full-matrix mode disabled for this grid size");
    require(t >= 0.0 && s > 0.0, "semigroup times must be nonnegative with s > 0");
    std::vector<double> ts;
    if (t > 0.0) ts.push_back(t);
    ts.push_back(t + s);
    const auto direct = solve_kernel(op, source, ts, opt);
    std::vector<double> qt(n, 0.0);
    if (t > 0.0)
        qt = direct.slices.front().vec();
    else
        qt[source] = 1.0 / g.weight(source);

    std::vector<std::vector<double>> qs(n);
    const double single[] = {s};
    parallel_for(n, [&](std::size_t z) { qs[z] = solve_kernel(op, z, single, opt).slices.front().vec(); });

    const GridFunction& target = direct.slices.back();
    double res = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
        double c = 0.0;
        for (std::size_t z = 0; z < n; ++z) c += g.weight(z) * qt[z] * qs[z][y];
        res += g.weight(y) * std::abs(target[y] - c);
    }
    return res;
}

// (4 pi sigma(x) t)^(-1/2) exp(-(y - x - sigma'(x) t)^2 / (4 sigma(x) t)).
inline GridFunction small_time_gaussian(const Grid& g, double sx, double dsx, double x, double t) {
    require(sx > 0.0, "conductivity vanishes at the kernel source");
    require(t > 0.0, "gaussian time must be positive");
    const double var = 4.0 * sx * t;
    return GridFunction::sample(g, [&](double y) {
        const double d = y - x - dsx * t;
        return std::exp(-d * d / var) / std::sqrt(std::numbers::pi * var);
    });
}

inline GridFunction small_time_gaussian(const GridFunction& sigma, std::size_t source, double t) {
    return small_time_gaussian(sigma.grid(), sigma[source], derivative(sigma)[source], sigma.grid().node(source), t);
}

// Same, with sigma and sigma' at the node read off the two adjacent half-edges.
inline GridFunction small_time_gaussian(const DiffusionOperator& op, std::size_t source, double t) {
    const Grid& g = op.grid();
    require(source > 0 && source + 1 < g.size(), "kernel source must be an interior node");
    const auto half = op.half();
    const double sx = 0.5 * (half[source - 1] + half[source]);
    const double dsx = (half[source] - half[source - 1]) / g.step();
    return small_time_gaussian(g, sx, dsx, g.node(source), t);
}

inline double l1_distance(const GridFunction& a, const GridFunction& b) {
    const GridFunction d = a - b;
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += d.grid().weight(i) * std::abs(d[i]);
    return s;
}

// q_t(x, y) <= c1 t^(-1/2) exp(c2 t) exp(-c3 (x - y)^2 / t).
struct GaussianBound {
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;
};

struct BoundSample {
    double t, d2, logq;
};

namespace detail {

// Points used by the bound: t >= 4 h^2 and q above a fraction of the slice maximum.
inline std::vector<BoundSample> bound_samples(const HeatKernelSolution& sol, double floor_rel) {
    const Grid& g = sol.grid;
    const double h = g.step();
    std::vector<BoundSample> out;
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        const double t = sol.times[k];
        if (t < 4.0 * h * h) continue;
        const GridFunction& q = sol.slices[k];
        const double floor = floor_rel * sup_norm(q);
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (q[i] <= floor || q[i] <= 0.0) continue;
            const double d = g.node(i) - sol.x();
            out.push_back({t, d * d, std::log(q[i])});
        }
    }
    return out;
}

}  // namespace detail

// min over (t, y) of log RHS - log q_t(x, y); nonnegative certifies the bound.
inline double gaussian_bound_margin(const HeatKernelSolution& sol, const GaussianBound& c, double floor_rel = 1e-6) {
    require(c.c1 > 0.0 && c.c3 > 0.0, "gaussian bound constants c1 and c3 must be positive");
    const auto pts = detail::bound_samples(sol, floor_rel);
    require(!pts.empty(), "no kernel values above the bound floor");
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        const double rhs = std::log(c.c1) - 0.5 * std::log(p.t) + c.c2 * p.t - c.c3 * p.d2 / p.t;
        m = std::min(m, rhs - p.logq);
    }
    return m;
}

// Least squares for log q + log(t)/2 = a + c2 t - c3 d^2/t, then c1 raised until the bound holds.
inline GaussianBound fit_gaussian_bound(const HeatKernelSolution& sol, double floor_rel = 1e-6) {
    const auto pts = detail::bound_samples(sol, floor_rel);
    require(pts.size() >= 3, "too few kernel values to fit a gaussian bound");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(pts.size()), 3);
    Eigen::VectorXd b(A.rows());
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        const auto& p = pts[static_cast<std::size_t>(r)];
        A.row(r) << 1.0, p.t, -p.d2 / p.t;
        b[r] = p.logq + 0.5 * std::log(p.t);
    }
    const Eigen::Vector3d x = A.colPivHouseholderQr().solve(b);
    GaussianBound gb{0.0, x[1], x[2]};
    require(gb.c3 > 0.0, "fitted gaussian bound has no decay in distance");
    double shift = -std::numeric_limits<double>::infinity();
    for (const auto& p : pts) shift = std::max(shift, p.logq + 0.5 * std::log(p.t) - gb.c2 * p.t + gb.c3 * p.d2 / p.t);
    gb.c1 = std::exp(shift) * (1.0 + 1e-12);
    return gb;
}

}  // namespace taxflow
