#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "taxflow/agent.hpp"
#include "taxflow/error.hpp"
#include "taxflow/heatkernel.hpp"
#include "taxflow/model.hpp"
#include "taxflow/parallel.hpp"
#include "taxflow/revenue.hpp"
#include "taxflow/stencil.hpp"

namespace taxflow {

// `pinned` holds the lowest nodes fixed. `outflow` removes the total source mass at the bottom
// node so that the zero-flux problem has a stationary state.
struct FlowBoundary {
    std::size_t pinned = 0;
    bool outflow = false;
};

struct FrozenStepOptions {
    std::size_t substeps = 1;
    std::size_t startup_steps = 0;  // leading backward Euler substeps
    FlowBoundary boundary{};
};

inline std::vector<double> flow_source(const Grid& g, std::span<const double> phi, const FlowBoundary& b) {
    std::vector<double> s(phi.begin(), phi.end());
    for (std::size_t i = 0; i < std::min(b.pinned, s.size()); ++i) s[i] = 0.0;
    if (b.outflow) {
        require(b.pinned == 0, "outflow boundary cannot be combined with pinned nodes");
        double m = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) m += g.weight(i) * s[i];
        s[0] -= m / g.weight(0);
    }
    return s;
}

inline DiffusionOperator flow_operator(const EconomySnapshot& snap, const FlowBoundary& b) {
    return DiffusionOperator(snap.grid(), snap.sigma_half, b.pinned);
}

// Advances u_t = A u + source over dt in equal substeps.
inline GridFunction frozen_step(const DiffusionOperator& op, std::span<const double> source, const GridFunction& T,
                                double dt, std::size_t substeps = 1, std::size_t startup_steps = 0) {
    require(dt > 0.0, "flow step must be positive");
    require(substeps >= 1, "flow substeps must be at least 1");
    require(T.grid() == op.grid(), "tax and operator live on different grids");
    const double k = dt / static_cast<double>(substeps);
    std::vector<double> u = T.vec();
    for (std::size_t j = 0; j < substeps; ++j) u = op.step(u, k, j < startup_steps ? 1.0 : 0.5, source);
    for (double x : u) require(std::isfinite(x), "flow step produced a non-finite value");
    return GridFunction(op.grid(), std::move(u));
}

// T_t = phi + (sigma T')' with the snapshot's statistics held fixed.
inline GridFunction frozen_step(const GridFunction& T, const EconomySnapshot& snap, double dt,
                                const FrozenStepOptions& opt = {}) {
    const auto op = flow_operator(snap, opt.boundary);
    const auto src = flow_source(snap.grid(), snap.phi.values(), opt.boundary);
    return frozen_step(op, src, T, dt, opt.substeps, opt.startup_steps);
}

// States of a frozen-statistics run recorded after every step.
struct FrozenRun {
    std::vector<double> times;
    std::vector<GridFunction> states;
};

// Crank-Nicolson steps of size k, keeping every `record_every`-th state and the last.
inline FrozenRun run_frozen(const DiffusionOperator& op, std::span<const double> source, const GridFunction& T0,
                            double k, std::size_t steps, std::size_t record_every = 1) {
    require(record_every >= 1, "record interval must be at least 1");
    FrozenRun run{{0.0}, {T0}};
    GridFunction T = T0;
    for (std::size_t j = 1; j <= steps; ++j) {
        T = frozen_step(op, source, T, k);
        if (j % record_every == 0 || j == steps) {
            run.states.push_back(T);
            run.times.push_back(k * static_cast<double>(j));
        }
    }
    return run;
}

struct StationaryReference {
    GridFunction tau;
    std::size_t begin = 0;  // first half-edge where sigma tau' matches the tail mass
    double residual = 0.0;  // sup of |A tau + source| on the rows it governs
};

// Solves 0 = source + (sigma tau')' with zero flux at the top: sigma tau' equals the source mass
// above each half-edge from `begin` on. Below `begin` tau copies `prefix` slopes.
inline StationaryReference stationary_tau(const DiffusionOperator& op, std::span<const double> source, double level,
                                          std::size_t begin, std::span<const double> prefix = {},
                                          double tol = 1e-6) {
    const Grid& g = op.grid();
    const std::size_t n = g.size();
    const auto half = op.half();
    require(prefix.size() >= begin, "stationary reference needs slopes below its first half-edge");
    std::vector<double> slope(n - 1, 0.0);
    double tail = 0.0;
    for (std::size_t j = n - 1; j-- > 0;) {
        tail += g.weight(j + 1) * source[j + 1];
        if (j < begin) {
            slope[j] = prefix[j];
        } else if (std::abs(tail) > 1e-14) {
            if (!(half[j] > 0.0))
                throw Error("conductivity vanishes on the interior at y = " + std::to_string(g.node(j)));
            slope[j] = tail / half[j];
        }
    }
    std::vector<double> tau(n);
    tau[0] = level;
    for (std::size_t j = 0; j + 1 < n; ++j) tau[j + 1] = tau[j] + g.step() * slope[j];
    StationaryReference ref{GridFunction(g, std::move(tau)), begin, 0.0};
    const auto r = op.apply(ref.tau.values());
    for (std::size_t i = begin + 1; i < n; ++i) ref.residual = std::max(ref.residual, std::abs(r[i] + source[i]));
    if (ref.residual >= tol) throw Error("stationary reference residual " + std::to_string(ref.residual));
    return ref;
}

// First half-edge with positive conductivity.
inline std::size_t first_conducting_edge(const EconomySnapshot& snap) {
    const auto& h = snap.sigma_half;
    auto it = std::find_if(h.begin(), h.end(), [](double c) { return c > 0.0; });
    require(it != h.end(), "conductivity vanishes everywhere");
    return static_cast<std::size_t>(it - h.begin());
}

// tau of a snapshot: tau' = (1 - Phi)/sigma from `begin`, the snapshot's own slopes below, and
// tau(y_min) = T(y_min). Pin begin + 1 nodes when stepping toward it.
inline StationaryReference stationary_tau(const EconomySnapshot& snap, std::size_t begin) {
    const Grid& g = snap.grid();
    std::vector<double> prefix(begin);
    for (std::size_t j = 0; j < begin; ++j) prefix[j] = (snap.tax[j + 1] - snap.tax[j]) / g.step();
    const FlowBoundary b{begin + 1, false};
    return stationary_tau(flow_operator(snap, b), flow_source(g, snap.phi.values(), b), snap.tax.front(), begin,
                          prefix);
}

inline StationaryReference stationary_tau(const EconomySnapshot& snap) {
    return stationary_tau(snap, first_conducting_edge(snap));
}

// J(T) = 1/2 int sigma ((T - tau)')^2.
inline double sobolev_functional(const GridFunction& T, const EconomySnapshot& snap, const GridFunction& tau) {
    return weighted_seminorm(snap.sigma_half, T, tau);
}

// Largest outer step for which the frozen split stays within the explicit stability scale.
inline double splitting_step_scale(const EconomySnapshot& snap) {
    const double m = *std::max_element(snap.sigma_half.begin(), snap.sigma_half.end());
    require(m > 0.0, "conductivity vanishes everywhere");
    const double h = snap.grid().step();
    return h * h / (2.0 * m);
}

struct FlowState {
    double t = 0.0;
    GridFunction tax;
    EconomySnapshot snapshot;
    double revenue = 0.0;
};

struct FlowTrajectory {
    std::vector<FlowState> states;
    double dt_outer = 0.0;
    double dt_inner = 0.0;
    bool completed = false;
    std::string diagnostic;  // reason for stopping early
};

struct EvolveOptions {
    double t_end = 0.0;
    double dt_outer = 0.0;
    std::size_t substeps = 4;
    std::size_t startup_steps = 0;
    FlowBoundary boundary{};
};

// Lie splitting: freeze statistics, take a heat step, rebuild the snapshot. A failed rebuild ends
// the run with the states so far and a diagnostic.
inline FlowTrajectory evolve(const GridFunction& T0, const Economy& eco, const EvolveOptions& opt) {
    require(opt.dt_outer > 0.0, "flow.dt_outer must be positive");
    require(opt.t_end > 0.0, "flow end time must be positive");
    const double ratio = opt.t_end / opt.dt_outer;
    const auto steps = static_cast<std::size_t>(std::llround(ratio));
    require(steps >= 1 && std::abs(ratio - static_cast<double>(steps)) < 1e-9 * ratio,
            "flow end time must be a whole number of outer steps");
    FlowTrajectory tr;
    tr.dt_outer = opt.dt_outer;
    tr.dt_inner = opt.dt_outer / static_cast<double>(opt.substeps);
    {
        EconomySnapshot s0 = build_snapshot(T0, eco, 0.0);
        const double r0 = revenue(s0);
        tr.states.push_back(FlowState{0.0, T0, std::move(s0), r0});
    }
    const FrozenStepOptions fo{opt.substeps, opt.startup_steps, opt.boundary};
    for (std::size_t k = 1; k <= steps; ++k) {
        const FlowState& cur = tr.states.back();
        const double t = opt.dt_outer * static_cast<double>(k);
        try {
            GridFunction T = frozen_step(cur.tax, cur.snapshot, opt.dt_outer, fo);
            EconomySnapshot s = build_snapshot(T, eco, t);
            const double r = revenue(s);
            tr.states.push_back(FlowState{t, std::move(T), std::move(s), r});
        } catch (const std::exception& e) {
            tr.diagnostic = "outer step " + std::to_string(k) + " at t = " + std::to_string(t) + ": " + e.what();
            return tr;
        }
    }
    tr.completed = true;
    return tr;
}

// sigma(x) and sigma'(x) at a node from the two adjacent half-edges.
inline std::pair<double, double> node_conductivity(const EconomySnapshot& snap, std::size_t i) {
    const Grid& g = snap.grid();
    require(i > 0 && i + 1 < g.size(), "prediction point must be an interior node");
    const auto& h = snap.sigma_half;
    return {0.5 * (h[i - 1] + h[i]), (h[i] - h[i - 1]) / g.step()};
}

// dt phi(x) + int G(y) T(y) dy with G Gaussian of mean x + sigma'(x) dt and variance 2 sigma(x) dt.
inline double short_time_prediction(const GridFunction& T, const EconomySnapshot& snap, double dt, std::size_t i) {
    require(dt > 0.0, "prediction step must be positive");
    const auto [sx, dsx] = node_conductivity(snap, i);
    const GridFunction G = small_time_gaussian(T.grid(), sx, dsx, T.grid().node(i), dt);
    const double mass = integrate(G);
    if (std::abs(mass - 1.0) > 1e-4)
        throw Error("gaussian mass on grid is " + std::to_string(mass) + " at y = " + std::to_string(T.grid().node(i)));
    return dt * snap.phi[i] + integrate(G * T);
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

struct FeynmanKacOptions {
    std::size_t paths = 100000;
    std::size_t substeps = 20;
    std::uint64_t seed = 1;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline double reflect(double y, double lo, double hi) {
    const double w = hi - lo;
    double u = std::fmod(y - lo, 2.0 * w);
    if (u < 0.0) u += 2.0 * w;
    return u <= w ? lo + u : hi - (u - w);
}

}  // namespace detail

// E[int_0^dt phi(B_s) ds + T(B_dt)] for dB = sigma'(B) ds + sqrt(2 sigma(B)) dW, reflected at the
// grid ends, by Euler-Maruyama. Each path has its own stream keyed by (seed, path index), so the
// estimate does not depend on the thread count.
inline MonteCarloEstimate feynman_kac_estimate(const GridFunction& T, const EconomySnapshot& snap, double dt,
                                               std::size_t i, const FeynmanKacOptions& opt = {}) {
    const Grid& g = snap.grid();
    require(T.grid() == g, "tax and snapshot live on different grids");
    require(opt.paths >= 2, "at least two paths are needed");
    require(opt.substeps >= 20, "Euler-Maruyama needs at least 20 substeps per step");
    require(dt > 0.0, "estimate step must be positive");
    const std::size_t n = g.size();
    std::vector<double> sig(n), dsig(n);
    const auto& h = snap.sigma_half;
    for (std::size_t j = 0; j < n; ++j) {
        const double a = j > 0 ? h[j - 1] : h[0];
        const double b = j + 1 < n ? h[j] : h[n - 2];
        sig[j] = 0.5 * (a + b);
        dsig[j] = (j > 0 && j + 1 < n) ? (b - a) / g.step() : 0.0;
    }
    const GridFunction S(g, sig), dS(g, dsig);
    const double ds = dt / static_cast<double>(opt.substeps);
    const double x0 = g.node(i);
    std::vector<double> out(opt.paths);
    parallel_for(opt.paths, [&](std::size_t p) {
        std::mt19937_64 rng(detail::splitmix64(opt.seed ^ detail::splitmix64(p)));
        std::normal_distribution<double> nd;
        double y = x0, acc = 0.0;
        double f = interpolate(snap.phi, y);
        for (std::size_t k = 0; k < opt.substeps; ++k) {
            const double s = std::max(interpolate(S, y), 0.0);
            y += interpolate(dS, y) * ds + std::sqrt(2.0 * s * ds) * nd(rng);
            y = detail::reflect(y, g.lo(), g.hi());
            if (!g.contains(y)) throw Error("Monte Carlo path left the grid after reflection");
            const double f1 = interpolate(snap.phi, y);
            acc += 0.5 * ds * (f + f1);
            f = f1;
        }
        out[p] = acc + interpolate(T, y);
    });
    double m = 0.0;
    for (double v : out) m += v;
    m /= static_cast<double>(out.size());
    double var = 0.0;
    for (double v : out) var += (v - m) * (v - m);
    var /= static_cast<double>(out.size() - 1);
    return {m, std::sqrt(var / static_cast<double>(out.size()))};
}

}  // namespace taxflow
