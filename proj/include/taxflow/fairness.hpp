#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "taxflow/agent.hpp"
#include "taxflow/error.hpp"
#include "taxflow/heatkernel.hpp"
#include "taxflow/model.hpp"
#include "taxflow/parallel.hpp"
#include "taxflow/stencil.hpp"

namespace taxflow {

struct FairnessOptions {
    std::size_t probes = 5;
    double probe_share = 0.8;     // probes spread over this central share of the grid
    double time_fraction = 0.05;  // largest time as a fraction of span^2
    std::vector<double> time_multipliers{0.125, 0.25, 0.5, 1.0};
    KernelOptions kernel{};
};

// Kernel of the operator built from the snapshot, with its source term accumulated in time. The
// first `pinned` nodes absorb: neither the operator nor the source acts there.
inline HeatKernelSolution fairness_kernel(const EconomySnapshot& snap, std::size_t pinned, std::size_t source,
                                          std::span<const double> times, const KernelOptions& opt = {}) {
    const DiffusionOperator op(snap.grid(), snap.sigma_half, pinned);
    std::vector<double> w(snap.phi.vec());
    for (std::size_t i = 0; i < std::min(pinned, w.size()); ++i) w[i] = 0.0;
    return solve_kernel(op, source, times, opt, w);
}

// Right-hand side of the invariance identity at ladder index k:
//   int_0^t int q_s(x, y) phi(y) dy ds + int q_t(x, y) T(y) dy.
inline double fairness_average(const HeatKernelSolution& ker, const GridFunction& T, std::size_t k) {
    require(T.grid() == ker.grid, "tax and kernel live on different grids");
    return ker.accumulated[k] + integrate(ker.slices[k] * T);
}

inline void check_kernel_matches(const HeatKernelSolution& ker, const EconomySnapshot& snap) {
    require(ker.grid == snap.grid() && ker.half == snap.sigma_half, "kernel conductivity does not match snapshot");
}

// |T(x) - average| at ladder index k.
inline double fairness_residual(const GridFunction& T, const EconomySnapshot& snap, const HeatKernelSolution& ker,
                                std::size_t k) {
    check_kernel_matches(ker, snap);
    return std::abs(T[ker.source] - fairness_average(ker, T, k));
}

// |T'(x) - d/dx average| with the x-derivative taken across the kernels at the two neighbouring sources.
inline double marginal_fairness_residual(const GridFunction& T, const EconomySnapshot& snap,
                                         const HeatKernelSolution& below, const HeatKernelSolution& above,
                                         std::size_t k) {
    check_kernel_matches(below, snap);
    check_kernel_matches(above, snap);
    require(above.source == below.source + 2, "marginal residual needs kernels at x - h and x + h");
    const double h = T.grid().step();
    const double d_avg = (fairness_average(above, T, k) - fairness_average(below, T, k)) / (2.0 * h);
    const double d_tax = (T[above.source] - T[below.source]) / (2.0 * h);
    return std::abs(d_tax - d_avg);
}

struct FairnessPoint {
    std::size_t node = 0;
    double x = 0.0;
    double t = 0.0;
    double mechanical = 0.0;  // time integral of the averaged density
    double averaging = 0.0;   // kernel average of the tax
    double residual = 0.0;
    double marginal_residual = 0.0;
};

struct FairnessReport {
    std::vector<std::size_t> probes;
    std::vector<double> times;
    std::vector<FairnessPoint> points;  // probe-major
    std::size_t pinned = 0;
    double tax_scale = 0.0;    // sup |T|
    double slope_scale = 0.0;  // sup |T'|

    double max_residual() const {
        double m = 0.0;
        for (const auto& p : points) m = std::max(m, p.residual);
        return m;
    }
    double max_marginal_residual() const {
        double m = 0.0;
        for (const auto& p : points) m = std::max(m, p.marginal_residual);
        return m;
    }
    // Largest spread over times of mechanical + averaging at a fixed probe.
    double max_time_spread() const {
        double m = 0.0;
        for (std::size_t a = 0; a < probes.size(); ++a) {
            double lo = 1e300, hi = -1e300;
            for (std::size_t k = 0; k < times.size(); ++k) {
                const auto& p = points[a * times.size() + k];
                lo = std::min(lo, p.mechanical + p.averaging);
                hi = std::max(hi, p.mechanical + p.averaging);
            }
            m = std::max(m, hi - lo);
        }
        return m;
    }
};

inline std::vector<std::size_t> fairness_probes(const Grid& g, const FairnessOptions& opt = {}) {
    require(opt.probes >= 1, "fairness.probes must be at least 1");
    require(opt.probe_share > 0.0 && opt.probe_share < 1.0, "probe share must lie in (0, 1)");
    std::vector<std::size_t> out;
    const double a = 0.5 * (1.0 - opt.probe_share);
    for (std::size_t j = 0; j < opt.probes; ++j) {
        const double f =
            opt.probes == 1 ? 0.5 : a + opt.probe_share * static_cast<double>(j) / static_cast<double>(opt.probes - 1);
        out.push_back(g.nearest(g.lo() + f * g.span()));
    }
    return out;
}

inline std::vector<double> fairness_times(const Grid& g, const FairnessOptions& opt = {}) {
    require(opt.time_fraction > 0.0, "fairness.time_fraction must be positive");
    std::vector<double> t;
    for (double m : opt.time_multipliers) t.push_back(m * opt.time_fraction * g.span() * g.span());
    std::sort(t.begin(), t.end());
    return t;
}

// Evaluates both residuals on the probe lattice. `pinned` absorbing nodes cover the zone where the
// tax was continued rather than solved for.
inline FairnessReport fairness_report(const GridFunction& T, const EconomySnapshot& snap, std::size_t pinned,
                                      std::span<const std::size_t> probes, std::span<const double> times,
                                      const KernelOptions& kopt = {}) {
    const Grid& g = snap.grid();
    require(T.grid() == g, "tax and snapshot live on different grids");
    for (std::size_t i : probes)
        require(i > pinned && i + 1 < g.size(), "fairness probe too close to the pinned zone or the top edge");
    FairnessReport rep;
    rep.probes.assign(probes.begin(), probes.end());
    rep.times.assign(times.begin(), times.end());
    rep.pinned = pinned;
    rep.tax_scale = sup_norm(T);
    rep.slope_scale = sup_norm(derivative(T));
    rep.points.resize(probes.size() * times.size());

    parallel_for(probes.size(), [&](std::size_t a) {
        const std::size_t i = probes[a];
        const auto mid = fairness_kernel(snap, pinned, i, times, kopt);
        const auto lo = fairness_kernel(snap, pinned, i - 1, times, kopt);
        const auto hi = fairness_kernel(snap, pinned, i + 1, times, kopt);
        for (std::size_t k = 0; k < times.size(); ++k) {
            FairnessPoint& p = rep.points[a * times.size() + k];
            p.node = i;
            p.x = g.node(i);
            p.t = times[k];
            p.mechanical = mid.accumulated[k];
            p.averaging = integrate(mid.slices[k] * T);
            p.residual = fairness_residual(T, snap, mid, k);
            p.marginal_residual = marginal_fairness_residual(T, snap, lo, hi, k);
        }
    });
    return rep;
}

}  // namespace taxflow
