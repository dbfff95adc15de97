#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

#include "taxflow/agent.hpp"
#include "taxflow/model.hpp"
#include "taxflow/optimal.hpp"

namespace taxflow::testing {

// Default economy on an income grid of n nodes.
inline Economy default_economy(std::size_t n, std::size_t n_theta = 801) {
    return Economy(Grid(0.05, 5.5, n), Preferences(0.5), SkillModel(), n_theta);
}

// Optimum of the default economy, solved once per grid size.
inline const OptimalResult& cached_optimum(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, OptimalResult> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, solve_optimal(default_economy(n))).first;
    return it->second;
}

inline GridFunction linear_tax(const Grid& g, double rate) {
    return GridFunction::sample(g, [&](double y) { return rate * y; });
}

// Half-edge values of a closed-form conductivity.
template <class F>
std::vector<double> half_edges(const Grid& g, F&& sigma) {
    std::vector<double> h(g.size() - 1);
    for (std::size_t j = 0; j + 1 < g.size(); ++j) h[j] = sigma(g.node(j) + 0.5 * g.step());
    return h;
}

// Smooth nonconstant conductivity used by the kernel and spectral suites.
inline double wavy_sigma(double y) { return 1.0 + 0.5 * std::sin(y); }

}  // namespace taxflow::testing
