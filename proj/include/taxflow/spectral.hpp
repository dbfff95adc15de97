#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "taxflow/error.hpp"
#include "taxflow/flow.hpp"
#include "taxflow/model.hpp"
#include "taxflow/stencil.hpp"

namespace taxflow {

// Lowest eigenpairs of H z = -(sigma z')' with zero-flux ends, in the trapezoid-weighted inner product.
struct Spectrum {
    Grid grid;
    std::vector<double> half;
    std::vector<double> values;
    std::vector<GridFunction> functions;  // unit trapezoid L2 norm
};

// Largest run of consecutive positive half-edge conductivities, as a node range [first, last].
inline std::pair<std::size_t, std::size_t> conducting_component(std::span<const double> half) {
    std::size_t best_a = 0, best_len = 0;
    for (std::size_t j = 0; j < half.size();) {
        if (!(half[j] > 0.0)) {
            ++j;
            continue;
        }
        std::size_t e = j;
        while (e < half.size() && half[e] > 0.0) ++e;
        if (e - j > best_len) {
            best_a = j;
            best_len = e - j;
        }
        j = e;
    }
    require(best_len > 0, "conductivity vanishes everywhere");
    return {best_a, best_a + best_len};
}

// Sub-grid and half-edge conductivities of the conducting component.
struct Component {
    Grid grid;
    std::vector<double> half;
    std::size_t offset = 0;  // index of the first component node in the parent grid
};

inline Component restrict_to_component(const Grid& g, std::span<const double> half) {
    const auto [a, b] = conducting_component(half);
    return Component{Grid(g.node(a), g.node(b), b - a + 1),
                     std::vector<double>(half.begin() + static_cast<std::ptrdiff_t>(a),
                                         half.begin() + static_cast<std::ptrdiff_t>(b)),
                     a};
}

namespace detail {

// V^{-1/2} K V^{-1/2} with K the stiffness matrix of the flux stencil.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> symmetric_pencil(const Grid& g, std::span<const double> half) {
    const auto n = static_cast<Eigen::Index>(g.size());
    const double h = g.step();
    Eigen::VectorXd d(n), e(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        double k = 0.0;
        if (u > 0) k += half[u - 1] / h;
        if (u + 1 < g.size()) k += half[u] / h;
        d[i] = k / g.weight(u);
    }
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        e[i] = -half[u] / h / std::sqrt(g.weight(u) * g.weight(u + 1));
    }
    return {d, e};
}

inline void fix_sign(std::vector<double>& v) {
    double ref = 0.0;
    for (double x : v)
        if (std::abs(x) > 1e-8 * sup_norm(v)) {
            ref = x;
            break;
        }
    if (ref < 0.0)
        for (double& x : v) x = -x;
}

}  // namespace detail

// Lowest k + 1 eigenpairs. The conductivity must be positive on every half-edge.
inline Spectrum eigensolve(const Grid& g, std::span<const double> half, std::size_t k) {
    require(half.size() + 1 == g.size(), "half-edge conductivity length does not match grid");
    require(k >= 1 && 4 * k <= g.size(), "number of modes must lie in [1, n/4]");
    for (double c : half)
        require(c > 0.0, "conductivity vanishes on a half-edge; restrict to a conducting component first");
    const auto [d, e] = detail::symmetric_pencil(g, half);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw Error("eigensolver did not converge");
    Spectrum s{g, {half.begin(), half.end()}, {}, {}};
    for (std::size_t j = 0; j <= k; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        s.values.push_back(es.eigenvalues()[col]);
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            v[i] = es.eigenvectors()(static_cast<Eigen::Index>(i), col) / std::sqrt(g.weight(i));
        detail::fix_sign(v);
        s.functions.emplace_back(g, std::move(v));
    }
    return s;
}

inline Spectrum eigensolve(const GridFunction& sigma, std::size_t k) {
    return eigensolve(sigma.grid(), half_node_conductivity(sigma), k);
}

// Discrete quotient sum sigma_{j+1/2} (f'_{j+1/2})^2 h / sum V f^2 for mean-zero f.
inline double rayleigh_quotient(const Grid& g, std::span<const double> half, const GridFunction& f) {
    const double h = g.step();
    double num = 0.0;
    for (std::size_t j = 0; j < half.size(); ++j) {
        const double d = (f[j + 1] - f[j]) / h;
        num += half[j] * d * d * h;
    }
    const double mean = integrate(f) / g.span();
    return num / integrate((f + (-mean)) * (f + (-mean)));
}

// Continuum quotient int sigma f'^2 / int (f - mean)^2 by trapezoid, with f' sampled exactly.
inline double rayleigh_quotient(const GridFunction& sigma, const GridFunction& f, const GridFunction& fprime) {
    const double mean = integrate(f) / f.grid().span();
    const GridFunction c = f + (-mean);
    return integrate(sigma * fprime * fprime) / integrate(c * c);
}

// lambda_1 by inverse iteration on the mean-zero subspace: each solve pins the first node and then
// removes the weighted mean. Independent of the dense eigensolver.
inline double rayleigh_lambda1(const Grid& g, std::span<const double> half, std::size_t max_iter = 500,
                               double tol = 1e-14) {
    const std::size_t n = g.size();
    const double h = g.step();
    for (double c : half) require(c > 0.0, "conductivity vanishes on a half-edge");
    std::vector<double> sub(n, 0.0), dia(n, 0.0), sup(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            sub[i] = -half[i - 1] / h;
            dia[i] += half[i - 1] / h;
        }
        if (i + 1 < n) {
            sup[i] = -half[i] / h;
            dia[i] += half[i] / h;
        }
    }
    // Pin node 0: the pinned system is nonsingular and agrees with K on mean-zero right-hand sides.
    dia[0] = 1.0;
    sup[0] = 0.0;
    auto project = [&](std::vector<double>& x) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += g.weight(i) * x[i];
        m /= g.span();
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] -= m;
            nrm += g.weight(i) * x[i] * x[i];
        }
        nrm = std::sqrt(nrm);
        for (double& v : x) v /= nrm;
    };
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(3.0 * (g.node(i) - g.lo()) / g.span()) + 0.1 * g.node(i);
    project(x);
    double lam = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_iter; ++it) {
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = g.weight(i) * x[i];
        b[0] = 0.0;
        x = solve_tridiagonal(sub, dia, sup, b);
        project(x);
        const double next = rayleigh_quotient(g, half, GridFunction(g, x));
        if (std::abs(next - lam) <= tol * next) return next;
        lam = next;
    }
    return lam;
}

inline double rayleigh_lambda1(const GridFunction& sigma) {
    return rayleigh_lambda1(sigma.grid(), half_node_conductivity(sigma));
}

// Largest step for which every Crank-Nicolson mode factor is bounded by that of the first mode.
inline double decay_step_limit(const DiffusionOperator& op, double lambda1) {
    require(lambda1 > 0.0, "lambda_1 must be positive");
    return 2.0 / std::sqrt(lambda1 * op.spectral_bound());
}

// min over recorded times of exp(-2 lambda1 t) D(0) - D(t), with D(t) = int (T(t) - tau)^2.
inline double decay_certificate(const FrozenRun& run, const GridFunction& tau, double lambda1) {
    require(!run.states.empty() && run.times.size() == run.states.size(), "frozen run is empty");
    require(run.times.front() == 0.0, "frozen run must start at t = 0");
    auto D = [&](const GridFunction& T) {
        const GridFunction z = T - tau;
        return integrate(z * z);
    };
    const double d0 = D(run.states.front());
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < run.states.size(); ++k)
        m = std::min(m, std::exp(-2.0 * lambda1 * run.times[k]) * d0 - D(run.states[k]));
    return m;
}

// Coefficients a_j = <z, eta_j> in the trapezoid inner product.
inline std::vector<double> mode_coefficients(const Spectrum& s, const GridFunction& z) {
    std::vector<double> a;
    for (const auto& eta : s.functions) a.push_back(integrate(z * eta));
    return a;
}

// sum_j a_j exp(-lambda_j t) eta_j.
inline GridFunction series_evolution(const Spectrum& s, std::span<const double> a, double t) {
    std::vector<double> v(s.grid.size(), 0.0);
    for (std::size_t j = 0; j < a.size() && j < s.functions.size(); ++j) {
        const double c = a[j] * std::exp(-s.values[j] * t);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += c * s.functions[j][i];
    }
    return GridFunction(s.grid, std::move(v));
}

}  // namespace taxflow
