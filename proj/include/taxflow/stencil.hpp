#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "taxflow/error.hpp"
#include "taxflow/model.hpp"

namespace taxflow {

// Thomas algorithm: sub[i] multiplies x[i-1], sup[i] multiplies x[i+1].
inline std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                             std::span<const double> sup, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n), x(n);
    double b = diag[0];
    require(b != 0.0, "singular tridiagonal system");
    c[0] = n > 1 ? sup[0] / b : 0.0;
    x[0] = rhs[0] / b;
    for (std::size_t i = 1; i < n; ++i) {
        b = diag[i] - sub[i] * c[i - 1];
        require(b != 0.0, "singular tridiagonal system");
        c[i] = i + 1 < n ? sup[i] / b : 0.0;
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / b;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
}

// Harmonic mean of neighbouring node values; zero if either side vanishes.
inline std::vector<double> half_node_conductivity(const GridFunction& sigma) {
    std::vector<double> s(sigma.size() - 1);
    for (std::size_t j = 0; j + 1 < sigma.size(); ++j) {
        const double a = sigma[j], b = sigma[j + 1];
        require(a >= 0.0 && b >= 0.0, "conductivity must be nonnegative");
        s[j] = (a > 0.0 && b > 0.0) ? 2.0 * a * b / (a + b) : 0.0;
    }
    return s;
}

// Flux-form discretization of u -> (sigma u')' on a uniform grid:
//   (A u)_i = (F_{i+1/2} - F_{i-1/2}) / V_i,  F_{j+1/2} = sigma_{j+1/2} (u_{j+1} - u_j) / h,
// with trapezoid cell volumes V and zero flux through both ends. The first `pinned` rows are
// zeroed, which holds those nodes fixed (a Dirichlet bracket at the bottom).
class DiffusionOperator {
public:
    explicit DiffusionOperator(const GridFunction& sigma, std::size_t pinned = 0)
        : DiffusionOperator(sigma.grid(), half_node_conductivity(sigma), pinned) {}

    // Conductivities given directly on the n-1 half-edges.
    DiffusionOperator(const Grid& grid, std::vector<double> half, std::size_t pinned = 0)
        : grid_(grid), half_(std::move(half)), pinned_(pinned) {
        const std::size_t n = grid_.size();
        require(half_.size() + 1 == n, "half-edge conductivity length does not match grid");
        for (double c : half_) require(std::isfinite(c) && c >= 0.0, "conductivity must be finite and nonnegative");
        require(pinned < n, "pinned bracket covers the whole grid");
        const double h = grid_.step();
        lo_.assign(n, 0.0);
        up_.assign(n, 0.0);
        di_.assign(n, 0.0);
        for (std::size_t i = pinned; i < n; ++i) {
            const double v = grid_.weight(i);
            if (i > 0) lo_[i] = half_[i - 1] / (h * v);
            if (i + 1 < n) up_[i] = half_[i] / (h * v);
            di_[i] = -(lo_[i] + up_[i]);
        }
    }

    const Grid& grid() const { return grid_; }
    std::size_t pinned() const { return pinned_; }
    std::span<const double> half() const { return half_; }
    std::span<const double> lower() const { return lo_; }
    std::span<const double> diagonal() const { return di_; }
    std::span<const double> upper() const { return up_; }

    std::vector<double> apply(std::span<const double> u) const {
        const std::size_t n = u.size();
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = di_[i] * u[i];
            if (i > 0) s += lo_[i] * u[i - 1];
            if (i + 1 < n) s += up_[i] * u[i + 1];
            r[i] = s;
        }
        return r;
    }

    // Transposed operator; advances mass vectors (distributions over nodes).
    std::vector<double> apply_transpose(std::span<const double> p) const {
        const std::size_t n = p.size();
        std::vector<double> r(n);
        for (std::size_t j = 0; j < n; ++j) {
            double s = di_[j] * p[j];
            if (j > 0) s += up_[j - 1] * p[j - 1];
            if (j + 1 < n) s += lo_[j + 1] * p[j + 1];
            r[j] = s;
        }
        return r;
    }

    // theta-scheme step of u' = A u + source (theta = 1/2 Crank-Nicolson, theta = 1 backward Euler).
    std::vector<double> step(std::span<const double> u, double k, double theta,
                             std::span<const double> source = {}) const {
        const std::size_t n = u.size();
        std::vector<double> rhs = apply(u);
        for (std::size_t i = 0; i < n; ++i) {
            rhs[i] = u[i] + (1.0 - theta) * k * rhs[i];
            if (!source.empty() && i >= pinned_) rhs[i] += k * source[i];
        }
        std::vector<double> a(n), b(n), c(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = -theta * k * lo_[i];
            b[i] = 1.0 - theta * k * di_[i];
            c[i] = -theta * k * up_[i];
        }
        return solve_tridiagonal(a, b, c, rhs);
    }

    // Same scheme for the transposed operator.
    std::vector<double> step_transpose(std::span<const double> p, double k, double theta) const {
        const std::size_t n = p.size();
        std::vector<double> rhs = apply_transpose(p);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = p[i] + (1.0 - theta) * k * rhs[i];
        std::vector<double> a(n, 0.0), b(n), c(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j > 0) a[j] = -theta * k * up_[j - 1];
            b[j] = 1.0 - theta * k * di_[j];
            if (j + 1 < n) c[j] = -theta * k * lo_[j + 1];
        }
        return solve_tridiagonal(a, b, c, rhs);
    }

    // Largest Gershgorin bound on the spectrum of -A.
    double spectral_bound() const {
        double m = 0.0;
        for (std::size_t i = 0; i < di_.size(); ++i) m = std::max(m, 2.0 * std::abs(di_[i]));
        return m;
    }

private:
    Grid grid_;
    std::vector<double> half_;
    std::size_t pinned_;
    std::vector<double> lo_, di_, up_;
};

// 1/2 * sum over half-edges of sigma_{j+1/2} ((u - w)')^2 h.
inline double weighted_seminorm(std::span<const double> half, const GridFunction& u, const GridFunction& w) {
    const double h = u.grid().step();
    double s = 0.0;
    for (std::size_t j = 0; j < half.size(); ++j) {
        const double d = ((u[j + 1] - w[j + 1]) - (u[j] - w[j])) / h;
        s += half[j] * d * d * h;
    }
    return 0.5 * s;
}

}  // namespace taxflow
