#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "taxflow/error.hpp"

namespace taxflow {

// Uniform mesh on [lo, hi]. Income grids additionally require lo > 0 (see Economy).
class Grid {
public:
    Grid(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi), n_(n) {
        require(std::isfinite(lo) && std::isfinite(hi), "grid bounds must be finite");
        require(lo >= 0.0, "grid lower bound must be nonnegative");
        require(hi > lo, "grid upper bound must exceed lower bound");
        require(n >= 16, "grid.n below minimum 16");
        h_ = (hi - lo) / static_cast<double>(n - 1);
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    std::size_t size() const { return n_; }
    double step() const { return h_; }
    double span() const { return hi_ - lo_; }

    double node(std::size_t i) const {
        return i + 1 == n_ ? hi_ : lo_ + h_ * static_cast<double>(i);
    }

    // Trapezoid weight of node i.
    double weight(std::size_t i) const { return (i == 0 || i + 1 == n_) ? 0.5 * h_ : h_; }

    std::vector<double> nodes() const {
        std::vector<double> y(n_);
        for (std::size_t i = 0; i < n_; ++i) y[i] = node(i);
        return y;
    }

    std::vector<double> weights() const {
        std::vector<double> w(n_);
        for (std::size_t i = 0; i < n_; ++i) w[i] = weight(i);
        return w;
    }

    bool contains(double y) const { return y >= lo_ && y <= hi_; }

    // Nearest node index.
    std::size_t nearest(double y) const {
        double s = std::round((y - lo_) / h_);
        s = std::clamp(s, 0.0, static_cast<double>(n_ - 1));
        return static_cast<std::size_t>(s);
    }

    bool operator==(const Grid& o) const { return lo_ == o.lo_ && hi_ == o.hi_ && n_ == o.n_; }

private:
    double lo_, hi_;
    std::size_t n_;
    double h_;
};

// Values sampled at the nodes of a Grid. Non-finite values are rejected on construction.
class GridFunction {
public:
    GridFunction(Grid grid, std::vector<double> values) : grid_(grid), v_(std::move(values)) {
        require(v_.size() == grid_.size(), "grid function length does not match grid");
        for (double x : v_) require(std::isfinite(x), "grid function has a non-finite value");
    }

    explicit GridFunction(Grid grid, double c = 0.0) : grid_(grid), v_(grid.size(), c) {
        require(std::isfinite(c), "grid function has a non-finite value");
    }

    template <class F>
    static GridFunction sample(const Grid& g, F&& f) {
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g.node(i));
        return GridFunction(g, std::move(v));
    }

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    std::span<const double> values() const { return v_; }
    const std::vector<double>& vec() const { return v_; }
    double front() const { return v_.front(); }
    double back() const { return v_.back(); }

    GridFunction operator+(const GridFunction& o) const { return zip(o, [](double a, double b) { return a + b; }); }
    GridFunction operator-(const GridFunction& o) const { return zip(o, [](double a, double b) { return a - b; }); }
    GridFunction operator*(const GridFunction& o) const { return zip(o, [](double a, double b) { return a * b; }); }
    GridFunction operator*(double c) const {
        std::vector<double> r(v_);
        for (double& x : r) x *= c;
        return GridFunction(grid_, std::move(r));
    }
    GridFunction operator+(double c) const {
        std::vector<double> r(v_);
        for (double& x : r) x += c;
        return GridFunction(grid_, std::move(r));
    }

    bool operator==(const GridFunction& o) const { return grid_ == o.grid_ && v_ == o.v_; }

private:
    template <class Op>
    GridFunction zip(const GridFunction& o, Op op) const {
        require(grid_ == o.grid_, "grid functions live on different grids");
        std::vector<double> r(v_.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = op(v_[i], o.v_[i]);
        return GridFunction(grid_, std::move(r));
    }

    Grid grid_;
    std::vector<double> v_;
};

inline GridFunction operator*(double c, const GridFunction& f) { return f * c; }

// Second-order central differences, one-sided second order at the ends.
inline GridFunction derivative(const GridFunction& f) {
    const std::size_t n = f.size();
    require(n >= 3, "derivative needs at least 3 nodes");
    const double h = f.grid().step();
    std::vector<double> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    return GridFunction(f.grid(), std::move(d));
}

// Three-point second difference; the end values copy their neighbours.
inline GridFunction second_difference(const GridFunction& f) {
    const std::size_t n = f.size();
    require(n >= 3, "second difference needs at least 3 nodes");
    const double h2 = f.grid().step() * f.grid().step();
    std::vector<double> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    return GridFunction(f.grid(), std::move(d));
}

inline double integrate(const GridFunction& f) {
    const Grid& g = f.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += g.weight(i) * f[i];
    return s;
}

// Running trapezoid integral from the lower end; zero at the first node.
inline GridFunction cumulative_integral(const GridFunction& f) {
    const double h = f.grid().step();
    std::vector<double> c(f.size(), 0.0);
    for (std::size_t i = 1; i < f.size(); ++i) c[i] = c[i - 1] + 0.5 * h * (f[i] + f[i - 1]);
    return GridFunction(f.grid(), std::move(c));
}

inline double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
inline double sup_norm(const GridFunction& f) { return sup_norm(f.values()); }

inline double l2_norm(const GridFunction& f) { return std::sqrt(integrate(f * f)); }

// Piecewise-linear evaluation between nodes.
inline double interpolate(const GridFunction& f, double y) {
    const Grid& g = f.grid();
    require(g.contains(y), "interpolation point outside grid");
    double s = (y - g.lo()) / g.step();
    auto i = static_cast<std::size_t>(std::floor(s));
    if (i + 1 >= f.size()) return f.back();
    double w = s - static_cast<double>(i);
    return (1.0 - w) * f[i] + w * f[i + 1];
}

// C2 ramp from 0 at u<=0 to 1 at u>=1 with vanishing first and second derivatives at both ends.
inline double smooth_step(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u - std::sin(2.0 * std::numbers::pi * u) / (2.0 * std::numbers::pi);
}

// Cutoff that vanishes at both ends of [lo, hi] and equals 1 away from bands of the given width.
inline double two_sided_taper(double x, double lo, double hi, double width) {
    if (width <= 0.0) return 1.0;
    return smooth_step((x - lo) / width) * smooth_step((hi - x) / width);
}

inline GridFunction edge_taper(const Grid& g, double fraction) {
    const double w = fraction * g.span();
    return GridFunction::sample(g, [&](double y) { return two_sided_taper(y, g.lo(), g.hi(), w); });
}

// Iso-elastic disutility v(l) = l^(1+1/e0)/(1+1/e0).
struct Preferences {
    double e0 = 0.5;

    explicit Preferences(double elasticity = 0.5) : e0(elasticity) {
        require(std::isfinite(e0) && e0 > 0.0, "elasticity must be positive");
    }

    double v(double l) const { return std::pow(l, 1.0 + 1.0 / e0) / (1.0 + 1.0 / e0); }
    double v1(double l) const { return std::pow(l, 1.0 / e0); }
    double v2(double l) const { return std::pow(l, 1.0 / e0 - 1.0) / e0; }
    // e(theta) = v'/(l v''), identically e0 here.
    double structural_elasticity(double l) const { return v1(l) / (l * v2(l)); }
    double untaxed_labor(double theta) const { return std::pow(theta, e0); }
};

struct SkillSpec {
    double theta_min = 0.5;
    double theta_max = 3.0;
    double log_mean = 0.0;
    double log_sd = 0.4;
    double taper = 0.05;  // fraction of the skill range tapered at each end
};

// Lognormal skill density times a C2 two-sided taper, renormalized on [theta_min, theta_max].
class SkillModel {
public:
    explicit SkillModel(SkillSpec spec = {}) : spec_(spec), dist_(spec.log_mean, spec.log_sd) {
        require(spec.theta_min > 0.0, "skills.theta_min must be positive");
        require(spec.theta_max > spec.theta_min, "skills.theta_max must exceed skills.theta_min");
        require(spec.log_sd > 0.0, "skills.log_sd must be positive");
        require(spec.taper > 0.0 && spec.taper < 0.5, "skills.taper must lie in (0, 0.5)");
        width_ = spec.taper * (spec.theta_max - spec.theta_min);
        cell_ = (spec.theta_max - spec.theta_min) / kCells;
        table_.assign(kCells + 1, 0.0);
        for (std::size_t c = 0; c < kCells; ++c) {
            double a = spec.theta_min + cell_ * static_cast<double>(c);
            table_[c + 1] = table_[c] + raw_integral(a, a + cell_);
        }
        z_ = table_.back();
        for (double& t : table_) t /= z_;
    }

    const SkillSpec& spec() const { return spec_; }
    double theta_min() const { return spec_.theta_min; }
    double theta_max() const { return spec_.theta_max; }

    double density(double theta) const {
        require(theta >= spec_.theta_min && theta <= spec_.theta_max, "skill outside support");
        return raw(theta) / z_;
    }

    // Untapered lognormal value over the same normalizer.
    double core_density(double theta) const { return boost::math::pdf(dist_, theta) / z_; }

    double cdf(double theta) const {
        if (theta <= spec_.theta_min) return 0.0;
        if (theta >= spec_.theta_max) return 1.0;
        auto c = static_cast<std::size_t>((theta - spec_.theta_min) / cell_);
        c = std::min(c, kCells - 1);
        double a = spec_.theta_min + cell_ * static_cast<double>(c);
        return table_[c] + raw_integral(a, theta) / z_;
    }

private:
    static constexpr std::size_t kCells = 512;

    double raw(double t) const {
        return boost::math::pdf(dist_, t) * two_sided_taper(t, spec_.theta_min, spec_.theta_max, width_);
    }
    double raw_integral(double a, double b) const {
        if (b <= a) return 0.0;
        return boost::math::quadrature::gauss<double, 20>::integrate([this](double t) { return raw(t); }, a, b);
    }

    SkillSpec spec_;
    boost::math::lognormal_distribution<double> dist_;
    double width_ = 0.0;
    double cell_ = 0.0;
    double z_ = 1.0;
    std::vector<double> table_;
};

}  // namespace taxflow
