#pragma once

#include <string>
#include <utility>

#include "taxflow/agent.hpp"
#include "taxflow/error.hpp"
#include "taxflow/model.hpp"

namespace taxflow {

struct ReformDirection {
    GridFunction values;
    std::string label;
};

// R = sum over skill nodes of T(y(theta)) dH(theta).
inline double revenue(const EconomySnapshot& snap) {
    double r = 0.0;
    for (std::size_t k = 0; k < snap.y_of_theta.size(); ++k)
        r += snap.theta_weight[k] * snap.schedule.value(snap.y_of_theta[k]);
    return r;
}

inline double revenue(const GridFunction& T, const EconomySnapshot& snap) {
    require(T == snap.tax, "snapshot was built from a different tax");
    return revenue(snap);
}

// Mechanical minus behavioral term: int That*phi - int T' eps That' phi.
inline double gateaux(const GridFunction& T, const GridFunction& dir, const EconomySnapshot& snap) {
    require(T == snap.tax, "snapshot was built from a different tax");
    const GridFunction dT = derivative(T), dH = derivative(dir);
    const Grid& g = T.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        s += g.weight(i) * snap.phi[i] * (dir[i] - dT[i] * snap.eps[i] * dH[i]);
    return s;
}

inline double gateaux(const GridFunction& T, const ReformDirection& dir, const EconomySnapshot& snap) {
    return gateaux(T, dir.values, snap);
}

// Central difference quotient of revenue, each side on a freshly solved economy.
inline double gateaux_fd_oracle(const GridFunction& T, const GridFunction& dir, double mu, const Economy& eco) {
    require(mu > 0.0, "oracle step must be positive");
    const double up = revenue(build_snapshot(T + dir * mu, eco));
    const double dn = revenue(build_snapshot(T + dir * (-mu), eco));
    return (up - dn) / (2.0 * mu);
}

// Lambda = phi + d/dy (T' eps phi).
inline GridFunction steepest_direction(const EconomySnapshot& snap, const GridFunction& T) {
    require(T == snap.tax, "snapshot was built from a different tax");
    const GridFunction flux = derivative(T) * snap.eps * snap.phi;
    return snap.phi + derivative(flux);
}

inline double inner_product(const GridFunction& a, const GridFunction& b) { return integrate(a * b); }

}  // namespace taxflow
