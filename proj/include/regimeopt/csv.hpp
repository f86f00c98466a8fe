#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "regimeopt/dual_solver.hpp"
#include "regimeopt/path_simulator.hpp"
#include "regimeopt/strategy.hpp"

namespace regimeopt {

// Fixed-significance decimal rendering ('.' decimal separator, no locale).
inline std::string format_number(double v, int significant_digits = 17) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, v);
    return buf;
}

namespace detail {

inline std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // \n line endings on every platform
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

}  // namespace detail

// Grid columns of the assembled dual solution, one row per grid time.
inline void write_dual_csv(const std::string& path, const DualSolution& dual,
                           int precision = 17) {
    auto out = detail::open_csv(path);
    out << "t,phi0,phi1_diag,phi_tilde,gamma_star,zeta0\n";
    const TimeGrid& grid = dual.before.grid;
    for (int j = 0; j <= grid.n_steps; ++j) {
        out << format_number(grid.t(j), precision) << ','
            << format_number(dual.before.values[j], precision) << ','
            << format_number(dual.after.diagonal[j], precision) << ','
            << format_number(dual.after.diagonal[j] - dual.before.values[j], precision) << ','
            << format_number(dual.gamma_star_pre(j), precision) << ','
            << format_number(dual.before.zeta0[j], precision) << '\n';
    }
}

// Strategy curves: control, pre/post allocations, and the unit-wealth
// consumption rate along the no-switch zero-noise reference path.
inline void write_strategy_csv(const std::string& path, const DualSolution& dual,
                               int precision = 17) {
    auto out = detail::open_csv(path);
    out << "t,gamma_star,pi_star_pre,pi_star_post_diag,c_star_unit\n";
    const MarketModel& m = dual.model;
    const TimeGrid& grid = dual.before.grid;
    const double p = m.utility.p;
    const double eta_unit = eta_star(1.0, dual.before.values[0], p);

    double exponent = 0.0;  // cumulative -(r0 + theta0^2/2 + gamma* lambda)
    double prev = 0.0;
    for (int j = 0; j <= grid.n_steps; ++j) {
        const double t = grid.t(j);
        const double theta0 = m.theta(t, Regime::pre);
        const double theta1 = m.theta(t, Regime::post, t);
        const double sigma = m.sigma(t);
        const double pi_pre =
            (dual.before.zeta0[j] / dual.before.values[j] + theta0 / (1.0 - p)) / sigma;
        const double pi_post = theta1 / ((1.0 - p) * sigma);
        const double here = m.r0(t) + 0.5 * theta0 * theta0 +
                            dual.gamma_star_pre(j) * m.lambda(t);
        if (j > 0) exponent -= 0.5 * grid.dt() * (prev + here);
        prev = here;
        const double c_unit =
            std::pow(eta_unit * std::exp(exponent), 1.0 / (p - 1.0));
        out << format_number(t, precision) << ','
            << format_number(dual.gamma_star_pre(j), precision) << ','
            << format_number(pi_pre, precision) << ','
            << format_number(pi_post, precision) << ','
            << format_number(c_unit, precision) << '\n';
    }
}

// Raw path dump for debugging: one row per (path, node).
inline void write_paths_csv(const std::string& path, const std::vector<PathBundle>& batch,
                            int precision = 17) {
    auto out = detail::open_csv(path);
    out << "path_id,t,B,H,R,L,X\n";
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const PathBundle& b = batch[k];
        for (int j = 0; j <= b.grid.n_steps; ++j) {
            out << k << ',' << format_number(b.grid.t(j), precision) << ','
                << format_number(b.brownian[j], precision) << ','
                << static_cast<int>(b.indicator[j]) << ','
                << format_number(b.discount[j], precision) << ','
                << format_number(b.density.empty() ? 1.0 : b.density[j], precision) << ','
                << format_number(b.wealth.empty() ? 0.0 : b.wealth[j], precision) << '\n';
        }
    }
}

}  // namespace regimeopt
