#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "regimeopt/dual_solver.hpp"
#include "regimeopt/market_model.hpp"
#include "regimeopt/parallel.hpp"
#include "regimeopt/rng.hpp"
#include "regimeopt/strategy.hpp"
#include "regimeopt/time_grid.hpp"

namespace regimeopt {

struct SimConfig {
    long n_paths = 100000;
    int n_steps = 252;
    std::uint64_t seed = 42;
    bool antithetic = false;
};

// One simulated scenario. The switch indicator jumps at the first grid node
// at or after the exact switch time; the discount factor, density and the
// value process change regime from that node on.
struct PathBundle {
    TimeGrid grid;
    std::vector<double> increments;  // Brownian increments, variance dt
    std::vector<double> brownian;    // cumulative path, B_0 = 0
    double tau = std::numeric_limits<double>::infinity();
    int switch_step = 0;             // n_steps + 1 when tau > T
    std::vector<std::uint8_t> indicator;   // H
    std::vector<double> discount;          // R, R_0 = 1
    std::vector<double> density;           // L (filled by density_path)
    double density_left_at_switch = 1.0;   // pre-jump value of L at the switch node
    std::vector<double> wealth;            // X (filled by wealth_path_euler)
    bool wealth_admissible = true;

    bool switched() const { return switch_step <= grid.n_steps; }
};

// Inverts the cumulative intensity at a unit-exponential draw. Exact for the
// piecewise-constant family; +inf when the mass over [0, T] is insufficient.
inline double simulate_default_time(const MarketModel& model, double exp_draw) {
    if (!(exp_draw > 0.0))
        throw std::invalid_argument("simulate_default_time: draw must be positive");
    std::vector<double> nodes{0.0};
    for (double b : model.lambda.breakpoints())
        if (b < model.horizon) nodes.push_back(b);
    nodes.push_back(model.horizon);

    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double v = model.lambda(nodes[i]);
        const double seg = v * (nodes[i + 1] - nodes[i]);
        if (acc + seg >= exp_draw && v > 0.0)
            return nodes[i] + (exp_draw - acc) / v;
        acc += seg;
    }
    return std::numeric_limits<double>::infinity();
}

namespace detail {

inline void fill_path(PathBundle& path, const MarketModel& model, const TimeGrid& grid,
                      const SimConfig& sim, long index) {
    const int n = grid.n_steps;
    const double dt = grid.dt();
    path.grid = grid;
    path.increments.resize(n);
    path.brownian.assign(n + 1, 0.0);
    path.indicator.assign(n + 1, 0);
    path.discount.assign(n + 1, 1.0);
    path.density.clear();
    path.wealth.clear();
    path.density_left_at_switch = 1.0;
    path.wealth_admissible = true;

    const std::uint64_t gauss_index =
        sim.antithetic ? static_cast<std::uint64_t>(index / 2) : static_cast<std::uint64_t>(index);
    const double sign = (sim.antithetic && (index & 1)) ? -1.0 : 1.0;
    PathRng gauss(sim.seed, gauss_index, stream_tag::gaussians);
    PathRng tau_rng(sim.seed, static_cast<std::uint64_t>(index), stream_tag::switch_time);

    path.tau = simulate_default_time(model, tau_rng.exponential());
    if (path.tau > grid.horizon) {
        path.switch_step = n + 1;
    } else {
        path.switch_step =
            std::min(n, static_cast<int>(std::ceil(path.tau / dt - 1e-12)));
        if (path.switch_step < 1) path.switch_step = 1;
    }

    const double sqrt_dt = std::sqrt(dt);
    for (int i = 0; i < n; ++i) {
        const double db = sign * sqrt_dt * gauss.normal();
        path.increments[i] = db;
        path.brownian[i + 1] = path.brownian[i] + db;
    }
    for (int j = path.switch_step; j <= n; ++j) path.indicator[j] = 1;

    // Trapezoid integral of the short rate, node values in the prevailing regime.
    const double u = path.switched() ? grid.t(path.switch_step) : 0.0;
    double integral = 0.0;
    double r_prev = model.r0(0.0);
    for (int i = 1; i <= n; ++i) {
        const double r_here = i < path.switch_step ? model.r0(grid.t(i))
                                                   : model.r1(grid.t(i), u);
        integral += 0.5 * dt * (r_prev + r_here);
        path.discount[i] = std::exp(-integral);
        r_prev = r_here;
    }
}

}  // namespace detail

inline PathBundle simulate_path(const MarketModel& model, const TimeGrid& grid,
                                const SimConfig& sim, long index) {
    PathBundle path;
    detail::fill_path(path, model, grid, sim, index);
    return path;
}

// Materialised batch; prefer simulate_reduce for large path counts.
inline std::vector<PathBundle> simulate_paths(const MarketModel& model, const SimConfig& sim) {
    const TimeGrid grid(model.horizon, sim.n_steps);
    std::vector<PathBundle> batch(static_cast<std::size_t>(sim.n_paths));
    for (long i = 0; i < sim.n_paths; ++i) detail::fill_path(batch[i], model, grid, sim, i);
    return batch;
}

// Streaming Monte Carlo: generates paths chunk by chunk, hands each to the
// visitor, and merges per-chunk accumulators in fixed order (bitwise
// reproducible for a fixed seed, independent of the worker count).
template <class Acc, class Visitor>
Acc simulate_reduce(const MarketModel& model, const SimConfig& sim, Visitor&& visit) {
    const TimeGrid grid(model.horizon, sim.n_steps);
    return chunked_reduce<Acc>(sim.n_paths, [&](Acc& acc, long lo, long hi) {
        PathBundle scratch;
        for (long i = lo; i < hi; ++i) {
            detail::fill_path(scratch, model, grid, sim, i);
            visit(acc, scratch);
        }
    });
}

// Dual control as a function of the grid step; only values at pre-switch
// nodes (including the switch node itself) are consulted.
using GammaFn = std::function<double(int step)>;

inline GammaFn gamma_constant(double value) {
    return [value](int) { return value; };
}

inline GammaFn gamma_star_of(const DualSolution& dual) {
    return [&dual](int step) { return dual.gamma_star_pre(step); };
}

// Density of the measure change for a control gamma:
//   exp(-int theta dB - 1/2 int theta^2 ds + log(1+gamma_tau) H - int gamma lambda^G ds)
// with the intensity switched off from the switch node on.
inline void density_into(std::vector<double>& out, double& left_at_switch,
                         const PathBundle& path, const GammaFn& gamma,
                         const MarketModel& model) {
    const TimeGrid& grid = path.grid;
    const int n = grid.n_steps;
    const double dt = grid.dt();
    const int js = path.switch_step;
    const double u = path.switched() ? grid.t(js) : 0.0;

    out.assign(n + 1, 1.0);
    left_at_switch = 1.0;
    double log_l = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = grid.t(i);
        const bool pre = i < js;
        const double theta = pre ? model.theta(t, Regime::pre) : model.theta(t, Regime::post, u);
        log_l += -theta * path.increments[i] - 0.5 * theta * theta * dt;
        if (pre) {
            const double g = gamma(i);
            if (!(g > -1.0)) throw std::domain_error("density_path: control must exceed -1");
            log_l += -g * model.lambda(t) * dt;
        }
        double value = std::exp(log_l);
        if (i + 1 == js) {
            left_at_switch = value;
            const double g_jump = gamma(js);
            if (!(g_jump > -1.0)) throw std::domain_error("density_path: control must exceed -1");
            log_l += std::log1p(g_jump);
            value = std::exp(log_l);
        }
        out[i + 1] = value;
    }
}

inline void density_path(PathBundle& path, const GammaFn& gamma, const MarketModel& model) {
    density_into(path.density, path.density_left_at_switch, path, gamma, model);
}

// Trapezoid of node values with the switch cell closed at the pre-jump left
// limit, so the jump is not smeared across the cell containing it.
inline double trapezoid_switched(const std::vector<double>& f, double f_left_at_switch,
                                 int switch_step, int upto, double dt) {
    double acc = 0.0;
    for (int i = 0; i < upto; ++i) {
        const double right = (i + 1 == switch_step) ? f_left_at_switch : f[i + 1];
        acc += 0.5 * dt * (f[i] + right);
    }
    return acc;
}

// Wealth under a generic control pair by explicit Euler on
//   dX = X [(r + pi (nu - r)) dt + pi sigma dB] - c dt.
// Non-positive wealth is flagged, not clamped.
template <class PiFn, class CFn>
void wealth_path_euler(PathBundle& path, PiFn&& pi_fn, CFn&& c_fn, double x0,
                       const MarketModel& model) {
    if (!(x0 > 0.0)) throw std::invalid_argument("wealth_path_euler: x0 must be positive");
    const TimeGrid& grid = path.grid;
    const int n = grid.n_steps;
    const double dt = grid.dt();
    const int js = path.switch_step;
    const double u = path.switched() ? grid.t(js) : 0.0;

    path.wealth.assign(n + 1, x0);
    path.wealth_admissible = true;
    double x = x0;
    for (int i = 0; i < n; ++i) {
        const double t = grid.t(i);
        const bool pre = i < js;
        const double r = pre ? model.r0(t) : model.r1(t, u);
        const double sigma = model.sigma(t);
        const double nu = model.nu(t);
        const PathState state{i, js, path.discount[i],
                              path.density.empty() ? 1.0 : path.density[i]};
        const double pi = pi_fn(state);
        const double c = c_fn(state);
        x += x * ((r + pi * (nu - r)) * dt + pi * sigma * path.increments[i]) - c * dt;
        if (!std::isfinite(x))
            throw std::runtime_error("wealth_path_euler: wealth became non-finite");
        if (x <= 0.0) path.wealth_admissible = false;
        path.wealth[i + 1] = x;
    }
}

// Running conditional gain along one path:
//   J_t = int_0^t (R L)^q ds + (R_t L_t)^q Phi_t.
inline std::vector<double> dual_gain_path(const PathBundle& path, const DualSolution& dual) {
    if (path.density.empty())
        throw std::invalid_argument("dual_gain_path: density must be filled first");
    const TimeGrid& grid = path.grid;
    const int n = grid.n_steps;
    const double q = dual.model.utility.q;
    const int js = path.switch_step;

    std::vector<double> f(n + 1);
    for (int i = 0; i <= n; ++i) f[i] = std::pow(path.discount[i] * path.density[i], q);
    const double f_left = path.switched()
                              ? std::pow(path.discount[js] * path.density_left_at_switch, q)
                              : 0.0;

    std::vector<double> gain(n + 1);
    double integral = 0.0;
    gain[0] = dual.phi(0, js);
    for (int i = 1; i <= n; ++i) {
        const double right = (i == js) ? f_left : f[i];
        integral += 0.5 * grid.dt() * (f[i - 1] + right);
        gain[i] = integral + f[i] * dual.phi(i, js);
    }
    return gain;
}

// Monte Carlo value of the primal objective E[int_0^T U(c*) ds + U(X*_T)]
// under the optimal controls, with the terminal wealth integrated by Euler.
inline McEstimate primal_objective_mc(const MarketModel& model, const DualSolution& dual,
                                      const OptimalStrategy& strategy, const SimConfig& sim) {
    if (sim.n_paths < 100)
        throw std::invalid_argument("primal_objective_mc: fewer than 100 paths is statistically meaningless");
    const double p = model.utility.p;
    const double q = model.utility.q;
    const double eta_q = std::pow(strategy.eta(), q);
    const GammaFn gamma = gamma_star_of(dual);
    const auto acc = simulate_reduce<MeanAccumulator>(
        model, sim, [&](MeanAccumulator& a, PathBundle& path) {
            density_path(path, gamma, model);
            wealth_path_euler(
                path, [&](const PathState& s) { return strategy.pi_star(s); },
                [&](const PathState& s) { return strategy.c_star(s); },
                strategy.initial_wealth(), model);
            if (!path.wealth_admissible)
                throw std::runtime_error("primal_objective_mc: optimal strategy produced an inadmissible path");
            const int n = path.grid.n_steps;
            std::vector<double> f(n + 1);
            for (int i = 0; i <= n; ++i)
                f[i] = std::pow(path.discount[i] * path.density[i], q);
            const double f_left =
                path.switched()
                    ? std::pow(path.discount[path.switch_step] * path.density_left_at_switch, q)
                    : 0.0;
            const double consumption_utility =
                eta_q / p * trapezoid_switched(f, f_left, path.switch_step, n, path.grid.dt());
            a.add(consumption_utility + std::pow(path.wealth[n], p) / p);
        });
    return McEstimate{acc.mean(), acc.std_error(), sim.n_paths};
}

// Monte Carlo value of the dual objective E[int_0^T (R L)^q ds + (R_T L_T)^q].
inline McEstimate dual_objective_mc(const GammaFn& gamma, const MarketModel& model,
                                    const SimConfig& sim) {
    if (sim.n_paths < 100)
        throw std::invalid_argument("dual_objective_mc: fewer than 100 paths is statistically meaningless");
    const double q = model.utility.q;
    const auto acc = simulate_reduce<MeanAccumulator>(
        model, sim, [&](MeanAccumulator& a, PathBundle& path) {
            std::vector<double> density;
            double left = 1.0;
            density_into(density, left, path, gamma, model);
            const int n = path.grid.n_steps;
            std::vector<double> f(n + 1);
            for (int i = 0; i <= n; ++i)
                f[i] = std::pow(path.discount[i] * density[i], q);
            const double f_left =
                path.switched() ? std::pow(path.discount[path.switch_step] * left, q) : 0.0;
            const double integral =
                trapezoid_switched(f, f_left, path.switch_step, n, path.grid.dt());
            a.add(integral + f[n]);
        });
    return McEstimate{acc.mean(), acc.std_error(), sim.n_paths};
}

}  // namespace regimeopt
