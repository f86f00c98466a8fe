#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "regimeopt/market_model.hpp"
#include "regimeopt/parallel.hpp"
#include "regimeopt/rng.hpp"
#include "regimeopt/time_grid.hpp"

namespace regimeopt {

// Driver of the dual value BSDE. y is the value, z the Brownian integrand,
// u the jump integrand. The power term requires y > 0 and y + u > 0.
inline double generator_value(double p, double q, double r, double theta, double lambda,
                              double y, double z, double u) {
    if (!(y > 0.0) || !(y + u > 0.0))
        throw std::domain_error("dual generator: y and y+u must be positive");
    return (q * r - 0.5 * q * (q - 1.0) * theta * theta + (1.0 - q) * lambda) * y +
           q * theta * z - (1.0 - q) * lambda * std::pow(y + u, 1.0 - p) * std::pow(y, p) - 1.0;
}

// Generator with the pre-switch coefficients of the model (after the switch
// the intensity vanishes and the jump term drops out).
inline double generator_f(const MarketModel& model, double t, double y, double z, double u) {
    return generator_value(model.utility.p, model.utility.q, model.r0(t),
                           model.theta(t, Regime::pre), model.lambda(t), y, z, u);
}

// Jump penalty a(x) = (phi_minus + phi_tilde)(1+x)^q - q phi_minus x whose
// minimiser over x > -1 is the optimal dual control.
inline double a_func(double x, double phi_minus, double phi_tilde, double q) {
    if (!(x > -1.0)) throw std::domain_error("a_func: control must exceed -1");
    if (!(phi_minus > 0.0) || !(phi_minus + phi_tilde > 0.0))
        throw std::domain_error("a_func: value inputs must be positive");
    return (phi_minus + phi_tilde) * std::pow(1.0 + x, q) - q * phi_minus * x;
}

// Argmin of a_func: (phi_minus / (phi_minus + phi_tilde))^{p-1} - 1.
inline double optimal_gamma(double phi_minus, double phi_tilde, double p) {
    if (!(phi_minus > 0.0) || !(phi_minus + phi_tilde > 0.0))
        throw std::domain_error("optimal_gamma: value inputs must be positive");
    return std::pow(phi_minus / (phi_minus + phi_tilde), p - 1.0) - 1.0;
}

// Minimum of a_func in closed form: (1-q) phi^p (phi+tilde)^{1-p} + q phi.
inline double a_func_min(double phi_minus, double phi_tilde, double p) {
    const double q = p / (p - 1.0);
    return (1.0 - q) * std::pow(phi_minus, p) * std::pow(phi_minus + phi_tilde, 1.0 - p) +
           q * phi_minus;
}

namespace detail {

// Linear drift coefficient of the after-switch equation.
inline double k_post(const MarketModel& m, double t, double u) {
    const double q = m.utility.q;
    const double th = m.theta(t, Regime::post, u);
    return q * m.r1(t, u) - 0.5 * q * (q - 1.0) * th * th;
}

// Cumulative integral of f over [t0, t0 + n h] by per-cell Simpson, returned
// at every node and every cell midpoint (both fourth order).
struct CumulativeSimpson {
    std::vector<double> node;  // n+1 values
    std::vector<double> mid;   // n values
};

template <class F>
CumulativeSimpson cumulative_simpson(F&& f, double t0, double h, int n) {
    CumulativeSimpson out;
    out.node.resize(n + 1);
    out.mid.resize(n);
    out.node[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        const double a = t0 + i * h;
        const double fa = f(a);
        const double fq = f(a + 0.25 * h);
        const double fm = f(a + 0.5 * h);
        const double fb = f(a + h);
        out.mid[i] = out.node[i] + h / 12.0 * (fa + 4.0 * fq + fm);
        out.node[i + 1] = out.node[i] + h / 6.0 * (fa + 4.0 * fm + fb);
    }
    return out;
}

// After-switch values on the nodes t0 + i h, i = 0..n, for a fixed switch
// time u: exp(-int k) plus the integrated exponential, Simpson throughout.
inline std::vector<double> phi1_nodes(const MarketModel& model, double u, double t0, double h,
                                      int n) {
    auto k = [&](double t) { return k_post(model, t, u); };
    const CumulativeSimpson I = cumulative_simpson(k, t0, h, n);

    std::vector<double> g_node(n + 1), g_mid(n);
    for (int i = 0; i <= n; ++i) g_node[i] = std::exp(-I.node[i]);
    for (int i = 0; i < n; ++i) g_mid[i] = std::exp(-I.mid[i]);

    std::vector<double> tail(n + 1);
    tail[n] = 0.0;
    for (int i = n - 1; i >= 0; --i)
        tail[i] = tail[i + 1] + h / 6.0 * (g_node[i] + 4.0 * g_mid[i] + g_node[i + 1]);

    std::vector<double> phi(n + 1);
    for (int i = 0; i <= n; ++i)
        phi[i] = std::exp(-(I.node[n] - I.node[i])) + tail[i] / g_node[i];
    return phi;
}

}  // namespace detail

// After-switch family: values on a shared (t, u) grid with the cells u <= t
// populated. The Brownian integrand of this family is identically zero for
// deterministic coefficients, so only the values are stored.
struct AfterSwitchSolution {
    TimeGrid grid;
    std::vector<double> values;    // (n+1) x (n+1), row = switch index
    std::vector<double> diagonal;  // value at (t, u = t)
    double upper_bound = 0.0;      // computable bound exp(sup|k| T)(1 + T)

    double value(int switch_index, int time_index) const {
        return values[static_cast<std::size_t>(switch_index) * grid.nodes() + time_index];
    }
};

// Solves the after-switch family for every grid switch time by quadrature.
inline AfterSwitchSolution solve_phi1_closed(const MarketModel& model, const TimeGrid& grid) {
    AfterSwitchSolution out;
    out.grid = grid;
    const int n = grid.n_steps;
    out.values.assign(static_cast<std::size_t>(n + 1) * (n + 1), 1.0);
    out.diagonal.resize(n + 1);

    for (int iu = 0; iu <= n; ++iu) {
        const double u = grid.t(iu);
        if (iu == n) {
            out.diagonal[n] = 1.0;
            continue;
        }
        const std::vector<double> slice =
            detail::phi1_nodes(model, u, u, grid.dt(), n - iu);
        for (int j = iu; j <= n; ++j)
            out.values[static_cast<std::size_t>(iu) * (n + 1) + j] = slice[j - iu];
        out.diagonal[iu] = slice[0];
    }

    const double q = model.utility.q;
    const double theta_max = (model.nu.max_abs(model.horizon) + model.r1.max_abs(model.horizon)) /
                             model.sigma.min_value(model.horizon);
    const double k_max = std::abs(q) * model.r1.max_abs(model.horizon) +
                         0.5 * q * (q - 1.0) * theta_max * theta_max;
    out.upper_bound = std::exp(k_max * model.horizon) * (1.0 + model.horizon);
    return out;
}

// Single-switch-time slice on [u, T] with its own cell count.
inline std::vector<double> solve_phi1_closed_slice(const MarketModel& model, double u,
                                                   int n_cells) {
    if (!(u >= 0.0 && u <= model.horizon))
        throw std::invalid_argument("solve_phi1_closed: u outside [0, T]");
    if (u == model.horizon) return {1.0};
    return detail::phi1_nodes(model, u, u, (model.horizon - u) / n_cells, n_cells);
}

// After-switch value at an arbitrary (t, u), t >= u, by the same quadrature.
inline double phi1_value_at(const MarketModel& model, double t, double u, double dt_target) {
    if (t >= model.horizon) return 1.0;
    const int n = std::max(2, static_cast<int>(std::ceil((model.horizon - t) / dt_target)));
    return detail::phi1_nodes(model, u, t, (model.horizon - t) / n, n)[0];
}

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
};

// Monte Carlo estimate of the after-switch value at t = u through the
// adjoint-process representation: the change-of-measure weight is simulated
// and multiplied into the deterministic discount exponents.
inline McEstimate solve_phi1_mc(const MarketModel& model, double u, long n_paths, int n_steps,
                                std::uint64_t seed) {
    if (n_paths < 100)
        throw std::invalid_argument("solve_phi1_mc: fewer than 100 paths is statistically meaningless");
    if (!(u >= 0.0 && u < model.horizon))
        throw std::invalid_argument("solve_phi1_mc: u must lie in [0, T)");

    const double q = model.utility.q;
    const double h = (model.horizon - u) / n_steps;

    // Deterministic part exp(int_u^s (-q r1 + q(q-1)/2 theta^2)).
    auto drift = [&](double t) {
        const double th = model.theta(t, Regime::post, u);
        return -q * model.r1(t, u) + 0.5 * q * (q - 1.0) * th * th;
    };
    const detail::CumulativeSimpson D = detail::cumulative_simpson(drift, u, h, n_steps);
    std::vector<double> exp_d(n_steps + 1), theta_at(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) {
        exp_d[i] = std::exp(D.node[i]);
        theta_at[i] = model.theta(u + i * h, Regime::post, u);
    }

    const auto acc = chunked_reduce<MeanAccumulator>(
        n_paths, [&](MeanAccumulator& a, long lo, long hi) {
            for (long idx = lo; idx < hi; ++idx) {
                PathRng rng(seed, static_cast<std::uint64_t>(idx), stream_tag::gaussians);
                double log_w = 0.0;
                double integral = 0.5 * exp_d[0];  // trapezoid, weight exp at u is 1
                double w_terminal = 1.0;
                for (int i = 0; i < n_steps; ++i) {
                    const double db = std::sqrt(h) * rng.normal();
                    log_w += -q * theta_at[i] * db - 0.5 * q * q * theta_at[i] * theta_at[i] * h;
                    const double w = std::exp(log_w);
                    const double weight = (i + 1 == n_steps) ? 0.5 : 1.0;
                    integral += weight * exp_d[i + 1] * w;
                    if (i + 1 == n_steps) w_terminal = w;
                }
                a.add(exp_d[n_steps] * w_terminal + h * integral);
            }
        });

    return McEstimate{acc.mean(), acc.std_error(), n_paths};
}

// Before-switch solution on the grid. zeta0 is the Brownian integrand
// estimate (zero on the ODE path), condition_numbers are the regression
// diagnostics of the least-squares path.
struct BeforeSwitchSolution {
    TimeGrid grid;
    std::vector<double> values;
    std::vector<double> zeta0;
    double m_floor = 0.0;
    std::vector<double> condition_numbers;
    int basis_degree = 0;
};

namespace detail {

// Diagonal of the after-switch family at arbitrary times, resolved by direct
// quadrature so Runge-Kutta stages can sample between grid nodes.
inline double phi1_diagonal_at(const MarketModel& model, double t, double dt_target) {
    return phi1_value_at(model, t, t, dt_target);
}

}  // namespace detail

struct Phi0Options {
    bool modified_generator = false;  // replace y^p by (max(y, m))^p (test mode)
    int max_retries = 4;
};

// Integrates the before-switch equation backward from 1 with classical RK4.
// The floor m = exp((q-1) Lambda T) must hold by construction; a violating
// step halves the substep and retries before giving up.
inline BeforeSwitchSolution solve_phi0_ode(const MarketModel& model,
                                           const AfterSwitchSolution& after,
                                           Phi0Options options = {}) {
    const TimeGrid& grid = after.grid;
    const int n = grid.n_steps;
    const double h = grid.dt();
    const double p = model.utility.p;
    const double q = model.utility.q;
    const double m = model.m_floor();

    // Diagonal at nodes (from the after-switch solve) and midpoints (fresh
    // quadrature at matching cell width).
    std::vector<double> diag_mid(n);
    for (int i = 0; i < n; ++i)
        diag_mid[i] = detail::phi1_diagonal_at(model, grid.t(i) + 0.5 * h, h);

    auto rhs = [&](double t, double y, double diag) {
        const double lam = model.lambda(t);
        const double th = model.theta(t, Regime::pre);
        const double yp = options.modified_generator ? std::pow(std::max(y, m), p) : std::pow(y, p);
        if (!options.modified_generator && !(y > 0.0))
            throw std::runtime_error("solve_phi0_ode: state left the positive domain");
        return (q * model.r0(t) - 0.5 * q * (q - 1.0) * th * th + (1.0 - q) * lam) * y +
               -(1.0 - q) * lam * std::pow(diag, 1.0 - p) * yp - 1.0;
    };

    for (int attempt = 0, substeps = 1;; ++attempt, substeps *= 2) {
        std::vector<double> values(n + 1);
        values[n] = 1.0;
        bool floor_ok = true;

        for (int j = n - 1; j >= 0 && floor_ok; --j) {
            double y = values[j + 1];
            const double hs = h / substeps;
            for (int s = 0; s < substeps; ++s) {
                const double t_hi = grid.t(j + 1) - s * hs;
                const double t_mid = t_hi - 0.5 * hs;
                const double t_lo = t_hi - hs;
                const double d_hi = (s == 0) ? after.diagonal[j + 1]
                                             : detail::phi1_diagonal_at(model, t_hi, h);
                const double d_mid = (substeps == 1) ? diag_mid[j]
                                                     : detail::phi1_diagonal_at(model, t_mid, h);
                const double d_lo = (s + 1 == substeps) ? after.diagonal[j]
                                                        : detail::phi1_diagonal_at(model, t_lo, h);
                const double k1 = rhs(t_hi, y, d_hi);
                const double k2 = rhs(t_mid, y - 0.5 * hs * k1, d_mid);
                const double k3 = rhs(t_mid, y - 0.5 * hs * k2, d_mid);
                const double k4 = rhs(t_lo, y - hs * k3, d_lo);
                y -= hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            values[j] = y;
            if (!options.modified_generator && y < m) floor_ok = false;
        }

        if (floor_ok) {
            BeforeSwitchSolution out;
            out.grid = grid;
            out.values = std::move(values);
            out.zeta0.assign(n + 1, 0.0);
            out.m_floor = m;
            return out;
        }
        if (attempt >= options.max_retries)
            throw std::runtime_error("solve_phi0_ode: value fell below the floor exp((q-1) Lambda T)");
    }
}

// Least-squares Monte Carlo backward induction for the before-switch
// equation. Conditional expectations are estimated by cross-sectional ridge
// regression on monomials of the Brownian state; for deterministic
// coefficients the regression collapses to the constant basis.
inline BeforeSwitchSolution solve_phi0_lsmc(const MarketModel& model,
                                            const AfterSwitchSolution& after, long n_paths,
                                            int n_steps, int basis_degree, std::uint64_t seed) {
    if (n_paths < 100)
        throw std::invalid_argument("solve_phi0_lsmc: fewer than 100 paths is statistically meaningless");
    if (basis_degree < 0 || basis_degree > 6)
        throw std::invalid_argument("solve_phi0_lsmc: basis degree must lie in [0, 6]");

    const TimeGrid grid(model.horizon, n_steps);
    const double h = grid.dt();
    const double p = model.utility.p;
    const double q = model.utility.q;
    const double ridge = 1e-8;
    const double cond_threshold = 1e10;

    std::vector<double> diag(n_steps + 1);
    if (after.grid == grid) {
        diag = after.diagonal;
    } else {
        for (int i = 0; i <= n_steps; ++i)
            diag[i] = detail::phi1_diagonal_at(model, grid.t(i), std::min(h, after.grid.dt()));
    }

    // Brownian lattice.
    const std::size_t np = static_cast<std::size_t>(n_paths);
    std::vector<double> brownian(np * (n_steps + 1), 0.0);
    std::vector<double> increments(np * n_steps);
    for (std::size_t k = 0; k < np; ++k) {
        PathRng rng(seed, k, stream_tag::gaussians);
        double b = 0.0;
        for (int i = 0; i < n_steps; ++i) {
            const double db = std::sqrt(h) * rng.normal();
            increments[k * n_steps + i] = db;
            b += db;
            brownian[k * (n_steps + 1) + i + 1] = b;
        }
    }

    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    // Ridge fit of y on monomials of x up to `degree`; returns fitted values
    // and the condition number of the normal matrix actually used.
    auto fit = [&](const VectorXd& x, const VectorXd& y, int degree, double& cond_out,
                   int& degree_out) -> VectorXd {
        for (int d = degree;; --d) {
            MatrixXd basis(x.size(), d + 1);
            basis.col(0).setOnes();
            for (int c = 1; c <= d; ++c) basis.col(c) = basis.col(c - 1).cwiseProduct(x);
            MatrixXd normal = basis.transpose() * basis / static_cast<double>(x.size());
            normal.diagonal().array() += ridge;
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(normal);
            const double cond = eig.eigenvalues().maxCoeff() /
                                std::max(eig.eigenvalues().minCoeff(), 1e-300);
            if (cond <= cond_threshold || d == 0) {
                const VectorXd beta =
                    normal.ldlt().solve(basis.transpose() * y / static_cast<double>(x.size()));
                cond_out = cond;
                degree_out = d;
                return basis * beta;
            }
        }
    };

    VectorXd y_next = VectorXd::Ones(n_paths);
    BeforeSwitchSolution out;
    out.grid = grid;
    out.values.assign(n_steps + 1, 1.0);
    out.zeta0.assign(n_steps + 1, 0.0);
    out.m_floor = model.m_floor();
    out.condition_numbers.assign(n_steps + 1, 1.0);
    out.basis_degree = basis_degree;

    for (int i = n_steps - 1; i >= 0; --i) {
        VectorXd x(n_paths), dbv(n_paths);
        for (std::size_t k = 0; k < np; ++k) {
            x(static_cast<long>(k)) = brownian[k * (n_steps + 1) + i];
            dbv(static_cast<long>(k)) = increments[k * n_steps + i];
        }
        const int degree_here = (i == 0) ? 0 : basis_degree;

        double cond_z = 1.0, cond_y = 1.0;
        int used_z = 0, used_y = 0;
        const VectorXd z_fit =
            fit(x, (y_next.array() * dbv.array() / h).matrix(), degree_here, cond_z, used_z);

        const double t_i = grid.t(i);
        const double lam = model.lambda(t_i);
        const double th = model.theta(t_i, Regime::pre);
        const double r = model.r0(t_i);
        VectorXd target(n_paths);
        for (long k = 0; k < n_paths; ++k) {
            const double y = y_next(k);
            if (!(y > 0.0))
                throw std::runtime_error("solve_phi0_lsmc: regression produced a non-positive value");
            const double drift =
                (q * r - 0.5 * q * (q - 1.0) * th * th + (1.0 - q) * lam) * y +
                q * th * z_fit(k) -
                (1.0 - q) * lam * std::pow(diag[i], 1.0 - p) * std::pow(y, p) - 1.0;
            target(k) = y - drift * h;
        }
        y_next = fit(x, target, degree_here, cond_y, used_y);

        out.values[i] = y_next.mean();
        out.zeta0[i] = z_fit.mean();
        out.condition_numbers[i] = std::max(cond_z, cond_y);
        if (i > 0) out.basis_degree = std::min(out.basis_degree, std::min(used_y, used_z));
    }
    return out;
}

// Assembled dual solution: before/after parts glued along the switch index.
// Evaluators are grid-index based; a switch index of n_steps + 1 encodes a
// switch after the horizon.
struct DualSolution {
    MarketModel model;
    BeforeSwitchSolution before;
    AfterSwitchSolution after;

    int no_switch_index() const { return before.grid.n_steps + 1; }

    // Value at node j given the switch step js.
    double phi(int j, int js) const {
        return j < js ? before.values[j] : after.value(std::min(js, after.grid.n_steps), j);
    }
    // Left limit at node j (pre-jump value at the switch step itself).
    double phi_left(int j, int js) const {
        return j <= js ? before.values[j] : after.value(std::min(js, after.grid.n_steps), j);
    }
    double phi_hat(int j, int js) const {
        return j <= js ? before.zeta0[j] : 0.0;
    }
    // Jump integrand: diagonal minus before-switch value while the switch has
    // not happened, zero afterwards.
    double phi_tilde(int j, int js) const {
        return j <= js ? after.diagonal[j] - before.values[j] : 0.0;
    }
    // Optimal dual control; zero after the switch.
    double gamma_star(int j, int js) const {
        return j <= js ? gamma_star_pre(j) : 0.0;
    }
    double gamma_star_pre(int j) const {
        return optimal_gamma(before.values[j], after.diagonal[j] - before.values[j],
                             model.utility.p);
    }
};

inline DualSolution assemble_dual(const MarketModel& model, BeforeSwitchSolution before,
                                  AfterSwitchSolution after) {
    if (!(before.grid == after.grid))
        throw std::invalid_argument("assemble_dual: solutions must share the time grid");
    const int n = before.grid.n_steps;
    if (std::abs(before.values[n] - 1.0) > 1e-12 || std::abs(after.diagonal[n] - 1.0) > 1e-12)
        throw std::invalid_argument("assemble_dual: terminal values must equal one");
    for (int j = 0; j <= n; ++j) {
        if (after.diagonal[j] < 1.0 - 1e-12)
            throw std::invalid_argument("assemble_dual: left limit plus jump integrand below one");
    }
    return DualSolution{model, std::move(before), std::move(after)};
}

}  // namespace regimeopt
