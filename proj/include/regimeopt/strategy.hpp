#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "regimeopt/dual_solver.hpp"

namespace regimeopt {

// Lagrange multiplier of the budget constraint: (x0 / Phi_0)^{p-1}.
inline double eta_star(double x0, double phi0_at_0, double p) {
    if (!(x0 > 0.0) || !(phi0_at_0 > 0.0))
        throw std::domain_error("eta_star: inputs must be positive");
    return std::pow(x0 / phi0_at_0, p - 1.0);
}

struct Controls {
    double pi;  // fraction of wealth in the risky asset
    double c;   // consumption rate
};

// Optimal controls from the current path state:
//   c = (eta R L)^{1/(p-1)},  pi = (phi_hat / phi_minus + theta / (1-p)) / sigma.
inline Controls optimal_controls(double discount, double density, double phi_minus,
                                 double phi_hat, double theta, double sigma, double eta,
                                 double p) {
    if (!(discount > 0.0) || !(density > 0.0) || !(phi_minus > 0.0) || !(eta > 0.0))
        throw std::domain_error("optimal_controls: inputs must be positive");
    if (!(sigma > 0.0)) throw std::domain_error("optimal_controls: sigma must be positive");
    const double c = std::pow(eta * discount * density, 1.0 / (p - 1.0));
    const double pi = (phi_hat / phi_minus + theta / (1.0 - p)) / sigma;
    return Controls{pi, c};
}

// Closed-form optimal wealth (eta R L)^{1/(p-1)} Phi_t; equals x0 at t = 0.
inline double optimal_wealth(double discount, double density, double phi, double eta, double p) {
    if (!(discount > 0.0) || !(density > 0.0) || !(phi > 0.0) || !(eta > 0.0))
        throw std::domain_error("optimal_wealth: inputs must be positive");
    return std::pow(eta * discount * density, 1.0 / (p - 1.0)) * phi;
}

// Value of the primal problem: (x0^p / p) Phi_0^{1-p}.
inline double primal_value(double x0, double phi0_at_0, double p) {
    if (!(x0 > 0.0) || !(phi0_at_0 > 0.0))
        throw std::domain_error("primal_value: inputs must be positive");
    return std::pow(x0, p) / p * std::pow(phi0_at_0, 1.0 - p);
}

// Path state consumed by the strategy evaluators: grid step, switch step
// (n_steps + 1 when no switch occurred), discount factor and density value.
struct PathState {
    int step;
    int switch_step;
    double discount;
    double density;
};

// Evaluators for the optimal strategy. The dual solution is shared, so the
// same strategy object serves analytic curves and simulated paths.
class OptimalStrategy {
public:
    OptimalStrategy(std::shared_ptr<const DualSolution> dual, double x0)
        : dual_(std::move(dual)),
          x0_(x0),
          eta_(eta_star(x0, dual_->before.values[0], dual_->model.utility.p)) {}

    double eta() const { return eta_; }
    double initial_wealth() const { return x0_; }
    const DualSolution& dual() const { return *dual_; }

    // Zero after the switch by convention.
    double gamma_star(int step, int switch_step) const {
        return dual_->gamma_star(step, switch_step);
    }

    double pi_star(const PathState& s) const {
        const MarketModel& m = dual_->model;
        const double t = dual_->before.grid.t(s.step);
        const Regime regime = s.step < s.switch_step ? Regime::pre : Regime::post;
        const double u = regime == Regime::post
                             ? dual_->before.grid.t(std::min(s.switch_step, dual_->before.grid.n_steps))
                             : 0.0;
        const double theta = m.theta(t, regime, u);
        return optimal_controls(s.discount, s.density, dual_->phi_left(s.step, s.switch_step),
                                dual_->phi_hat(s.step, s.switch_step), theta, m.sigma(t), eta_,
                                m.utility.p)
            .pi;
    }

    double c_star(const PathState& s) const {
        return std::pow(eta_ * s.discount * s.density, 1.0 / (dual_->model.utility.p - 1.0));
    }

    double wealth(const PathState& s) const {
        return optimal_wealth(s.discount, s.density, dual_->phi(s.step, s.switch_step), eta_,
                              dual_->model.utility.p);
    }

private:
    std::shared_ptr<const DualSolution> dual_;
    double x0_;
    double eta_;
};

inline OptimalStrategy make_strategy(std::shared_ptr<const DualSolution> dual, double x0) {
    return OptimalStrategy(std::move(dual), x0);
}

// Primal value process and integrands obtained from the dual solution via
//   Psi = Phi^{1-p}, psi_hat = (1-p) phi_hat Phi^{-p},
//   psi_tilde = (Phi + phi_tilde)^{1-p} - Phi^{1-p}.
struct PrimalSolution {
    TimeGrid grid;
    double p = 0.5;
    std::vector<double> psi0;          // before switch
    std::vector<double> psi1;          // after-switch family, same layout as the dual
    std::vector<double> psi1_diagonal;
    std::vector<double> psi_hat0;
    std::vector<double> psi_tilde;     // jump integrand while no switch occurred

    double psi1_value(int switch_index, int time_index) const {
        return psi1[static_cast<std::size_t>(switch_index) * grid.nodes() + time_index];
    }
    double value_function(int step, double x) const {
        if (!(x > 0.0)) throw std::domain_error("value function: wealth must be positive");
        return std::pow(x, p) / p * psi0[step];
    }
};

inline PrimalSolution primal_from_dual(const DualSolution& dual) {
    const double p = dual.model.utility.p;
    const int nodes = dual.before.grid.nodes();
    PrimalSolution out;
    out.grid = dual.before.grid;
    out.p = p;
    out.psi0.resize(nodes);
    out.psi_hat0.resize(nodes);
    out.psi_tilde.resize(nodes);
    out.psi1.resize(dual.after.values.size());
    out.psi1_diagonal.resize(nodes);

    for (int j = 0; j < nodes; ++j) {
        const double phi0 = dual.before.values[j];
        out.psi0[j] = std::pow(phi0, 1.0 - p);
        out.psi_hat0[j] = (1.0 - p) * dual.before.zeta0[j] * std::pow(phi0, -p);
        out.psi1_diagonal[j] = std::pow(dual.after.diagonal[j], 1.0 - p);
        out.psi_tilde[j] = out.psi1_diagonal[j] - out.psi0[j];
    }
    for (std::size_t i = 0; i < dual.after.values.size(); ++i)
        out.psi1[i] = std::pow(dual.after.values[i], 1.0 - p);
    return out;
}

// Inverse map (the transform that carries the primal triple back onto the
// dual one): Y = y^{1-q}, Z = (1-q) y^{-q} z, U = (y + u)^{1-q} - y^{1-q}.
struct DualTriple {
    double value;
    double brownian_integrand;
    double jump_integrand;
};

inline DualTriple dual_from_primal(double y, double z, double u, double p) {
    if (!(y > 0.0) || !(y + u > 0.0))
        throw std::domain_error("dual_from_primal: y and y+u must be positive");
    const double q = p / (p - 1.0);
    return DualTriple{std::pow(y, 1.0 - q), (1.0 - q) * std::pow(y, -q) * z,
                      std::pow(y + u, 1.0 - q) - std::pow(y, 1.0 - q)};
}

}  // namespace regimeopt
