#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "regimeopt/path_simulator.hpp"
#include "regimeopt/strategy.hpp"

using namespace regimeopt;

namespace {

MarketModel make_model(double p, double r0, double nu, double sigma, double lambda, double r1) {
    return MarketModel{UtilityParams::make(p, 1.0),
                       1.0,
                       CoefficientFn::constant(r0),
                       CoefficientFn::constant(nu),
                       CoefficientFn::constant(sigma),
                       CoefficientFn::constant(lambda),
                       CoefficientFn::constant(r1),
                       lambda,
                       std::max({std::abs(nu), sigma, 1.0 / sigma, 1.0})};
}

std::shared_ptr<DualSolution> solve_shared(const MarketModel& model, int n_steps) {
    AfterSwitchSolution after = solve_phi1_closed(model, TimeGrid(model.horizon, n_steps));
    BeforeSwitchSolution before = solve_phi0_ode(model, after);
    return std::make_shared<DualSolution>(
        assemble_dual(model, std::move(before), std::move(after)));
}

const MarketModel kZero = make_model(0.5, 0.0, 0.0, 0.25, 0.0, 0.0);
const MarketModel kReference = make_model(0.5, 0.02, 0.07, 0.25, 0.3, 0.05);

}  // namespace

TEST_CASE("budget multiplier", "[strategy]") {
    CHECK(eta_star(2.0, 2.0, 0.5) == Catch::Approx(1.0).margin(1e-15));
    CHECK(eta_star(1.0, 2.0, 0.5) == Catch::Approx(std::sqrt(2.0)).margin(1e-14));
    CHECK_THROWS_AS(eta_star(0.0, 1.0, 0.5), std::domain_error);
    CHECK_THROWS_AS(eta_star(1.0, -1.0, 0.5), std::domain_error);

    // Monte Carlo cross-check through the dual objective
    auto dual = solve_shared(kReference, 100);
    SimConfig sim;
    sim.n_paths = 20000;
    sim.n_steps = 100;
    sim.seed = 314;
    const McEstimate obj = dual_objective_mc(gamma_star_of(*dual), kReference, sim);
    const double eta_mc = std::pow(1.0 / obj.value, 0.5 - 1.0);
    const double eta_exact = eta_star(1.0, dual->before.values[0], 0.5);
    // delta method for the standard error of (x0 / value)^{p-1}
    const double se_eta = 0.5 * std::pow(obj.value, -1.5) * obj.std_error;
    CHECK(std::abs(eta_mc - eta_exact) <= 3.0 * se_eta);
}

TEST_CASE("optimal controls", "[strategy]") {
    SECTION("myopic allocation when the integrand vanishes") {
        const Controls c = optimal_controls(1.0, 1.0, 2.0, 0.0, 0.2, 0.25, 1.0, 0.5);
        CHECK(c.pi == Catch::Approx(1.6).margin(1e-14));
    }
    SECTION("zero model consumes evenly") {
        auto dual = solve_shared(kZero, 100);
        const OptimalStrategy strategy(dual, 1.0);
        for (int j : {0, 25, 50, 99}) {
            const PathState s{j, 101, 1.0, 1.0};
            CHECK(strategy.c_star(s) == Catch::Approx(0.5).margin(1e-12));
            CHECK(strategy.pi_star(s) == Catch::Approx(0.0).margin(1e-14));
        }
    }
    SECTION("domain checks") {
        CHECK_THROWS_AS(optimal_controls(0.0, 1.0, 1.0, 0.0, 0.2, 0.25, 1.0, 0.5),
                        std::domain_error);
        CHECK_THROWS_AS(optimal_controls(1.0, 1.0, 1.0, 0.0, 0.2, 0.0, 1.0, 0.5),
                        std::domain_error);
    }
}

TEST_CASE("closed-form optimal wealth", "[strategy]") {
    SECTION("initial normalisation") {
        for (double x0 : {0.5, 1.0, 3.7}) {
            for (const MarketModel* m : {&kZero, &kReference}) {
                auto dual = solve_shared(*m, 50);
                const double eta = eta_star(x0, dual->before.values[0], 0.5);
                CHECK(optimal_wealth(1.0, 1.0, dual->before.values[0], eta, 0.5) ==
                      Catch::Approx(x0).margin(1e-12));
            }
        }
    }
    SECTION("zero model decays linearly") {
        auto dual = solve_shared(kZero, 100);
        const double eta = eta_star(1.0, dual->before.values[0], 0.5);
        for (int j : {0, 30, 70, 100}) {
            const double t = j / 100.0;
            CHECK(optimal_wealth(1.0, 1.0, dual->phi(j, 101), eta, 0.5) ==
                  Catch::Approx((2.0 - t) / 2.0).margin(1e-12));
        }
    }
}

TEST_CASE("primal value", "[strategy]") {
    CHECK(primal_value(1.0, 2.0, 0.5) == Catch::Approx(2.0 * std::sqrt(2.0)).margin(1e-10));
    CHECK(primal_value(1.0, 1.0, 0.5) == Catch::Approx(2.0).margin(1e-15));  // U(x0)

    // homogeneity and monotonicity in the endowment
    const double base = primal_value(1.0, 1.7, 0.37);
    CHECK(primal_value(2.5, 1.7, 0.37) ==
          Catch::Approx(std::pow(2.5, 0.37) * base).margin(1e-12));
    CHECK(primal_value(1.2, 1.7, 0.37) > base);

    // zero model: deterministic consumption 1/2 and terminal wealth 1/2
    const double direct = 1.0 * (std::sqrt(0.5) / 0.5) + std::sqrt(0.5) / 0.5;
    CHECK(primal_value(1.0, 2.0, 0.5) == Catch::Approx(direct).margin(1e-12));
}

TEST_CASE("primal transform and its inverse", "[strategy]") {
    SECTION("unit value process maps to unit value process") {
        AfterSwitchSolution after;
        after.grid = TimeGrid(1.0, 4);
        after.values.assign(25, 1.0);
        after.diagonal.assign(5, 1.0);
        after.upper_bound = 2.0;
        BeforeSwitchSolution before;
        before.grid = after.grid;
        before.values.assign(5, 1.0);
        before.zeta0.assign(5, 0.0);
        before.m_floor = 0.5;
        const DualSolution dual{kZero, before, after};
        const PrimalSolution primal = primal_from_dual(dual);
        for (int j = 0; j <= 4; ++j) {
            CHECK(primal.psi0[j] == 1.0);
            CHECK(primal.psi_hat0[j] == 0.0);
            CHECK(primal.psi_tilde[j] == 0.0);
        }
    }

    SECTION("zero model: value process is the square root of the horizon left") {
        auto dual = solve_shared(kZero, 100);
        const PrimalSolution primal = primal_from_dual(*dual);
        for (int j = 0; j <= 100; ++j) {
            const double t = j / 100.0;
            CHECK(primal.psi0[j] == Catch::Approx(std::sqrt(2.0 - t)).margin(1e-12));
            CHECK(primal.psi_tilde[j] == Catch::Approx(0.0).margin(1e-12));
        }
        CHECK(primal.value_function(0, 1.0) ==
              Catch::Approx(primal_value(1.0, 2.0, 0.5)).margin(1e-12));
    }

    SECTION("round trip reproduces the dual triple to 1e-10") {
        auto dual = solve_shared(kReference, 200);
        // synthetic non-zero Brownian integrand to exercise the z-map
        DualSolution noisy = *dual;
        for (int j = 0; j <= 200; ++j)
            noisy.before.zeta0[j] = 0.02 * std::sin(7.0 * j / 200.0);
        const PrimalSolution primal = primal_from_dual(noisy);
        for (int j = 0; j <= 200; ++j) {
            const DualTriple back = dual_from_primal(primal.psi0[j], primal.psi_hat0[j],
                                                     primal.psi_tilde[j], 0.5);
            CHECK(std::abs(back.value - noisy.before.values[j]) <= 1e-10);
            CHECK(std::abs(back.brownian_integrand - noisy.before.zeta0[j]) <= 1e-10);
            CHECK(std::abs(back.jump_integrand - noisy.phi_tilde(j, 200)) <= 1e-10);
        }
        // after-switch slices round-trip with zero jump integrand
        for (int iu : {0, 50, 150}) {
            for (int j = iu; j <= 200; ++j) {
                const DualTriple back =
                    dual_from_primal(primal.psi1_value(iu, j), 0.0, 0.0, 0.5);
                CHECK(std::abs(back.value - noisy.after.value(iu, j)) <= 1e-10);
            }
        }
    }

    SECTION("the two allocation formulas agree") {
        auto dual = solve_shared(kReference, 100);
        DualSolution noisy = *dual;
        for (int j = 0; j <= 100; ++j) noisy.before.zeta0[j] = 0.01 + 0.005 * j / 100.0;
        const PrimalSolution primal = primal_from_dual(noisy);
        for (int j = 0; j <= 100; ++j) {
            const double lhs = primal.psi_hat0[j] / ((1.0 - 0.5) * primal.psi0[j]);
            const double rhs = noisy.before.zeta0[j] / noisy.before.values[j];
            CHECK(std::abs(lhs - rhs) <= 1e-10);
        }
    }
}

TEST_CASE("strategy evaluators on paths", "[strategy]") {
    auto dual = solve_shared(kReference, 100);
    const OptimalStrategy strategy(dual, 1.0);

    SECTION("myopic after the switch, exactly on the grid") {
        const int js = 30;
        const double u = js / 100.0;
        for (int j = js; j <= 100; ++j) {
            const double theta1 = (0.07 - 0.05) / 0.25;
            const PathState s{j, js, 0.97, 1.02};
            CHECK(strategy.pi_star(s) ==
                  Catch::Approx(theta1 / (0.5 * 0.25)).margin(1e-13));
        }
        (void)u;
    }

    SECTION("consumption follows the deflator") {
        const PathState s{10, 101, 0.99, 1.01};
        const double expected =
            std::pow(strategy.eta() * 0.99 * 1.01, 1.0 / (0.5 - 1.0));
        CHECK(strategy.c_star(s) == Catch::Approx(expected).margin(1e-13));
    }

    SECTION("control bounds hold along simulated paths") {
        SimConfig sim;
        sim.n_paths = 200;
        sim.n_steps = 100;
        sim.seed = 99;
        auto batch = simulate_paths(kReference, sim);
        for (const auto& path : batch) {
            for (int j = 0; j <= 100; ++j) {
                const double g = strategy.gamma_star(j, path.switch_step);
                CHECK(g > -1.0);
                CHECK(g < 10.0);
            }
        }
    }
}
