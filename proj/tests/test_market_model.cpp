#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "regimeopt/market_model.hpp"

using namespace regimeopt;

namespace {

MarketModel constant_model(double p, double r0, double nu, double sigma, double lambda,
                           double r1, double T = 1.0, double x0 = 1.0) {
    return MarketModel{UtilityParams::make(p, x0),
                       T,
                       CoefficientFn::constant(r0),
                       CoefficientFn::constant(nu),
                       CoefficientFn::constant(sigma),
                       CoefficientFn::constant(lambda),
                       CoefficientFn::constant(r1),
                       lambda,
                       std::max({std::abs(nu), sigma, 1.0 / sigma, 1.0})};
}

}  // namespace

TEST_CASE("conjugate exponent", "[market]") {
    CHECK(derive_q(0.5) == Catch::Approx(-1.0).margin(1e-15));
    CHECK(derive_q(0.75) == Catch::Approx(-3.0).margin(1e-12));
    CHECK_THROWS_AS(derive_q(0.0), std::invalid_argument);
    CHECK_THROWS_AS(derive_q(1.0), std::invalid_argument);
    CHECK_THROWS_AS(derive_q(1.2), std::invalid_argument);

    // q tends to 0- as p tends to 0+
    CHECK(derive_q(1e-6) < 0.0);
    CHECK(derive_q(1e-6) > -1.1e-6);

    std::mt19937_64 rng(20240901);
    std::uniform_real_distribution<double> unif(0.01, 0.99);
    for (int i = 0; i < 100; ++i) {
        const double p = unif(rng);
        const double q = derive_q(p);
        CHECK(std::abs((1.0 - p) * (1.0 - q) - 1.0) <= 1e-12);
        CHECK(q < 0.0);
    }
}

TEST_CASE("utility bundle and the conjugate relation", "[market]") {
    const UtilityBundle u = utility_bundle(0.5);
    CHECK(u.utility(1.0) == Catch::Approx(2.0).margin(1e-15));
    CHECK(u.inverse_marginal(1.0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(u.inverse_marginal(4.0) == Catch::Approx(0.0625).margin(1e-15));
    CHECK_THROWS_AS(u.utility(0.0), std::domain_error);
    CHECK_THROWS_AS(u.conjugate(-1.0), std::domain_error);

    // U(x) = inf_y (conjugate(y) + x y), attained at the marginal utility.
    {
        auto objective = [&](double y) { return u.conjugate(y) + 1.0 * y; };
        const double y_star = oracles::golden_section_min(objective, 1e-4, 50.0);
        CHECK(objective(y_star) == Catch::Approx(u.utility(1.0)).margin(1e-8));
        CHECK(y_star == Catch::Approx(u.marginal(1.0)).margin(1e-5));
    }

    // inverse_marginal solves marginal(x) = y (bisection oracle)
    {
        const double y = 4.0;
        double lo = 1e-8, hi = 10.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (u.marginal(mid) > y ? lo : hi) = mid;
        }
        CHECK(u.inverse_marginal(y) == Catch::Approx(0.5 * (lo + hi)).margin(1e-8));
    }

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif_p(0.05, 0.95);
    std::uniform_real_distribution<double> unif_x(0.2, 5.0);
    for (int i = 0; i < 25; ++i) {
        const UtilityBundle b = utility_bundle(unif_p(rng));
        const double x = unif_x(rng);
        auto objective = [&](double y) { return b.conjugate(y) + x * y; };
        const double y_star = oracles::golden_section_min(objective, 1e-5, 100.0);
        CHECK(std::abs(b.utility(x) - objective(y_star)) <= 1e-6);
    }
}

TEST_CASE("risk premium", "[market]") {
    const MarketModel m = constant_model(0.5, 0.02, 0.07, 0.25, 0.3, 0.05);
    CHECK(risk_premium(m, 0.3, Regime::pre) == Catch::Approx(0.2).margin(1e-15));
    CHECK(risk_premium(m, 0.8, Regime::post, 0.5) ==
          Catch::Approx((0.07 - 0.05) / 0.25).margin(1e-15));
    CHECK_THROWS_AS(risk_premium(m, -0.1, Regime::pre), std::out_of_range);
    CHECK_THROWS_AS(risk_premium(m, 1.5, Regime::pre), std::out_of_range);
    CHECK_THROWS_AS(risk_premium(m, 0.2, Regime::post, 0.5), std::invalid_argument);

    // zero excess return
    const MarketModel flat = constant_model(0.5, 0.03, 0.03, 0.2, 0.1, 0.03);
    CHECK(risk_premium(flat, 0.5, Regime::pre) == 0.0);

    // constant coefficients give a time-constant premium
    for (double t : {0.0, 0.25, 0.5, 0.99})
        CHECK(risk_premium(m, t, Regime::pre) == Catch::Approx(0.2).margin(1e-15));

    // sign flips exactly with the excess return
    const MarketModel inverted = constant_model(0.5, 0.07, 0.02, 0.25, 0.1, 0.07);
    CHECK(risk_premium(inverted, 0.5, Regime::pre) < 0.0);
}

TEST_CASE("piecewise and affine coefficients", "[market]") {
    const CoefficientFn pw = CoefficientFn::piecewise({0.01, 0.03, 0.02}, {0.25, 0.6});
    CHECK(pw(0.0) == 0.01);
    CHECK(pw(0.24) == 0.01);
    CHECK(pw(0.25) == 0.03);
    CHECK(pw(0.6) == 0.02);
    CHECK(pw(1.0) == 0.02);
    CHECK(pw.max_abs(1.0) == 0.03);
    CHECK(pw.min_value(1.0) == 0.01);

    const CoefficientFn aff =
        CoefficientFn::affine_in_switch_time(CoefficientFn::constant(0.05), -0.08);
    CHECK(aff(0.3, 0.0) == Catch::Approx(0.05));
    CHECK(aff(0.3, 0.5) == Catch::Approx(0.01));
    CHECK(aff(0.9, 0.9) == 0.0);  // clipped at zero
    CHECK(aff.depends_on_switch_time());

    CHECK_THROWS_AS(CoefficientFn::piecewise({0.1}, {0.5}), std::invalid_argument);
    CHECK_THROWS_AS(CoefficientFn::piecewise({0.1, 0.2, 0.3}, {0.6, 0.4}),
                    std::invalid_argument);
}

TEST_CASE("model validation report", "[market]") {
    SECTION("admissible constant model passes") {
        const MarketModel m = constant_model(0.5, 0.02, 0.07, 0.25, 0.3, 0.05);
        const ModelReport r = validate_model(m);
        CHECK(r.ok());
    }
    SECTION("degenerate volatility fails the two-sided bound") {
        MarketModel m = constant_model(0.5, 0.02, 0.07, 0.25, 0.3, 0.05);
        m.sigma = CoefficientFn::constant(0.0);
        const ModelReport r = validate_model(m);
        CHECK_FALSE(r.ok());
        bool found = false;
        for (const auto& c : r.checks)
            if (c.name == "H4-drift-volatility" && !c.pass) found = true;
        CHECK(found);
    }
    SECTION("intensity above the declared bound fails") {
        MarketModel m = constant_model(0.5, 0.02, 0.07, 0.25, 0.3, 0.05);
        m.big_lambda = 0.2;
        const ModelReport r = validate_model(m);
        CHECK_FALSE(r.ok());
        bool found = false;
        for (const auto& c : r.checks)
            if (c.name == "H2-intensity" && !c.pass) found = true;
        CHECK(found);
    }
    SECTION("negative rate fails") {
        MarketModel m = constant_model(0.5, 0.02, 0.07, 0.25, 0.3, 0.05);
        m.r0 = CoefficientFn::constant(-0.01);
        CHECK_FALSE(validate_model(m).ok());
    }
}

TEST_CASE("floor constant", "[market]") {
    const MarketModel m = constant_model(0.5, 0.02, 0.07, 0.25, 0.3, 0.05);
    // q = -1, Lambda = 0.3, T = 1: exp(-2 * 0.3)
    CHECK(m.m_floor() == Catch::Approx(std::exp(-0.6)).margin(1e-15));
}
