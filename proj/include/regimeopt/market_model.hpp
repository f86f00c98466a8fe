#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace regimeopt {

/// Conjugate exponent q = p / (p - 1) of the power utility x^p / p.
inline double derive_q(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("utility exponent p must lie in (0, 1)");
    return p / (p - 1.0);
}

// Risk-aversion exponent p in (0,1), its conjugate q < 0 and the initial wealth.
struct UtilityParams {
    double p;
    double q;
    double x0;

    static UtilityParams make(double p, double x0) {
        const double q = derive_q(p);
        if (!(x0 > 0.0)) throw std::invalid_argument("initial wealth x0 must be positive");
        return UtilityParams{p, q, x0};
    }
};

// U(x) = x^p / p together with its conjugate and inverse marginal utility.
struct UtilityBundle {
    double p;
    double q;

    explicit UtilityBundle(double p_) : p(p_), q(derive_q(p_)) {}

    double utility(double x) const {
        require_positive(x);
        return std::pow(x, p) / p;
    }
    double marginal(double x) const {
        require_positive(x);
        return std::pow(x, p - 1.0);
    }
    // Convex conjugate: sup_x (U(x) - x y) = -y^q / q.
    double conjugate(double y) const {
        require_positive(y);
        return -std::pow(y, q) / q;
    }
    // Inverse marginal utility I(y) = y^{1/(p-1)}.
    double inverse_marginal(double y) const {
        require_positive(y);
        return std::pow(y, 1.0 / (p - 1.0));
    }

private:
    static void require_positive(double v) {
        if (!(v > 0.0)) throw std::domain_error("utility argument must be positive");
    }
};

inline UtilityBundle utility_bundle(double p) { return UtilityBundle(p); }

enum class CoefficientKind { constant, piecewise_constant, affine_in_switch_time };

// Deterministic coefficient process. Three families are supported:
//   - constant value,
//   - piecewise constant in time (right-continuous step function),
//   - affine in the switch time u on top of a piecewise base, clipped at zero
//     (used for the post-switch rate).
class CoefficientFn {
public:
    static CoefficientFn constant(double value) {
        CoefficientFn f;
        f.kind_ = CoefficientKind::constant;
        f.values_ = {value};
        return f;
    }

    // values[i] applies on [breaks[i-1], breaks[i]) with breaks[-1] = 0; the
    // last value extends to the horizon. breaks must be strictly increasing.
    static CoefficientFn piecewise(std::vector<double> values, std::vector<double> breaks) {
        if (values.empty()) throw std::invalid_argument("piecewise coefficient needs values");
        if (breaks.size() + 1 != values.size())
            throw std::invalid_argument("piecewise coefficient needs one more value than breakpoints");
        for (std::size_t i = 0; i < breaks.size(); ++i) {
            if (!(breaks[i] > 0.0) || (i > 0 && !(breaks[i] > breaks[i - 1])))
                throw std::invalid_argument("piecewise breakpoints must be positive and increasing");
        }
        CoefficientFn f;
        f.kind_ = CoefficientKind::piecewise_constant;
        f.values_ = std::move(values);
        f.breaks_ = std::move(breaks);
        return f;
    }

    static CoefficientFn affine_in_switch_time(CoefficientFn base, double slope) {
        if (base.kind_ == CoefficientKind::affine_in_switch_time)
            throw std::invalid_argument("affine coefficient base must be constant or piecewise");
        base.kind_ = CoefficientKind::affine_in_switch_time;
        base.slope_ = slope;
        return base;
    }

    CoefficientKind kind() const { return kind_; }
    bool depends_on_switch_time() const {
        return kind_ == CoefficientKind::affine_in_switch_time && slope_ != 0.0;
    }
    double slope() const { return slope_; }

    // Value at time t given switch time u (u ignored unless affine).
    double operator()(double t, double u = 0.0) const {
        const double base = base_value(t);
        if (kind_ != CoefficientKind::affine_in_switch_time) return base;
        return std::max(base + slope_ * u, 0.0);
    }

    // sup |value| over t in [0, horizon], u in [0, horizon].
    double max_abs(double horizon) const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        if (kind_ == CoefficientKind::affine_in_switch_time) {
            double hi = *std::max_element(values_.begin(), values_.end()) +
                        std::max(slope_ * horizon, 0.0);
            m = std::max({m, std::abs(hi)});
        }
        return m;
    }

    double min_value(double horizon) const {
        double m = *std::min_element(values_.begin(), values_.end());
        if (kind_ == CoefficientKind::affine_in_switch_time)
            return std::max(m + std::min(slope_ * horizon, 0.0), 0.0);
        return m;
    }

    double max_value(double horizon) const {
        double m = *std::max_element(values_.begin(), values_.end());
        if (kind_ == CoefficientKind::affine_in_switch_time)
            return std::max(m + std::max(slope_ * horizon, 0.0), 0.0);
        return m;
    }

    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& breakpoints() const { return breaks_; }

private:
    double base_value(double t) const {
        std::size_t i = 0;
        while (i < breaks_.size() && t >= breaks_[i]) ++i;
        return values_[i];
    }

    CoefficientKind kind_ = CoefficientKind::constant;
    std::vector<double> values_;
    std::vector<double> breaks_;
    double slope_ = 0.0;
};

enum class Regime { pre, post };

// Full market description: utility pair, horizon, the pre/post-switch rate
// coefficients, drift, volatility, switch intensity and its explicit bounds.
// Immutable after construction; safe to share across workers.
struct MarketModel {
    UtilityParams utility;
    double horizon;
    CoefficientFn r0;
    CoefficientFn nu;
    CoefficientFn sigma;
    CoefficientFn lambda;
    CoefficientFn r1;
    double big_lambda;  // declared upper bound for lambda
    double bound_c;     // declared (H-style) bound for |nu| and sigma in [1/C, C]

    double rate(double t, Regime regime, double u = 0.0) const {
        return regime == Regime::pre ? r0(t) : r1(t, u);
    }
    double theta(double t, Regime regime, double u = 0.0) const {
        return (nu(t) - rate(t, regime, u)) / sigma(t);
    }
    // Floor for the before-switch value process: exp((q - 1) * Lambda * T).
    double m_floor() const {
        return std::exp((utility.q - 1.0) * big_lambda * horizon);
    }
};

inline double risk_premium(const MarketModel& model, double t, Regime regime, double u = 0.0) {
    if (!(t >= 0.0 && t <= model.horizon))
        throw std::out_of_range("risk_premium: time outside [0, T]");
    if (regime == Regime::post && !(u <= t))
        throw std::invalid_argument("risk_premium: post-switch time requires u <= t");
    return model.theta(t, regime, u);
}

struct HypothesisCheck {
    std::string name;
    bool pass;
    std::string detail;
};

struct ModelReport {
    std::vector<HypothesisCheck> checks;
    bool ok() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline std::vector<double> scan_times(const CoefficientFn& f, double horizon) {
    std::vector<double> ts{0.0, horizon};
    for (double b : f.breakpoints())
        if (b < horizon) {
            ts.push_back(b);
            ts.push_back(std::nexttoward(b, 0.0));
        }
    const int n_probe = 16;
    for (int i = 1; i < n_probe; ++i) ts.push_back(horizon * i / n_probe);
    std::sort(ts.begin(), ts.end());
    return ts;
}

}  // namespace detail

// Checks the standing hypotheses on the coefficients: bounded non-negative
// intensity below the declared Lambda, non-negative bounded rates, bounded
// drift and two-sided volatility bound. Report-valued; never throws.
inline ModelReport validate_model(const MarketModel& model) {
    ModelReport report;
    const double T = model.horizon;
    const double C = model.bound_c;

    auto fail_time = [](double t) { return " at t=" + std::to_string(t); };

    {
        HypothesisCheck h{"H2-intensity", true, ""};
        for (double t : detail::scan_times(model.lambda, T)) {
            const double v = model.lambda(t);
            if (v < 0.0) {
                h.pass = false;
                h.detail = "lambda negative" + fail_time(t);
                break;
            }
            if (v > model.big_lambda) {
                h.pass = false;
                h.detail = "lambda exceeds declared Lambda" + fail_time(t);
                break;
            }
        }
        if (model.lambda.depends_on_switch_time()) {
            h.pass = false;
            h.detail = "intensity may not depend on the switch time";
        }
        report.checks.push_back(h);
    }

    {
        HypothesisCheck h{"H3-rates", true, ""};
        for (double t : detail::scan_times(model.r0, T)) {
            if (model.r0(t) < 0.0) {
                h.pass = false;
                h.detail = "r0 negative" + fail_time(t);
                break;
            }
        }
        if (h.pass) {
            for (double t : detail::scan_times(model.r1, T)) {
                for (double u : {0.0, 0.5 * T, T}) {
                    if (model.r1(t, u) < 0.0) {
                        h.pass = false;
                        h.detail = "r1 negative" + fail_time(t);
                        break;
                    }
                }
                if (!h.pass) break;
            }
        }
        if (model.r0.depends_on_switch_time()) {
            h.pass = false;
            h.detail = "r0 may not depend on the switch time";
        }
        report.checks.push_back(h);
    }

    {
        HypothesisCheck h{"H4-drift-volatility", true, ""};
        if (!(C > 0.0)) {
            h.pass = false;
            h.detail = "declared bound C must be positive";
        } else {
            for (double t : detail::scan_times(model.nu, T)) {
                if (std::abs(model.nu(t)) > C) {
                    h.pass = false;
                    h.detail = "|nu| exceeds C" + fail_time(t);
                    break;
                }
            }
            if (h.pass) {
                for (double t : detail::scan_times(model.sigma, T)) {
                    const double s = model.sigma(t);
                    if (!(s >= 1.0 / C && s <= C)) {
                        h.pass = false;
                        h.detail = "sigma outside [1/C, C]" + fail_time(t);
                        break;
                    }
                }
            }
        }
        if (model.nu.depends_on_switch_time() || model.sigma.depends_on_switch_time()) {
            h.pass = false;
            h.detail = "nu and sigma may not depend on the switch time";
        }
        report.checks.push_back(h);
    }

    {
        HypothesisCheck h{"utility", true, ""};
        if (!(model.utility.p > 0.0 && model.utility.p < 1.0)) {
            h.pass = false;
            h.detail = "p outside (0,1)";
        } else if (!(model.utility.x0 > 0.0)) {
            h.pass = false;
            h.detail = "x0 not positive";
        } else if (std::abs((1.0 - model.utility.p) * (1.0 - model.utility.q) - 1.0) > 1e-12) {
            h.pass = false;
            h.detail = "q inconsistent with p";
        }
        report.checks.push_back(h);
    }

    {
        HypothesisCheck h{"horizon", !!(model.horizon > 0.0), ""};
        if (!h.pass) h.detail = "T must be positive";
        report.checks.push_back(h);
    }

    return report;
}

}  // namespace regimeopt
