#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <stdexcept>
#include <string>

#include "regimeopt/market_model.hpp"
#include "regimeopt/path_simulator.hpp"

namespace regimeopt {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Configuration or model-validation problem; the message names the field.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LsmcConfig {
    long n_paths = 50000;
    int n_steps = 50;
    int basis_degree = 3;
};

struct SolverConfig {
    int n_steps_ode = 1000;
    LsmcConfig lsmc;
};

struct OutputConfig {
    std::string directory = "out";
    int csv_precision = 17;
};

struct RunConfig {
    MarketModel model;
    SolverConfig solver;
    SimConfig sim;
    OutputConfig output;
    ordered_json echo;  // normalised copy of the parsed document
};

namespace detail {

inline const json& need(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError("missing field: " + path + "." + key);
    return j.at(key);
}

inline double need_number(const json& j, const std::string& key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number()) throw ConfigError("field must be a number: " + path + "." + key);
    return v.get<double>();
}

inline double opt_number(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError("field must be a number: " + key);
    return j.at(key).get<double>();
}

inline std::vector<double> need_array(const json& j, const std::string& key,
                                      const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_array() || v.empty())
        throw ConfigError("field must be a non-empty array: " + path + "." + key);
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("array holds a non-number: " + path + "." + key);
        out.push_back(e.get<double>());
    }
    return out;
}

inline CoefficientFn parse_base(const json& j, const std::string& path) {
    if (j.is_number()) return CoefficientFn::constant(j.get<double>());
    if (!j.is_object()) throw ConfigError("coefficient must be a number or object: " + path);
    std::vector<double> values = need_array(j, "values", path);
    std::vector<double> breaks =
        j.contains("breakpoints") ? need_array(j, "breakpoints", path) : std::vector<double>{};
    try {
        return CoefficientFn::piecewise(std::move(values), std::move(breaks));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline CoefficientFn parse_coefficient(const json& j, const std::string& path,
                                       bool allow_affine) {
    if (j.is_number()) return CoefficientFn::constant(j.get<double>());
    if (!j.is_object()) throw ConfigError("coefficient must be a number or object: " + path);
    const std::string kind = need(j, "kind", path).get<std::string>();
    if (kind == "constant") return CoefficientFn::constant(need_number(j, "value", path));
    if (kind == "piecewise-constant-in-time") return parse_base(j, path);
    if (kind == "affine-in-switch-time") {
        if (!allow_affine)
            throw ConfigError(path + ": only the post-switch rate may depend on the switch time");
        CoefficientFn base = parse_base(need(j, "base", path), path + ".base");
        return CoefficientFn::affine_in_switch_time(std::move(base),
                                                    need_number(j, "slope", path));
    }
    throw ConfigError(path + ": unknown coefficient kind '" + kind + "'");
}

}  // namespace detail

inline RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config root must be an object");
    const json& model_j = detail::need(doc, "model", "config");

    const double p = detail::need_number(model_j, "p", "model");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("model.p: must lie in (0, 1)");
    const double horizon = detail::need_number(model_j, "T", "model");
    if (!(horizon > 0.0)) throw ConfigError("model.T: must be positive");
    const double x0 = detail::need_number(model_j, "x0", "model");
    if (!(x0 > 0.0)) throw ConfigError("model.x0: must be positive");

    CoefficientFn r0 = detail::parse_coefficient(detail::need(model_j, "r0", "model"),
                                                 "model.r0", false);
    CoefficientFn nu = detail::parse_coefficient(detail::need(model_j, "nu", "model"),
                                                 "model.nu", false);
    CoefficientFn sigma = detail::parse_coefficient(detail::need(model_j, "sigma", "model"),
                                                    "model.sigma", false);
    CoefficientFn lambda = detail::parse_coefficient(detail::need(model_j, "lambda", "model"),
                                                     "model.lambda", false);
    CoefficientFn r1 = detail::parse_coefficient(detail::need(model_j, "r1", "model"),
                                                 "model.r1", true);

    const double big_lambda =
        detail::opt_number(model_j, "Lambda", lambda.max_value(horizon));
    double default_c = std::max(nu.max_abs(horizon), sigma.max_value(horizon));
    const double sigma_min = sigma.min_value(horizon);
    if (sigma_min > 0.0) default_c = std::max(default_c, 1.0 / sigma_min);
    const double bound_c = detail::opt_number(model_j, "bound_C", std::max(default_c, 1.0));

    RunConfig cfg;
    cfg.model = MarketModel{UtilityParams::make(p, x0), horizon,
                            std::move(r0),    std::move(nu),     std::move(sigma),
                            std::move(lambda), std::move(r1),    big_lambda,
                            bound_c};

    const ModelReport report = validate_model(cfg.model);
    if (!report.ok()) {
        for (const auto& c : report.checks)
            if (!c.pass) throw ConfigError("model rejected by " + c.name + ": " + c.detail);
    }

    if (doc.contains("solver")) {
        const json& s = doc.at("solver");
        cfg.solver.n_steps_ode =
            static_cast<int>(detail::opt_number(s, "n_steps_ode", cfg.solver.n_steps_ode));
        if (cfg.solver.n_steps_ode < 2) throw ConfigError("solver.n_steps_ode: must be >= 2");
        if (s.contains("lsmc")) {
            const json& l = s.at("lsmc");
            cfg.solver.lsmc.n_paths =
                static_cast<long>(detail::opt_number(l, "n_paths", cfg.solver.lsmc.n_paths));
            cfg.solver.lsmc.n_steps =
                static_cast<int>(detail::opt_number(l, "n_steps", cfg.solver.lsmc.n_steps));
            cfg.solver.lsmc.basis_degree = static_cast<int>(
                detail::opt_number(l, "basis_degree", cfg.solver.lsmc.basis_degree));
            if (cfg.solver.lsmc.n_paths < 100)
                throw ConfigError("solver.lsmc.n_paths: must be >= 100");
            if (cfg.solver.lsmc.n_steps < 2) throw ConfigError("solver.lsmc.n_steps: must be >= 2");
            if (cfg.solver.lsmc.basis_degree < 0 || cfg.solver.lsmc.basis_degree > 6)
                throw ConfigError("solver.lsmc.basis_degree: must lie in [0, 6]");
        }
    }

    if (doc.contains("sim")) {
        const json& s = doc.at("sim");
        cfg.sim.n_paths = static_cast<long>(detail::opt_number(s, "n_paths", cfg.sim.n_paths));
        cfg.sim.n_steps = static_cast<int>(detail::opt_number(s, "n_steps", cfg.sim.n_steps));
        if (s.contains("seed")) {
            if (!s.at("seed").is_number_unsigned())
                throw ConfigError("sim.seed: must be a non-negative integer");
            cfg.sim.seed = s.at("seed").get<std::uint64_t>();
        }
        if (s.contains("antithetic")) {
            if (!s.at("antithetic").is_boolean())
                throw ConfigError("sim.antithetic: must be a boolean");
            cfg.sim.antithetic = s.at("antithetic").get<bool>();
        }
        if (cfg.sim.n_paths < 1) throw ConfigError("sim.n_paths: must be >= 1");
        if (cfg.sim.n_steps < 2) throw ConfigError("sim.n_steps: must be >= 2");
    }

    if (doc.contains("output")) {
        const json& o = doc.at("output");
        if (o.contains("directory")) {
            if (!o.at("directory").is_string())
                throw ConfigError("output.directory: must be a string");
            cfg.output.directory = o.at("directory").get<std::string>();
        }
        cfg.output.csv_precision =
            static_cast<int>(detail::opt_number(o, "csv_precision", cfg.output.csv_precision));
        if (cfg.output.csv_precision < 6 || cfg.output.csv_precision > 17)
            throw ConfigError("output.csv_precision: must lie in [6, 17]");
    }

    cfg.echo = ordered_json::parse(doc.dump());
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

}  // namespace regimeopt
