#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>

#include "regimeopt/config.hpp"
#include "regimeopt/csv.hpp"
#include "regimeopt/dual_solver.hpp"
#include "regimeopt/path_simulator.hpp"
#include "regimeopt/strategy.hpp"
#include "regimeopt/validation.hpp"

namespace regimeopt {

namespace detail {

inline DualSolution solve_dual_on(const MarketModel& model, int n_steps) {
    const TimeGrid grid(model.horizon, n_steps);
    AfterSwitchSolution after = solve_phi1_closed(model, grid);
    BeforeSwitchSolution before = solve_phi0_ode(model, after);
    return assemble_dual(model, std::move(before), std::move(after));
}

inline std::filesystem::path ensure_out_dir(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.output.directory);
    std::filesystem::create_directories(dir);
    return dir;
}

inline ordered_json solution_to_json(const RunConfig& cfg, const DualSolution& dual) {
    ordered_json j;
    j["model"] = cfg.echo.at("model");
    j["grid"] = {{"T", dual.before.grid.horizon}, {"n_steps", dual.before.grid.n_steps}};
    j["m_floor"] = dual.before.m_floor;
    j["phi0"] = dual.before.values;
    j["phi1_diag"] = dual.after.diagonal;
    j["zeta0"] = dual.before.zeta0;
    return j;
}

inline ordered_json report_to_json(const CheckReport& r) {
    ordered_json j;
    j["check"] = r.name;
    j["statistic"] = r.statistic;
    j["threshold"] = r.threshold;
    j["pass"] = r.pass;
    j["n_paths"] = r.n_paths;
    j["seed"] = r.seed;
    j["se"] = r.std_error;
    ordered_json items = ordered_json::array();
    for (const auto& it : r.items) {
        items.push_back({{"label", it.label},
                         {"statistic", it.statistic},
                         {"threshold", it.threshold},
                         {"pass", it.pass},
                         {"se", it.std_error},
                         {"value", it.value}});
    }
    j["items"] = std::move(items);
    return j;
}

inline void print_suite(const SuiteReport& suite, std::ostream& os) {
    os << std::left << std::setw(34) << "check" << std::setw(14) << "statistic"
       << std::setw(12) << "threshold" << std::setw(8) << "pass" << "n_paths\n";
    for (const auto& c : suite.checks) {
        os << std::left << std::setw(34) << c.name << std::setw(14)
           << format_number(c.statistic, 6) << std::setw(12) << format_number(c.threshold, 6)
           << std::setw(8) << (c.pass ? "ok" : "FAIL") << c.n_paths << '\n';
        if (!c.pass) {
            for (const auto& it : c.items)
                if (!it.pass)
                    os << "    failed: " << it.label << " statistic="
                       << format_number(it.statistic, 6)
                       << " threshold=" << format_number(it.threshold, 6) << '\n';
        }
    }
    os << (suite.all_pass() ? "all checks passed\n" : "CHECKS FAILED\n");
}

}  // namespace detail

inline int run_solve(const RunConfig& cfg, std::ostream& os) {
    const DualSolution dual = detail::solve_dual_on(cfg.model, cfg.solver.n_steps_ode);
    const auto dir = detail::ensure_out_dir(cfg);
    write_dual_csv((dir / "dual_solution.csv").string(), dual, cfg.output.csv_precision);
    std::ofstream store(dir / "solution.json", std::ios::binary);
    store << detail::solution_to_json(cfg, dual).dump(2) << '\n';
    os << "phi0(0) = " << format_number(dual.before.values[0], 12) << '\n';
    os << "V(x0) = "
       << format_number(
              primal_value(cfg.model.utility.x0, dual.before.values[0], cfg.model.utility.p), 12)
       << '\n';
    return 0;
}

inline int run_strategy(const RunConfig& cfg, std::ostream& os) {
    auto dual = std::make_shared<DualSolution>(
        detail::solve_dual_on(cfg.model, cfg.solver.n_steps_ode));
    const OptimalStrategy strategy(dual, cfg.model.utility.x0);
    const auto dir = detail::ensure_out_dir(cfg);
    write_strategy_csv((dir / "strategy.csv").string(), *dual, cfg.output.csv_precision);
    const double theta0 = cfg.model.theta(0.0, Regime::pre);
    const double pi0 = (dual->before.zeta0[0] / dual->before.values[0] +
                        theta0 / (1.0 - cfg.model.utility.p)) /
                       cfg.model.sigma(0.0);
    os << "eta_star = " << format_number(strategy.eta(), 12) << '\n';
    os << "gamma_star(0) = " << format_number(dual->gamma_star_pre(0), 12) << '\n';
    os << "pi_star(0) = " << format_number(pi0, 12) << '\n';
    return 0;
}

inline int run_simulate(const RunConfig& cfg, std::ostream& os, bool dump_paths = false) {
    auto dual = std::make_shared<DualSolution>(
        detail::solve_dual_on(cfg.model, cfg.sim.n_steps));
    const OptimalStrategy strategy(dual, cfg.model.utility.x0);

    const McEstimate dual_obj = dual_objective_mc(gamma_star_of(*dual), cfg.model, cfg.sim);
    const McEstimate primal_obj = primal_objective_mc(cfg.model, *dual, strategy, cfg.sim);

    os << "dual objective at gamma_star = " << format_number(dual_obj.value, 12) << " (se "
       << format_number(dual_obj.std_error, 6) << ", phi0(0) = "
       << format_number(dual->before.values[0], 12) << ")\n";
    os << "primal objective at (pi_star, c_star) = " << format_number(primal_obj.value, 12)
       << " (se " << format_number(primal_obj.std_error, 6) << ", V(x0) = "
       << format_number(primal_value(cfg.model.utility.x0, dual->before.values[0],
                                     cfg.model.utility.p),
                        12)
       << ")\n";

    if (dump_paths) {
        const auto dir = detail::ensure_out_dir(cfg);
        SimConfig small = cfg.sim;
        small.n_paths = std::min<long>(cfg.sim.n_paths, 100);
        auto batch = simulate_paths(cfg.model, small);
        const GammaFn gamma = gamma_star_of(*dual);
        for (auto& path : batch) {
            density_path(path, gamma, cfg.model);
            wealth_path_euler(
                path, [&](const PathState& s) { return strategy.pi_star(s); },
                [&](const PathState& s) { return strategy.c_star(s); },
                cfg.model.utility.x0, cfg.model);
        }
        write_paths_csv((dir / "paths.csv").string(), batch, cfg.output.csv_precision);
        os << "wrote " << small.n_paths << " paths to paths.csv\n";
    }
    return 0;
}

inline ordered_json verify_report_json(const RunConfig& cfg, const SuiteReport& suite) {
    ordered_json doc;
    doc["seed"] = cfg.sim.seed;
    doc["n_paths"] = cfg.sim.n_paths;
    doc["n_steps"] = cfg.sim.n_steps;
    doc["model"] = cfg.echo.at("model");
    ordered_json checks = ordered_json::array();
    for (const auto& c : suite.checks) checks.push_back(detail::report_to_json(c));
    doc["checks"] = std::move(checks);
    doc["all_pass"] = suite.all_pass();
    return doc;
}

inline int run_verify(const RunConfig& cfg, std::ostream& os) {
    const SuiteReport suite = run_full_suite(cfg.model, cfg.solver.n_steps_ode, cfg.sim);
    const auto dir = detail::ensure_out_dir(cfg);
    std::ofstream out(dir / "verify_report.json", std::ios::binary);
    out << verify_report_json(cfg, suite).dump(2) << '\n';
    detail::print_suite(suite, os);
    return suite.all_pass() ? 0 : 1;
}

// Re-emits the CSV exports from a stored solution without re-solving.
inline int run_export(const RunConfig& cfg, std::ostream& os) {
    const auto dir = detail::ensure_out_dir(cfg);
    const auto stored = dir / "solution.json";
    std::ifstream in(stored);
    if (!in) throw ConfigError("no stored solution at " + stored.string() + "; run solve first");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("stored solution is not valid JSON: ") + e.what());
    }

    json model_doc;
    model_doc["model"] = doc.at("model");
    RunConfig stored_cfg = parse_config(model_doc);
    const int n_steps = doc.at("grid").at("n_steps").get<int>();

    AfterSwitchSolution after;
    after.grid = TimeGrid(stored_cfg.model.horizon, n_steps);
    after.diagonal = doc.at("phi1_diag").get<std::vector<double>>();
    after.values.assign(static_cast<std::size_t>(after.grid.nodes()) * after.grid.nodes(), 1.0);
    for (int j = 0; j < after.grid.nodes(); ++j)
        after.values[static_cast<std::size_t>(j) * after.grid.nodes() + j] = after.diagonal[j];

    BeforeSwitchSolution before;
    before.grid = after.grid;
    before.values = doc.at("phi0").get<std::vector<double>>();
    before.zeta0 = doc.at("zeta0").get<std::vector<double>>();
    before.m_floor = doc.at("m_floor").get<double>();
    if (static_cast<int>(before.values.size()) != before.grid.nodes() ||
        static_cast<int>(before.zeta0.size()) != before.grid.nodes() ||
        static_cast<int>(after.diagonal.size()) != after.grid.nodes())
        throw ConfigError("stored solution grids are inconsistent");

    DualSolution dual{stored_cfg.model, std::move(before), std::move(after)};
    write_dual_csv((dir / "dual_solution.csv").string(), dual, cfg.output.csv_precision);
    write_strategy_csv((dir / "strategy.csv").string(), dual, cfg.output.csv_precision);
    os << "re-emitted dual_solution.csv and strategy.csv from " << stored.string() << '\n';
    return 0;
}

}  // namespace regimeopt
