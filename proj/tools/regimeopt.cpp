#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "regimeopt/runner.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool dump_paths = false;
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "override the simulation seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--out", args.out_dir, "override the output directory");
}

regimeopt::RunConfig load(const CommonArgs& args) {
    regimeopt::RunConfig cfg = regimeopt::load_config(args.config_path);
    if (args.seed_set) cfg.sim.seed = args.seed;
    if (!args.out_dir.empty()) cfg.output.directory = args.out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-method optimal investment/consumption under a regime-switching rate"};
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* solve = app.add_subcommand("solve", "solve the dual system and export the grids");
    CLI::App* strategy = app.add_subcommand("strategy", "derive and export the optimal strategy");
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo objectives under the optimal controls");
    CLI::App* verify = app.add_subcommand("verify", "run the verification suite");
    CLI::App* export_cmd = app.add_subcommand("export", "re-emit CSVs from a stored solution");
    for (CLI::App* cmd : {solve, strategy, simulate, verify, export_cmd}) attach_common(cmd, args);
    simulate->add_flag("--dump-paths", args.dump_paths, "write a small path sample as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        const regimeopt::RunConfig cfg = load(args);
        if (solve->parsed()) return regimeopt::run_solve(cfg, std::cout);
        if (strategy->parsed()) return regimeopt::run_strategy(cfg, std::cout);
        if (simulate->parsed()) return regimeopt::run_simulate(cfg, std::cout, args.dump_paths);
        if (verify->parsed()) return regimeopt::run_verify(cfg, std::cout);
        if (export_cmd->parsed()) return regimeopt::run_export(cfg, std::cout);
    } catch (const regimeopt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
