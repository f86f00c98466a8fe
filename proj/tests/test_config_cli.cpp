#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "regimeopt/config.hpp"
#include "regimeopt/runner.hpp"

using namespace regimeopt;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("regimeopt_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    out << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kMinimalConfig = R"({
  "model": {
    "p": 0.5, "T": 1.0, "x0": 1.0,
    "r0": 0.02, "nu": 0.07, "sigma": 0.25, "lambda": 0.3, "r1": 0.05
  }
})";

int run_cli(const std::string& args) {
    const std::string cmd = std::string(REGIMEOPT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config defaults and field validation", "[config]") {
    SECTION("minimal config fills the defaults") {
        const RunConfig cfg = parse_config(json::parse(kMinimalConfig));
        CHECK(cfg.solver.n_steps_ode == 1000);
        CHECK(cfg.solver.lsmc.n_paths == 50000);
        CHECK(cfg.solver.lsmc.n_steps == 50);
        CHECK(cfg.solver.lsmc.basis_degree == 3);
        CHECK(cfg.sim.n_paths == 100000);
        CHECK(cfg.sim.n_steps == 252);
        CHECK(cfg.sim.seed == 42);
        CHECK_FALSE(cfg.sim.antithetic);
        CHECK(cfg.output.directory == "out");
        CHECK(cfg.output.csv_precision == 17);
        CHECK(cfg.model.big_lambda == Catch::Approx(0.3));
    }
    SECTION("utility domain is enforced with a named message") {
        json doc = json::parse(kMinimalConfig);
        doc["model"]["p"] = 1.2;
        try {
            parse_config(doc);
            FAIL("expected rejection");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("model.p") != std::string::npos);
        }
    }
    SECTION("degenerate volatility is rejected by the hypothesis check") {
        json doc = json::parse(kMinimalConfig);
        doc["model"]["sigma"] = 0.0;
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
    }
    SECTION("missing fields are named") {
        json doc = json::parse(kMinimalConfig);
        doc["model"].erase("nu");
        try {
            parse_config(doc);
            FAIL("expected rejection");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("model.nu") != std::string::npos);
        }
    }
    SECTION("wrong types are named") {
        json doc = json::parse(kMinimalConfig);
        doc["sim"]["antithetic"] = "yes";
        try {
            parse_config(doc);
            FAIL("expected rejection");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("antithetic") != std::string::npos);
        }
    }
    SECTION("piecewise and affine coefficients parse") {
        json doc = json::parse(kMinimalConfig);
        doc["model"]["r0"] = {{"kind", "piecewise-constant-in-time"},
                              {"values", {0.01, 0.03}},
                              {"breakpoints", {0.5}}};
        doc["model"]["r1"] = {{"kind", "affine-in-switch-time"}, {"base", 0.05},
                              {"slope", -0.02}};
        const RunConfig cfg = parse_config(doc);
        CHECK(cfg.model.r0(0.25) == Catch::Approx(0.01));
        CHECK(cfg.model.r0(0.75) == Catch::Approx(0.03));
        CHECK(cfg.model.r1(0.8, 0.5) == Catch::Approx(0.04));
    }
    SECTION("unknown kinds and misplaced affine are rejected") {
        json doc = json::parse(kMinimalConfig);
        doc["model"]["sigma"] = {{"kind", "affine-in-switch-time"}, {"base", 0.2},
                                 {"slope", 0.1}};
        CHECK_THROWS_AS(parse_config(doc), ConfigError);
        json doc2 = json::parse(kMinimalConfig);
        doc2["model"]["r0"] = {{"kind", "mystery"}, {"value", 1.0}};
        CHECK_THROWS_AS(parse_config(doc2), ConfigError);
    }
}

TEST_CASE("runner artifacts", "[config]") {
    const fs::path dir = temp_dir("runner");
    json doc = json::parse(kMinimalConfig);
    doc["solver"] = {{"n_steps_ode", 200}};
    doc["output"] = {{"directory", (dir / "out").string()}};
    RunConfig cfg = parse_config(doc);

    SECTION("solve writes the grid export and the stored solution") {
        std::ostringstream os;
        CHECK(run_solve(cfg, os) == 0);
        CHECK(fs::exists(dir / "out" / "dual_solution.csv"));
        CHECK(fs::exists(dir / "out" / "solution.json"));
        CHECK(os.str().find("phi0(0)") != std::string::npos);

        const std::string csv = slurp(dir / "out" / "dual_solution.csv");
        CHECK(csv.rfind("t,phi0,phi1_diag,phi_tilde,gamma_star,zeta0\n", 0) == 0);

        // export re-emits byte-identical CSVs from the stored solution
        std::ostringstream os2;
        CHECK(run_export(cfg, os2) == 0);
        CHECK(slurp(dir / "out" / "dual_solution.csv") == csv);
        CHECK(fs::exists(dir / "out" / "strategy.csv"));
    }

    SECTION("strategy export") {
        std::ostringstream os;
        CHECK(run_strategy(cfg, os) == 0);
        CHECK(fs::exists(dir / "out" / "strategy.csv"));
        CHECK(os.str().find("eta_star") != std::string::npos);
        const std::string csv = slurp(dir / "out" / "strategy.csv");
        CHECK(csv.rfind("t,gamma_star,pi_star_pre,pi_star_post_diag,c_star_unit\n", 0) == 0);
    }

    SECTION("export without a stored solution is a config error") {
        RunConfig missing = cfg;
        missing.output.directory = (dir / "empty").string();
        std::ostringstream os;
        CHECK_THROWS_AS(run_export(missing, os), ConfigError);
    }
}

TEST_CASE("command-line interface", "[config]") {
    const fs::path dir = temp_dir("cli");
    json doc = json::parse(kMinimalConfig);
    doc["model"]["r1"] = 0.02;  // same-rate model keeps the verify suite cheap
    doc["model"]["r0"] = 0.02;
    doc["solver"] = {{"n_steps_ode", 200}};
    doc["sim"] = {{"n_paths", 4000}, {"n_steps", 50}, {"seed", 7}};
    const fs::path config = write_file(dir, "config.json", doc.dump(2));

    SECTION("zero-coefficient solve prints the closed form") {
        json zero = json::parse(kMinimalConfig);
        zero["model"]["r0"] = 0.0;
        zero["model"]["nu"] = 0.0;
        zero["model"]["lambda"] = 0.0;
        zero["model"]["r1"] = 0.0;
        const fs::path zero_cfg = write_file(dir, "zero.json", zero.dump(2));
        const std::string out_file = (dir / "solve_out.txt").string();
        const std::string cmd = std::string(REGIMEOPT_CLI_PATH) + " solve --config " +
                                zero_cfg.string() + " --out " + (dir / "z").string() + " > " +
                                out_file + " 2>&1";
        REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
        const std::string printed = slurp(out_file);
        CHECK(printed.find("phi0(0) = 2") != std::string::npos);
        CHECK(printed.find("2.82842712") != std::string::npos);
    }

    SECTION("verify succeeds and is byte-identical across runs") {
        const std::string out_a = (dir / "a").string();
        const std::string out_b = (dir / "b").string();
        REQUIRE(run_cli("verify --config " + config.string() + " --out " + out_a) == 0);
        REQUIRE(run_cli("verify --config " + config.string() + " --out " + out_b) == 0);
        const std::string report_a = slurp(fs::path(out_a) / "verify_report.json");
        const std::string report_b = slurp(fs::path(out_b) / "verify_report.json");
        CHECK(!report_a.empty());
        CHECK(report_a == report_b);
    }

    SECTION("seed override changes the report") {
        const std::string out_a = (dir / "s1").string();
        const std::string out_b = (dir / "s2").string();
        REQUIRE(run_cli("verify --config " + config.string() + " --out " + out_a) == 0);
        REQUIRE(run_cli("verify --config " + config.string() + " --seed 11 --out " + out_b) ==
                0);
        CHECK(slurp(fs::path(out_a) / "verify_report.json") !=
              slurp(fs::path(out_b) / "verify_report.json"));
    }

    SECTION("exit codes: malformed config is a usage error") {
        const fs::path bad = write_file(dir, "bad.json", "{ not json");
        CHECK(run_cli("solve --config " + bad.string()) == 2);
        const fs::path badp = write_file(dir, "badp.json",
                                         R"({"model":{"p":1.2,"T":1,"x0":1,"r0":0,
                                            "nu":0,"sigma":0.25,"lambda":0,"r1":0}})");
        CHECK(run_cli("solve --config " + badp.string()) == 2);
        CHECK(run_cli("solve --config " + (dir / "missing.json").string()) == 2);
        CHECK(run_cli("frobnicate --config " + config.string()) == 2);
    }

    SECTION("dump-paths writes the path sample") {
        const std::string out = (dir / "dump").string();
        REQUIRE(run_cli("simulate --config " + config.string() + " --dump-paths --out " +
                        out) == 0);
        const std::string csv = slurp(fs::path(out) / "paths.csv");
        CHECK(csv.rfind("path_id,t,B,H,R,L,X\n", 0) == 0);
    }
}
