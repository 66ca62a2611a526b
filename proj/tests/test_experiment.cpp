#include "eclkit/experiment.hpp"
#include "eclkit/self_check.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace eclkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "eclkit_test_experiment";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

const char* kSineGordon = R"(
[model]
name = sine_gordon
[grid]
n = 16
dx = 0.5
[time]
dt = 0.1
n_steps = 20
)";

ExperimentConfig sine_gordon(std::size_t n_steps, const std::string& stem) {
    auto cfg = parse_config(kSineGordon);
    cfg.n_steps = n_steps;
    cfg.csv_path = scratch(stem + ".csv");
    cfg.json_path = scratch(stem + ".json");
    return cfg;
}

} // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse_config(kSineGordon);
    CHECK(cfg.model_name == "sine_gordon");
    CHECK(cfg.n_points == 16);
    CHECK(cfg.dx == 0.5);
    CHECK(cfg.step.dt == 0.1);
    CHECK(cfg.n_steps == 20);
    CHECK(!cfg.baseline);

    const auto t = parse_config("[model]\nname = kdv_type\n[grid]\nn = 10\nlength = 5\n[time]\ndt = 0.05\nt_final = 1\n");
    CHECK(t.dx == doctest::Approx(0.5));
    CHECK(t.n_steps == 20);

    const auto rel = parse_config(std::string(kSineGordon) + "[output]\ncsv = out.csv\n", "/some/dir");
    CHECK(rel.csv_path == fs::path("/some/dir/out.csv"));

    CHECK_THROWS_AS(parse_config("[model]\nname = no_such_model\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(std::string(kSineGordon) + "[bogus]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nname = sine_gordon\n[grid]\nn = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nname = sine_gordon\n[time]\ndt = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nname = sine_gordon\n[time]\ndt = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nname = sine_gordon\n[scheme]\nnodes = 40\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nname = multisym_wave\n[scheme]\nmethod = explicit_euler\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nname = multisym_wave\n[time]\nsolver = fixed_point\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model\nname = x\n"), ConfigError);
    CHECK_THROWS_AS(load_config(scratch("missing.ini")), ConfigError);
}

TEST_CASE("initial states") {
    auto cfg = parse_config(kSineGordon);
    const auto m = cfg.model();
    const auto z = initial_state(cfg, m);
    CHECK(z(0, 8) == doctest::Approx(1.0));  // centered bump peaks mid-domain
    CHECK(z(1, 8) == 0.0);

    const auto csv = scratch("init.csv");
    {
        std::ofstream f(csv);
        for (int i = 0; i < 16; ++i) f << i << ',' << -i << '\n';
    }
    cfg.initial.kind = InitialKind::FromFile;
    cfg.initial.path = csv;
    const auto zf = initial_state(cfg, m);
    CHECK(zf(0, 3) == 3.0);
    CHECK(zf(1, 3) == -3.0);
    cfg.n_points = 17;
    CHECK_THROWS_AS(initial_state(cfg, cfg.model()), ConfigError);
}

TEST_CASE("run writes one CSV row per state and a JSON report") {
    std::ostringstream out, err;
    const auto cfg = sine_gordon(100, "run");
    REQUIRE(cmd_run(cfg, out, err) == kExitOk);
    const auto rows = lines(slurp(cfg.csv_path));
    REQUIRE(rows.size() == 102);
    CHECK(rows[0] == "step,time,total_energy,energy_drift,max_ecl_residual,newton_iters");
    const auto j = nlohmann::json::parse(slurp(cfg.json_path));
    CHECK(j["status"] == "ok");
    CHECK(j["final"]["steps_completed"] == 100);
    CHECK(std::abs(j["final"]["relative_energy_drift"].get<double>()) <= 1e-9);
    CHECK(j["steps"].size() == 101);  // includes the initial state
    CHECK(j["flux_method"] == "canonical_bar_flux");

    // reruns are byte identical
    const auto first = slurp(cfg.csv_path);
    const auto first_json = slurp(cfg.json_path);
    REQUIRE(cmd_run(cfg, out, err) == kExitOk);
    CHECK(slurp(cfg.csv_path) == first);
    CHECK(slurp(cfg.json_path) == first_json);
}

TEST_CASE("a zero-step run has a single zero-drift row") {
    std::ostringstream out, err;
    const auto cfg = sine_gordon(0, "zero");
    REQUIRE(cmd_run(cfg, out, err) == kExitOk);
    const auto rows = lines(slurp(cfg.csv_path));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].rfind("0,0,", 0) == 0);
    const auto j = nlohmann::json::parse(slurp(cfg.json_path));
    CHECK(j["final"]["energy_drift"] == 0.0);
}

TEST_CASE("exit codes") {
    std::ostringstream out, err;
    const auto bad = scratch("bad.ini");
    {
        std::ofstream(bad) << "[model]\nname = nope\n";
    }
    CHECK(cmd_run_file(bad, out, err) == kExitConfigError);
    CHECK(cmd_run_file(scratch("absent.ini"), out, err) == kExitConfigError);

    // a solver that cannot converge in one iteration at this tolerance
    auto cfg = sine_gordon(5, "fail");
    cfg.step.dt = 0.5;
    cfg.step.tol = 1e-15;
    cfg.step.max_iter = 1;
    CHECK(cmd_run(cfg, out, err) == kExitSolverFailure);
    const auto rows = lines(slurp(cfg.csv_path));
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].rfind("0,", 0) == 0);
    CHECK(rows[2].rfind("# status: solver_failure at step 1", 0) == 0);
    const auto j = nlohmann::json::parse(slurp(cfg.json_path));
    CHECK(j["status"] == "solver_failure");
}

TEST_CASE("sweeps") {
    auto base = parse_config(kSineGordon);
    const SweepGrid grid{{0.1, 0.05}, {16, 32}, {"default"}};
    const auto cells = run_sweep(base, grid, 1);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0].dt == 0.1);
    CHECK(cells[0].n == 16);
    CHECK(cells[1].n == 32);
    CHECK(cells[2].dt == 0.05);
    CHECK(cells[1].dx == doctest::Approx(0.25));  // length held fixed
    CHECK(cells[2].n_steps == 40);                // final time held fixed
    for (const auto& c : cells) {
        CHECK(c.status == "ok");
        CHECK(c.relative_drift <= 1e-9);
    }

    const auto many = run_sweep(base, grid, 4);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        CHECK(many[k].final_drift == cells[k].final_drift);
        CHECK(many[k].max_ecl_residual == cells[k].max_ecl_residual);
    }

    std::ostringstream out, err;
    const auto csv = scratch("sweep.csv");
    CHECK(cmd_sweep(base, grid, csv, out, err) == kExitOk);
    CHECK(lines(slurp(csv)).size() == 5);
    CHECK(cmd_sweep(base, SweepGrid{{}, {16}, {}}, csv, out, err) == kExitConfigError);
    CHECK(cmd_table(csv, out, err) == kExitOk);
    CHECK(cmd_table(scratch("nope.csv"), out, err) == kExitConfigError);
}

TEST_CASE("average value order on the harmonic oscillator") {
    auto base = parse_config("[model]\nname = harmonic_oscillator\n[grid]\nn = 3\ndx = 1\n[initial]\ntype = plane_wave\n"
                             "[scheme]\nkind = average_value\n[time]\ndt = 0.1\nt_final = 1\ntol = 1e-14\n");
    const std::vector<double> dts{0.2, 0.1, 0.05, 0.025};
    const auto cells = run_sweep(base, SweepGrid{dts, {3}, {"average_value"}}, 2);
    std::vector<double> errs;
    for (const auto& c : cells) errs.push_back(c.global_error);
    CHECK(fitted_order(dts, errs) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(fitted_order({1, 2, 4}, {1, 4, 16}) == doctest::Approx(2.0));
}

TEST_CASE("self checks") {
    std::ostringstream out;
    CHECK(cmd_check({}, out) == kExitOk);
    SelfCheckOptions faulty;
    faulty.extra_densities.push_back(faulty_density_fixture());
    std::ostringstream bad;
    CHECK(cmd_check(faulty, bad) == kExitCheckFailed);
    CHECK(bad.str().find("FAIL discrete_gradient_axiom") != std::string::npos);
}
