// eclkit command-line front end: run, check, sweep, table.

#include "eclkit/experiment.hpp"
#include "eclkit/self_check.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace eclkit;

int main(int argc, char** argv) {
    CLI::App app{"Discrete gradient integrators with local energy conservation audits"};
    app.require_subcommand(1);

    std::string run_config, run_csv, run_json;
    auto* run = app.add_subcommand("run", "Run one configured trajectory and write CSV/JSON reports");
    run->add_option("config", run_config, "INI experiment config")->required();
    run->add_option("--csv", run_csv, "Override [output] csv");
    run->add_option("--json", run_json, "Override [output] json");

    bool inject_faulty = false;
    std::size_t samples = 1000;
    auto* check = app.add_subcommand("check", "Run the built-in property suites");
    check->add_flag("--inject-faulty-density", inject_faulty, "Add a density with a wrong gradient (must fail)");
    check->add_option("--samples", samples, "Random cases per identity suite")->check(CLI::PositiveNumber);

    std::string sweep_config, sweep_out;
    std::vector<double> sweep_dts;
    std::vector<std::size_t> sweep_ns;
    std::vector<std::string> sweep_schemes;
    auto* sweep = app.add_subcommand("sweep", "Run the dt x N x scheme cross product of a config");
    sweep->add_option("config", sweep_config, "INI experiment config")->required();
    sweep->add_option("--dt", sweep_dts, "Time steps")->delimiter(',');
    sweep->add_option("--n", sweep_ns, "Grid sizes (domain length is kept)")->delimiter(',');
    sweep->add_option("--scheme", sweep_schemes,
                      "default, average_value, midpoint_gonzalez, itoh_abe, explicit_euler, implicit_midpoint, rk4")
        ->delimiter(',');
    sweep->add_option("--out", sweep_out, "Output CSV (stdout when omitted)");

    std::string table_csv;
    auto* table = app.add_subcommand("table", "Print a CSV as an aligned table with observed orders");
    table->add_option("csv", table_csv, "Run or sweep CSV")->required();

    auto* models = app.add_subcommand("models", "List built-in models and potentials");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    if (*run) {
        try {
            auto cfg = load_config(run_config);
            if (!run_csv.empty()) cfg.csv_path = run_csv;
            if (!run_json.empty()) cfg.json_path = run_json;
            return cmd_run(cfg, std::cout, std::cerr);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfigError;
        }
    }
    if (*check) {
        SelfCheckOptions opts;
        opts.samples = samples;
        if (inject_faulty) opts.extra_densities.push_back(faulty_density_fixture());
        return cmd_check(opts, std::cout);
    }
    if (*sweep) {
        try {
            const auto cfg = load_config(sweep_config);
            SweepGrid grid{sweep_dts, sweep_ns, sweep_schemes};
            return cmd_sweep(cfg, grid, sweep_out, std::cout, std::cerr);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfigError;
        }
    }
    if (*table) return cmd_table(table_csv, std::cout, std::cerr);
    if (*models) {
        std::cout << "models:";
        for (const auto& m : builtin_model_names()) std::cout << ' ' << m;
        std::cout << "\npotentials:";
        for (const auto& p : potential_names()) std::cout << ' ' << p;
        std::cout << '\n';
    }
    return kExitOk;
}
