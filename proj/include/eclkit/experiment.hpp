#pragma once

#include "eclkit/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace eclkit {

/// Process exit codes shared by all subcommands.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfigError = 2, kExitSolverFailure = 3 };

/// Columns of the run CSV, in order.
const std::vector<std::string>& run_csv_columns();

/// Columns of the sweep CSV, in order.
const std::vector<std::string>& sweep_csv_columns();

/// Runs the configured trajectory, writes the CSV and JSON outputs named in
/// the config (either may be empty) and a one-line summary to `out`.
int cmd_run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

/// Loads the config file first; unreadable or invalid configs give exit 2.
int cmd_run_file(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

struct SweepGrid {
    std::vector<double> dts;
    std::vector<std::size_t> ns;
    /// Scheme tokens: default, average_value, midpoint_gonzalez, itoh_abe, or
    /// a baseline name. Empty means {"default"}.
    std::vector<std::string> schemes;
};

struct SweepCell {
    double dt = 0.0;
    std::size_t n = 0;
    double dx = 0.0;
    std::string scheme;
    std::size_t n_steps = 0;
    double t_final = 0.0;
    double final_drift = 0.0;
    double relative_drift = 0.0;
    double max_ecl_residual = 0.0;
    double global_error = 0.0;  // NaN without a closed-form flow
    int max_newton_iters = 0;
    std::string status;  // ok, blew_up, solver_failure, config_error
    std::string message;
};

/// Worker count for sweeps: ECLKIT_THREADS if set and positive, else the
/// hardware concurrency.
unsigned sweep_threads();

/// Runs every cell of the cross product dt × N × scheme. The final time
/// n_steps·dt of the base config and the domain length n·dx are held fixed.
/// Cells come back in cross-product order whatever the thread count.
std::vector<SweepCell> run_sweep(const ExperimentConfig& base, const SweepGrid& grid, unsigned threads);

/// Writes the sweep CSV to `csv` (stdout when empty). Exit 2 on an empty
/// grid, 3 when every cell failed.
int cmd_sweep(const ExperimentConfig& base, const SweepGrid& grid, const std::filesystem::path& csv,
              std::ostream& out, std::ostream& err);

/// Least-squares slope of log(error) against log(dt).
double fitted_order(const std::vector<double>& dts, const std::vector<double>& errors);

/// Prints a CSV as an aligned table. Sweep files also get observed orders
/// between successive dt values of each (scheme, n) series.
int cmd_table(const std::filesystem::path& csv, std::ostream& out, std::ostream& err);

} // namespace eclkit
