#include "eclkit/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace eclkit {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Commas and newlines would break the flat CSV layout.
std::string csv_safe(std::string s) {
    for (char& c : s) {
        if (c == ',') c = ';';
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

void write_header(std::ostream& os, const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json config_echo(const ExperimentConfig& cfg) {
    json echo = json::object();
    for (const auto& [key, value] : cfg.echo) {
        const auto dot = key.find('.');
        echo[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
    return echo;
}

struct RunState {
    const ModelInstance& model;
    double dt;
    std::ofstream csv;
    json steps = json::array();
    double max_residual = 0.0;
    double max_gap = 0.0;  // |global_drift| - N·max_residual·dx, should stay ≤ 0
    std::string flux_method;
    std::string flux_shift;
};

void record(RunState& st, std::size_t step, const Trajectory& traj) {
    const double time = static_cast<double>(step) * st.dt;
    const double energy = traj.energies.back();
    const double drift = energy - traj.energies.front();
    double residual = 0.0;
    double global_drift = 0.0;
    int iters = 0;
    double solver_residual = 0.0;
    if (step > 0) {
        const auto& r = traj.ecl_reports.back();
        residual = r.max_residual;
        global_drift = r.global_drift;
        iters = traj.solver_reports.back().iterations;
        solver_residual = traj.solver_reports.back().final_residual_norm;
        st.max_residual = std::max(st.max_residual, residual);
        const auto& g = st.model.grid;
        st.max_gap = std::max(st.max_gap, std::abs(global_drift) -
                                              static_cast<double>(g.n_points()) * residual * g.dx());
        st.flux_method = r.flux_method;
        st.flux_shift = to_string(r.shift);
    }
    if (st.csv.is_open()) {
        st.csv << step << ',' << fmt17(time) << ',' << fmt17(energy) << ',' << fmt17(drift) << ','
               << fmt17(residual) << ',' << iters << '\n';
    }
    st.steps.push_back({{"step", step},
                        {"time", time},
                        {"total_energy", finite_or_null(energy)},
                        {"energy_drift", finite_or_null(drift)},
                        {"global_drift", finite_or_null(global_drift)},
                        {"max_ecl_residual", finite_or_null(residual)},
                        {"newton_iters", iters},
                        {"solver_residual", finite_or_null(solver_residual)}});
}

bool write_json(const std::filesystem::path& path, const json& doc, std::ostream& err) {
    std::ofstream os(path);
    if (!os) {
        err << "error: cannot write " << path.string() << '\n';
        return false;
    }
    os << doc.dump(2) << '\n';
    return true;
}

std::optional<Stepper> stepper_from_token(const std::string& token, const ExperimentConfig& base,
                                          const ModelInstance& model, std::string& error) {
    ExperimentConfig cfg = base;
    try {
        if (token == "default") {
            cfg.scheme_kind.reset();
            cfg.baseline.reset();
        } else if (token == "explicit_euler" || token == "implicit_midpoint" || token == "rk4") {
            cfg.baseline = baseline_method_from_string(token);
        } else {
            cfg.scheme_kind = discrete_gradient_kind_from_string(token);
            cfg.baseline.reset();
        }
        if (cfg.baseline && model.kind == ModelKind::DegenerateK) {
            error = "baseline methods need an invertible K";
            return std::nullopt;
        }
        return cfg.stepper_for(model);
    } catch (const std::exception& e) {
        error = e.what();
        return std::nullopt;
    }
}

SweepCell run_cell(const ExperimentConfig& base, double dt, std::size_t n, const std::string& token) {
    SweepCell cell;
    cell.dt = dt;
    cell.n = n;
    cell.scheme = token;
    cell.global_error = kNaN;
    const double length = base.dx * static_cast<double>(base.n_points);
    const double t_final = base.step.dt * static_cast<double>(base.n_steps);
    cell.dx = length / static_cast<double>(n);
    cell.n_steps = static_cast<std::size_t>(std::llround(t_final / dt));
    cell.t_final = static_cast<double>(cell.n_steps) * dt;

    auto fail = [&](const std::string& status, const std::string& msg) {
        cell.status = status;
        cell.message = csv_safe(msg);
        cell.final_drift = kNaN;
        cell.relative_drift = kNaN;
        cell.max_ecl_residual = kNaN;
        return cell;
    };

    if (n < 3) return fail("config_error", "n must be at least 3");
    ExperimentConfig cfg = base;
    cfg.n_points = n;
    cfg.dx = cell.dx;
    cfg.step.dt = dt;
    cfg.n_steps = cell.n_steps;
    try {
        const auto model = cfg.model();
        std::string error;
        const auto stepper = stepper_from_token(token, cfg, model, error);
        if (!stepper) return fail("config_error", error);
        const auto z0 = initial_state(cfg, model);
        const auto traj = run_simulation(model, *stepper, z0, cfg.n_steps, cfg.step);
        for (const auto& r : traj.ecl_reports) cell.max_ecl_residual = std::max(cell.max_ecl_residual, r.max_residual);
        for (const auto& r : traj.solver_reports) cell.max_newton_iters = std::max(cell.max_newton_iters, r.iterations);
        if (traj.blew_up_at) {
            cell.status = "blew_up";
            cell.message = "non-finite state at step " + std::to_string(*traj.blew_up_at);
            cell.final_drift = std::numeric_limits<double>::infinity();
            cell.relative_drift = std::numeric_limits<double>::infinity();
            return cell;
        }
        const double e0 = traj.energies.front();
        cell.final_drift = traj.energies.back() - e0;
        cell.relative_drift = e0 != 0.0 ? cell.final_drift / std::abs(e0) : kNaN;
        if (model.exact_flow) {
            const auto exact = model.exact_flow(z0, cell.t_final);
            const auto& zT = traj.states.back();
            double err = 0.0;
            for (std::size_t k = 0; k < zT.values().size(); ++k) {
                err = std::max(err, std::abs(zT.values()[k] - exact.values()[k]));
            }
            cell.global_error = err;
        }
        cell.status = "ok";
        return cell;
    } catch (const ConfigError& e) {
        return fail("config_error", e.what());
    } catch (const SolverError& e) {
        return fail("solver_failure", e.what());
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

const std::vector<std::string>& run_csv_columns() {
    static const std::vector<std::string> cols{"step",           "time",           "total_energy",
                                               "energy_drift",   "max_ecl_residual", "newton_iters"};
    return cols;
}

const std::vector<std::string>& sweep_csv_columns() {
    static const std::vector<std::string> cols{
        "dt",           "n",          "dx",           "scheme",           "n_steps",          "t_final",
        "final_drift",  "relative_drift", "max_ecl_residual", "global_error", "max_newton_iters", "status",
        "message"};
    return cols;
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    std::optional<ModelInstance> loaded;
    std::optional<Stepper> loaded_stepper;
    std::optional<GridFunction> loaded_z0;
    try {
        loaded = cfg.model();
        loaded_stepper = cfg.stepper_for(*loaded);
        loaded_z0 = initial_state(cfg, *loaded);
        cfg.step.validate();
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }
    const ModelInstance& model = *loaded;
    const Stepper& stepper = *loaded_stepper;
    const GridFunction& z0 = *loaded_z0;

    RunState st{model, cfg.step.dt, {}, json::array(), 0.0, -std::numeric_limits<double>::infinity(), "", ""};
    if (!cfg.csv_path.empty()) {
        st.csv.open(cfg.csv_path);
        if (!st.csv) {
            err << "config error: cannot write " << cfg.csv_path.string() << '\n';
            return kExitConfigError;
        }
        write_header(st.csv, run_csv_columns());
    }

    json report{{"schema_version", 1},
                {"config", config_echo(cfg)},
                {"model",
                 {{"name", model.name},
                  {"kind", to_string(model.kind)},
                  {"n_components", model.n_components()},
                  {"density", model.density.description},
                  {"stencil_radius", model.stencil_radius()}}},
                {"grid", {{"n", model.grid.n_points()}, {"dx", model.grid.dx()}, {"length", model.grid.length()}}},
                {"method", stepper.describe()},
                {"step_config",
                 {{"dt", cfg.step.dt},
                  {"n_steps", cfg.n_steps},
                  {"solver", to_string(cfg.step.solver)},
                  {"tol", cfg.step.tol},
                  {"max_iter", cfg.step.max_iter}}}};

    int code = kExitOk;
    Trajectory traj;
    std::string status = "ok";
    try {
        traj = run_simulation(model, stepper, z0, cfg.n_steps, cfg.step,
                              [&](std::size_t step, const Trajectory& t) { record(st, step, t); });
        if (traj.blew_up_at) {
            status = "blew_up";
            report["failure"] = {{"step", *traj.blew_up_at}, {"message", "non-finite state"}};
            if (st.csv.is_open()) st.csv << "# status: blew_up at step " << *traj.blew_up_at << '\n';
        }
    } catch (const SolverError& e) {
        status = "solver_failure";
        code = kExitSolverFailure;
        const std::size_t step = e.step().value_or(0);
        report["failure"] = {{"step", step},
                             {"message", e.what()},
                             {"iterations", e.report().iterations},
                             {"residual", finite_or_null(e.report().final_residual_norm)}};
        if (st.csv.is_open()) st.csv << "# status: solver_failure at step " << step << ": " << csv_safe(e.what()) << '\n';
        err << "solver failure: " << e.what() << '\n';
    }
    if (st.csv.is_open()) st.csv.flush();

    const auto& steps = st.steps;
    const double e0 = steps.front()["total_energy"].is_number() ? steps.front()["total_energy"].get<double>() : kNaN;
    const auto& last = steps.back();
    const double drift = last["energy_drift"].is_number() ? last["energy_drift"].get<double>() : kNaN;
    report["status"] = status;
    report["flux_method"] = st.flux_method;
    report["flux_shift"] = st.flux_shift;
    report["steps"] = steps;
    report["final"] = {{"steps_completed", last["step"]},
                       {"initial_energy", finite_or_null(e0)},
                       {"energy_drift", finite_or_null(drift)},
                       {"relative_energy_drift", finite_or_null(e0 != 0.0 ? drift / std::abs(e0) : kNaN)},
                       {"max_ecl_residual", finite_or_null(st.max_residual)},
                       {"global_local_gap", steps.size() > 1 ? finite_or_null(st.max_gap) : json(0.0)}};
    if (!cfg.json_path.empty() && !write_json(cfg.json_path, report, err) && code == kExitOk) {
        code = kExitConfigError;
    }

    out << model.name << " " << stepper.describe() << ": " << (steps.size() - 1) << " steps, energy drift "
        << fmt17(drift) << ", max ECL residual " << fmt17(st.max_residual) << ", status " << status << '\n';
    return code;
}

int cmd_run_file(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
    try {
        return cmd_run(load_config(config), out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }
}

unsigned sweep_threads() {
    if (const char* env = std::getenv("ECLKIT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& base, const SweepGrid& grid, unsigned threads) {
    std::vector<std::string> schemes = grid.schemes.empty() ? std::vector<std::string>{"default"} : grid.schemes;
    struct Job {
        double dt;
        std::size_t n;
        std::string scheme;
    };
    std::vector<Job> jobs;
    for (double dt : grid.dts) {
        for (std::size_t n : grid.ns) {
            for (const auto& s : schemes) jobs.push_back({dt, n, s});
        }
    }
    std::vector<SweepCell> cells(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            cells[k] = run_cell(base, jobs[k].dt, jobs[k].n, jobs[k].scheme);
        }
    };
    const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
    worker();
    return cells;
}

int cmd_sweep(const ExperimentConfig& base, const SweepGrid& grid, const std::filesystem::path& csv,
              std::ostream& out, std::ostream& err) {
    if (grid.dts.empty() || grid.ns.empty()) {
        err << "config error: sweep grid is empty (need at least one --dt and one --n)\n";
        return kExitConfigError;
    }
    for (double dt : grid.dts) {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            err << "config error: dt values must be positive\n";
            return kExitConfigError;
        }
    }
    const auto cells = run_sweep(base, grid, sweep_threads());

    std::ofstream file;
    if (!csv.empty()) {
        file.open(csv);
        if (!file) {
            err << "config error: cannot write " << csv.string() << '\n';
            return kExitConfigError;
        }
    }
    std::ostream& os = csv.empty() ? out : file;
    write_header(os, sweep_csv_columns());
    std::size_t failed = 0;
    for (const auto& c : cells) {
        if (c.status != "ok") ++failed;
        os << fmt17(c.dt) << ',' << c.n << ',' << fmt17(c.dx) << ',' << c.scheme << ',' << c.n_steps << ','
           << fmt17(c.t_final) << ',' << fmt17(c.final_drift) << ',' << fmt17(c.relative_drift) << ','
           << fmt17(c.max_ecl_residual) << ',' << fmt17(c.global_error) << ',' << c.max_newton_iters << ','
           << c.status << ',' << c.message << '\n';
    }
    os.flush();
    if (!csv.empty()) out << cells.size() << " cells, " << failed << " failed\n";
    return failed == cells.size() ? kExitSolverFailure : kExitOk;
}

double fitted_order(const std::vector<double>& dts, const std::vector<double>& errors) {
    if (dts.size() != errors.size() || dts.size() < 2) return kNaN;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(dts.size());
    for (std::size_t k = 0; k < dts.size(); ++k) {
        if (!(dts[k] > 0) || !(errors[k] > 0)) return kNaN;
        const double x = std::log(dts[k]);
        const double y = std::log(errors[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? kNaN : (n * sxy - sx * sy) / den;
}

int cmd_table(const std::filesystem::path& csv, std::ostream& out, std::ostream& err) {
    std::ifstream in(csv);
    if (!in) {
        err << "config error: cannot read " << csv.string() << '\n';
        return kExitConfigError;
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) {
        err << "config error: " << csv.string() << " is empty\n";
        return kExitConfigError;
    }
    const auto& header = rows.front();
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };

    // Observed order against the previous row of the same (scheme, n) series.
    const auto dt_col = column("dt");
    const auto err_col = column("global_error");
    const auto scheme_col = column("scheme");
    const auto n_col = column("n");
    std::map<std::string, std::vector<std::size_t>> series;
    const bool with_order = dt_col && err_col;
    if (with_order) {
        rows.front().push_back("order");
        for (std::size_t r = 1; r < rows.size(); ++r) {
            auto& row = rows[r];
            std::string order = "-";
            std::string key;
            if (scheme_col && *scheme_col < row.size()) key += row[*scheme_col];
            if (n_col && *n_col < row.size()) key += "/" + row[*n_col];
            auto& prev = series[key];
            if (!prev.empty() && *dt_col < row.size() && *err_col < row.size()) {
                const auto& p = rows[prev.back()];
                const double e1 = std::strtod(p[*err_col].c_str(), nullptr);
                const double e2 = std::strtod(row[*err_col].c_str(), nullptr);
                const double d1 = std::strtod(p[*dt_col].c_str(), nullptr);
                const double d2 = std::strtod(row[*dt_col].c_str(), nullptr);
                const double o = std::log(e1 / e2) / std::log(d1 / d2);
                if (std::isfinite(o)) {
                    std::ostringstream s;
                    s << std::fixed << std::setprecision(3) << o;
                    order = s.str();
                }
            }
            prev.push_back(r);
            row.push_back(order);
        }
    }

    std::vector<std::size_t> width;
    for (const auto& row : rows) {
        if (width.size() < row.size()) width.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << row[c];
        }
        out << '\n';
    }

    if (with_order) {
        for (const auto& [key, idx] : series) {
            std::vector<double> dts, errs;
            for (auto r : idx) {
                dts.push_back(std::strtod(rows[r][*dt_col].c_str(), nullptr));
                errs.push_back(std::strtod(rows[r][*err_col].c_str(), nullptr));
            }
            const double slope = fitted_order(dts, errs);
            if (std::isfinite(slope)) {
                out << "fitted order " << key << ": " << std::fixed << std::setprecision(3) << slope << '\n';
                out.unsetf(std::ios::floatfield);
            }
        }
    }
    return kExitOk;
}

} // namespace eclkit
