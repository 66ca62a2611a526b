#include "eclkit/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace eclkit {

namespace pt = boost::property_tree;

namespace {

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v)) {
        throw ConfigError(key + ": not a finite number: '" + text + "'");
    }
    return v;
}

long long parse_int(const std::string& key, const std::string& text) {
    long long v = 0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) throw ConfigError(key + ": not an integer: '" + text + "'");
    return v;
}

double positive(const std::string& key, double v) {
    if (!(v > 0.0)) throw ConfigError(key + " must be positive");
    return v;
}

class Section {
public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    std::optional<std::string> get(const std::string& key) {
        used_.insert(key);
        if (tree_ == nullptr) return std::nullopt;
        auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
        return v ? std::optional<std::string>(*v) : std::nullopt;
    }

    std::string require(const std::string& key) {
        auto v = get(key);
        if (!v || v->empty()) throw ConfigError("[" + name_ + "] " + key + " is required");
        return *v;
    }

    std::optional<double> number(const std::string& key) {
        auto v = get(key);
        if (!v) return std::nullopt;
        return parse_double("[" + name_ + "] " + key, *v);
    }

    std::optional<long long> integer(const std::string& key) {
        auto v = get(key);
        if (!v) return std::nullopt;
        return parse_int("[" + name_ + "] " + key, *v);
    }

    void reject_unknown() const {
        if (tree_ == nullptr) return;
        for (const auto& [k, _] : *tree_) {
            if (!used_.count(k)) throw ConfigError("[" + name_ + "] unknown key '" + k + "'");
        }
    }

private:
    std::string name_;
    const pt::ptree* tree_;
    std::set<std::string> used_;
};

const pt::ptree* child(const pt::ptree& root, const std::string& name) {
    auto c = root.get_child_optional(pt::ptree::path_type(name, '\0'));
    return c ? &*c : nullptr;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read initial state file " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            cell = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
            row.push_back(parse_double(path.filename().string() + ":" + std::to_string(lineno), cell));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

ModelInstance ExperimentConfig::model() const { return model_on(grid()); }

ModelInstance ExperimentConfig::model_on(const Grid& g) const {
    try {
        return builtin_model(model_name, g, model_params);
    } catch (const ModelError& e) {
        throw ConfigError(std::string("[model] ") + e.what());
    }
}

DiscreteGradientScheme ExperimentConfig::scheme_for(const ModelInstance& model) const {
    if (!scheme_kind) {
        auto s = DiscreteGradientScheme::default_for(model.density.poly_degree());
        if (quadrature_nodes > 0 && s.kind == DiscreteGradientKind::AverageValue) {
            s = DiscreteGradientScheme::average_value(quadrature_nodes);
        }
        return s;
    }
    switch (*scheme_kind) {
    case DiscreteGradientKind::AverageValue:
        if (quadrature_nodes > 0) return DiscreteGradientScheme::average_value(quadrature_nodes);
        if (auto deg = model.density.poly_degree()) return DiscreteGradientScheme::default_for(deg);
        throw ConfigError("[scheme] average_value on a non-polynomial density needs nodes");
    case DiscreteGradientKind::MidpointGonzalez:
        return DiscreteGradientScheme::midpoint_gonzalez();
    case DiscreteGradientKind::ItohAbe:
        return DiscreteGradientScheme::itoh_abe();
    }
    return DiscreteGradientScheme::midpoint_gonzalez();
}

Stepper ExperimentConfig::stepper_for(const ModelInstance& model) const {
    return Stepper{scheme_for(model), baseline};
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()));
    }

    static const std::set<std::string> sections{"model", "grid", "initial", "scheme", "time", "output"};
    for (const auto& [name, sub] : root) {
        if (!sections.count(name)) {
            throw ConfigError(sub.empty() ? "key '" + name + "' outside any section" : "unknown section [" + name + "]");
        }
    }

    ExperimentConfig cfg;
    for (const auto& [name, sub] : root) {
        for (const auto& [k, v] : sub) cfg.echo.emplace_back(name + "." + k, v.data());
    }

    // [model]: name plus model parameters
    if (const auto* m = child(root, "model")) {
        for (const auto& [k, v] : *m) {
            if (k == "name") {
                cfg.model_name = v.data();
            } else {
                cfg.model_params[k] = v.data();
            }
        }
    }
    if (cfg.model_name.empty()) throw ConfigError("[model] name is required");

    Section grid("grid", child(root, "grid"));
    if (auto n = grid.integer("n")) {
        if (*n < 3) throw ConfigError("[grid] n must be at least 3");
        cfg.n_points = static_cast<std::size_t>(*n);
    } else {
        throw ConfigError("[grid] n is required");
    }
    const auto dx = grid.number("dx");
    const auto length = grid.number("length");
    if (dx && length) throw ConfigError("[grid] give dx or length, not both");
    if (dx) {
        cfg.dx = positive("[grid] dx", *dx);
    } else if (length) {
        cfg.dx = positive("[grid] length", *length) / static_cast<double>(cfg.n_points);
    } else {
        throw ConfigError("[grid] dx or length is required");
    }
    grid.reject_unknown();

    Section init("initial", child(root, "initial"));
    const std::string type = init.get("type").value_or("gaussian_bump");
    auto& ic = cfg.initial;
    if (auto c = init.integer("component")) {
        if (*c < 0) throw ConfigError("[initial] component must be non-negative");
        ic.component = static_cast<std::size_t>(*c);
    }
    if (auto a = init.number("amplitude")) ic.amplitude = *a;
    if (type == "gaussian_bump") {
        ic.kind = InitialKind::GaussianBump;
        if (auto c = init.number("center")) ic.center = *c;
        if (auto w = init.number("width")) ic.width = positive("[initial] width", *w);
    } else if (type == "plane_wave") {
        ic.kind = InitialKind::PlaneWave;
        if (auto m = init.integer("mode")) ic.mode = static_cast<int>(*m);
    } else if (type == "from_file") {
        ic.kind = InitialKind::FromFile;
        ic.path = resolve(base_dir, init.require("path"));
    } else {
        throw ConfigError("[initial] unknown type '" + type + "'");
    }
    init.reject_unknown();

    Section scheme("scheme", child(root, "scheme"));
    if (auto kind = scheme.get("kind"); kind && *kind != "default") {
        try {
            cfg.scheme_kind = discrete_gradient_kind_from_string(*kind);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[scheme] ") + e.what());
        }
    }
    if (auto nodes = scheme.integer("nodes")) {
        if (*nodes < 1 || *nodes > 32) throw ConfigError("[scheme] nodes must be in 1..32");
        cfg.quadrature_nodes = static_cast<int>(*nodes);
    }
    if (auto method = scheme.get("method"); method && *method != "dg") {
        try {
            cfg.baseline = baseline_method_from_string(*method);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[scheme] ") + e.what());
        }
    }
    scheme.reject_unknown();

    Section time("time", child(root, "time"));
    cfg.step.dt = positive("[time] dt", time.number("dt").value_or(cfg.step.dt));
    const auto n_steps = time.integer("n_steps");
    const auto t_final = time.number("t_final");
    if (n_steps && t_final) throw ConfigError("[time] give n_steps or t_final, not both");
    if (n_steps) {
        if (*n_steps < 0) throw ConfigError("[time] n_steps must be non-negative");
        cfg.n_steps = static_cast<std::size_t>(*n_steps);
    } else if (t_final) {
        if (*t_final < 0) throw ConfigError("[time] t_final must be non-negative");
        cfg.n_steps = static_cast<std::size_t>(std::llround(*t_final / cfg.step.dt));
    }
    if (auto s = time.get("solver")) {
        try {
            cfg.step.solver = solver_kind_from_string(*s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[time] ") + e.what());
        }
    }
    if (auto tol = time.number("tol")) cfg.step.tol = positive("[time] tol", *tol);
    if (auto it = time.integer("max_iter")) {
        if (*it < 1) throw ConfigError("[time] max_iter must be positive");
        cfg.step.max_iter = static_cast<int>(*it);
    }
    if (auto e = time.number("fd_eps")) {
        if (*e < 0) throw ConfigError("[time] fd_eps must be non-negative");
        cfg.step.fd_eps = *e;
    }
    time.reject_unknown();

    Section out("output", child(root, "output"));
    if (auto p = out.get("csv")) cfg.csv_path = resolve(base_dir, *p);
    if (auto p = out.get("json")) cfg.json_path = resolve(base_dir, *p);
    out.reject_unknown();

    // Names and parameters are checked against the catalog now, not mid-run.
    const auto model = cfg.model();
    if (ic.component >= model.n_components()) {
        throw ConfigError("[initial] component " + std::to_string(ic.component) + " out of range for " +
                          cfg.model_name);
    }
    (void)cfg.scheme_for(model);
    if (cfg.baseline && model.kind == ModelKind::DegenerateK) {
        throw ConfigError("[scheme] baseline methods need an invertible K; " + cfg.model_name + " has none");
    }
    if (cfg.step.solver == SolverKind::FixedPoint && model.kind == ModelKind::DegenerateK) {
        throw ConfigError("[time] fixed_point solver is unavailable for " + cfg.model_name);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), file.parent_path());
}

GridFunction initial_state(const ExperimentConfig& cfg, const ModelInstance& model) {
    const Grid& g = model.grid;
    const auto& ic = cfg.initial;
    GridFunction z(g, model.n_components());
    const double L = g.length();
    switch (ic.kind) {
    case InitialKind::GaussianBump: {
        const double c = ic.center < 0 ? 0.5 * L : ic.center;
        for (std::size_t i = 0; i < g.n_points(); ++i) {
            // minimum-image distance on the periodic domain
            double d = std::fmod(g.x(i) - c, L);
            if (d > 0.5 * L) d -= L;
            if (d < -0.5 * L) d += L;
            z(ic.component, i) = ic.amplitude * std::exp(-(d * d) / (ic.width * ic.width));
        }
        break;
    }
    case InitialKind::PlaneWave: {
        const double k = 2.0 * std::numbers::pi * ic.mode / L;
        for (std::size_t i = 0; i < g.n_points(); ++i) z(ic.component, i) = ic.amplitude * std::sin(k * g.x(i));
        break;
    }
    case InitialKind::FromFile: {
        const auto rows = read_csv_rows(ic.path);
        if (rows.size() != g.n_points()) {
            throw ConfigError(ic.path.string() + ": expected " + std::to_string(g.n_points()) + " rows, got " +
                              std::to_string(rows.size()));
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != model.n_components()) {
                throw ConfigError(ic.path.string() + ": row " + std::to_string(i + 1) + " needs " +
                                  std::to_string(model.n_components()) + " values");
            }
            for (std::size_t c = 0; c < rows[i].size(); ++c) z(c, i) = rows[i][c];
        }
        return z;  // taken as given, dependent components included
    }
    }
    if (model.complete_initial_state) model.complete_initial_state(z);
    return z;
}

} // namespace eclkit
