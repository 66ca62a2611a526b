#include "eclkit/self_check.hpp"

#include "eclkit/ecl_audit.hpp"
#include "eclkit/integrator.hpp"
#include "eclkit/models.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace eclkit {

namespace {

constexpr double kIdentityTol = 1e-13;
constexpr double kAxiomTol = 1e-12;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

GridFunction random_field(Rng& rng, std::size_t n_components, double scale = 1.0) {
    const auto N = std::uniform_int_distribution<std::size_t>(3, 16)(rng);
    const double dx = uniform(rng, 0.05, 1.0);
    GridFunction f(Grid(N, dx), n_components);
    for (double& v : f.values()) v = scale * uniform(rng);
    return f;
}

GridFunction random_like(Rng& rng, const GridFunction& like, double scale = 1.0) {
    GridFunction f(like.grid(), like.n_components());
    for (double& v : f.values()) v = scale * uniform(rng);
    return f;
}

double max_abs_difference(const GridFunction& a, const GridFunction& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    return m;
}

/// Tracks the worst error/tolerance ratio and the first failure.
class Tally {
public:
    explicit Tally(std::string name) { result_.name = std::move(name); }

    void add(double error, double tol, const std::string& what) {
        ++result_.cases;
        const double ratio = std::isfinite(error) ? error / tol : std::numeric_limits<double>::infinity();
        result_.worst = std::max(result_.worst, ratio);
        if (!(ratio <= 1.0) && result_.detail.empty()) {
            std::ostringstream s;
            s << what << ": error " << error << " > " << tol;
            result_.detail = s.str();
        }
    }

    void fail(const std::string& what) {
        ++result_.cases;
        result_.worst = std::numeric_limits<double>::infinity();
        if (result_.detail.empty()) result_.detail = what;
    }

    SuiteResult done() {
        result_.passed = result_.detail.empty();
        return result_;
    }

private:
    SuiteResult result_;
};

std::vector<NamedDensity> catalog_densities() {
    std::vector<NamedDensity> out;
    auto add = [&](const std::string& label, const std::string& model, const ModelParams& p) {
        out.push_back({label, builtin_density(model, p).H});
    };
    add("harmonic_oscillator", "harmonic_oscillator", {});
    for (const auto& v : potential_names()) {
        add("nonlinear_wave/" + v, "nonlinear_wave", {{"potential", v}});
        add("multisym_wave/" + v, "multisym_wave", {{"potential", v}});
    }
    add("sine_gordon", "sine_gordon", {});
    add("kdv_type", "kdv_type", {});
    add("kdv_type/gamma", "kdv_type", {{"gamma", "0.5"}});
    for (const std::string onsite : {"none", "harmonic", "quartic", "pendulum"}) {
        add("lattice_wave/chain/" + onsite, "lattice_wave", {{"onsite", onsite}, {"fpu_beta", "1"}});
    }
    add("lattice_wave/pure", "lattice_wave", {{"form", "pure"}, {"fpu_beta", "1"}});
    return out;
}

std::vector<DiscreteGradientScheme> exact_schemes(const PointFunction& H) {
    std::vector<DiscreteGradientScheme> s{DiscreteGradientScheme::midpoint_gonzalez(),
                                          DiscreteGradientScheme::itoh_abe()};
    if (H.poly_degree) s.push_back(DiscreteGradientScheme::default_for(H.poly_degree));
    return s;
}

SuiteResult check_axiom(const std::vector<NamedDensity>& densities, Rng& rng, std::size_t samples) {
    Tally t("discrete_gradient_axiom");
    const std::size_t per = std::max<std::size_t>(1, samples / 10);
    for (const auto& d : densities) {
        for (const auto& scheme : exact_schemes(d.H)) {
            for (std::size_t k = 0; k < per; ++k) {
                std::vector<double> z0(d.H.dimension), z1(d.H.dimension);
                // mix far-apart and nearby pairs
                const double gap = k % 2 ? 1.0 : 1e-6;
                for (std::size_t c = 0; c < z0.size(); ++c) {
                    z0[c] = uniform(rng);
                    z1[c] = z0[c] + gap * uniform(rng);
                }
                const auto g = discrete_gradient(d.H, z0, z1, scheme);
                double scale = std::abs(d.H.difference(z0, z1));
                for (std::size_t c = 0; c < z0.size(); ++c) scale += std::abs((z1[c] - z0[c]) * g[c]);
                t.add(axiom_residual(d.H, z0, z1, scheme), kAxiomTol * (1.0 + scale), d.name + " " + scheme.describe());
            }
            std::vector<double> z(d.H.dimension);
            for (double& v : z) v = uniform(rng);
            double gnorm = 0.0;
            for (double v : d.H.gradient(z)) gnorm = std::max(gnorm, std::abs(v));
            t.add(consistency_residual(d.H, z, scheme), kAxiomTol * (1.0 + gnorm),
                  d.name + " " + scheme.describe() + " consistency");
        }
    }
    return t.done();
}

SuiteResult check_density_gradients(const std::vector<NamedDensity>& densities, Rng& rng, std::size_t samples) {
    Tally t("density_gradients");
    const std::size_t per = std::max<std::size_t>(1, samples / 50);
    for (const auto& d : densities) {
        for (std::size_t k = 0; k < per; ++k) {
            std::vector<double> z(d.H.dimension);
            for (double& v : z) v = uniform(rng);
            t.add(gradient_self_check(d.H, z), kGradientSelfCheckTol, d.name);
        }
    }
    return t.done();
}

SuiteResult check_product_rule(Rng& rng, std::size_t samples) {
    Tally t("shifted_product_rule");
    for (std::size_t k = 0; k < samples; ++k) {
        const auto a = random_field(rng, 1, 10.0);
        const auto b = random_like(rng, a, 10.0);
        const auto [lhs, rhs] = shifted_product_divergence(a, b);
        const double err = max_abs_difference(lhs, rhs);
        t.add(err, kIdentityTol * (1.0 + max_abs(a) * max_abs(b)), "random pair");
    }
    return t.done();
}

SuiteResult check_summation_by_parts(Rng& rng, std::size_t samples) {
    Tally t("summation_by_parts");
    for (std::size_t k = 0; k < samples; ++k) {
        const auto a = random_field(rng, 1, 10.0);
        const auto b = random_like(rng, a, 10.0);
        const auto db = forward_diff(b);
        const auto da = backward_diff(a);
        double lhs = 0.0, rhs = 0.0, terms = 0.0;
        for (std::size_t i = 0; i < a.n_points(); ++i) {
            lhs += a(0, i) * db(0, i);
            rhs -= da(0, i) * b(0, i);
            terms += std::abs(a(0, i) * db(0, i)) + std::abs(da(0, i) * b(0, i));
        }
        t.add(std::abs(lhs - rhs), kIdentityTol * (1.0 + terms), "random pair");
    }
    return t.done();
}

SuiteResult check_centered_skew(Rng& rng, std::size_t samples) {
    Tally t("centered_skew");
    for (std::size_t k = 0; k < samples; ++k) {
        const auto a = random_field(rng, 1, 10.0);
        const auto b = random_like(rng, a, 10.0);
        const auto Da = centered_diff(a);
        const auto Db = centered_diff(b);
        double s = 0.0, terms = 0.0;
        for (std::size_t i = 0; i < a.n_points(); ++i) {
            s += a(0, i) * Db(0, i) + b(0, i) * Da(0, i);
            terms += std::abs(a(0, i) * Db(0, i)) + std::abs(b(0, i) * Da(0, i));
        }
        t.add(std::abs(s), kIdentityTol * (1.0 + terms), "random pair");
    }
    return t.done();
}

SuiteResult check_skew_forms(Rng& rng, std::size_t samples) {
    Tally t("skew_forms");
    std::vector<std::pair<std::string, SkewMatrix>> mats;
    for (const auto& name : builtin_model_names()) {
        const auto m = builtin_model(name, Grid(8, 0.5));
        mats.emplace_back(name + ".K", m.K());
        if (m.multi) mats.emplace_back(name + ".L", m.multi->L);
    }
    // random skew matrices of assorted sizes
    for (int n = 2; n <= 6; ++n) {
        Eigen::MatrixXd A(n, n);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) A(r, c) = uniform(rng);
        }
        mats.emplace_back("random" + std::to_string(n), SkewMatrix(A - A.transpose()));
    }
    for (std::size_t k = 0; k < samples; ++k) {
        const auto& [name, K] = mats[k % mats.size()];
        std::vector<double> z(K.size());
        for (double& v : z) v = 10.0 * uniform(rng);
        double terms = 0.0;
        std::vector<double> Kz(z.size());
        K.apply(z, Kz);
        for (std::size_t c = 0; c < z.size(); ++c) terms += std::abs(z[c] * Kz[c]);
        t.add(std::abs(K.form(z, z)), kIdentityTol * (1.0 + terms), name);
    }
    return t.done();
}

SuiteResult check_ecl_residuals(Rng& rng) {
    Tally t("ecl_residuals");
    struct Case {
        std::string model;
        ModelParams params;
    };
    std::vector<Case> cases{{"harmonic_oscillator", {}},
                            {"sine_gordon", {}},
                            {"kdv_type", {}},
                            {"kdv_type", {{"gamma", "0.5"}}},
                            {"lattice_wave", {{"fpu_beta", "1"}, {"onsite", "pendulum"}}},
                            {"lattice_wave", {{"form", "pure"}, {"fpu_beta", "1"}}}};
    for (const auto& v : potential_names()) {
        cases.push_back({"nonlinear_wave", {{"potential", v}}});
        cases.push_back({"multisym_wave", {{"potential", v}}});
    }
    StepConfig cfg;
    cfg.dt = 0.1;
    cfg.tol = 1e-12;
    for (const auto& c : cases) {
        const auto model = builtin_model(c.model, Grid(8, 0.5), c.params);
        GridFunction z0(model.grid, model.n_components());
        for (double& v : z0.values()) v = 0.5 * uniform(rng);
        if (model.complete_initial_state) model.complete_initial_state(z0);
        std::vector<DiscreteGradientScheme> schemes{DiscreteGradientScheme::midpoint_gonzalez(),
                                                    DiscreteGradientScheme::itoh_abe()};
        if (auto deg = model.density.poly_degree()) schemes.push_back(DiscreteGradientScheme::default_for(deg));
        for (const auto& scheme : schemes) {
            const std::string label = c.model + " " + scheme.describe();
            try {
                const auto traj = run_simulation(model, Stepper{scheme, std::nullopt}, z0, 3, cfg);
                for (const auto& r : traj.ecl_reports) t.add(r.max_residual, 10.0 * cfg.tol, label);
            } catch (const SolverError& e) {
                t.fail(label + ": " + e.what());
            }
        }
    }
    return t.done();
}

} // namespace

std::vector<SuiteResult> run_self_checks(const SelfCheckOptions& opts) {
    Rng rng(opts.seed);
    auto densities = catalog_densities();
    densities.insert(densities.end(), opts.extra_densities.begin(), opts.extra_densities.end());
    return {check_axiom(densities, rng, opts.samples),
            check_density_gradients(densities, rng, opts.samples),
            check_product_rule(rng, opts.samples),
            check_summation_by_parts(rng, opts.samples),
            check_centered_skew(rng, opts.samples),
            check_skew_forms(rng, opts.samples),
            check_ecl_residuals(rng)};
}

int cmd_check(const SelfCheckOptions& opts, std::ostream& out) {
    bool ok = true;
    for (const auto& r : run_self_checks(opts)) {
        ok = ok && r.passed;
        out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(26) << r.name << std::right << " cases="
            << r.cases << " worst/tol=" << std::setprecision(3) << r.worst;
        if (!r.passed) out << "  [" << r.detail << "]";
        out << '\n';
    }
    return ok ? 0 : 1;
}

NamedDensity faulty_density_fixture() {
    PointFunction H;
    H.dimension = 2;
    H.poly_degree = 4;
    H.eval = [](std::span<const double> y) { return 0.5 * y[0] * y[0] + 0.25 * std::pow(y[1], 4); };
    H.grad = [](std::span<const double> y, std::span<double> g) {
        g[0] = y[0];
        g[1] = 1.1 * y[1] * y[1] * y[1];  // should be y³
    };
    return {"faulty_quartic", H};
}

} // namespace eclkit
