#include "eclkit/integrator.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace eclkit;
using eclkit::testing::bump_state;
using eclkit::testing::max_diff;
using eclkit::testing::random_state;

namespace {

StepConfig config(double dt, double tol = 1e-13) {
    StepConfig c;
    c.dt = dt;
    c.tol = tol;
    return c;
}

GridFunction oscillator_state(const ModelInstance& m, double q, double p) {
    GridFunction z(m.grid, 2);
    for (std::size_t i = 0; i < m.grid.n_points(); ++i) {
        z(0, i) = q;
        z(1, i) = p;
    }
    return z;
}

DiscreteGradientScheme default_scheme(const ModelInstance& m) {
    return DiscreteGradientScheme::default_for(m.density.poly_degree());
}

/// Degenerate model whose second component never enters H: its residual row is identically zero.
ModelInstance detached_component_model() {
    ModelInstance m;
    m.name = "detached";
    m.kind = ModelKind::DegenerateK;
    m.grid = Grid(6, 0.5);
    m.density.n_components = 2;
    m.density.order = 0;
    m.density.H.dimension = 2;
    m.density.H.poly_degree = 2;
    m.density.H.eval = [](std::span<const double> y) { return 0.5 * y[0] * y[0]; };
    m.density.H.grad = [](std::span<const double> y, std::span<double> g) {
        g[0] = y[0];
        g[1] = 0.0;
    };
    m.structure = SkewOperatorSpec(SkewMatrix(Eigen::MatrixXd::Zero(2, 2)), Eigen::MatrixXd::Zero(2, 2));
    m.multi = MultiHamiltonianData{SkewMatrix(Eigen::MatrixXd::Zero(2, 2)), m.density.H};
    validate_model(m);
    return m;
}

} // namespace

TEST_CASE("step configuration validation") {
    CHECK_THROWS_AS(config(0.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(config(-0.1).validate(), std::invalid_argument);
    CHECK_THROWS_AS(config(0.1, 0.0).validate(), std::invalid_argument);
    StepConfig c = config(0.1);
    c.max_iter = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK(solver_kind_from_string("fixed_point") == SolverKind::FixedPoint);
    CHECK_THROWS_AS(solver_kind_from_string("gmres"), std::invalid_argument);
    CHECK(baseline_method_from_string("rk4") == BaselineMethod::RK4);
}

TEST_CASE("average value step on the oscillator is the Cayley map") {
    const auto m = builtin_model("harmonic_oscillator", Grid(3, 1.0));
    const auto r = dg_step(m, default_scheme(m), oscillator_state(m, 1, 0), config(2.0));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(r.z1(0, i) - 0.0) < 1e-13);
        CHECK(std::abs(r.z1(1, i) + 1.0) < 1e-13);
    }
    // Δt = 0.1: ((1 - h²/4), -h) / (1 + h²/4)
    const auto s = dg_step(m, default_scheme(m), oscillator_state(m, 1, 0), config(0.1));
    CHECK(s.z1(0, 0) == doctest::Approx(0.9975 / 1.0025).epsilon(1e-14));
    CHECK(s.z1(1, 0) == doctest::Approx(-0.1 / 1.0025).epsilon(1e-14));
    CHECK(s.report.converged);
}

TEST_CASE("explicit Euler on the oscillator") {
    const auto m = builtin_model("harmonic_oscillator", Grid(3, 1.0));
    const auto z0 = oscillator_state(m, 1, 0);
    const auto r = baseline_step(m, z0, config(0.1), BaselineMethod::ExplicitEuler);
    CHECK(r.z1(0, 1) == doctest::Approx(1.0));
    CHECK(r.z1(1, 1) == doctest::Approx(-0.1));
    CHECK(discrete_hamiltonian(m, r.z1) / discrete_hamiltonian(m, z0) == doctest::Approx(1.01).epsilon(1e-14));
}

TEST_CASE("RK4 on the oscillator") {
    const auto m = builtin_model("harmonic_oscillator", Grid(3, 1.0));
    const auto r = baseline_step(m, oscillator_state(m, 1, 0), config(0.1), BaselineMethod::RK4);
    // reference: 40-digit RK4 stage evaluation (tests/oracles/step_oracles.py)
    CHECK(std::abs(r.z1(0, 0) - 0.99500416666666667) < 1e-15);
    CHECK(std::abs(r.z1(1, 0) + 0.099833333333333333) < 1e-15);

    // global error at T = 1 scales like Δt⁴
    std::vector<double> errs;
    for (double dt : {0.2, 0.1, 0.05}) {
        const auto z0 = oscillator_state(m, 1, 0);
        const auto t = run_simulation(m, Stepper{default_scheme(m), BaselineMethod::RK4}, z0,
                                      static_cast<std::size_t>(std::llround(1.0 / dt)), config(dt));
        errs.push_back(max_diff(t.states.back(), m.exact_flow(z0, 1.0)));
    }
    CHECK(std::log2(errs[0] / errs[1]) == doctest::Approx(4.0).epsilon(0.05));
    CHECK(std::log2(errs[1] / errs[2]) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("classic implicit midpoint agrees with the discrete gradient step on quadratic energy") {
    const auto m = builtin_model("nonlinear_wave", Grid(10, 0.4), {{"potential", "harmonic"}});
    std::mt19937_64 rng(1);
    const auto z0 = random_state(m, rng);
    const auto a = baseline_step(m, z0, config(0.2), BaselineMethod::ImplicitMidpointClassic);
    const auto b = dg_step(m, default_scheme(m), z0, config(0.2));
    CHECK(max_diff(a.z1, b.z1) < 1e-12);
}

TEST_CASE("reference steps from an independent high-precision solve") {
    // reference values: tests/oracles/step_oracles.py
    SUBCASE("nonlinear wave, quartic potential") {
        const auto m = builtin_model("nonlinear_wave", Grid(5, 0.5), {{"potential", "quartic"}});
        GridFunction z0(m.grid, 2, {0.3, -0.2, 0.5, 0.1, -0.4, 0.1, 0.4, -0.3, 0.2, 0.0});
        const std::vector<double> ref{0.28699369160843868, -0.13785530257288667, 0.44927359060661667,
                                      0.11737731888847078, -0.37614097959909054, -0.36012616783122646,
                                      0.84289394854226658, -0.71452818786766657, 0.14754637776941565,
                                      0.47718040801818921};
        const auto r = dg_step(m, default_scheme(m), z0, config(0.1, 1e-14));
        CHECK(max_diff(r.z1.values(), ref) < 1e-13);
    }
    SUBCASE("kdv, centered jets") {
        const auto m = builtin_model("kdv_type", Grid(6, 1.0));
        GridFunction z0(m.grid, 1, {0.2, 0.5, -0.1, 0.0, 0.3, -0.2});
        const std::vector<double> ref{0.22844466585950016, 0.49137873197290915,  -0.12759156191738109,
                                      0.013505527327872429, 0.29914689605788093, -0.20488425930078157};
        const auto r = dg_step(m, default_scheme(m), z0, config(0.05, 1e-14));
        CHECK(max_diff(r.z1.values(), ref) < 1e-13);
    }
    SUBCASE("multisymplectic wave, harmonic potential") {
        const auto m = builtin_model("multisym_wave", Grid(4, 0.5));
        GridFunction z0(m.grid, 3, {0.4, -0.1, 0.2, 0.3, 0.0, 0.2, -0.3, 0.1, 0, 0, 0, 0});
        m.complete_initial_state(z0);
        const std::vector<double> ref{0.39588682614451526,   -0.075659616391120963, 0.1711954681198239,
                                      0.30458729718912595,   -0.082263477109694899, 0.28680767217758074,
                                      -0.27609063760352206,  -0.0082540562174809889, -0.38024691358024691,
                                      -0.22469135802469136, 0.38024691358024691,   0.22469135802469136};
        const auto r = dg_step(m, default_scheme(m), z0, config(0.1, 1e-14));
        CHECK(max_diff(r.z1.values(), ref) < 1e-13);
    }
}

TEST_CASE("energy contract for converged steps") {
    std::mt19937_64 rng(2);
    const std::vector<std::pair<std::string, ModelParams>> cases{
        {"sine_gordon", {}}, {"nonlinear_wave", {{"potential", "quartic"}}}, {"kdv_type", {}},
        {"kdv_type", {{"gamma", "0.5"}}}, {"multisym_wave", {{"potential", "pendulum"}}},
        {"lattice_wave", {{"fpu_beta", "1"}, {"onsite", "quartic"}}}};
    for (const auto& [name, p] : cases) {
        const auto m = builtin_model(name, Grid(16, 0.5), p);
        for (const auto& scheme : {default_scheme(m), DiscreteGradientScheme::midpoint_gonzalez(),
                                   DiscreteGradientScheme::itoh_abe()}) {
            for (double dt : {0.01, 0.1, 0.5}) {
                const auto cfg = config(dt, 1e-12);
                const auto z0 = random_state(m, rng);
                const auto r = dg_step(m, scheme, z0, cfg);
                const double H0 = discrete_hamiltonian(m, z0);
                const double H1 = discrete_hamiltonian(m, r.z1);
                CAPTURE(name);
                CAPTURE(scheme.describe());
                CAPTURE(dt);
                CHECK(r.report.converged);
                CHECK(r.report.final_residual_norm <= cfg.tol);
                CHECK(std::abs(H1 - H0) <= 16 * cfg.tol * dt * (1 + std::abs(H0)));
            }
        }
    }
}

TEST_CASE("equilibrium stays put without iterating") {
    for (const char* name : {"sine_gordon", "kdv_type", "multisym_wave", "lattice_wave"}) {
        const auto m = builtin_model(name, Grid(8, 0.5));
        const GridFunction z0(m.grid, m.n_components());
        const auto r = dg_step(m, DiscreteGradientScheme::midpoint_gonzalez(), z0, config(0.1));
        CAPTURE(name);
        CHECK(r.report.iterations <= 1);
        CHECK(max_abs(r.z1) == 0.0);
    }
}

TEST_CASE("time reversal: flipping momenta retraces a quadratic-energy step") {
    const auto m = builtin_model("nonlinear_wave", Grid(12, 0.3), {{"potential", "harmonic"}});
    std::mt19937_64 rng(4);
    const auto z0 = random_state(m, rng);
    const auto cfg = config(0.25, 1e-14);
    auto flip = [](GridFunction z) {
        for (double& p : z.component(1)) p = -p;
        return z;
    };
    const auto fwd = dg_step(m, default_scheme(m), z0, cfg);
    const auto back = dg_step(m, default_scheme(m), flip(fwd.z1), cfg);
    CHECK(max_diff(flip(back.z1), z0) < 1e-12);
}

TEST_CASE("second-order convergence on the oscillator") {
    const auto m = builtin_model("harmonic_oscillator", Grid(3, 1.0));
    const auto z0 = oscillator_state(m, 1.0, 0.5);
    std::vector<double> dts{0.2, 0.1, 0.05, 0.025}, errs;
    for (double dt : dts) {
        const auto t = run_simulation(m, Stepper{default_scheme(m), {}}, z0,
                                      static_cast<std::size_t>(std::llround(1.0 / dt)), config(dt));
        errs.push_back(max_diff(t.states.back(), m.exact_flow(z0, 1.0)));
    }
    for (std::size_t k = 1; k < errs.size(); ++k) {
        CHECK(std::log2(errs[k - 1] / errs[k]) == doctest::Approx(2.0).epsilon(0.1));
    }
}

TEST_CASE("fixed-point iteration matches Newton at small steps") {
    const auto m = builtin_model("sine_gordon", Grid(16, 0.5));
    const auto z0 = bump_state(m);
    auto cfg = config(0.02, 1e-13);
    const auto newton = dg_step(m, default_scheme(m), z0, cfg);
    cfg.solver = SolverKind::FixedPoint;
    const auto fixed = dg_step(m, default_scheme(m), z0, cfg);
    CHECK(fixed.report.converged);
    CHECK(fixed.report.iterations > newton.report.iterations);
    CHECK(max_diff(fixed.z1, newton.z1) < 1e-12);

    const auto ms = builtin_model("multisym_wave", Grid(8, 0.5));
    CHECK_THROWS_AS(dg_step(ms, default_scheme(ms), GridFunction(ms.grid, 3), cfg), std::invalid_argument);
}

TEST_CASE("solver failures are reported, never returned") {
    const auto m = builtin_model("sine_gordon", Grid(16, 0.5));
    auto cfg = config(0.5, 1e-15);
    cfg.max_iter = 1;
    const auto z0 = bump_state(m, 1.0, 0, 2.0);
    try {
        dg_step(m, default_scheme(m), z0, cfg);
        FAIL("expected divergence");
    } catch (const SolverError& e) {
        CHECK(e.code() == SolverError::Code::Diverged);
        CHECK(e.report().iterations == 1);
        CHECK_FALSE(e.report().converged);
    }

    // run_simulation tags the failing step
    cfg = config(0.1);
    cfg.max_iter = 1;
    cfg.tol = 1e-30;
    try {
        run_simulation(m, Stepper{default_scheme(m), {}}, z0, 5, cfg);
        FAIL("expected divergence");
    } catch (const SolverError& e) {
        REQUIRE(e.step().has_value());
        CHECK(*e.step() == 1);
        CHECK(std::string(e.what()).rfind("step 1:", 0) == 0);
    }
}

TEST_CASE("singular Jacobian names the offending block") {
    const auto m = detached_component_model();
    GridFunction z0(m.grid, 2);
    for (std::size_t i = 0; i < 6; ++i) z0(0, i) = 0.1 * static_cast<double>(i + 1);
    try {
        dg_step(m, DiscreteGradientScheme::midpoint_gonzalez(), z0, config(0.1));
        FAIL("expected a singular Jacobian");
    } catch (const SolverError& e) {
        CHECK(e.code() == SolverError::Code::SingularJacobian);
        CHECK(std::string(e.what()).find("component 1") != std::string::npos);
    }
}

TEST_CASE("degenerate steps honour the constraint and the skew identity") {
    const auto m = builtin_model("multisym_wave", Grid(32, 0.25));
    const auto z0 = bump_state(m);
    const auto r = dg_step(m, default_scheme(m), z0, config(0.05));
    std::vector<double> d(3), Kd(3);
    for (std::size_t i = 0; i < 32; ++i) {
        for (std::size_t c = 0; c < 3; ++c) d[c] = r.z1(c, i) - z0(c, i);
        CHECK(std::abs(m.K().form(d, d)) < 1e-16);
    }
    // third row: 0 = w̄ - D₀ū, i.e. the averaged w stays the centered difference of averaged u
    const auto R = dg_residual(m, default_scheme(m), z0, r.z1, 0.05);
    for (std::size_t i = 0; i < 32; ++i) CHECK(std::abs(R(2, i)) <= 1e-13);
    CHECK_THROWS_AS(baseline_step(m, z0, config(0.05), BaselineMethod::RK4), ModelError);
    CHECK_THROWS_AS(dg_step_degenerate(builtin_model("sine_gordon", Grid(8, 0.5)), default_scheme(m),
                                       GridFunction(Grid(8, 0.5), 2), config(0.1)),
                    ModelError);
}

TEST_CASE("trajectories") {
    const auto m = builtin_model("sine_gordon", Grid(32, 0.2));
    const auto z0 = bump_state(m);
    const Stepper dg{default_scheme(m), {}};
    const auto empty = run_simulation(m, dg, z0, 0, config(0.1));
    CHECK(empty.states.size() == 1);
    CHECK(empty.ecl_reports.empty());

    const auto a = run_simulation(m, dg, z0, 20, config(0.1));
    const auto b = run_simulation(m, dg, z0, 20, config(0.1));
    CHECK(a.states.size() == 21);
    CHECK(a.states.back().values() == b.states.back().values());

    // Euler gains energy where the discrete gradient step keeps it
    const auto euler = run_simulation(m, Stepper{default_scheme(m), BaselineMethod::ExplicitEuler}, z0, 200, config(0.1));
    const auto dgrun = run_simulation(m, dg, z0, 200, config(0.1));
    const double e0 = dgrun.energies.front();
    const double euler_drift = euler.blew_up_at ? INFINITY : std::abs(euler.energies.back() - e0);
    CHECK(euler_drift > 1e6 * std::abs(dgrun.energies.back() - e0));
}

TEST_CASE("baseline blow-up stops the trajectory") {
    const auto m = builtin_model("sine_gordon", Grid(64, 0.2));
    const auto z0 = bump_state(m);
    const auto t = run_simulation(m, Stepper{default_scheme(m), BaselineMethod::ExplicitEuler}, z0, 5000, config(0.1));
    REQUIRE(t.blew_up_at.has_value());
    CHECK(t.states.back().all_finite());
    CHECK(t.states.size() == *t.blew_up_at);
}
