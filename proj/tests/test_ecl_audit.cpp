#include "eclkit/ecl_audit.hpp"
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

StepConfig config(double dt, double tol = 1e-12) {
    StepConfig c;
    c.dt = dt;
    c.tol = tol;
    return c;
}

DiscreteGradientScheme default_scheme(const ModelInstance& m) {
    return DiscreteGradientScheme::default_for(m.density.poly_degree());
}

/// Degenerate model with H = w_u + 2 w_v, so the z_x-slot gradient is (1, 2, 0) everywhere.
ModelInstance linear_flux_model() {
    ModelInstance m = builtin_model("multisym_wave", Grid(5, 1.0));
    m.density.H.eval = [](std::span<const double> y) { return y[3] + 2 * y[4]; };
    m.density.H.grad = [](std::span<const double>, std::span<double> g) {
        std::fill(g.begin(), g.end(), 0.0);
        g[3] = 1;
        g[4] = 2;
    };
    m.density.H.increment = {};
    m.density.H.poly_degree = 1;
    return m;
}

GridFunction scalar(std::vector<double> v, double dx = 1.0) {
    const auto n = v.size();
    return GridFunction(Grid(n, dx), 1, std::move(v));
}

} // namespace

TEST_CASE("degenerate flux is minus the slot gradient dotted with the time difference") {
    const auto m = linear_flux_model();
    GridFunction z0(m.grid, 3), z1(m.grid, 3);
    for (std::size_t i = 0; i < 5; ++i) {
        z1(0, i) = 0.1 * 3;
        z1(1, i) = 0.1 * 4;
    }
    const auto f = discrete_flux_prop3(m, DiscreteGradientScheme::midpoint_gonzalez(), z0, z1, 0.1);
    for (std::size_t i = 0; i < 5; ++i) CHECK(f(0, i) == doctest::Approx(-11.0));
    CHECK(max_abs(discrete_flux_prop3(m, DiscreteGradientScheme::midpoint_gonzalez(), z1, z1, 0.1)) == 0.0);
}

TEST_CASE("telescoping reconstruction") {
    const auto dc = scalar({1, -1, 0});
    const auto F = reconstruct_flux_telescoping(dc, 1e-12);
    const auto r = ecl_residual(dc, F, FluxShift::Backward);
    CHECK(max_abs(r) < 1e-15);
    CHECK(std::abs(periodic_total(F, false)) < 1e-15);
    CHECK(max_abs(reconstruct_flux_telescoping(scalar({0, 0, 0, 0}), 1e-12)) == 0.0);
    CHECK_THROWS_AS(reconstruct_flux_telescoping(scalar({1, 0, 0}), 1e-12), NotConservative);
}

TEST_CASE("residual shifts") {
    const auto dc = scalar({1, 2, 3});
    const auto f = scalar({10, 20, 40});
    const auto fwd = ecl_residual(dc, f, FluxShift::Forward);
    const auto bwd = ecl_residual(dc, f, FluxShift::Backward);
    CHECK(fwd.values() == std::vector<double>{11, 22, -27});
    CHECK(bwd.values() == std::vector<double>{-29, 12, 23});
    CHECK_THROWS_AS(ecl_residual(dc, scalar({1, 2, 3, 4}), FluxShift::Forward), ShapeMismatch);
}

TEST_CASE("density change") {
    const auto m = builtin_model("sine_gordon", Grid(16, 0.5));
    const auto z = bump_state(m);
    CHECK(max_abs(density_change(m, z, z, 0.1)) == 0.0);
    // one Euler step does not conserve the total
    const auto e = baseline_step(m, z, config(0.1), BaselineMethod::ExplicitEuler);
    CHECK(std::abs(periodic_total(density_change(m, z, e.z1, 0.1), true)) > 1e-6);
    CHECK_THROWS_AS(density_change(m, z, GridFunction(Grid(8, 0.5), 2), 0.1), ShapeMismatch);
}

TEST_CASE("flux operations reject the wrong model kind") {
    const auto k = builtin_model("kdv_type", Grid(8, 1.0));
    const GridFunction zk(k.grid, 1);
    const auto s = DiscreteGradientScheme::midpoint_gonzalez();
    CHECK_THROWS_AS(discrete_flux_prop1(k, s, zk, zk), ModelError);
    CHECK_THROWS_AS(discrete_flux_lattice(k, s, zk, zk), ModelError);
    CHECK_THROWS_AS(discrete_flux_prop3(k, s, zk, zk, 0.1), ModelError);
}

TEST_CASE("stationary pairs give an all-zero report") {
    for (const char* name : {"sine_gordon", "kdv_type", "multisym_wave", "lattice_wave"}) {
        const auto m = builtin_model(name, Grid(8, 0.5));
        const GridFunction z(m.grid, m.n_components());
        const auto r = audit_step(m, default_scheme(m), z, z, 0.1);
        CAPTURE(name);
        CHECK(max_abs(r.density_change) == 0.0);
        CHECK(max_abs(r.flux) == 0.0);
        CHECK(r.max_residual == 0.0);
        CHECK(r.global_drift == 0.0);
    }
    // any z1 = z0 under telescoping
    const auto k = builtin_model("kdv_type", Grid(8, 0.5));
    const auto z = bump_state(k);
    CHECK(audit_step(k, default_scheme(k), z, z, 0.1).max_residual == 0.0);
}

TEST_CASE("canonical bar-flux reduces to minus midpoint p times midpoint q_x") {
    std::mt19937_64 rng(21);
    for (const auto& v : potential_names()) {
        const auto m = builtin_model("nonlinear_wave", Grid(24, 0.3), {{"potential", v}});
        // average value gradients of the quadratic p and q_x parts are exact midpoints
        const auto av = DiscreteGradientScheme::average_value(16);
        for (int t = 0; t < 25; ++t) {
            const auto z0 = random_state(m, rng);
            const auto z1 = dg_step(m, av, z0, config(0.1)).z1;
            const auto F = discrete_flux_prop1(m, av, z0, z1);
            for (std::ptrdiff_t i = 0; i < 24; ++i) {
                const double pbar = 0.5 * (z0.at(1, i) + z1.at(1, i));
                const double qx = 0.5 * ((z0.at(0, i) - z0.at(0, i - 1)) + (z1.at(0, i) - z1.at(0, i - 1))) / 0.3;
                CHECK(std::abs(F.at(0, i) + pbar * qx) <= 1e-12);
            }
        }
    }
}

TEST_CASE("both flux routes coincide on lattice-realized canonical models") {
    std::mt19937_64 rng(22);
    for (const char* name : {"sine_gordon", "lattice_wave"}) {
        const auto m = builtin_model(name, Grid(20, 0.4), {});
        const auto z0 = random_state(m, rng);
        const auto z1 = dg_step(m, default_scheme(m), z0, config(0.1)).z1;
        const auto a = discrete_flux_prop1(m, default_scheme(m), z0, z1);
        const auto b = discrete_flux_lattice(m, default_scheme(m), z0, z1);
        CAPTURE(name);
        CHECK(max_diff(a, b) < 1e-13);
    }
}

TEST_CASE("ECL exactness across kinds, potentials, sizes and steps") {
    std::mt19937_64 rng(23);
    std::vector<std::pair<std::string, ModelParams>> cases{{"lattice_wave", {{"form", "pure"}, {"fpu_beta", "1"}}}};
    for (const auto& v : potential_names()) {
        cases.push_back({"nonlinear_wave", {{"potential", v}}});
        cases.push_back({"multisym_wave", {{"potential", v}}});
        cases.push_back({"lattice_wave", {{"onsite", v}, {"fpu_beta", "1"}}});
    }
    for (const auto& [name, p] : cases) {
        for (std::size_t N : {8u, 64u, 256u}) {
            const auto m = builtin_model(name, Grid(N, 0.2), p);
            std::vector<DiscreteGradientScheme> schemes{DiscreteGradientScheme::midpoint_gonzalez(),
                                                        DiscreteGradientScheme::itoh_abe()};
            if (m.density.poly_degree()) schemes.push_back(default_scheme(m));
            for (const auto& s : schemes) {
                for (double dt : {0.01, 0.1, 0.5}) {
                    CAPTURE(name);
                    CAPTURE(N);
                    CAPTURE(s.describe());
                    CAPTURE(dt);
                    const auto cfg = config(dt);
                    const auto z0 = N == 8 ? random_state(m, rng) : bump_state(m);
                    const auto z1 = dg_step(m, s, z0, cfg).z1;
                    const auto r = audit_step(m, s, z0, z1, dt);
                    CHECK(r.max_residual <= 10 * cfg.tol);
                    // the global drift is bounded by the local residuals
                    CHECK(std::abs(r.global_drift) <= N * r.max_residual * m.grid.dx() + 1e-300);
                }
            }
        }
    }
}

TEST_CASE("telescoped ECL exactness for the Poisson kind") {
    std::mt19937_64 rng(24);
    for (std::size_t N : {8u, 64u}) {
        const auto m = builtin_model("kdv_type", Grid(N, 1.0), {{"gamma", "0.5"}});
        for (const auto& s : {DiscreteGradientScheme::midpoint_gonzalez(), default_scheme(m)}) {
            for (double dt : {0.01, 0.1}) {
                const auto cfg = config(dt);
                const auto z0 = random_state(m, rng);
                const auto r = audit_step(m, s, z0, dg_step(m, s, z0, cfg).z1, dt);
                CAPTURE(N);
                CAPTURE(dt);
                CHECK(r.max_residual <= 10 * cfg.tol);
                CHECK(std::abs(r.global_drift) <= 10 * cfg.tol);
            }
        }
    }
}

TEST_CASE("flux methods and shifts are recorded") {
    const auto s = DiscreteGradientScheme::midpoint_gonzalez();
    auto run = [&](const char* name) {
        const auto m = builtin_model(name, Grid(8, 0.5));
        const auto z0 = bump_state(m);
        return audit_step(m, s, z0, dg_step(m, s, z0, config(0.1)).z1, 0.1);
    };
    CHECK(run("sine_gordon").flux_method == "canonical_bar_flux");
    CHECK(run("lattice_wave").flux_method == "lattice_product_rule");
    CHECK(run("multisym_wave").flux_method == "degenerate_bilinear");
    const auto k = run("kdv_type");
    CHECK(k.flux_method == "telescoping");
    CHECK(k.shift == FluxShift::Backward);
}

TEST_CASE("discrete fluxes tend to the semidiscrete flux at first order in the step") {
    // reference: the same flux with both time levels at z0, where every discrete gradient is the gradient
    const auto check_rate = [](const ModelInstance& m, auto flux) {
        const auto z0 = bump_state(m);
        const auto ref = flux(z0, z0, 1.0);
        std::vector<double> errs;
        for (double dt : {0.04, 0.02, 0.01, 0.005}) {
            const auto z1 = dg_step(m, default_scheme(m), z0, config(dt)).z1;
            errs.push_back(max_diff(flux(z0, z1, dt), ref));
        }
        for (std::size_t k = 1; k < errs.size(); ++k) {
            CHECK(std::log2(errs[k - 1] / errs[k]) == doctest::Approx(1.0).epsilon(0.1));
        }
    };
    const auto sg = builtin_model("sine_gordon", Grid(32, 0.25));
    check_rate(sg, [&](const GridFunction& a, const GridFunction& b, double) {
        return discrete_flux_prop1(sg, default_scheme(sg), a, b);
    });
    // degenerate flux needs z_t, so use successive differences of the discrete fluxes instead
    const auto ms = builtin_model("multisym_wave", Grid(32, 0.25), {{"potential", "pendulum"}});
    const auto z0 = bump_state(ms);
    std::vector<GridFunction> fluxes;
    for (double dt : {0.04, 0.02, 0.01, 0.005, 0.0025}) {
        const auto z1 = dg_step(ms, default_scheme(ms), z0, config(dt)).z1;
        fluxes.push_back(discrete_flux_prop3(ms, default_scheme(ms), z0, z1, dt));
    }
    for (std::size_t k = 2; k < fluxes.size(); ++k) {
        const double prev = max_diff(fluxes[k - 2], fluxes[k - 1]);
        const double next = max_diff(fluxes[k - 1], fluxes[k]);
        CHECK(std::log2(prev / next) == doctest::Approx(1.0).epsilon(0.15));
    }
}

TEST_CASE("dg residual stays at solver level while baseline residual scales with the step") {
    const auto m = builtin_model("sine_gordon", Grid(32, 0.25));
    const auto z0 = bump_state(m);
    const auto s = default_scheme(m);
    std::vector<double> base;
    for (double dt : {0.04, 0.02, 0.01, 0.005}) {
        const auto cfg = config(dt, 1e-13);
        const auto dg = dg_step(m, s, z0, cfg).z1;
        CHECK(audit_step(m, s, z0, dg, dt).max_residual <= 10 * cfg.tol);
        const auto eu = baseline_step(m, z0, cfg, BaselineMethod::ExplicitEuler).z1;
        base.push_back(audit_step(m, s, z0, eu, dt).max_residual);
    }
    CHECK(base.back() > 1e-6);
    for (std::size_t k = 1; k < base.size(); ++k) {
        CHECK(std::log2(base[k - 1] / base[k]) == doctest::Approx(1.0).epsilon(0.15));
    }
}

TEST_CASE("telescoped flux is local: far-field change is a constant") {
    const std::size_t N = 128;
    const auto m = builtin_model("kdv_type", Grid(N, 1.0));
    const auto z0 = bump_state(m, 4.0);
    const auto s = default_scheme(m);
    const auto cfg = config(0.01, 1e-13);
    const auto F = [&](const GridFunction& z) {
        const auto z1 = dg_step(m, s, z, cfg).z1;
        return reconstruct_flux_telescoping(density_change(m, z, z1, cfg.dt), 1e-12);
    };
    const auto base = F(z0);
    // twice the stencil width of the step residual
    const std::size_t reach = 2 * (2 * m.stencil_radius() + 1);
    for (std::size_t j : {5u, 64u, 100u}) {
        GridFunction zp = z0;
        const double pert = 0.1;
        zp(0, j) += pert;
        const auto moved = F(zp);
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t d = std::min((i + N - j) % N, (j + N - i) % N);
            if (d <= reach) continue;
            lo = std::min(lo, moved(0, i) - base(0, i));
            hi = std::max(hi, moved(0, i) - base(0, i));
        }
        CAPTURE(j);
        CHECK(hi - lo <= 1e-10 * pert);
    }
}
