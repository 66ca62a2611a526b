#include "eclkit/integrator.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace eclkit {

namespace {

using ResidualFn = std::function<GridFunction(const GridFunction&)>;

double inf_norm(const GridFunction& f) {
    double m = 0.0;
    for (double v : f.values()) {
        if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(v));
    }
    return m;
}

GridFunction axpy(const GridFunction& x, double a, const GridFunction& y) {
    GridFunction out = x;
    for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] += a * y.values()[k];
    return out;
}

/// Forward-difference Jacobian of a residual whose entry at point i depends
/// only on unknowns within `radius` points of i. Columns whose stencils cannot
/// overlap are perturbed together.
Eigen::SparseMatrix<double> fd_jacobian(const ResidualFn& F, const GridFunction& x, const GridFunction& Fx,
                                        std::size_t radius, double eps) {
    const std::size_t N = x.n_points();
    const std::size_t n = x.n_components();
    const std::size_t G = 2 * radius + 1;
    const std::size_t blocks = N / G;
    const std::size_t shared = blocks * G;
    const std::size_t shared_colors = blocks > 0 ? G : 0;
    auto point_color = [&](std::size_t p) { return p < shared ? p % G : shared_colors + (p - shared); };
    const std::size_t n_point_colors = shared_colors + (N - shared);

    // Rows touched by a column at point p.
    std::vector<std::vector<std::size_t>> reach(N);
    for (std::size_t p = 0; p < N; ++p) {
        std::set<std::size_t> pts;
        for (std::ptrdiff_t d = -static_cast<std::ptrdiff_t>(radius); d <= static_cast<std::ptrdiff_t>(radius); ++d) {
            pts.insert(x.grid().wrap(static_cast<std::ptrdiff_t>(p) + d));
        }
        reach[p].assign(pts.begin(), pts.end());
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(N * n * n * G);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t color = 0; color < n_point_colors; ++color) {
            GridFunction xp = x;
            std::vector<std::size_t> members;
            for (std::size_t p = 0; p < N; ++p) {
                if (point_color(p) == color) {
                    members.push_back(p);
                    xp(c, p) += eps;
                }
            }
            if (members.empty()) continue;
            const GridFunction Fp = F(xp);
            for (std::size_t p : members) {
                const auto col = static_cast<int>(c * N + p);
                for (std::size_t q : reach[p]) {
                    for (std::size_t r = 0; r < n; ++r) {
                        const double v = (Fp(r, q) - Fx(r, q)) / eps;
                        if (v != 0.0) triplets.emplace_back(static_cast<int>(r * N + q), col, v);
                    }
                }
            }
        }
    }
    Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(N * n), static_cast<Eigen::Index>(N * n));
    J.setFromTriplets(triplets.begin(), triplets.end());
    return J;
}

void check_zero_rows(const Eigen::SparseMatrix<double>& J, std::size_t N, const SolverReport& report) {
    std::vector<bool> nonzero(static_cast<std::size_t>(J.rows()), false);
    for (Eigen::Index k = 0; k < J.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(J, k); it; ++it) {
            if (it.value() != 0.0) nonzero[static_cast<std::size_t>(it.row())] = true;
        }
    }
    for (std::size_t row = 0; row < nonzero.size(); ++row) {
        if (!nonzero[row]) {
            std::ostringstream msg;
            msg << "singular Jacobian: residual row block (component " << row / N << ", point " << row % N
                << ") does not depend on any unknown";
            throw SolverError(SolverError::Code::SingularJacobian, msg.str(), report);
        }
    }
}

StepResult newton_solve(const ResidualFn& F, GridFunction x, std::size_t radius, const StepConfig& cfg) {
    SolverReport report;
    GridFunction R = F(x);
    report.final_residual_norm = inf_norm(R);
    const std::size_t N = x.n_points();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;

    while (report.final_residual_norm > cfg.tol && report.iterations < cfg.max_iter) {
        const double eps = cfg.fd_eps > 0.0 ? cfg.fd_eps
                                            : std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + inf_norm(x));
        const auto J = fd_jacobian(F, x, R, radius, eps);
        check_zero_rows(J, N, report);

        lu.compute(J);
        if (lu.info() != Eigen::Success) {
            throw SolverError(SolverError::Code::SingularJacobian,
                              "singular Jacobian: sparse LU failed (" + lu.lastErrorMessage() + ")", report);
        }
        const Eigen::Map<const Eigen::VectorXd> rhs(R.values().data(), static_cast<Eigen::Index>(R.size()));
        const Eigen::VectorXd step = lu.solve(-rhs);
        if (lu.info() != Eigen::Success) {
            throw SolverError(SolverError::Code::SingularJacobian, "singular Jacobian: solve failed", report);
        }
        for (std::size_t k = 0; k < x.size(); ++k) x.values()[k] += step(static_cast<Eigen::Index>(k));

        R = F(x);
        report.final_residual_norm = inf_norm(R);
        ++report.iterations;
        if (!std::isfinite(report.final_residual_norm)) break;
    }

    if (!(report.final_residual_norm <= cfg.tol)) {
        std::ostringstream msg;
        msg << "Newton did not converge: ‖R‖∞ = " << report.final_residual_norm << " after " << report.iterations
            << " iterations (tol " << cfg.tol << ")";
        throw SolverError(SolverError::Code::Diverged, msg.str(), report);
    }
    report.converged = true;

    // One extra update with the last factorization, kept only if it helps.
    if (report.iterations > 0 && report.final_residual_norm > 0.0) {
        const Eigen::Map<const Eigen::VectorXd> rhs(R.values().data(), static_cast<Eigen::Index>(R.size()));
        const Eigen::VectorXd step = lu.solve(-rhs);
        if (lu.info() == Eigen::Success) {
            GridFunction polished = x;
            for (std::size_t k = 0; k < x.size(); ++k) polished.values()[k] += step(static_cast<Eigen::Index>(k));
            const double norm = inf_norm(F(polished));
            if (norm < report.final_residual_norm) {
                x = std::move(polished);
                report.final_residual_norm = norm;
            }
        }
    }
    return {std::move(x), report};
}

/// x ← x - Δt R(x) for residuals of the form (x - z0)/Δt - f(x).
StepResult fixed_point_solve(const ResidualFn& F, GridFunction x, const StepConfig& cfg) {
    SolverReport report;
    GridFunction R = F(x);
    report.final_residual_norm = inf_norm(R);
    while (report.final_residual_norm > cfg.tol && report.iterations < cfg.max_iter) {
        x = axpy(x, -cfg.dt, R);
        R = F(x);
        report.final_residual_norm = inf_norm(R);
        ++report.iterations;
        if (!std::isfinite(report.final_residual_norm)) break;
    }
    if (!(report.final_residual_norm <= cfg.tol)) {
        std::ostringstream msg;
        msg << "fixed-point iteration did not converge: ‖R‖∞ = " << report.final_residual_norm << " after "
            << report.iterations << " iterations (tol " << cfg.tol << ")";
        throw SolverError(SolverError::Code::Diverged, msg.str(), report);
    }
    report.converged = true;
    return {std::move(x), report};
}

void require_compatible(const ModelInstance& model, const GridFunction& z0) {
    if (!(z0.grid() == model.grid) || z0.n_components() != model.n_components()) {
        throw ShapeMismatch("step: state does not match the model grid/components");
    }
    if (!z0.all_finite()) throw NonFiniteInput("step: initial state has non-finite entries");
}

} // namespace

std::string to_string(SolverKind kind) { return kind == SolverKind::Newton ? "newton" : "fixed_point"; }

SolverKind solver_kind_from_string(const std::string& name) {
    if (name == "newton") return SolverKind::Newton;
    if (name == "fixed_point") return SolverKind::FixedPoint;
    throw std::invalid_argument("unknown solver '" + name + "' (expected newton or fixed_point)");
}

void StepConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("StepConfig: dt must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("StepConfig: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("StepConfig: max_iter must be >= 1");
    if (fd_eps < 0.0) throw std::invalid_argument("StepConfig: fd_eps must be >= 0");
}

SolverError::SolverError(Code code, const std::string& what, SolverReport report)
    : std::runtime_error(what), code_(code), report_(report) {}

SolverError SolverError::at_step(std::size_t step) const {
    SolverError e(code_, "step " + std::to_string(step) + ": " + what(), report_);
    e.step_ = step;
    return e;
}

GridFunction dg_residual(const ModelInstance& model, const DiscreteGradientScheme& scheme, const GridFunction& z0,
                         const GridFunction& z1, double dt) {
    const auto E = discrete_euler_operator(model, discrete_cell_gradients(model, scheme, z0, z1));
    GridFunction R(z0.grid(), z0.n_components());
    if (model.kind == ModelKind::DegenerateK) {
        const std::size_t n = z0.n_components();
        std::vector<double> d(n), Kd(n);
        for (std::size_t i = 0; i < z0.n_points(); ++i) {
            for (std::size_t c = 0; c < n; ++c) d[c] = (z1(c, i) - z0(c, i)) / dt;
            model.K().apply(d, Kd);
            for (std::size_t c = 0; c < n; ++c) R(c, i) = Kd[c] - E(c, i);
        }
        return R;
    }
    const auto KE = apply_structure(model, E);
    for (std::size_t k = 0; k < R.size(); ++k) {
        R.values()[k] = (z1.values()[k] - z0.values()[k]) / dt - KE.values()[k];
    }
    return R;
}

StepResult dg_step(const ModelInstance& model, const DiscreteGradientScheme& scheme, const GridFunction& z0,
                   const StepConfig& cfg) {
    if (model.kind == ModelKind::DegenerateK) return dg_step_degenerate(model, scheme, z0, cfg);
    cfg.validate();
    require_compatible(model, z0);

    const ResidualFn F = [&](const GridFunction& z1) { return dg_residual(model, scheme, z0, z1, cfg.dt); };
    GridFunction guess = axpy(z0, cfg.dt, semidiscrete_rhs(model, z0));
    if (cfg.solver == SolverKind::FixedPoint) return fixed_point_solve(F, std::move(guess), cfg);
    return newton_solve(F, std::move(guess), model.stencil_radius(), cfg);
}

StepResult dg_step_degenerate(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                              const GridFunction& z0, const StepConfig& cfg) {
    if (model.kind != ModelKind::DegenerateK) {
        throw ModelError("dg_step_degenerate: model '" + model.name + "' is not of degenerate-K kind");
    }
    cfg.validate();
    require_compatible(model, z0);
    if (cfg.solver == SolverKind::FixedPoint) {
        throw std::invalid_argument("dg_step_degenerate: fixed-point iteration needs an invertible K; use newton");
    }
    const ResidualFn F = [&](const GridFunction& z1) { return dg_residual(model, scheme, z0, z1, cfg.dt); };
    return newton_solve(F, z0, model.stencil_radius(), cfg);
}

std::string to_string(BaselineMethod method) {
    switch (method) {
    case BaselineMethod::ExplicitEuler: return "explicit_euler";
    case BaselineMethod::ImplicitMidpointClassic: return "implicit_midpoint";
    case BaselineMethod::RK4: return "rk4";
    }
    return "unknown";
}

BaselineMethod baseline_method_from_string(const std::string& name) {
    if (name == "explicit_euler") return BaselineMethod::ExplicitEuler;
    if (name == "implicit_midpoint") return BaselineMethod::ImplicitMidpointClassic;
    if (name == "rk4") return BaselineMethod::RK4;
    throw std::invalid_argument("unknown baseline '" + name + "' (expected explicit_euler, implicit_midpoint or rk4)");
}

StepResult baseline_step(const ModelInstance& model, const GridFunction& z0, const StepConfig& cfg,
                         BaselineMethod method) {
    cfg.validate();
    require_compatible(model, z0);
    const double dt = cfg.dt;
    auto f = [&](const GridFunction& z) { return semidiscrete_rhs(model, z); };

    switch (method) {
    case BaselineMethod::ExplicitEuler: return {axpy(z0, dt, f(z0)), {0, 0.0, true}};
    case BaselineMethod::RK4: {
        const auto k1 = f(z0);
        const auto k2 = f(axpy(z0, 0.5 * dt, k1));
        const auto k3 = f(axpy(z0, 0.5 * dt, k2));
        const auto k4 = f(axpy(z0, dt, k3));
        GridFunction z1 = z0;
        for (std::size_t k = 0; k < z1.size(); ++k) {
            z1.values()[k] += dt / 6.0 *
                              (k1.values()[k] + 2.0 * k2.values()[k] + 2.0 * k3.values()[k] + k4.values()[k]);
        }
        return {std::move(z1), {0, 0.0, true}};
    }
    case BaselineMethod::ImplicitMidpointClassic: {
        const ResidualFn F = [&](const GridFunction& z1) {
            GridFunction mid = z0;
            for (std::size_t k = 0; k < mid.size(); ++k) mid.values()[k] = 0.5 * (z0.values()[k] + z1.values()[k]);
            const auto rhs = f(mid);
            GridFunction R = z1;
            for (std::size_t k = 0; k < R.size(); ++k) {
                R.values()[k] = (z1.values()[k] - z0.values()[k]) / dt - rhs.values()[k];
            }
            return R;
        };
        return newton_solve(F, axpy(z0, dt, f(z0)), model.stencil_radius(), cfg);
    }
    }
    throw std::invalid_argument("baseline_step: unknown method");
}

std::string Stepper::describe() const { return baseline ? to_string(*baseline) : "dg:" + scheme.describe(); }

Trajectory run_simulation(const ModelInstance& model, const Stepper& stepper, const GridFunction& z_init,
                          std::size_t n_steps, const StepConfig& cfg, const StepObserver& observer) {
    cfg.validate();
    require_compatible(model, z_init);
    Trajectory traj;
    traj.states.push_back(z_init);
    traj.energies.push_back(discrete_hamiltonian(model, z_init));
    if (observer) observer(0, traj);

    for (std::size_t step = 1; step <= n_steps; ++step) {
        const GridFunction& z0 = traj.states.back();
        StepResult result{z0, {}};
        try {
            result = stepper.baseline ? baseline_step(model, z0, cfg, *stepper.baseline)
                                      : dg_step(model, stepper.scheme, z0, cfg);
        } catch (const SolverError& e) {
            throw e.at_step(step);
        }
        if (!result.z1.all_finite()) {
            traj.blew_up_at = step;
            break;
        }
        traj.ecl_reports.push_back(audit_step(model, stepper.scheme, z0, result.z1, cfg.dt));
        traj.solver_reports.push_back(result.report);
        traj.energies.push_back(discrete_hamiltonian(model, result.z1));
        traj.states.push_back(std::move(result.z1));
        if (observer) observer(step, traj);
    }
    return traj;
}

} // namespace eclkit
