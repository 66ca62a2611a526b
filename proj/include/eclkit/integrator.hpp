#pragma once

#include "eclkit/ecl_audit.hpp"
#include "eclkit/models.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eclkit {

enum class SolverKind { Newton, FixedPoint };

std::string to_string(SolverKind kind);
SolverKind solver_kind_from_string(const std::string& name);

struct StepConfig {
    double dt = 0.1;
    SolverKind solver = SolverKind::Newton;
    double tol = 1e-12;  // on ‖R‖∞
    int max_iter = 50;
    /// Finite-difference Jacobian step; 0 selects sqrt(eps)·(1 + ‖z‖∞).
    double fd_eps = 0.0;

    void validate() const;
};

struct SolverReport {
    int iterations = 0;
    double final_residual_norm = 0.0;
    bool converged = false;
};

class SolverError : public std::runtime_error {
public:
    enum class Code { Diverged, SingularJacobian };

    SolverError(Code code, const std::string& what, SolverReport report = {});

    Code code() const { return code_; }
    const SolverReport& report() const { return report_; }
    std::optional<std::size_t> step() const { return step_; }

    /// Copy of this error tagged with the trajectory step it happened in.
    SolverError at_step(std::size_t step) const;

private:
    Code code_;
    SolverReport report_;
    std::optional<std::size_t> step_;
};

struct StepResult {
    GridFunction z1;
    SolverReport report;
};

/// Residual of the implicit discrete gradient step.
///   Poisson/canonical/lattice: R = (z1 - z0)/Δt - 𝒦_d Ē(z0, z1)
///   degenerate K:              R = K (z1 - z0)/Δt - Ē(z0, z1)
GridFunction dg_residual(const ModelInstance& model, const DiscreteGradientScheme& scheme, const GridFunction& z0,
                         const GridFunction& z1, double dt);

/// One discrete gradient step. DegenerateK models are forwarded to
/// dg_step_degenerate. Throws SolverError; z1 is never returned unconverged.
StepResult dg_step(const ModelInstance& model, const DiscreteGradientScheme& scheme, const GridFunction& z0,
                   const StepConfig& cfg);

/// One step of K (z1 - z0)/Δt = Ē(z0, z1) with K possibly singular. Newton
/// on the full stacked system, including the algebraic rows.
StepResult dg_step_degenerate(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                              const GridFunction& z0, const StepConfig& cfg);

enum class BaselineMethod { ExplicitEuler, ImplicitMidpointClassic, RK4 };

std::string to_string(BaselineMethod method);
BaselineMethod baseline_method_from_string(const std::string& name);

/// Classical one-step maps on the semidiscretization z_t = 𝒦_d E(z).
StepResult baseline_step(const ModelInstance& model, const GridFunction& z0, const StepConfig& cfg,
                         BaselineMethod method);

/// What advances the state in run_simulation.
struct Stepper {
    DiscreteGradientScheme scheme;
    std::optional<BaselineMethod> baseline;  // empty: discrete gradient step

    std::string describe() const;
};

struct Trajectory {
    std::vector<GridFunction> states;
    std::vector<SolverReport> solver_reports;  // one per step
    std::vector<EclReport> ecl_reports;        // one per step
    std::vector<double> energies;              // ℋ_d per state

    /// Set when a baseline run produced non-finite values; the trajectory
    /// stops at the last finite state.
    std::optional<std::size_t> blew_up_at;
};

/// Called after the initial state (step 0) and after every accepted step.
using StepObserver = std::function<void(std::size_t step, const Trajectory& traj)>;

/// Steps n_steps times, auditing each step with the scheme's discrete
/// fluxes. Solver errors propagate tagged with the step index; the observer
/// has seen every step before the failing one.
Trajectory run_simulation(const ModelInstance& model, const Stepper& stepper, const GridFunction& z_init,
                          std::size_t n_steps, const StepConfig& cfg, const StepObserver& observer = {});

} // namespace eclkit
