#pragma once

#include "eclkit/models.hpp"

#include <stdexcept>
#include <string>

namespace eclkit {

/// Where a flux field sits relative to the density it balances.
///   Forward:  residual_i = Δ_t h_i + (f_{i+1} - f_i)/dx
///   Backward: residual_i = Δ_t h_i + (f_i - f_{i-1})/dx
enum class FluxShift { Forward, Backward };

std::string to_string(FluxShift shift);

/// Audit of one time step: local energy balance and its global consequence.
struct EclReport {
    GridFunction density_change;  // (h¹_i - h⁰_i)/Δt
    GridFunction flux;
    GridFunction residual;
    FluxShift shift = FluxShift::Forward;
    std::string flux_method;
    double max_residual = 0.0;
    double global_drift = 0.0;  // Σ_i density_change_i dx
};

class NotConservative : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (H(y¹_i) - H(y⁰_i))/Δt with the integrator's cell jets.
GridFunction density_change(const ModelInstance& model, const GridFunction& z0, const GridFunction& z1, double dt);

/// F̄_i = -ā_{i-1}ᵀ K ḡ_i + ā_{i-1}ᵀ K (ā_i - ā_{i-1})/dx with ā the z_x-slot
/// and ḡ the z-slot discrete gradients. The z_x jet of cell i-1 straddles
/// points i-1 and i, so the flux reads with FluxShift::Forward.
GridFunction discrete_flux_prop1(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                                 const GridFunction& z0, const GridFunction& z1);

/// f_i = -ā_{i-1}ᵀ (z1 - z0)_i / Δt for K (z1 - z0)/Δt = Ē; FluxShift::Forward.
GridFunction discrete_flux_prop3(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                                 const GridFunction& z0, const GridFunction& z1, double dt);

/// Lattice flux with discrete gradients substituted into the discrete product
/// rule: f_i = ā_iᵀ K (Δā)_{i-1}/dx, minus ā_{i-1}ᵀ K ḡ_i when H depends on z.
/// FluxShift::Forward.
GridFunction discrete_flux_lattice(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                                   const GridFunction& z0, const GridFunction& z1);

/// Flux with (F_i - F_{i-1})/dx = -density_change_i, mean zero.
/// Throws NotConservative if |Σ density_change| > N·tol.
GridFunction reconstruct_flux_telescoping(const GridFunction& density_change, double tol);

/// Residual field for a density change and flux with the given shift.
GridFunction ecl_residual(const GridFunction& density_change, const GridFunction& flux, FluxShift shift);

/// Picks the flux for the model kind (telescoping for Poisson operators) and
/// fills the report. Large residuals are reported, never thrown.
EclReport audit_step(const ModelInstance& model, const DiscreteGradientScheme& scheme, const GridFunction& z0,
                     const GridFunction& z1, double dt);

} // namespace eclkit
