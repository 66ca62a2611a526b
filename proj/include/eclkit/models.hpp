#pragma once

#include "eclkit/dgrad.hpp"
#include "eclkit/grid.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eclkit {

/// Energy density H(z, z_x, z_xx) evaluated on the stacked cell vector
/// y = (z, w, v) with w standing for z_x and v for z_xx.
///
/// `first_active_slot` is the first stack entry H depends on. A pure lattice
/// density H(Δz) has first_active_slot = n: its discrete gradients are taken
/// over the trailing block only and the leading entries stay zero.
struct DensitySpec {
    std::size_t n_components = 0;
    int order = 0;  // highest derivative slot used, 0..2
    PointFunction H;
    std::size_t first_active_slot = 0;
    std::string description;

    std::size_t stack_size() const { return n_components * static_cast<std::size_t>(order + 1); }
    std::optional<int> poly_degree() const { return H.poly_degree; }
};

/// Constant antisymmetric matrix; the constructor rejects anything else.
class SkewMatrix {
public:
    SkewMatrix() = default;
    explicit SkewMatrix(Eigen::MatrixXd K);

    const Eigen::MatrixXd& matrix() const { return K_; }
    std::size_t size() const { return static_cast<std::size_t>(K_.rows()); }
    Eigen::Index rank() const;
    bool singular() const { return rank() < K_.rows(); }
    bool is_zero() const { return K_.isZero(0.0); }

    /// out = K in
    void apply(std::span<const double> in, std::span<double> out) const;
    /// aᵀ K b
    double form(std::span<const double> a, std::span<const double> b) const;

private:
    Eigen::MatrixXd K_;
};

/// 𝒦 = K1 + K2 ∂_x with K1 skew and K2 symmetric, realized on the grid as
/// K1 + K2 D₀.
struct SkewOperatorSpec {
    SkewMatrix K1;
    Eigen::MatrixXd K2;

    SkewOperatorSpec() = default;
    SkewOperatorSpec(SkewMatrix k1, Eigen::MatrixXd k2);

    bool has_derivative_part() const { return !K2.isZero(0.0); }
};

enum class ModelKind { CanonicalPDE, PoissonOperator, DegenerateK, Lattice };

std::string to_string(ModelKind kind);

/// How z_x and z_xx are sampled on the grid. ForwardLattice uses
/// (z_{i+1} - z_i)/dx and the three-point second difference; Centered uses D₀
/// and D₀².
enum class JetRealization { ForwardLattice, Centered };

/// Multi-Hamiltonian data K z_t + L z_x = ∇S(z).
struct MultiHamiltonianData {
    SkewMatrix L;
    PointFunction potential;
};

using ModelParams = std::map<std::string, std::string>;

struct ModelInstance {
    std::string name;
    ModelKind kind = ModelKind::CanonicalPDE;
    DensitySpec density;
    SkewOperatorSpec structure;
    std::optional<MultiHamiltonianData> multi;
    Grid grid{3, 1.0};
    JetRealization jets = JetRealization::ForwardLattice;
    ModelParams params;

    /// Fills dependent components of an initial state (e.g. the w = u_x
    /// constraint of the multisymplectic wave). May be empty.
    std::function<void(GridFunction&)> complete_initial_state;

    /// Exact flow z(t) from z(0), when known in closed form.
    std::function<GridFunction(const GridFunction&, double)> exact_flow;

    std::size_t n_components() const { return density.n_components; }
    const SkewMatrix& K() const { return structure.K1; }

    /// Points on either side that one entry of the step residual depends on.
    std::size_t stencil_radius() const;
};

class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Names accepted by builtin_model.
std::vector<std::string> builtin_model_names();

/// Potentials V(q) accepted by the wave models.
std::vector<std::string> potential_names();

/// Built-in systems: harmonic_oscillator, nonlinear_wave, sine_gordon,
/// kdv_type, multisym_wave, lattice_wave. Throws ModelError on unknown name or
/// bad parameters.
ModelInstance builtin_model(const std::string& name, const Grid& grid, const ModelParams& params = {});

/// The bare density of a built-in model, for self checks that need no grid.
DensitySpec builtin_density(const std::string& name, const ModelParams& params = {});

/// Validates the kind-specific shape constraints; throws ModelError.
void validate_model(const ModelInstance& model);

// ---- cell jets and the grid Hamiltonian ----

/// Row i holds the stacked vector (z_i, w_i, v_i) of cell i; size N × m.
using CellJets = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

CellJets cell_jets(const ModelInstance& model, const GridFunction& state);
CellJets cell_jets(const DensitySpec& density, JetRealization jets, const GridFunction& state);

/// h_i = H(y_i)
GridFunction density_field(const ModelInstance& model, const GridFunction& state);

/// ℋ_d = Σ_i H(y_i) dx
double discrete_hamiltonian(const ModelInstance& model, const GridFunction& state);

/// Transposes of the jet maps, applied to a per-cell slot block and summed:
/// Σ_k J_kᵀ g_k. `per_cell` has the CellJets layout.
GridFunction jet_adjoint(const ModelInstance& model, const CellJets& per_cell);

/// Variational derivative of ℋ_d divided by dx: H_z + J₁ᵀ H_{z_x} + J₂ᵀ H_{z_xx}
/// with the model's jet realization. With Centered jets this is the Euler
/// operator with every ∂_x replaced by D₀; with ForwardLattice jets it is the
/// lattice-compatible version used by the integrator.
GridFunction euler_operator(const ModelInstance& model, const GridFunction& state);

/// Per-cell discrete gradients ∇̄H(y⁰_i, y¹_i), CellJets layout.
CellJets discrete_cell_gradients(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                                 const GridFunction& z0, const GridFunction& z1);

/// Discrete Euler operator: the per-cell discrete gradients pushed through
/// jet_adjoint.
GridFunction discrete_euler_operator(const ModelInstance& model, const CellJets& cell_gradients);

/// 𝒦_d E = K1 E + K2 D₀ E
GridFunction apply_structure(const ModelInstance& model, const GridFunction& E);

/// The semidiscrete vector field 𝒦_d E(z). Not defined for DegenerateK.
GridFunction semidiscrete_rhs(const ModelInstance& model, const GridFunction& state);

// ---- continuous ECL ingredients (∂_x realized by D₀) ----

/// S(a, b)_i = a_iᵀ K2 b_i
GridFunction bilinear_S(const SkewOperatorSpec& op, const GridFunction& a, const GridFunction& b);

/// Truncated A(Q, H): Q·H_{z_x} + (∂_x Q)·H_{z_xx} - Q·∂_x H_{z_xx}.
GridFunction flux_form_A(const GridFunction& Q, const ModelInstance& model, const GridFunction& state);

/// F = -H_{z_x}ᵀ K H_z + H_{z_x}ᵀ K ∂_x H_{z_x}, for H_t + F_x = 0.
GridFunction continuous_flux_prop1(const ModelInstance& model, const GridFunction& state);

/// F = -½ S(E, E) - A(𝒦E, H), for H_t + F_x = 0.
GridFunction continuous_flux_prop2(const ModelInstance& model, const GridFunction& state);

/// ∂_t H at each point along the flow z_t = 𝒦 E(H), evaluated with D₀ jets:
/// H_z·z_t + H_{z_x}·∂_x z_t + H_{z_xx}·∂_x² z_t.
GridFunction continuous_density_rate(const ModelInstance& model, const GridFunction& state,
                                     const GridFunction& z_t);

/// Potential S(z) of a multi-Hamiltonian model applied pointwise.
GridFunction potential_S(const ModelInstance& model, const GridFunction& state);

} // namespace eclkit
