#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eclkit {

/// A smooth scalar function on R^m with its exact gradient.
///
/// `increment`, when supplied, returns H(b) - H(a) computed without the
/// cancellation of subtracting two evaluations. Discrete gradients that divide
/// by ‖b - a‖ (Gonzalez, Itoh–Abe) use it to stay accurate for nearby points.
struct PointFunction {
    using Eval = std::function<double(std::span<const double>)>;
    using Grad = std::function<void(std::span<const double>, std::span<double>)>;
    using Increment = std::function<double(std::span<const double>, std::span<const double>)>;

    std::size_t dimension = 0;
    Eval eval;
    Grad grad;
    Increment increment;
    std::optional<int> poly_degree;

    std::vector<double> gradient(std::span<const double> z) const;
    double difference(std::span<const double> z0, std::span<const double> z1) const;
};

enum class DiscreteGradientKind { AverageValue, MidpointGonzalez, ItohAbe };

std::string to_string(DiscreteGradientKind kind);
DiscreteGradientKind discrete_gradient_kind_from_string(const std::string& name);

struct DiscreteGradientScheme {
    DiscreteGradientKind kind = DiscreteGradientKind::MidpointGonzalez;
    int quadrature_nodes = 2;  // AverageValue only

    static DiscreteGradientScheme average_value(int nodes);
    static DiscreteGradientScheme midpoint_gonzalez();
    static DiscreteGradientScheme itoh_abe();

    /// AverageValue with ceil((deg+1)/2) Gauss nodes for polynomial H,
    /// MidpointGonzalez otherwise.
    static DiscreteGradientScheme default_for(std::optional<int> poly_degree);

    std::string describe() const;
};

class NonFiniteInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Gauss–Legendre nodes and weights mapped to [0, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const QuadratureRule& gauss_legendre_unit(int n_nodes);

/// ∇̄H(z0, z1) written into `out` (size m). Reuses no state; safe for
/// concurrent calls.
void discrete_gradient(const PointFunction& H, std::span<const double> z0, std::span<const double> z1,
                       const DiscreteGradientScheme& scheme, std::span<double> out);

std::vector<double> discrete_gradient(const PointFunction& H, std::span<const double> z0,
                                      std::span<const double> z1, const DiscreteGradientScheme& scheme);

/// |(z1 - z0)ᵀ ∇̄H - (H(z1) - H(z0))|
double axiom_residual(const PointFunction& H, std::span<const double> z0, std::span<const double> z1,
                      const DiscreteGradientScheme& scheme);

/// ‖∇̄H(z, z) - ∇H(z)‖∞
double consistency_residual(const PointFunction& H, std::span<const double> z,
                            const DiscreteGradientScheme& scheme);

/// Largest relative discrepancy between `grad` and central differences of
/// `eval` at z; relative to 1 + |∂H|.
double gradient_self_check(const PointFunction& H, std::span<const double> z);

inline constexpr double kGradientSelfCheckTol = 1e-6;

} // namespace eclkit
