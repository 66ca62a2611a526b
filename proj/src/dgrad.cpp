#include "eclkit/dgrad.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eclkit {

namespace {

constexpr int kMaxQuadratureNodes = 32;
constexpr double kCoincidentTol = 1e-14;

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NonFiniteInput(std::string("discrete_gradient: non-finite ") + what);
    }
}

QuadratureRule compute_gauss_legendre(int n) {
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        // Newton on P_n from the Chebyshev-like initial guess.
        double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) break;
        }
        // Recompute derivative at the converged node for the weight.
        double p0 = 1.0;
        double p1 = x;
        for (int j = 2; j <= n; ++j) {
            const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(k)] = 0.5 * (1.0 - x);
        rule.weights[static_cast<std::size_t>(k)] = 0.5 * w;
    }
    return rule;
}

void average_value(const PointFunction& H, std::span<const double> z0, std::span<const double> z1, int nodes,
                   std::span<double> out) {
    const auto& rule = gauss_legendre_unit(nodes);
    const std::size_t m = z0.size();
    std::vector<double> point(m);
    std::vector<double> g(m);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double xi = rule.nodes[q];
        for (std::size_t k = 0; k < m; ++k) point[k] = (1.0 - xi) * z0[k] + xi * z1[k];
        H.grad(point, g);
        for (std::size_t k = 0; k < m; ++k) out[k] += rule.weights[q] * g[k];
    }
}

void midpoint_gonzalez(const PointFunction& H, std::span<const double> z0, std::span<const double> z1,
                       std::span<double> out) {
    const std::size_t m = z0.size();
    std::vector<double> mid(m);
    std::vector<double> delta(m);
    for (std::size_t k = 0; k < m; ++k) {
        mid[k] = 0.5 * (z0[k] + z1[k]);
        delta[k] = z1[k] - z0[k];
    }
    H.grad(mid, out);
    const double dnorm = norm2(delta);
    if (dnorm < kCoincidentTol * (1.0 + norm2(z0))) return;

    double predicted = 0.0;
    for (std::size_t k = 0; k < m; ++k) predicted += out[k] * delta[k];
    const double scale = (H.difference(z0, z1) - predicted) / (dnorm * dnorm);
    for (std::size_t k = 0; k < m; ++k) out[k] += scale * delta[k];
}

void itoh_abe(const PointFunction& H, std::span<const double> z0, std::span<const double> z1,
              std::span<double> out) {
    const std::size_t m = z0.size();
    std::vector<double> before(z0.begin(), z0.end());
    std::vector<double> after(before);
    std::vector<double> g(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double dk = z1[k] - z0[k];
        if (std::abs(dk) <= kCoincidentTol * (1.0 + std::abs(z0[k]))) {
            std::vector<double> mid(before);
            mid[k] = 0.5 * (z0[k] + z1[k]);
            H.grad(mid, g);
            out[k] = g[k];
        } else {
            after[k] = z1[k];
            out[k] = H.difference(before, after) / dk;
        }
        after[k] = z1[k];
        before[k] = z1[k];
    }
}

} // namespace

std::vector<double> PointFunction::gradient(std::span<const double> z) const {
    std::vector<double> g(dimension);
    grad(z, g);
    return g;
}

double PointFunction::difference(std::span<const double> z0, std::span<const double> z1) const {
    if (increment) return increment(z0, z1);
    return eval(z1) - eval(z0);
}

std::string to_string(DiscreteGradientKind kind) {
    switch (kind) {
    case DiscreteGradientKind::AverageValue: return "average_value";
    case DiscreteGradientKind::MidpointGonzalez: return "midpoint_gonzalez";
    case DiscreteGradientKind::ItohAbe: return "itoh_abe";
    }
    return "unknown";
}

DiscreteGradientKind discrete_gradient_kind_from_string(const std::string& name) {
    if (name == "average_value" || name == "avf") return DiscreteGradientKind::AverageValue;
    if (name == "midpoint_gonzalez" || name == "gonzalez") return DiscreteGradientKind::MidpointGonzalez;
    if (name == "itoh_abe") return DiscreteGradientKind::ItohAbe;
    throw std::invalid_argument("unknown discrete gradient scheme '" + name + "'");
}

DiscreteGradientScheme DiscreteGradientScheme::average_value(int nodes) {
    if (nodes < 1 || nodes > kMaxQuadratureNodes) {
        throw std::invalid_argument("AverageValue: quadrature nodes must be in [1, 32]");
    }
    return {DiscreteGradientKind::AverageValue, nodes};
}

DiscreteGradientScheme DiscreteGradientScheme::midpoint_gonzalez() {
    return {DiscreteGradientKind::MidpointGonzalez, 0};
}

DiscreteGradientScheme DiscreteGradientScheme::itoh_abe() { return {DiscreteGradientKind::ItohAbe, 0}; }

DiscreteGradientScheme DiscreteGradientScheme::default_for(std::optional<int> poly_degree) {
    if (poly_degree) return average_value(std::max(1, (*poly_degree + 2) / 2));
    return midpoint_gonzalez();
}

std::string DiscreteGradientScheme::describe() const {
    if (kind == DiscreteGradientKind::AverageValue) {
        return to_string(kind) + "(" + std::to_string(quadrature_nodes) + ")";
    }
    return to_string(kind);
}

const QuadratureRule& gauss_legendre_unit(int n_nodes) {
    static const std::vector<QuadratureRule> table = [] {
        std::vector<QuadratureRule> t;
        for (int n = 1; n <= kMaxQuadratureNodes; ++n) t.push_back(compute_gauss_legendre(n));
        return t;
    }();
    if (n_nodes < 1 || n_nodes > kMaxQuadratureNodes) {
        throw std::invalid_argument("gauss_legendre_unit: node count out of range");
    }
    return table[static_cast<std::size_t>(n_nodes - 1)];
}

void discrete_gradient(const PointFunction& H, std::span<const double> z0, std::span<const double> z1,
                       const DiscreteGradientScheme& scheme, std::span<double> out) {
    if (z0.size() != H.dimension || z1.size() != H.dimension || out.size() != H.dimension) {
        throw std::invalid_argument("discrete_gradient: dimension mismatch");
    }
    require_finite(z0, "z0");
    require_finite(z1, "z1");
    switch (scheme.kind) {
    case DiscreteGradientKind::AverageValue: average_value(H, z0, z1, scheme.quadrature_nodes, out); break;
    case DiscreteGradientKind::MidpointGonzalez: midpoint_gonzalez(H, z0, z1, out); break;
    case DiscreteGradientKind::ItohAbe: itoh_abe(H, z0, z1, out); break;
    }
}

std::vector<double> discrete_gradient(const PointFunction& H, std::span<const double> z0,
                                      std::span<const double> z1, const DiscreteGradientScheme& scheme) {
    std::vector<double> out(H.dimension);
    discrete_gradient(H, z0, z1, scheme, out);
    return out;
}

double axiom_residual(const PointFunction& H, std::span<const double> z0, std::span<const double> z1,
                      const DiscreteGradientScheme& scheme) {
    const auto g = discrete_gradient(H, z0, z1, scheme);
    double lhs = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) lhs += (z1[k] - z0[k]) * g[k];
    return std::abs(lhs - (H.eval(z1) - H.eval(z0)));
}

double consistency_residual(const PointFunction& H, std::span<const double> z,
                            const DiscreteGradientScheme& scheme) {
    const auto g = discrete_gradient(H, z, z, scheme);
    const auto exact = H.gradient(z);
    double r = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) r = std::max(r, std::abs(g[k] - exact[k]));
    return r;
}

double gradient_self_check(const PointFunction& H, std::span<const double> z) {
    const auto g = H.gradient(z);
    std::vector<double> p(z.begin(), z.end());
    double worst = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double h = 1e-5 * (1.0 + std::abs(z[k]));
        p[k] = z[k] + h;
        const double fp = H.eval(p);
        p[k] = z[k] - h;
        const double fm = H.eval(p);
        p[k] = z[k];
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g[k]) / (1.0 + std::abs(g[k])));
    }
    return worst;
}

} // namespace eclkit
