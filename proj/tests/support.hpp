#pragma once

#include "eclkit/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace eclkit::testing {

inline double max_diff(const GridFunction& a, const GridFunction& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    return m;
}

inline double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

/// Gaussian bump exp(-(x-L/2)²/width²) in component `c`, dependent parts filled.
inline GridFunction bump_state(const ModelInstance& m, double width = 1.0, std::size_t c = 0, double amp = 1.0) {
    GridFunction z(m.grid, m.n_components());
    const double L = m.grid.length();
    for (std::size_t i = 0; i < m.grid.n_points(); ++i) {
        const double d = m.grid.x(i) - 0.5 * L;
        z(c, i) = amp * std::exp(-d * d / (width * width));
    }
    if (m.complete_initial_state) m.complete_initial_state(z);
    return z;
}

inline GridFunction random_state(const ModelInstance& m, std::mt19937_64& rng, double scale = 0.5) {
    std::uniform_real_distribution<double> u(-scale, scale);
    GridFunction z(m.grid, m.n_components());
    for (double& v : z.values()) v = u(rng);
    if (m.complete_initial_state) m.complete_initial_state(z);
    return z;
}

inline GridFunction from_values(const Grid& g, std::size_t n, std::vector<double> v) {
    return GridFunction(g, n, std::move(v));
}

} // namespace eclkit::testing
