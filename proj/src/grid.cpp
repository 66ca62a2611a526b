#include "eclkit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace eclkit {

Grid::Grid(std::size_t n_points, double dx) : n_(n_points), dx_(dx) {
    if (n_points < 3) {
        throw std::invalid_argument("Grid: need at least 3 points, got " + std::to_string(n_points));
    }
    if (!(dx > 0.0) || !std::isfinite(dx)) {
        throw std::invalid_argument("Grid: dx must be positive and finite");
    }
}

GridFunction::GridFunction(Grid grid, std::size_t n_components)
    : grid_(grid), n_components_(n_components), values_(n_components * grid.n_points(), 0.0) {
    if (n_components == 0) throw std::invalid_argument("GridFunction: zero components");
}

GridFunction::GridFunction(Grid grid, std::size_t n_components, std::vector<double> values)
    : grid_(grid), n_components_(n_components), values_(std::move(values)) {
    if (n_components == 0) throw std::invalid_argument("GridFunction: zero components");
    if (values_.size() != n_components * grid.n_points()) {
        throw ShapeMismatch("GridFunction: expected " + std::to_string(n_components * grid.n_points()) +
                            " values, got " + std::to_string(values_.size()));
    }
}

bool GridFunction::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const GridFunction& a, const GridFunction& b, const char* where) {
    if (!a.same_shape(b)) throw ShapeMismatch(std::string(where) + ": shape mismatch");
}

namespace {

template <class Stencil>
GridFunction apply_stencil(const GridFunction& f, Stencil stencil) {
    GridFunction out(f.grid(), f.n_components());
    const auto n = static_cast<std::ptrdiff_t>(f.n_points());
    for (std::size_t c = 0; c < f.n_components(); ++c) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            out(c, static_cast<std::size_t>(i)) = stencil(f, c, i);
        }
    }
    return out;
}

} // namespace

GridFunction forward_diff(const GridFunction& f) {
    return apply_stencil(f, [](const GridFunction& g, std::size_t c, std::ptrdiff_t i) {
        return g.at(c, i + 1) - g.at(c, i);
    });
}

GridFunction backward_diff(const GridFunction& f) {
    return apply_stencil(f, [](const GridFunction& g, std::size_t c, std::ptrdiff_t i) {
        return g.at(c, i) - g.at(c, i - 1);
    });
}

GridFunction centered_diff(const GridFunction& f) {
    const double inv2dx = 0.5 / f.grid().dx();
    return apply_stencil(f, [inv2dx](const GridFunction& g, std::size_t c, std::ptrdiff_t i) {
        return (g.at(c, i + 1) - g.at(c, i - 1)) * inv2dx;
    });
}

ShiftedProduct shifted_product_divergence(const GridFunction& a, const GridFunction& b) {
    require_same_shape(a, b, "shifted_product_divergence");
    if (a.n_components() != 1) throw ShapeMismatch("shifted_product_divergence: scalar fields required");

    GridFunction lhs(a.grid(), 1);
    GridFunction rhs(a.grid(), 1);
    const auto n = static_cast<std::ptrdiff_t>(a.n_points());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        // Δ(a_i b_{i-1}) = a_{i+1} b_i - a_i b_{i-1}
        lhs(0, k) = a.at(0, i + 1) * b.at(0, i) - a.at(0, i) * b.at(0, i - 1);
        rhs(0, k) = b.at(0, i) * (a.at(0, i + 1) - a.at(0, i)) + a.at(0, i) * (b.at(0, i) - b.at(0, i - 1));
    }
    return {std::move(lhs), std::move(rhs)};
}

double periodic_total(const GridFunction& f, bool weighted) {
    if (f.n_components() != 1) throw ShapeMismatch("periodic_total: scalar field required");
    double sum = 0.0;
    for (double v : f.values()) sum += v;
    return weighted ? sum * f.grid().dx() : sum;
}

double dot(const GridFunction& a, const GridFunction& b) {
    require_same_shape(a, b, "dot");
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += a.values()[k] * b.values()[k];
    return sum;
}

double max_abs(const GridFunction& f) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

} // namespace eclkit
