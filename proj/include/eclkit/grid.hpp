#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace eclkit {

/// Uniform periodic 1-D grid. Point indices wrap modulo n_points().
class Grid {
public:
    Grid(std::size_t n_points, double dx);

    std::size_t n_points() const { return n_; }
    double dx() const { return dx_; }
    double length() const { return static_cast<double>(n_) * dx_; }
    double x(std::size_t i) const { return static_cast<double>(i) * dx_; }

    /// Periodic index for any signed offset.
    std::size_t wrap(std::ptrdiff_t i) const {
        const auto n = static_cast<std::ptrdiff_t>(n_);
        return static_cast<std::size_t>(((i % n) + n) % n);
    }

    bool operator==(const Grid& other) const = default;

private:
    std::size_t n_;
    double dx_;
};

/// Multi-component field sampled on a Grid, stored component-major:
/// value(c, i) lives at values()[c * N + i].
class GridFunction {
public:
    GridFunction(Grid grid, std::size_t n_components);
    GridFunction(Grid grid, std::size_t n_components, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    std::size_t n_components() const { return n_components_; }
    std::size_t n_points() const { return grid_.n_points(); }
    std::size_t size() const { return values_.size(); }

    double& operator()(std::size_t c, std::size_t i) { return values_[c * grid_.n_points() + i]; }
    double operator()(std::size_t c, std::size_t i) const { return values_[c * grid_.n_points() + i]; }

    /// Periodic access with a signed point index.
    double at(std::size_t c, std::ptrdiff_t i) const { return (*this)(c, grid_.wrap(i)); }

    std::span<double> component(std::size_t c) {
        return {values_.data() + c * grid_.n_points(), grid_.n_points()};
    }
    std::span<const double> component(std::size_t c) const {
        return {values_.data() + c * grid_.n_points(), grid_.n_points()};
    }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool all_finite() const;
    bool same_shape(const GridFunction& other) const {
        return grid_ == other.grid_ && n_components_ == other.n_components_;
    }

private:
    Grid grid_;
    std::size_t n_components_;
    std::vector<double> values_;
};

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

void require_same_shape(const GridFunction& a, const GridFunction& b, const char* where);

// Undivided differences (no 1/dx), matching the lattice identities exactly.

/// (Δf)_i = f_{i+1} - f_i
GridFunction forward_diff(const GridFunction& f);
/// (Δ⁻f)_i = f_i - f_{i-1}
GridFunction backward_diff(const GridFunction& f);
/// (D₀f)_i = (f_{i+1} - f_{i-1}) / (2 dx); skew-adjoint in Σ a_i b_i dx.
GridFunction centered_diff(const GridFunction& f);

/// Both sides of the shifted product rule Δ(a_i b_{i-1}) = b_i Δa_i + a_i Δb_{i-1}.
struct ShiftedProduct {
    GridFunction lhs;
    GridFunction rhs;
};
ShiftedProduct shifted_product_divergence(const GridFunction& a, const GridFunction& b);

/// Σ_i f_i, times dx when weighted.
double periodic_total(const GridFunction& f, bool weighted);

/// Σ_c Σ_i a(c,i) b(c,i), unweighted.
double dot(const GridFunction& a, const GridFunction& b);

double max_abs(const GridFunction& f);

} // namespace eclkit
