#include "eclkit/ecl_audit.hpp"

#include <cmath>
#include <sstream>

namespace eclkit {

namespace {

void require_pair(const ModelInstance& model, const GridFunction& z0, const GridFunction& z1, const char* where) {
    require_same_shape(z0, z1, where);
    if (!(z0.grid() == model.grid) || z0.n_components() != model.n_components()) {
        throw ShapeMismatch(std::string(where) + ": states do not match the model");
    }
}

void require_lattice_realized(const ModelInstance& model, const char* where) {
    if (model.kind != ModelKind::CanonicalPDE && model.kind != ModelKind::Lattice) {
        throw ModelError(std::string(where) + ": needs a canonical or lattice model, got " + to_string(model.kind));
    }
}

/// Row i of the slot block `slot` as a span.
std::span<const double> slot_of(const CellJets& g, std::ptrdiff_t i, std::size_t slot, std::size_t n,
                                const Grid& grid) {
    return {g.row(static_cast<Eigen::Index>(grid.wrap(i))).data() + slot * n, n};
}

GridFunction telescoped(const GridFunction& dc) {
    GridFunction F(dc.grid(), 1);
    const double dx = dc.grid().dx();
    double running = 0.0;
    for (std::size_t i = 0; i < dc.n_points(); ++i) {
        running -= dc(0, i) * dx;
        F(0, i) = running;
    }
    const double mean = periodic_total(F, false) / static_cast<double>(F.n_points());
    for (double& v : F.values()) v -= mean;
    return F;
}

} // namespace

std::string to_string(FluxShift shift) { return shift == FluxShift::Forward ? "forward" : "backward"; }

GridFunction density_change(const ModelInstance& model, const GridFunction& z0, const GridFunction& z1, double dt) {
    require_pair(model, z0, z1, "density_change");
    const auto y0 = cell_jets(model, z0);
    const auto y1 = cell_jets(model, z1);
    const auto m = static_cast<std::size_t>(y0.cols());
    GridFunction dc(z0.grid(), 1);
    for (Eigen::Index i = 0; i < y0.rows(); ++i) {
        dc(0, static_cast<std::size_t>(i)) =
            model.density.H.difference(std::span<const double>(y0.row(i).data(), m),
                                       std::span<const double>(y1.row(i).data(), m)) /
            dt;
    }
    return dc;
}

GridFunction discrete_flux_prop1(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                                 const GridFunction& z0, const GridFunction& z1) {
    require_pair(model, z0, z1, "discrete_flux_prop1");
    require_lattice_realized(model, "discrete_flux_prop1");
    GridFunction F(z0.grid(), 1);
    if (model.density.order == 0) return F;

    const std::size_t n = model.n_components();
    const double dx = z0.grid().dx();
    const auto g = discrete_cell_gradients(model, scheme, z0, z1);
    const auto& K = model.K();
    std::vector<double> grad_diff(n);
    for (std::size_t i = 0; i < F.n_points(); ++i) {
        const auto ip = static_cast<std::ptrdiff_t>(i);
        const auto a_prev = slot_of(g, ip - 1, 1, n, z0.grid());
        const auto a_here = slot_of(g, ip, 1, n, z0.grid());
        const auto g_here = slot_of(g, ip, 0, n, z0.grid());
        for (std::size_t c = 0; c < n; ++c) grad_diff[c] = (a_here[c] - a_prev[c]) / dx;
        F(0, i) = -K.form(a_prev, g_here) + K.form(a_prev, grad_diff);
    }
    return F;
}

GridFunction discrete_flux_prop3(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                                 const GridFunction& z0, const GridFunction& z1, double dt) {
    require_pair(model, z0, z1, "discrete_flux_prop3");
    if (model.kind != ModelKind::DegenerateK) {
        throw ModelError("discrete_flux_prop3: needs a degenerate-K model, got " + to_string(model.kind));
    }
    const std::size_t n = model.n_components();
    const auto g = discrete_cell_gradients(model, scheme, z0, z1);
    GridFunction f(z0.grid(), 1);
    for (std::size_t i = 0; i < f.n_points(); ++i) {
        const auto a_prev = slot_of(g, static_cast<std::ptrdiff_t>(i) - 1, 1, n, z0.grid());
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += a_prev[c] * (z1(c, i) - z0(c, i)) / dt;
        f(0, i) = -s;
    }
    return f;
}

GridFunction discrete_flux_lattice(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                                   const GridFunction& z0, const GridFunction& z1) {
    require_pair(model, z0, z1, "discrete_flux_lattice");
    require_lattice_realized(model, "discrete_flux_lattice");
    GridFunction f(z0.grid(), 1);
    if (model.density.order == 0) return f;

    const std::size_t n = model.n_components();
    const double dx = z0.grid().dx();
    const bool pure = model.density.first_active_slot >= n;
    const auto g = discrete_cell_gradients(model, scheme, z0, z1);
    const auto& K = model.K();
    std::vector<double> delta_a(n);
    for (std::size_t i = 0; i < f.n_points(); ++i) {
        const auto ip = static_cast<std::ptrdiff_t>(i);
        const auto a_prev = slot_of(g, ip - 1, 1, n, z0.grid());
        const auto a_here = slot_of(g, ip, 1, n, z0.grid());
        for (std::size_t c = 0; c < n; ++c) delta_a[c] = (a_here[c] - a_prev[c]) / dx;
        double v = K.form(a_here, delta_a);
        if (!pure) v -= K.form(a_prev, slot_of(g, ip, 0, n, z0.grid()));
        f(0, i) = v;
    }
    return f;
}

GridFunction reconstruct_flux_telescoping(const GridFunction& density_change, double tol) {
    if (density_change.n_components() != 1) throw ShapeMismatch("reconstruct_flux_telescoping: scalar field required");
    const double total = periodic_total(density_change, false);
    const double bound = static_cast<double>(density_change.n_points()) * tol;
    if (!(std::abs(total) <= bound)) {
        std::ostringstream msg;
        msg << "density change sums to " << total << " (bound " << bound << "); no periodic flux balances it";
        throw NotConservative(msg.str());
    }
    return telescoped(density_change);
}

GridFunction ecl_residual(const GridFunction& density_change, const GridFunction& flux, FluxShift shift) {
    require_same_shape(density_change, flux, "ecl_residual");
    GridFunction r(flux.grid(), 1);
    const double dx = flux.grid().dx();
    for (std::size_t i = 0; i < r.n_points(); ++i) {
        const auto ip = static_cast<std::ptrdiff_t>(i);
        const double div = shift == FluxShift::Forward ? flux.at(0, ip + 1) - flux.at(0, ip)
                                                       : flux.at(0, ip) - flux.at(0, ip - 1);
        r(0, i) = density_change(0, i) + div / dx;
    }
    return r;
}

EclReport audit_step(const ModelInstance& model, const DiscreteGradientScheme& scheme, const GridFunction& z0,
                     const GridFunction& z1, double dt) {
    require_pair(model, z0, z1, "audit_step");
    auto dc = density_change(model, z0, z1, dt);
    GridFunction flux(z0.grid(), 1);
    FluxShift shift = FluxShift::Forward;
    std::string method;
    switch (model.kind) {
    case ModelKind::CanonicalPDE:
        flux = discrete_flux_prop1(model, scheme, z0, z1);
        method = "canonical_bar_flux";
        break;
    case ModelKind::Lattice:
        flux = discrete_flux_lattice(model, scheme, z0, z1);
        method = "lattice_product_rule";
        break;
    case ModelKind::DegenerateK:
        flux = discrete_flux_prop3(model, scheme, z0, z1, dt);
        method = "degenerate_bilinear";
        break;
    case ModelKind::PoissonOperator:
        flux = telescoped(dc);
        shift = FluxShift::Backward;
        method = "telescoping";
        break;
    }
    auto residual = ecl_residual(dc, flux, shift);
    EclReport report{std::move(dc), std::move(flux), std::move(residual), shift, method, 0.0, 0.0};
    report.max_residual = max_abs(report.residual);
    report.global_drift = periodic_total(report.density_change, true);
    return report;
}

} // namespace eclkit
