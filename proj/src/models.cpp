#include "eclkit/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace eclkit {

namespace {

// ---- separable polynomial / trigonometric densities ----

enum class Shape { HalfSquare, QuarterFourth, Cube, OneMinusCos };

struct Univariate {
    std::size_t slot;
    Shape shape;
    double coeff;
};

struct Bilinear {
    std::size_t i;
    std::size_t j;
    double coeff;
};

double shape_value(Shape s, double x) {
    switch (s) {
    case Shape::HalfSquare: return 0.5 * x * x;
    case Shape::QuarterFourth: return 0.25 * x * x * x * x;
    case Shape::Cube: return x * x * x;
    case Shape::OneMinusCos: {
        const double h = std::sin(0.5 * x);
        return 2.0 * h * h;
    }
    }
    return 0.0;
}

double shape_derivative(Shape s, double x) {
    switch (s) {
    case Shape::HalfSquare: return x;
    case Shape::QuarterFourth: return x * x * x;
    case Shape::Cube: return 3.0 * x * x;
    case Shape::OneMinusCos: return std::sin(x);
    }
    return 0.0;
}

// f(b) - f(a) in factored form.
double shape_increment(Shape s, double a, double b) {
    const double d = b - a;
    switch (s) {
    case Shape::HalfSquare: return 0.5 * d * (a + b);
    case Shape::QuarterFourth: return 0.25 * d * (a + b) * (a * a + b * b);
    case Shape::Cube: return d * (a * a + a * b + b * b);
    case Shape::OneMinusCos: return 2.0 * std::sin(0.5 * (a + b)) * std::sin(0.5 * d);
    }
    return 0.0;
}

std::optional<int> shape_degree(Shape s) {
    switch (s) {
    case Shape::HalfSquare: return 2;
    case Shape::QuarterFourth: return 4;
    case Shape::Cube: return 3;
    case Shape::OneMinusCos: return std::nullopt;
    }
    return std::nullopt;
}

PointFunction make_separable(std::size_t dim, std::vector<Univariate> terms, std::vector<Bilinear> pairs) {
    std::optional<int> degree = 0;
    for (const auto& t : terms) {
        const auto d = shape_degree(t.shape);
        degree = (degree && d) ? std::optional<int>(std::max(*degree, *d)) : std::nullopt;
    }
    if (!pairs.empty() && degree) degree = std::max(*degree, 2);

    PointFunction f;
    f.dimension = dim;
    f.poly_degree = degree;
    f.eval = [terms, pairs](std::span<const double> y) {
        double s = 0.0;
        for (const auto& t : terms) s += t.coeff * shape_value(t.shape, y[t.slot]);
        for (const auto& p : pairs) s += p.coeff * y[p.i] * y[p.j];
        return s;
    };
    f.grad = [terms, pairs](std::span<const double> y, std::span<double> g) {
        std::fill(g.begin(), g.end(), 0.0);
        for (const auto& t : terms) g[t.slot] += t.coeff * shape_derivative(t.shape, y[t.slot]);
        for (const auto& p : pairs) {
            g[p.i] += p.coeff * y[p.j];
            g[p.j] += p.coeff * y[p.i];
        }
    };
    f.increment = [terms, pairs](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (const auto& t : terms) s += t.coeff * shape_increment(t.shape, a[t.slot], b[t.slot]);
        for (const auto& p : pairs) {
            // b_i b_j - a_i a_j = ½(b_i - a_i)(b_j + a_j) + ½(b_i + a_i)(b_j - a_j)
            s += p.coeff * 0.5 *
                 ((b[p.i] - a[p.i]) * (b[p.j] + a[p.j]) + (b[p.i] + a[p.i]) * (b[p.j] - a[p.j]));
        }
        return s;
    };
    return f;
}

Shape potential_shape(const std::string& name) {
    if (name == "harmonic") return Shape::HalfSquare;
    if (name == "quartic") return Shape::QuarterFourth;
    if (name == "pendulum") return Shape::OneMinusCos;
    throw ModelError("unknown potential '" + name + "' (expected harmonic, quartic or pendulum)");
}

// ---- parameter handling ----

class ParamReader {
public:
    ParamReader(const std::string& model, const ModelParams& params, std::set<std::string> allowed)
        : model_(model), params_(params) {
        for (const auto& [key, value] : params) {
            if (!allowed.count(key)) throw ModelError(model + ": unknown parameter '" + key + "'");
        }
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        auto it = params_.find(key);
        return it == params_.end() ? fallback : it->second;
    }

    double number(const std::string& key, double fallback) const {
        auto it = params_.find(key);
        if (it == params_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ModelError(model_ + ": parameter '" + key + "' is not a finite number: '" + it->second + "'");
        }
    }

private:
    std::string model_;
    const ModelParams& params_;
};

Eigen::MatrixXd canonical_J() {
    Eigen::MatrixXd J(2, 2);
    J << 0.0, 1.0, -1.0, 0.0;
    return J;
}

SkewOperatorSpec constant_structure(const Eigen::MatrixXd& K) {
    return SkewOperatorSpec(SkewMatrix(K), Eigen::MatrixXd::Zero(K.rows(), K.cols()));
}

DensitySpec nonlinear_wave_density(const std::string& potential) {
    // y = (q, p, q_x, p_x)
    DensitySpec d;
    d.n_components = 2;
    d.order = 1;
    d.H = make_separable(4,
                         {{1, Shape::HalfSquare, 1.0}, {2, Shape::HalfSquare, 1.0}, {0, potential_shape(potential), 1.0}},
                         {});
    d.description = "H = 1/2 p^2 + 1/2 q_x^2 + V(q), V = " + potential;
    return d;
}

DensitySpec multisym_density(const std::string& potential) {
    // y = (u, v, w, u_x, v_x, w_x); H = S(z) - ½ zᵀ L z_x with zᵀ L z_x = u w_x - w u_x
    DensitySpec d;
    d.n_components = 3;
    d.order = 1;
    d.H = make_separable(
        6, {{1, Shape::HalfSquare, 1.0}, {2, Shape::HalfSquare, -1.0}, {0, potential_shape(potential), 1.0}},
        {{0, 5, -0.5}, {2, 3, 0.5}});
    d.description = "H = 1/2 v^2 - 1/2 w^2 + V(u) - 1/2 (u w_x - w u_x), V = " + potential;
    return d;
}

PointFunction multisym_potential(const std::string& potential) {
    return make_separable(
        3, {{1, Shape::HalfSquare, 1.0}, {2, Shape::HalfSquare, -1.0}, {0, potential_shape(potential), 1.0}}, {});
}

DensitySpec kdv_density(double alpha, double beta, double gamma) {
    DensitySpec d;
    d.n_components = 1;
    d.order = gamma != 0.0 ? 2 : 1;
    std::vector<Univariate> terms{{0, Shape::Cube, alpha}, {1, Shape::HalfSquare, beta}};
    if (gamma != 0.0) terms.push_back({2, Shape::HalfSquare, gamma});
    d.H = make_separable(d.stack_size(), terms, {});
    d.description = "H = alpha z^3 + 1/2 beta z_x^2" + std::string(gamma != 0.0 ? " + 1/2 gamma z_xx^2" : "");
    return d;
}

DensitySpec lattice_density(const std::string& form, const std::string& onsite, double fpu_beta) {
    // y = (q, p, Δq/dx, Δp/dx)
    DensitySpec d;
    d.n_components = 2;
    d.order = 1;
    std::vector<Univariate> terms{{2, Shape::HalfSquare, 1.0}};
    if (fpu_beta != 0.0) terms.push_back({2, Shape::QuarterFourth, fpu_beta});
    if (form == "chain") {
        terms.push_back({1, Shape::HalfSquare, 1.0});
        if (onsite != "none") terms.push_back({0, potential_shape(onsite), 1.0});
        d.description = "H = 1/2 p^2 + Phi(dq) + V(q), V = " + onsite;
    } else if (form == "pure") {
        if (onsite != "none") throw ModelError("lattice_wave: form=pure takes no onsite potential");
        terms.push_back({3, Shape::HalfSquare, 1.0});
        d.first_active_slot = 2;
        d.description = "H = Phi(dq) + 1/2 dp^2";
    } else {
        throw ModelError("lattice_wave: unknown form '" + form + "' (expected chain or pure)");
    }
    d.H = make_separable(4, terms, {});
    return d;
}

DensitySpec oscillator_density() {
    DensitySpec d;
    d.n_components = 2;
    d.order = 0;
    d.H = make_separable(2, {{0, Shape::HalfSquare, 1.0}, {1, Shape::HalfSquare, 1.0}}, {});
    d.description = "H = 1/2 (q^2 + p^2)";
    return d;
}

// ---- jets ----

double jet_value(JetRealization jets, int slot, const GridFunction& z, std::size_t c, std::ptrdiff_t i) {
    const double dx = z.grid().dx();
    if (slot == 0) return z.at(c, i);
    if (jets == JetRealization::ForwardLattice) {
        if (slot == 1) return (z.at(c, i + 1) - z.at(c, i)) / dx;
        return (z.at(c, i + 1) - 2.0 * z.at(c, i) + z.at(c, i - 1)) / (dx * dx);
    }
    if (slot == 1) return (z.at(c, i + 1) - z.at(c, i - 1)) / (2.0 * dx);
    return (z.at(c, i + 2) - 2.0 * z.at(c, i) + z.at(c, i - 2)) / (4.0 * dx * dx);
}

// Σ_k J_kᵀ applied to slot blocks of `per_cell` (N × (order+1)n).
GridFunction adjoint_of_jets(const Grid& grid, std::size_t n, int order, JetRealization jets,
                             const CellJets& per_cell) {
    GridFunction out(grid, n);
    const auto N = static_cast<std::ptrdiff_t>(grid.n_points());
    const double dx = grid.dx();
    auto g = [&](std::ptrdiff_t i, std::size_t col) { return per_cell(static_cast<Eigen::Index>(grid.wrap(i)), static_cast<Eigen::Index>(col)); };
    for (std::size_t c = 0; c < n; ++c) {
        for (std::ptrdiff_t i = 0; i < N; ++i) {
            double e = g(i, c);
            if (order >= 1) {
                const std::size_t a = n + c;
                if (jets == JetRealization::ForwardLattice) {
                    e -= (g(i, a) - g(i - 1, a)) / dx;
                } else {
                    e -= (g(i + 1, a) - g(i - 1, a)) / (2.0 * dx);
                }
            }
            if (order >= 2) {
                const std::size_t b = 2 * n + c;
                if (jets == JetRealization::ForwardLattice) {
                    e += (g(i + 1, b) - 2.0 * g(i, b) + g(i - 1, b)) / (dx * dx);
                } else {
                    e += (g(i + 2, b) - 2.0 * g(i, b) + g(i - 2, b)) / (4.0 * dx * dx);
                }
            }
            out(c, static_cast<std::size_t>(i)) = e;
        }
    }
    return out;
}

CellJets cell_gradients_exact(const DensitySpec& density, const CellJets& jets) {
    CellJets g(jets.rows(), jets.cols());
    for (Eigen::Index i = 0; i < jets.rows(); ++i) {
        density.H.grad(std::span<const double>(jets.row(i).data(), static_cast<std::size_t>(jets.cols())),
                       std::span<double>(g.row(i).data(), static_cast<std::size_t>(g.cols())));
    }
    return g;
}

GridFunction centered_euler_operator(const ModelInstance& model, const GridFunction& state) {
    const auto jets = cell_jets(model.density, JetRealization::Centered, state);
    return adjoint_of_jets(state.grid(), model.n_components(), model.density.order, JetRealization::Centered,
                           cell_gradients_exact(model.density, jets));
}

GridFunction apply_operator(const SkewOperatorSpec& op, const GridFunction& E) {
    const std::size_t n = E.n_components();
    GridFunction out(E.grid(), n);
    const auto& K1 = op.K1.matrix();
    const bool derivative = op.has_derivative_part();
    const GridFunction dE = derivative ? centered_diff(E) : GridFunction(E.grid(), n);
    for (std::size_t i = 0; i < E.n_points(); ++i) {
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                s += K1(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * E(c, i);
                if (derivative) s += op.K2(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * dE(c, i);
            }
            out(r, i) = s;
        }
    }
    return out;
}

GridFunction slot_field(const CellJets& per_cell, const Grid& grid, std::size_t n, std::size_t slot) {
    GridFunction f(grid, n);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t i = 0; i < grid.n_points(); ++i) {
            f(c, i) = per_cell(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(slot * n + c));
        }
    }
    return f;
}

GridFunction pointwise_dot(const GridFunction& a, const GridFunction& b) {
    require_same_shape(a, b, "pointwise_dot");
    GridFunction out(a.grid(), 1);
    for (std::size_t i = 0; i < a.n_points(); ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.n_components(); ++c) s += a(c, i) * b(c, i);
        out(0, i) = s;
    }
    return out;
}

void require_state(const ModelInstance& model, const GridFunction& state, const char* where) {
    if (!(state.grid() == model.grid) || state.n_components() != model.n_components()) {
        throw ShapeMismatch(std::string(where) + ": state does not match the model grid/components");
    }
}

} // namespace

// ---- SkewMatrix / SkewOperatorSpec ----

SkewMatrix::SkewMatrix(Eigen::MatrixXd K) : K_(std::move(K)) {
    if (K_.rows() != K_.cols() || K_.rows() == 0) throw ModelError("SkewMatrix: must be square and non-empty");
    for (Eigen::Index r = 0; r < K_.rows(); ++r) {
        for (Eigen::Index c = 0; c < K_.cols(); ++c) {
            if (K_(r, c) != -K_(c, r)) throw ModelError("SkewMatrix: matrix is not antisymmetric");
        }
    }
}

Eigen::Index SkewMatrix::rank() const {
    if (K_.size() == 0) return 0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K_);
    return lu.rank();
}

void SkewMatrix::apply(std::span<const double> in, std::span<double> out) const {
    const auto n = K_.rows();
    for (Eigen::Index r = 0; r < n; ++r) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < n; ++c) s += K_(r, c) * in[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = s;
    }
}

double SkewMatrix::form(std::span<const double> a, std::span<const double> b) const {
    const auto n = K_.rows();
    double s = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            s += a[static_cast<std::size_t>(r)] * K_(r, c) * b[static_cast<std::size_t>(c)];
        }
    }
    return s;
}

SkewOperatorSpec::SkewOperatorSpec(SkewMatrix k1, Eigen::MatrixXd k2) : K1(std::move(k1)), K2(std::move(k2)) {
    if (K2.rows() != static_cast<Eigen::Index>(K1.size()) || K2.cols() != K2.rows()) {
        throw ModelError("SkewOperatorSpec: K2 shape does not match K1");
    }
    if (!(K2 - K2.transpose()).isZero(0.0)) throw ModelError("SkewOperatorSpec: K2 must be symmetric");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::CanonicalPDE: return "canonical_pde";
    case ModelKind::PoissonOperator: return "poisson_operator";
    case ModelKind::DegenerateK: return "degenerate_k";
    case ModelKind::Lattice: return "lattice";
    }
    return "unknown";
}

std::size_t ModelInstance::stencil_radius() const {
    std::size_t r = 0;
    if (density.order >= 1) r = jets == JetRealization::ForwardLattice ? 1 : 2;
    if (density.order >= 2) r = jets == JetRealization::ForwardLattice ? 2 : 4;
    if (structure.has_derivative_part()) r += 1;
    return r;
}

// ---- catalog ----

std::vector<std::string> builtin_model_names() {
    return {"harmonic_oscillator", "nonlinear_wave", "sine_gordon", "kdv_type", "multisym_wave", "lattice_wave"};
}

std::vector<std::string> potential_names() { return {"harmonic", "quartic", "pendulum"}; }

DensitySpec builtin_density(const std::string& name, const ModelParams& params) {
    if (name == "harmonic_oscillator") {
        ParamReader p(name, params, {});
        return oscillator_density();
    }
    if (name == "nonlinear_wave") {
        ParamReader p(name, params, {"potential"});
        return nonlinear_wave_density(p.text("potential", "harmonic"));
    }
    if (name == "sine_gordon") {
        ParamReader p(name, params, {"potential"});
        if (p.text("potential", "pendulum") != "pendulum") {
            throw ModelError("sine_gordon: potential is fixed to pendulum (1 - cos q)");
        }
        return nonlinear_wave_density("pendulum");
    }
    if (name == "kdv_type") {
        ParamReader p(name, params, {"alpha", "beta", "gamma"});
        return kdv_density(p.number("alpha", 1.0), p.number("beta", 1.0), p.number("gamma", 0.0));
    }
    if (name == "multisym_wave") {
        ParamReader p(name, params, {"potential"});
        return multisym_density(p.text("potential", "harmonic"));
    }
    if (name == "lattice_wave") {
        ParamReader p(name, params, {"form", "onsite", "fpu_beta"});
        return lattice_density(p.text("form", "chain"), p.text("onsite", "none"), p.number("fpu_beta", 0.0));
    }
    throw ModelError("unknown model '" + name + "'");
}

ModelInstance builtin_model(const std::string& name, const Grid& grid, const ModelParams& params) {
    ModelInstance m;
    m.name = name;
    m.grid = grid;
    m.params = params;
    m.density = builtin_density(name, params);

    if (name == "harmonic_oscillator") {
        m.kind = ModelKind::CanonicalPDE;
        m.structure = constant_structure(canonical_J());
        m.exact_flow = [](const GridFunction& z0, double t) {
            GridFunction z(z0.grid(), 2);
            const double c = std::cos(t);
            const double s = std::sin(t);
            for (std::size_t i = 0; i < z0.n_points(); ++i) {
                z(0, i) = c * z0(0, i) + s * z0(1, i);
                z(1, i) = -s * z0(0, i) + c * z0(1, i);
            }
            return z;
        };
    } else if (name == "nonlinear_wave" || name == "sine_gordon") {
        m.kind = ModelKind::CanonicalPDE;
        m.structure = constant_structure(canonical_J());
    } else if (name == "kdv_type") {
        m.kind = ModelKind::PoissonOperator;
        m.jets = JetRealization::Centered;
        m.structure = SkewOperatorSpec(SkewMatrix(Eigen::MatrixXd::Zero(1, 1)), Eigen::MatrixXd::Ones(1, 1));
    } else if (name == "multisym_wave") {
        m.kind = ModelKind::DegenerateK;
        Eigen::MatrixXd K(3, 3);
        K << 0, -1, 0, 1, 0, 0, 0, 0, 0;
        Eigen::MatrixXd L(3, 3);
        L << 0, 0, 1, 0, 0, 0, -1, 0, 0;
        m.structure = constant_structure(K);
        const std::string potential = params.count("potential") ? params.at("potential") : "harmonic";
        m.multi = MultiHamiltonianData{SkewMatrix(L), multisym_potential(potential)};
        m.complete_initial_state = [](GridFunction& z) {
            // w = u_x, realized with the same centered difference the constraint row uses
            GridFunction u(z.grid(), 1, std::vector<double>(z.component(0).begin(), z.component(0).end()));
            const auto ux = centered_diff(u);
            std::copy(ux.values().begin(), ux.values().end(), z.component(2).begin());
        };
    } else if (name == "lattice_wave") {
        m.kind = ModelKind::Lattice;
        m.structure = constant_structure(canonical_J());
    }
    validate_model(m);
    return m;
}

void validate_model(const ModelInstance& model) {
    const auto& d = model.density;
    if (d.order < 0 || d.order > 2) throw ModelError("density order must be 0, 1 or 2");
    if (d.H.dimension != d.stack_size()) throw ModelError("density dimension does not match n*(order+1)");
    if (model.structure.K1.size() != d.n_components) throw ModelError("structure size does not match components");
    switch (model.kind) {
    case ModelKind::CanonicalPDE:
    case ModelKind::Lattice:
        if (d.order > 1) throw ModelError(to_string(model.kind) + ": density order must be <= 1");
        if (model.structure.has_derivative_part()) throw ModelError(to_string(model.kind) + ": K must be constant");
        if (model.kind == ModelKind::Lattice && model.K().is_zero()) throw ModelError("lattice: K must be nonzero");
        break;
    case ModelKind::PoissonOperator: break;
    case ModelKind::DegenerateK:
        if (d.order > 1) throw ModelError("degenerate_k: density order must be <= 1");
        if (!model.multi) throw ModelError("degenerate_k: needs L and S(z)");
        if (model.multi->L.size() != d.n_components) throw ModelError("degenerate_k: L has wrong size");
        if (model.structure.has_derivative_part()) throw ModelError("degenerate_k: K must be constant");
        break;
    }
}

// ---- jets and Hamiltonian ----

CellJets cell_jets(const DensitySpec& density, JetRealization jets, const GridFunction& state) {
    const std::size_t n = density.n_components;
    if (state.n_components() != n) throw ShapeMismatch("cell_jets: component count mismatch");
    const auto N = static_cast<std::ptrdiff_t>(state.n_points());
    CellJets y(N, static_cast<Eigen::Index>(density.stack_size()));
    for (std::ptrdiff_t i = 0; i < N; ++i) {
        for (int slot = 0; slot <= density.order; ++slot) {
            for (std::size_t c = 0; c < n; ++c) {
                y(i, static_cast<Eigen::Index>(static_cast<std::size_t>(slot) * n + c)) =
                    jet_value(jets, slot, state, c, i);
            }
        }
    }
    return y;
}

CellJets cell_jets(const ModelInstance& model, const GridFunction& state) {
    require_state(model, state, "cell_jets");
    return cell_jets(model.density, model.jets, state);
}

GridFunction density_field(const ModelInstance& model, const GridFunction& state) {
    const auto y = cell_jets(model, state);
    GridFunction h(state.grid(), 1);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        h(0, static_cast<std::size_t>(i)) =
            model.density.H.eval(std::span<const double>(y.row(i).data(), static_cast<std::size_t>(y.cols())));
    }
    return h;
}

double discrete_hamiltonian(const ModelInstance& model, const GridFunction& state) {
    return periodic_total(density_field(model, state), true);
}

GridFunction jet_adjoint(const ModelInstance& model, const CellJets& per_cell) {
    return adjoint_of_jets(model.grid, model.n_components(), model.density.order, model.jets, per_cell);
}

GridFunction euler_operator(const ModelInstance& model, const GridFunction& state) {
    return jet_adjoint(model, cell_gradients_exact(model.density, cell_jets(model, state)));
}

CellJets discrete_cell_gradients(const ModelInstance& model, const DiscreteGradientScheme& scheme,
                                 const GridFunction& z0, const GridFunction& z1) {
    const auto y0 = cell_jets(model, z0);
    const auto y1 = cell_jets(model, z1);
    const auto& d = model.density;
    const std::size_t m = d.stack_size();
    const std::size_t first = d.first_active_slot;
    CellJets g = CellJets::Zero(y0.rows(), y0.cols());

    if (first == 0) {
        for (Eigen::Index i = 0; i < y0.rows(); ++i) {
            discrete_gradient(d.H, std::span<const double>(y0.row(i).data(), m),
                              std::span<const double>(y1.row(i).data(), m), scheme,
                              std::span<double>(g.row(i).data(), m));
        }
        return g;
    }

    // Restrict H to the active trailing block; the leading slots are ignored by H.
    const std::size_t active = m - first;
    PointFunction restricted;
    restricted.dimension = active;
    restricted.poly_degree = d.H.poly_degree;
    auto pad = [m, first](std::span<const double> x) {
        std::vector<double> full(m, 0.0);
        std::copy(x.begin(), x.end(), full.begin() + static_cast<std::ptrdiff_t>(first));
        return full;
    };
    restricted.eval = [&d, pad](std::span<const double> x) { return d.H.eval(pad(x)); };
    restricted.grad = [&d, pad, m, first](std::span<const double> x, std::span<double> out) {
        std::vector<double> full(m);
        d.H.grad(pad(x), full);
        std::copy(full.begin() + static_cast<std::ptrdiff_t>(first), full.end(), out.begin());
    };
    restricted.increment = [&d, pad](std::span<const double> a, std::span<const double> b) {
        return d.H.difference(pad(a), pad(b));
    };
    for (Eigen::Index i = 0; i < y0.rows(); ++i) {
        discrete_gradient(restricted, std::span<const double>(y0.row(i).data() + first, active),
                          std::span<const double>(y1.row(i).data() + first, active), scheme,
                          std::span<double>(g.row(i).data() + first, active));
    }
    return g;
}

GridFunction discrete_euler_operator(const ModelInstance& model, const CellJets& cell_gradients) {
    return jet_adjoint(model, cell_gradients);
}

GridFunction apply_structure(const ModelInstance& model, const GridFunction& E) {
    return apply_operator(model.structure, E);
}

GridFunction semidiscrete_rhs(const ModelInstance& model, const GridFunction& state) {
    if (model.kind == ModelKind::DegenerateK) {
        throw ModelError("semidiscrete_rhs: degenerate K has no explicit vector field");
    }
    return apply_structure(model, euler_operator(model, state));
}

// ---- continuous ingredients ----

GridFunction bilinear_S(const SkewOperatorSpec& op, const GridFunction& a, const GridFunction& b) {
    require_same_shape(a, b, "bilinear_S");
    if (a.n_components() != op.K1.size()) throw ShapeMismatch("bilinear_S: component count mismatch");
    GridFunction out(a.grid(), 1);
    const std::size_t n = a.n_components();
    for (std::size_t i = 0; i < a.n_points(); ++i) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                s += a(r, i) * op.K2(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * b(c, i);
            }
        }
        out(0, i) = s;
    }
    return out;
}

GridFunction flux_form_A(const GridFunction& Q, const ModelInstance& model, const GridFunction& state) {
    require_state(model, state, "flux_form_A");
    require_same_shape(Q, state, "flux_form_A");
    const auto& d = model.density;
    const std::size_t n = d.n_components;
    GridFunction A(state.grid(), 1);
    if (d.order == 0) return A;

    const auto grads = cell_gradients_exact(d, cell_jets(d, JetRealization::Centered, state));
    const auto Hw = slot_field(grads, state.grid(), n, 1);
    const auto term1 = pointwise_dot(Q, Hw);
    for (std::size_t i = 0; i < A.n_points(); ++i) A(0, i) = term1(0, i);
    if (d.order >= 2) {
        const auto Hv = slot_field(grads, state.grid(), n, 2);
        const auto dQ_Hv = pointwise_dot(centered_diff(Q), Hv);
        const auto Q_dHv = pointwise_dot(Q, centered_diff(Hv));
        for (std::size_t i = 0; i < A.n_points(); ++i) A(0, i) += dQ_Hv(0, i) - Q_dHv(0, i);
    }
    return A;
}

GridFunction continuous_flux_prop1(const ModelInstance& model, const GridFunction& state) {
    require_state(model, state, "continuous_flux_prop1");
    if (model.kind != ModelKind::CanonicalPDE && model.kind != ModelKind::Lattice) {
        throw ModelError("continuous_flux_prop1: needs a canonical (constant K) model");
    }
    const auto& d = model.density;
    const std::size_t n = d.n_components;
    GridFunction F(state.grid(), 1);
    if (d.order == 0) return F;

    const auto grads = cell_gradients_exact(d, cell_jets(d, JetRealization::Centered, state));
    const auto Hz = slot_field(grads, state.grid(), n, 0);
    const auto Hw = slot_field(grads, state.grid(), n, 1);
    const auto dHw = centered_diff(Hw);
    std::vector<double> a(n), b(n), c(n);
    for (std::size_t i = 0; i < F.n_points(); ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = Hw(k, i);
            b[k] = Hz(k, i);
            c[k] = dHw(k, i);
        }
        F(0, i) = -model.K().form(a, b) + model.K().form(a, c);
    }
    return F;
}

GridFunction continuous_flux_prop2(const ModelInstance& model, const GridFunction& state) {
    require_state(model, state, "continuous_flux_prop2");
    if (model.kind == ModelKind::DegenerateK) throw ModelError("continuous_flux_prop2: not for degenerate K");
    const auto E = centered_euler_operator(model, state);
    const auto KE = apply_operator(model.structure, E);
    const auto S = bilinear_S(model.structure, E, E);
    const auto A = flux_form_A(KE, model, state);
    GridFunction F(state.grid(), 1);
    for (std::size_t i = 0; i < F.n_points(); ++i) F(0, i) = -0.5 * S(0, i) - A(0, i);
    return F;
}

GridFunction continuous_density_rate(const ModelInstance& model, const GridFunction& state,
                                     const GridFunction& z_t) {
    require_state(model, state, "continuous_density_rate");
    require_same_shape(state, z_t, "continuous_density_rate");
    const auto& d = model.density;
    const auto grads = cell_gradients_exact(d, cell_jets(d, JetRealization::Centered, state));
    const auto zt_jets = cell_jets(d, JetRealization::Centered, z_t);
    GridFunction rate(state.grid(), 1);
    for (Eigen::Index i = 0; i < grads.rows(); ++i) {
        rate(0, static_cast<std::size_t>(i)) = grads.row(i).dot(zt_jets.row(i));
    }
    return rate;
}

GridFunction potential_S(const ModelInstance& model, const GridFunction& state) {
    require_state(model, state, "potential_S");
    if (!model.multi) throw ModelError("potential_S: model has no multi-Hamiltonian potential");
    GridFunction out(state.grid(), 1);
    std::vector<double> z(state.n_components());
    for (std::size_t i = 0; i < state.n_points(); ++i) {
        for (std::size_t c = 0; c < z.size(); ++c) z[c] = state(c, i);
        out(0, i) = model.multi->potential.eval(z);
    }
    return out;
}

} // namespace eclkit
