#pragma once

#include "obsctl/error.hpp"
#include "obsctl/funcexpr.hpp"
#include "obsctl/mesh.hpp"
#include "obsctl/sparse_matrix.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace obsctl {

/// Data function of (x1, x2): a built-in closed form or a parsed expression.
class ScalarFunction {
public:
    using Evaluator = std::function<double(double, double)>;

    ScalarFunction() : ScalarFunction(constant(0.0)) {}
    ScalarFunction(Evaluator f, std::string description)
        : f_(std::move(f)), description_(std::move(description)) {}

    static ScalarFunction constant(double c) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", c);
        return ScalarFunction([c](double, double) { return c; }, buf);
    }

    static ScalarFunction from_expression(std::string_view src) {
        auto e = std::make_shared<const expr::Expr>(expr::parse(src));
        return ScalarFunction([e](double x1, double x2) { return expr::evaluate(*e, x1, x2); },
                              std::string(src));
    }

    double operator()(double x1, double x2) const { return f_(x1, x2); }
    double operator()(Point p) const { return f_(p.x1, p.x2); }
    const std::string& description() const noexcept { return description_; }

private:
    Evaluator f_;
    std::string description_;
};

enum class FieldKind { Free, ZeroTrace };

/// Coefficients of a P1 function, one per mesh vertex (interior block first).
class NodalField {
public:
    NodalField(std::shared_ptr<const Mesh> mesh, Vector values, FieldKind kind = FieldKind::Free)
        : mesh_(std::move(mesh)), values_(std::move(values)), kind_(kind) {
        if (values_.size() != mesh_->num_vertices()) {
            throw DimensionMismatch("nodal field needs " + std::to_string(mesh_->num_vertices()) +
                                    " values, got " + std::to_string(values_.size()));
        }
        if (kind_ == FieldKind::ZeroTrace) {
            values_.tail(mesh_->num_boundary()).setZero();
        }
    }

    static NodalField zero(std::shared_ptr<const Mesh> mesh, FieldKind kind = FieldKind::ZeroTrace) {
        const Index n = mesh->num_vertices();
        return NodalField(std::move(mesh), Vector::Zero(n), kind);
    }

    /// Extends an interior coefficient vector by zero boundary values.
    static NodalField from_interior(std::shared_ptr<const Mesh> mesh, const Vector& interior) {
        if (interior.size() != mesh->num_interior()) {
            throw DimensionMismatch("interior vector has wrong length");
        }
        Vector v = Vector::Zero(mesh->num_vertices());
        v.head(interior.size()) = interior;
        return NodalField(std::move(mesh), std::move(v), FieldKind::ZeroTrace);
    }

    const std::shared_ptr<const Mesh>& mesh_ptr() const noexcept { return mesh_; }
    const Mesh& mesh() const noexcept { return *mesh_; }
    const Vector& values() const noexcept { return values_; }
    FieldKind kind() const noexcept { return kind_; }
    double operator[](Index i) const { return values_[i]; }
    Index size() const noexcept { return values_.size(); }

    auto interior() const { return values_.head(mesh_->num_interior()); }

    NodalField operator+(const NodalField& o) const { return combine(o, 1.0); }
    NodalField operator-(const NodalField& o) const { return combine(o, -1.0); }
    NodalField operator*(double s) const {
        return NodalField(mesh_, values_ * s, kind_);
    }

private:
    NodalField combine(const NodalField& o, double sign) const {
        if (mesh_ != o.mesh_) {
            throw MeshMismatch("field arithmetic across different meshes");
        }
        const FieldKind k = (kind_ == FieldKind::ZeroTrace && o.kind_ == FieldKind::ZeroTrace)
                                ? FieldKind::ZeroTrace
                                : FieldKind::Free;
        return NodalField(mesh_, values_ + sign * o.values_, k);
    }

    std::shared_ptr<const Mesh> mesh_;
    Vector values_;
    FieldKind kind_;
};

namespace detail {

/// Gradients of the three barycentric coordinates, times 2*area.
inline std::array<std::array<double, 2>, 3> scaled_gradients(const Mesh& mesh, const Triangle& t) {
    const Point& a = mesh.vertex(t[0]);
    const Point& b = mesh.vertex(t[1]);
    const Point& c = mesh.vertex(t[2]);
    return {{{b.x2 - c.x2, c.x1 - b.x1}, {c.x2 - a.x2, a.x1 - c.x1}, {a.x2 - b.x2, b.x1 - a.x1}}};
}

} // namespace detail

/// Full (n+m)x(n+m) stiffness matrix, A_ij = int grad phi_i . grad phi_j.
inline SparseMatrix assemble_stiffness(const Mesh& mesh) {
    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(9 * mesh.num_triangles()));
    for (const auto& t : mesh.triangles()) {
        const double area = std::abs(mesh.signed_area(t));
        const auto g = detail::scaled_gradients(mesh, t);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double v = (g[i][0] * g[j][0] + g[i][1] * g[j][1]) / (4.0 * area);
                entries.push_back({t[i], t[j], v});
            }
        }
    }
    return SparseMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), std::move(entries));
}

/// Full consistent mass matrix, M_ij = int phi_i phi_j.
inline SparseMatrix assemble_mass(const Mesh& mesh) {
    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(9 * mesh.num_triangles()));
    for (const auto& t : mesh.triangles()) {
        const double area = std::abs(mesh.signed_area(t));
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                entries.push_back({t[i], t[j], area / (i == j ? 6.0 : 12.0)});
            }
        }
    }
    return SparseMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), std::move(entries));
}

/// m_j = int phi_j dx for every vertex.
inline Vector lumped_masses(const Mesh& mesh) {
    Vector m = Vector::Zero(mesh.num_vertices());
    for (const auto& t : mesh.triangles()) {
        const double third = std::abs(mesh.signed_area(t)) / 3.0;
        for (const Index v : t) {
            m[v] += third;
        }
    }
    return m;
}

/// Lagrange interpolant I_h f.
inline NodalField interpolate(const ScalarFunction& f, std::shared_ptr<const Mesh> mesh,
                              FieldKind kind = FieldKind::Free) {
    Vector v(mesh->num_vertices());
    for (Index i = 0; i < v.size(); ++i) {
        v[i] = f(mesh->vertex(i));
    }
    return NodalField(std::move(mesh), std::move(v), kind);
}

/// (int g phi_i dx)_{i < n} with the edge-midpoint rule on each triangle,
/// which is exact for quadratic g.
inline Vector load_vector(const ScalarFunction& g, const Mesh& mesh) {
    Vector b = Vector::Zero(mesh.num_vertices());
    for (const auto& t : mesh.triangles()) {
        const double w = std::abs(mesh.signed_area(t)) / 3.0;
        std::array<double, 3> edge_value{};
        for (std::size_t e = 0; e < 3; ++e) {
            const Point& a = mesh.vertex(t[e]);
            const Point& c = mesh.vertex(t[(e + 1) % 3]);
            edge_value[e] = g(0.5 * (a.x1 + c.x1), 0.5 * (a.x2 + c.x2));
        }
        // vertex k sits on edges k and k-1; phi_k = 1/2 at both midpoints
        for (std::size_t k = 0; k < 3; ++k) {
            b[t[k]] += w * 0.5 * (edge_value[k] + edge_value[(k + 2) % 3]);
        }
    }
    return b.head(mesh.num_interior());
}

} // namespace obsctl
