#pragma once

#include "obsctl/error.hpp"
#include "obsctl/fem.hpp"
#include "obsctl/mesh.hpp"
#include "obsctl/sparse_matrix.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>

namespace obsctl {

/// Continuous data of a control problem: minimize
/// 1/2 ||y - y0||^2 + alpha/2 ||u - ud||^2 subject to the obstacle problem
/// with load f + u and obstacle psi.
struct ProblemSpec {
    std::string name = "custom";
    Domain domain = Domain::UnitSquare;
    double alpha = 1.0;
    ScalarFunction f = ScalarFunction::constant(0.0);
    ScalarFunction y0 = ScalarFunction::constant(0.0);
    ScalarFunction psi = ScalarFunction::constant(0.0);
    ScalarFunction ud = ScalarFunction::constant(0.0);
};

namespace presets {

/// alpha = 0.1, obstacle is a paraboloid that dips below zero near the boundary.
inline ProblemSpec example1() {
    ProblemSpec s;
    s.name = "example1";
    s.alpha = 0.1;
    s.y0 = ScalarFunction([](double x1, double x2) { return -(5.0 * x1 + x2 - 1.0); }, "-(5*x1 + x2 - 1)");
    s.f = ScalarFunction::constant(-0.1);
    s.psi = ScalarFunction(
        [](double x1, double x2) { return -4.0 * (x1 * (x1 - 1.0) + x2 * (x2 - 1.0)) - 1.5; },
        "-4*(x1*(x1 - 1) + x2*(x2 - 1)) - 1.5");
    return s;
}

/// Lack of strict complementarity: psi = 0, f changes sign across x1 = 1/2.
inline ProblemSpec example2() {
    ProblemSpec s;
    s.name = "example2";
    s.alpha = 0.1;
    s.y0 = ScalarFunction([](double x1, double x2) { return -(5.0 * x1 + x2 - 1.0); }, "-(5*x1 + x2 - 1)");
    s.f = ScalarFunction([](double x1, double) { return -(x1 - 0.5); }, "-(x1 - 0.5)");
    s.psi = ScalarFunction::constant(0.0);
    return s;
}

namespace ex3 {

inline double y1(double t) { return -4096.0 * std::pow(t, 6) + 6144.0 * std::pow(t, 5) - 3072.0 * std::pow(t, 4) + 512.0 * std::pow(t, 3); }
inline double y1_dd(double t) { return -122880.0 * std::pow(t, 4) + 122880.0 * std::pow(t, 3) - 36864.0 * t * t + 3072.0 * t; }
inline double y2(double t) { return -244.140625 * std::pow(t, 6) + 585.9375 * std::pow(t, 5) - 468.75 * std::pow(t, 4) + 125.0 * std::pow(t, 3); }
inline double y2_dd(double t) { return -7324.21875 * std::pow(t, 4) + 11718.75 * std::pow(t, 3) - 5625.0 * t * t + 750.0 * t; }

inline constexpr double kCenter1 = 0.8;
inline constexpr double kCenter2 = 0.9;
inline constexpr double kHalfEdge = 0.05;

/// Q^t (x - c) for the rotation by pi/6 about the square's midpoint c.
inline std::pair<double, double> local_coords(double x1, double x2) {
    const double c = std::cos(std::numbers::pi / 6.0);
    const double s = std::sin(std::numbers::pi / 6.0);
    const double d1 = x1 - kCenter1;
    const double d2 = x2 - kCenter2;
    return {c * d1 + s * d2, -s * d1 + c * d2};
}

inline bool in_rotated_square(double x1, double x2) {
    const auto [z1, z2] = local_coords(x1, x2);
    return std::abs(z1) <= kHalfEdge && std::abs(z2) <= kHalfEdge;
}

/// p1 evaluated in the rotated frame: p1(c + Q^t(x - c)).
inline double p1_rotated(double x1, double x2) {
    const auto [z1, z2] = local_coords(x1, x2);
    return (-200.0 * z1 * z1 + 0.5) * (-200.0 * z2 * z2 + 0.5);
}

/// Laplacian of p1, invariant under the rotation.
inline double laplace_p1_rotated(double x1, double x2) {
    const auto [z1, z2] = local_coords(x1, x2);
    return -400.0 * (-200.0 * z2 * z2 + 0.5) - 400.0 * (-200.0 * z1 * z1 + 0.5);
}

inline double state(double x1, double x2) { return (x1 < 0.5 && x2 < 0.8) ? y1(x1) * y2(x2) : 0.0; }

inline double laplace_state(double x1, double x2) {
    return (x1 < 0.5 && x2 < 0.8) ? y1_dd(x1) * y2(x2) + y1(x1) * y2_dd(x2) : 0.0;
}

inline double slack(double x1, double x2) { return (x1 > 0.5 && x2 < 0.8) ? y1(x1 - 0.5) * y2(x2) : 0.0; }

inline double adjoint(double x1, double x2) { return in_rotated_square(x1, x2) ? p1_rotated(x1, x2) : 0.0; }

} // namespace ex3

/// Manufactured solution with a biactive set [0,1]x[0.8,1]; the shift u_d of
/// the cost is folded into f = -lap y - xi + p/alpha.
inline ProblemSpec example3() {
    ProblemSpec s;
    s.name = "example3";
    s.alpha = 1.0;
    s.psi = ScalarFunction::constant(0.0);
    const double alpha = s.alpha;
    s.f = ScalarFunction(
        [alpha](double x1, double x2) {
            return -ex3::laplace_state(x1, x2) - ex3::slack(x1, x2) + ex3::adjoint(x1, x2) / alpha;
        },
        "-lap(y) - xi + p/alpha (built-in)");
    s.y0 = ScalarFunction(
        [](double x1, double x2) {
            return ex3::state(x1, x2) + (ex3::in_rotated_square(x1, x2) ? ex3::laplace_p1_rotated(x1, x2) : 0.0);
        },
        "y + lap(p1)(Q^t x) on the rotated square (built-in)");
    return s;
}

/// L-shaped domain, discontinuous desired state.
inline ProblemSpec example4() {
    ProblemSpec s;
    s.name = "example4";
    s.domain = Domain::LShape;
    s.alpha = 1.0;
    s.psi = ScalarFunction::constant(0.0);
    s.f = ScalarFunction([](double x1, double x2) { return 0.5 + 0.5 * (x1 - x2); }, "1/2 + (x1 - x2)/2");
    s.y0 = ScalarFunction(
        [](double x1, double x2) {
            return std::hypot(x1, x2) >= 0.1 ? -1.0 : 1.0 - 100.0 * x1 * x1 - 50.0 * x2 * x2;
        },
        "cond(sq(x1) + sq(x2) >= 0.01, -1, 1 - 100*sq(x1) - 50*sq(x2))");
    return s;
}

inline ProblemSpec example(int k) {
    switch (k) {
    case 1: return example1();
    case 2: return example2();
    case 3: return example3();
    case 4: return example4();
    default: throw ConfigError("no built-in example " + std::to_string(k) + " (expected 1-4)");
    }
}

} // namespace presets

/// Discretized problem: all matrices and data vectors the solvers need.
/// Interior-sized quantities use the first n vertices of the mesh.
struct ProblemData {
    std::shared_ptr<const Mesh> mesh;
    ProblemSpec spec;
    double alpha = 1.0;
    SparseMatrix stiffness;   ///< n x n
    SparseMatrix mass;        ///< n x n
    SparseMatrix mass_full;   ///< (n+m) x (n+m)
    SparseMatrix mass_rows;   ///< n x (n+m), interior rows of the full mass matrix
    Vector lumped;            ///< m_j, length n+m
    NodalField psi_h;
    NodalField ud_h;
    NodalField y0_h;
    Vector load_f;            ///< n
    Vector load_y0;           ///< n

    Index n() const noexcept { return mesh->num_interior(); }
    auto lumped_interior() const { return lumped.head(n()); }
    auto psi_interior() const { return psi_h.values().head(n()); }

    static ProblemData build(ProblemSpec spec, std::shared_ptr<const Mesh> mesh) {
        if (!(spec.alpha > 0.0)) {
            throw ConfigError("alpha must be positive");
        }
        const Index n = mesh->num_interior();
        const auto A = assemble_stiffness(*mesh);
        const auto M = assemble_mass(*mesh);
        ProblemData d{
            mesh,
            spec,
            spec.alpha,
            A.block(0, n, 0, n),
            M.block(0, n, 0, n),
            M,
            M.block(0, n, 0, mesh->num_vertices()),
            lumped_masses(*mesh),
            interpolate(spec.psi, mesh),
            interpolate(spec.ud, mesh),
            interpolate(spec.y0, mesh),
            load_vector(spec.f, *mesh),
            load_vector(spec.y0, *mesh),
        };
        return d;
    }

    static ProblemData build(ProblemSpec spec, Index subdivisions) {
        auto mesh = std::make_shared<const Mesh>(build_uniform_mesh(spec.domain, subdivisions));
        return build(std::move(spec), std::move(mesh));
    }
};

} // namespace obsctl
