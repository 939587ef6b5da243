#pragma once

// Newton solvers for the penalized state equation
//   A y + gamma^3 m o [(y - psi)^-]^3 = load(f) + M u
// and for the coupled state/adjoint system, plus the gamma homotopy.

#include "obsctl/error.hpp"
#include "obsctl/fem.hpp"
#include "obsctl/linalg.hpp"
#include "obsctl/problem.hpp"
#include "obsctl/sparse_matrix.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace obsctl {

/// w = (y - psi)^- on interior nodes.
inline Vector negative_part(const Vector& y, const ProblemData& data) {
    return (y - data.psi_interior()).cwiseMin(0.0);
}

/// gamma^3 m_j [(y_j - psi_j)^-]^3 on interior nodes.
inline Vector penalty_term(const Vector& y, double gamma, const ProblemData& data) {
    const double g3 = gamma * gamma * gamma;
    const Vector w = negative_part(y, data);
    return g3 * data.lumped_interior().cwiseProduct(w.cwiseProduct(w).cwiseProduct(w));
}

inline Vector penalty_term(const NodalField& y, double gamma, const ProblemData& data) {
    return penalty_term(Vector(y.interior()), gamma, data);
}

/// gamma^3 sum_j m_j [(y_j - psi_j)^-]^4; tends to zero along the homotopy.
inline double penalty_energy(const Vector& y, double gamma, const ProblemData& data) {
    const Vector w = negative_part(y, data);
    return gamma * gamma * gamma * data.lumped_interior().dot(w.cwiseProduct(w).cwiseProduct(w).cwiseProduct(w));
}

/// Right-hand side load(f) + M u of the state equation (interior rows).
inline Vector state_load(const NodalField& u, const ProblemData& data) {
    return data.load_f + data.mass_rows * u.values();
}

/// Q(y) = 1/2 y'Ay + gamma^3/4 sum m_j [(y_j - psi_j)^-]^4 - y'b. Its unique
/// minimizer solves the state equation with right-hand side b.
inline double state_energy(const Vector& y, const Vector& rhs, double gamma, const ProblemData& data) {
    return 0.5 * y.dot(data.stiffness * y) + 0.25 * penalty_energy(y, gamma, data) - y.dot(rhs);
}

struct StateSolution {
    NodalField y;
    Index iterations = 0;
};

struct StateOptions {
    Index max_iters = 200;
    double tolerance = 1e-12;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    Index max_backtracks = 60;
};

/// Newton corrections below this (relative to |y|) are rounding noise.
inline constexpr double kStepFloor = 16.0 * std::numeric_limits<double>::epsilon();

/// Damped Newton on R(y) = A y + penalty_term(y) - load(f + u), backtracking on Q.
inline StateSolution solve_state(const NodalField& u, double gamma, const ProblemData& data,
                                 const std::optional<NodalField>& y_init = std::nullopt,
                                 const StateOptions& opt = {}) {
    if (!(gamma > 0.0)) {
        throw ConfigError("solve_state: gamma must be positive");
    }
    const Vector rhs = state_load(u, data);
    const double tol = opt.tolerance * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    const double g3 = gamma * gamma * gamma;
    Vector y = y_init ? Vector(y_init->interior()) : Vector::Zero(data.n());
    double q = state_energy(y, rhs, gamma, data);

    for (Index k = 0; k <= opt.max_iters; ++k) {
        const Vector R = data.stiffness * y + penalty_term(y, gamma, data) - rhs;
        if (R.lpNorm<Eigen::Infinity>() <= tol) {
            return {NodalField::from_interior(data.mesh, y), k};
        }
        if (k == opt.max_iters) {
            break;
        }
        const Vector w = negative_part(y, data);
        const SparseMatrix J = data.stiffness.plus_diagonal(3.0 * g3 * data.lumped_interior().cwiseProduct(w.cwiseProduct(w)));
        Vector dy;
        try {
            dy = Factorization::cholesky(J).solve(-R);
        } catch (const SingularMatrix& e) {
            throw LinearSolveFailure(std::string("solve_state: ") + e.what());
        }
        // Residual floor: for large gamma the penalty diagonal amplifies
        // rounding in y past any fixed residual tolerance.
        if (dy.lpNorm<Eigen::Infinity>() <= kStepFloor * (1.0 + y.lpNorm<Eigen::Infinity>())) {
            y += dy;
            return {NodalField::from_interior(data.mesh, y), k + 1};
        }
        const double slope = R.dot(dy);
        double t = 1.0;
        bool accepted = false;
        const double r_norm = R.lpNorm<Eigen::Infinity>();
        for (Index b = 0; b < opt.max_backtracks; ++b) {
            const Vector trial = y + t * dy;
            const double qt = state_energy(trial, rhs, gamma, data);
            // Near the minimizer Q is flat to rounding and Armijo picks
            // arbitrary short steps, so a full step that halves R also counts.
            const bool halves = b == 0 && (data.stiffness * trial + penalty_term(trial, gamma, data) - rhs)
                                                  .lpNorm<Eigen::Infinity>() <= 0.5 * r_norm;
            if (halves || qt <= q + opt.armijo_c * t * slope) {
                y = trial;
                q = qt;
                accepted = true;
                break;
            }
            t *= opt.backtrack;
        }
        if (!accepted) {
            // Q is flat to rounding near the minimizer; a full step that
            // does not increase Q is still progress on the residual.
            const Vector trial = y + dy;
            const double qt = state_energy(trial, rhs, gamma, data);
            if (qt > q) {
                throw NoConvergence("solve_state: line search failed", static_cast<std::size_t>(k + 1));
            }
            y = trial;
            q = qt;
        }
    }
    throw NoConvergence("solve_state: no convergence in " + std::to_string(opt.max_iters) + " Newton steps",
                        static_cast<std::size_t>(opt.max_iters));
}

/// Adjoint at a given state: (A + 3 gamma^3 diag(m w^2)) p = M y - load_y0.
inline NodalField solve_adjoint(const NodalField& y, double gamma, const ProblemData& data) {
    const Vector yi = y.interior();
    const Vector w = negative_part(yi, data);
    const double g3 = gamma * gamma * gamma;
    const SparseMatrix K = data.stiffness.plus_diagonal(3.0 * g3 * data.lumped_interior().cwiseProduct(w.cwiseProduct(w)));
    const Vector rhs = data.mass_rows * y.values() - data.load_y0;
    try {
        return NodalField::from_interior(data.mesh, Factorization::cholesky(K).solve(rhs));
    } catch (const SingularMatrix& e) {
        throw LinearSolveFailure(std::string("solve_adjoint: ") + e.what());
    }
}

/// Stacked residual (F1, F2) of the first-order system in the interior unknowns.
inline Vector kkt_residual(const Vector& y, const Vector& p, double gamma, const ProblemData& data) {
    const Index n = data.n();
    const double g3 = gamma * gamma * gamma;
    const Vector w = negative_part(y, data);
    const auto m = data.lumped_interior();
    Vector F(2 * n);
    F.head(n) = data.stiffness * y + g3 * m.cwiseProduct(w.cwiseProduct(w).cwiseProduct(w)) - data.load_f -
                data.mass_rows * data.ud_h.values() + (1.0 / data.alpha) * (data.mass * p);
    F.tail(n) = data.stiffness * p + 3.0 * g3 * m.cwiseProduct(w.cwiseProduct(w)).cwiseProduct(p) -
                data.mass * y + data.load_y0;
    return F;
}

/// Jacobian of kkt_residual; the derivative of w at y = psi is taken as 0.
inline SparseMatrix kkt_jacobian(const Vector& y, const Vector& p, double gamma, const ProblemData& data) {
    const Index n = data.n();
    const double g3 = gamma * gamma * gamma;
    const Vector w = negative_part(y, data);
    const auto m = data.lumped_interior();
    const Vector d1 = 3.0 * g3 * m.cwiseProduct(w.cwiseProduct(w));
    const Vector d2 = 6.0 * g3 * m.cwiseProduct(w).cwiseProduct(p);

    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(2 * data.stiffness.nonzeros() + 2 * data.mass.nonzeros() + 2 * n));
    for (const auto& e : data.stiffness.triplets()) {
        t.push_back({e.row, e.col, e.value});
        t.push_back({n + e.row, n + e.col, e.value});
    }
    for (const auto& e : data.mass.triplets()) {
        t.push_back({e.row, n + e.col, e.value / data.alpha});
        t.push_back({n + e.row, e.col, -e.value});
    }
    for (Index i = 0; i < n; ++i) {
        t.push_back({i, i, d1[i]});
        t.push_back({n + i, n + i, d1[i]});
        t.push_back({n + i, i, d2[i]});
    }
    return SparseMatrix::from_triplets(2 * n, 2 * n, std::move(t));
}

struct KktSolution {
    double gamma = 0.0;
    NodalField y;
    NodalField p;
    NodalField u;
    Index newton_iters = 0;
    bool converged = false;
    double min_violation = 0.0;   ///< min over y_k < psi_k of y_k - psi_k, 0 if none
};

struct NewtonOptions {
    Index max_iters = 200;
    double tolerance = 1e-15;
    /// Plain full steps up to here; after that each step is backtracked on
    /// |F|_2, which breaks the cycles full-step Newton can fall into.
    Index full_step_iters = 50;
    Index max_backtracks = 40;
};

inline double min_violation(const Vector& y, const ProblemData& data) {
    const Vector d = y - data.psi_interior();
    return std::min(d.minCoeff(), 0.0);
}

/// u = u_d - p/alpha at every node.
inline NodalField control_from_adjoint(const NodalField& p, const ProblemData& data) {
    return NodalField(data.mesh, data.ud_h.values() - p.values() / data.alpha, FieldKind::Free);
}

/// Full-step Newton on the coupled system. Stops once
/// (1/alpha) ||p_k - p_{k+1}||_{L2} <= tolerance; the iteration count is the
/// number of linear solves.
inline KktSolution solve_kkt(double gamma, const ProblemData& data,
                             const std::optional<std::pair<NodalField, NodalField>>& init = std::nullopt,
                             const NewtonOptions& opt = {}) {
    if (!(gamma > 0.0)) {
        throw ConfigError("solve_kkt: gamma must be positive");
    }
    const Index n = data.n();
    Vector y = init ? Vector(init->first.interior()) : Vector::Zero(n);
    Vector p = init ? Vector(init->second.interior()) : Vector::Zero(n);

    for (Index k = 1; k <= opt.max_iters; ++k) {
        const Vector F = kkt_residual(y, p, gamma, data);
        Vector delta;
        try {
            delta = Factorization::lu(kkt_jacobian(y, p, gamma, data)).solve(-F);
        } catch (const SingularMatrix& e) {
            throw IllConditioned("Newton matrix at gamma = " + std::to_string(gamma) + ": " + e.what());
        }
        const Vector dp = delta.tail(n);
        // the stopping test always looks at the full Newton correction
        const double step = std::sqrt(std::max(dp.dot(data.mass * dp), 0.0)) / data.alpha;
        double t = 1.0;
        if (k > opt.full_step_iters && step > opt.tolerance) {
            const double f0 = F.squaredNorm();
            for (Index b = 0; b < opt.max_backtracks; ++b) {
                const Vector Ft = kkt_residual(y + t * delta.head(n), p + t * dp, gamma, data);
                if (Ft.squaredNorm() <= (1.0 - 1e-4 * t) * f0) {
                    break;
                }
                t *= 0.5;
            }
        }
        y += t * delta.head(n);
        p += t * dp;
        if (step <= opt.tolerance) {
            KktSolution s{gamma,
                          NodalField::from_interior(data.mesh, y),
                          NodalField::from_interior(data.mesh, p),
                          NodalField::zero(data.mesh),
                          k,
                          true,
                          min_violation(y, data)};
            s.u = control_from_adjoint(s.p, data);
            return s;
        }
    }
    throw NoConvergence("solve_kkt: no convergence in " + std::to_string(opt.max_iters) +
                            " Newton steps at gamma = " + std::to_string(gamma),
                        static_cast<std::size_t>(opt.max_iters));
}

/// gamma = 10^first, ..., 10^last.
inline std::vector<double> decade_schedule(int first_exponent = 0, int last_exponent = 15) {
    std::vector<double> s;
    for (int e = first_exponent; e <= last_exponent; ++e) {
        s.push_back(std::pow(10.0, e));
    }
    return s;
}

struct HomotopyResult {
    std::vector<KktSolution> stages;
    bool truncated = false;
    std::string truncation_reason;   ///< empty unless truncated

    double last_gamma() const { return stages.empty() ? 0.0 : stages.back().gamma; }
};

/// Solves along the schedule, starting from zero and warm-starting each stage
/// from the previous one. Failure at the first stage propagates; later
/// IllConditioned or NoConvergence ends the schedule early.
inline HomotopyResult gamma_homotopy(const ProblemData& data, const std::vector<double>& schedule,
                                     const NewtonOptions& opt = {}) {
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        if (!(schedule[i] > schedule[i - 1])) {
            throw ConfigError("gamma schedule must be strictly increasing");
        }
    }
    HomotopyResult r;
    for (const double gamma : schedule) {
        std::optional<std::pair<NodalField, NodalField>> init;
        if (!r.stages.empty()) {
            init.emplace(r.stages.back().y, r.stages.back().p);
        }
        if (r.stages.empty()) {
            r.stages.push_back(solve_kkt(gamma, data, init, opt));
            continue;
        }
        try {
            r.stages.push_back(solve_kkt(gamma, data, init, opt));
        } catch (const IllConditioned& e) {
            r.truncated = true;
            r.truncation_reason = e.what();
            break;
        } catch (const NoConvergence& e) {
            r.truncated = true;
            r.truncation_reason = e.what();
            break;
        }
    }
    return r;
}

/// J = 1/2 ||y - I_h y0||^2 + alpha/2 ||u - u_d||^2 in the consistent mass norm.
inline double objective(const NodalField& u, const NodalField& y, const ProblemData& data) {
    if (u.mesh_ptr() != data.mesh || y.mesh_ptr() != data.mesh) {
        throw MeshMismatch("objective: fields live on a different mesh");
    }
    const Vector ey = y.values() - data.y0_h.values();
    const Vector eu = u.values() - data.ud_h.values();
    return 0.5 * ey.dot(data.mass_full * ey) + 0.5 * data.alpha * eu.dot(data.mass_full * eu);
}

/// alpha (u - u_d) + p; vanishes at a stationary point.
inline NodalField reduced_gradient(const NodalField& u, const NodalField& p, const ProblemData& data) {
    return NodalField(data.mesh, data.alpha * (u.values() - data.ud_h.values()) + p.values(), FieldKind::Free);
}

} // namespace obsctl
