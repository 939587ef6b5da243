#pragma once

// Unpenalized discrete obstacle problem at a fixed control, and checks of
// the strong stationarity system for candidate (u, y, p, xi, mu).

#include "obsctl/certificate.hpp"
#include "obsctl/error.hpp"
#include "obsctl/fem.hpp"
#include "obsctl/linalg.hpp"
#include "obsctl/penalized.hpp"
#include "obsctl/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace obsctl {

struct ViSolution {
    NodalField y;
    Vector xi;                      ///< slack A y - load(f + u), interior
    std::vector<Index> active_set;  ///< nodes with y = psi
    Index pdas_iters = 0;
};

struct PdasOptions {
    double c = 1.0;
    Index max_iters = 500;
};

/// Primal-dual active set method for
///   y >= psi, xi >= 0, xi o (y - psi) = 0, A y = load(f + u) + xi.
/// Stops as soon as the predicted active set repeats.
inline ViSolution solve_vi_pdas(const NodalField& u, const ProblemData& data, const PdasOptions& opt = {}) {
    const Index n = data.n();
    const Vector b = state_load(u, data);
    const Vector psi = data.psi_interior();
    Vector y = Vector::Zero(n);
    Vector xi = Vector::Zero(n);

    auto predict = [&] {
        std::vector<char> active(static_cast<std::size_t>(n), 0);
        for (Index j = 0; j < n; ++j) {
            active[static_cast<std::size_t>(j)] = (xi[j] + opt.c * (psi[j] - y[j]) > 0.0) ? 1 : 0;
        }
        return active;
    };

    // Unconstrained start: y = A^{-1} b, xi = 0.
    y = Factorization::cholesky(data.stiffness).solve(b);
    std::vector<char> active = predict();

    for (Index it = 1; it <= opt.max_iters; ++it) {
        std::vector<Index> inactive;
        for (Index j = 0; j < n; ++j) {
            if (active[static_cast<std::size_t>(j)]) {
                y[j] = psi[j];
            } else {
                inactive.push_back(j);
            }
        }
        if (!inactive.empty()) {
            // A_II y_I = b_I - A_IA psi_A
            Vector yA = y;
            for (const Index j : inactive) {
                yA[j] = 0.0;
            }
            const Vector coupling = data.stiffness * yA;
            Vector rhs(static_cast<Index>(inactive.size()));
            for (std::size_t k = 0; k < inactive.size(); ++k) {
                rhs[static_cast<Index>(k)] = b[inactive[k]] - coupling[inactive[k]];
            }
            const Vector yI = Factorization::cholesky(data.stiffness.principal_submatrix(inactive)).solve(rhs);
            for (std::size_t k = 0; k < inactive.size(); ++k) {
                y[inactive[k]] = yI[static_cast<Index>(k)];
            }
        }
        const Vector r = data.stiffness * y - b;
        for (Index j = 0; j < n; ++j) {
            xi[j] = active[static_cast<std::size_t>(j)] ? r[j] : 0.0;
        }
        std::vector<char> next = predict();
        if (next == active) {
            ViSolution s{NodalField::from_interior(data.mesh, y), xi, {}, it};
            for (Index j = 0; j < n; ++j) {
                if (active[static_cast<std::size_t>(j)]) {
                    s.active_set.push_back(j);
                }
            }
            return s;
        }
        active = std::move(next);
    }
    throw NoConvergence("solve_vi_pdas: active set did not settle", static_cast<std::size_t>(opt.max_iters));
}

/// Largest violation of each relation of the strong stationarity system.
struct StationarityReport {
    double state = 0.0;            ///< A y - load(f + u) - xi
    double complementarity = 0.0;  ///< y >= psi, xi >= 0, xi (y - psi) = 0
    double adjoint = 0.0;          ///< A p - M y + load_y0 + mu
    double orthogonality = 0.0;    ///< (y - psi) mu = 0, xi p = 0
    double control = 0.0;          ///< alpha (u - u_d) + p
    double biactive_sign = 0.0;    ///< mu >= 0, p >= 0 where y = psi and xi = 0

    double max() const {
        return std::max({state, complementarity, adjoint, orthogonality, control, biactive_sign});
    }
};

/// xi and mu are interior load vectors (see stationarity_multipliers).
/// Nodes with |y - psi| <= tau and |xi| <= tau count as biactive.
inline StationarityReport check_strong_stationarity(const NodalField& u, const NodalField& y, const NodalField& p,
                                                    const Vector& xi, const Vector& mu, const ProblemData& data,
                                                    double tau = 0.0) {
    const Index n = data.n();
    if (xi.size() != n || mu.size() != n) {
        throw DimensionMismatch("check_strong_stationarity: multipliers must have interior length");
    }
    const Vector yi = y.interior();
    const Vector pi = p.interior();
    const Vector d = yi - data.psi_interior();
    auto inf = [](const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); };

    StationarityReport r;
    r.state = inf(data.stiffness * yi - state_load(u, data) - xi);
    r.adjoint = inf(data.stiffness * pi - data.mass_rows * y.values() + data.load_y0 + mu);
    r.control = inf(data.alpha * (u.values() - data.ud_h.values()) + p.values());
    for (Index j = 0; j < n; ++j) {
        r.complementarity = std::max({r.complementarity, -d[j], -xi[j], std::abs(xi[j] * d[j])});
        r.orthogonality = std::max({r.orthogonality, std::abs(d[j] * mu[j]), std::abs(xi[j] * pi[j])});
        if (std::abs(d[j]) <= tau && std::abs(xi[j]) <= tau) {
            r.biactive_sign = std::max({r.biactive_sign, -mu[j], -pi[j]});
        }
    }
    return r;
}

/// eta = min( min_{y > psi} p/(y - psi), min_{xi > 0} mu/xi, 0 ).
inline double eta_unpenalized(const Vector& y, const Vector& p, const Vector& xi, const Vector& mu, const Vector& psi) {
    const Index n = y.size();
    if (p.size() != n || xi.size() != n || mu.size() != n || psi.size() != n) {
        throw DimensionMismatch("eta_unpenalized: vector lengths differ");
    }
    double eta = 0.0;
    for (Index j = 0; j < n; ++j) {
        if (y[j] > psi[j]) {
            eta = std::min(eta, p[j] / (y[j] - psi[j]));
        }
        if (xi[j] > 0.0) {
            eta = std::min(eta, mu[j] / xi[j]);
        }
    }
    return eta;
}

} // namespace obsctl
