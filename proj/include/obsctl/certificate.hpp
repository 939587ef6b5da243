#pragma once

// Global-optimality test for stationary points of the penalized problem.
// A stationary point is a global minimum when |eta| <= mu* with
//   eta = min( min_{N+} p/(y - psi), min_{N-} 3p/(psi - y), 0 ),
//   mu* = alpha lambda1 + sqrt(alpha^2 lambda1^2 + alpha),
// provided p >= 0 on the biactive set N0. It is unique when |eta| < mu*.

#include "obsctl/fem.hpp"
#include "obsctl/penalized.hpp"
#include "obsctl/problem.hpp"
#include "obsctl/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace obsctl {

struct NodeClassification {
    std::vector<Index> plus;    ///< y - psi > tau
    std::vector<Index> zero;    ///< |y - psi| <= tau
    std::vector<Index> minus;   ///< y - psi < -tau
    double tau = 0.0;
};

/// Partition of the interior nodes by the sign of y - psi.
inline NodeClassification classify_nodes(const Vector& y_minus_psi, double tau = 0.0) {
    if (!(tau >= 0.0)) {
        throw ConfigError("classification tolerance must be nonnegative");
    }
    NodeClassification c;
    c.tau = tau;
    for (Index j = 0; j < y_minus_psi.size(); ++j) {
        const double d = y_minus_psi[j];
        if (d > tau) {
            c.plus.push_back(j);
        } else if (d < -tau) {
            c.minus.push_back(j);
        } else {
            c.zero.push_back(j);
        }
    }
    return c;
}

inline NodeClassification classify_nodes(const NodalField& y, const NodalField& psi, double tau = 0.0) {
    if (y.mesh_ptr() != psi.mesh_ptr()) {
        throw MeshMismatch("classify_nodes: y and psi on different meshes");
    }
    return classify_nodes(Vector(y.interior() - psi.interior()), tau);
}

enum class Verdict { CertifiedUnique, CertifiedGlobal, NotCertified };

inline std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::CertifiedUnique: return "CertifiedUnique";
    case Verdict::CertifiedGlobal: return "CertifiedGlobal";
    case Verdict::NotCertified: return "NotCertified";
    }
    return "NotCertified";
}

inline bool certified(Verdict v) { return v != Verdict::NotCertified; }

struct Certificate {
    double eta = 0.0;
    double min_ratio_pos = std::numeric_limits<double>::infinity();
    double min_ratio_neg = std::numeric_limits<double>::infinity();
    double threshold = 0.0;
    bool biactive_ok = true;
    std::vector<Index> biactive_violations;   ///< nodes in N0 with p < 0
    Verdict verdict = Verdict::NotCertified;
    double kappa = 0.0;                       ///< |eta| / threshold
};

/// eta and its two partial minima; threshold and verdict are left unset.
inline Certificate compute_eta(const Vector& y, const Vector& p, const Vector& psi, const NodeClassification& c) {
    if (y.size() != p.size() || y.size() != psi.size()) {
        throw DimensionMismatch("compute_eta: vector lengths differ");
    }
    Certificate cert;
    for (const Index j : c.plus) {
        cert.min_ratio_pos = std::min(cert.min_ratio_pos, p[j] / (y[j] - psi[j]));
    }
    for (const Index j : c.minus) {
        cert.min_ratio_neg = std::min(cert.min_ratio_neg, 3.0 * p[j] / (psi[j] - y[j]));
    }
    for (const Index j : c.zero) {
        if (p[j] < 0.0) {
            cert.biactive_ok = false;
            cert.biactive_violations.push_back(j);
        }
    }
    cert.eta = std::min({cert.min_ratio_pos, cert.min_ratio_neg, 0.0});
    return cert;
}

inline Certificate compute_eta(const NodalField& y, const NodalField& p, const NodalField& psi,
                               const NodeClassification& c) {
    if (y.mesh_ptr() != p.mesh_ptr() || y.mesh_ptr() != psi.mesh_ptr()) {
        throw MeshMismatch("compute_eta: fields on different meshes");
    }
    return compute_eta(Vector(y.interior()), Vector(p.interior()), Vector(psi.interior()), c);
}

/// Positive root of x^2 - 2 alpha lambda1 x - alpha = 0.
inline double threshold(double alpha, double lambda1) {
    if (!(alpha > 0.0) || !(lambda1 > 0.0)) {
        throw ConfigError("threshold needs alpha > 0 and lambda1 > 0");
    }
    const double a = alpha * lambda1;
    return a + std::sqrt(a * a + alpha);
}

inline constexpr double kGlobalBoundaryTolerance = 1e-14;

inline Verdict verdict_for(double eta, double mu_star, bool biactive_ok) {
    if (!biactive_ok) {
        return Verdict::NotCertified;
    }
    const double e = std::abs(eta);
    if (std::abs(e - mu_star) <= kGlobalBoundaryTolerance) {
        return Verdict::CertifiedGlobal;
    }
    return e < mu_star ? Verdict::CertifiedUnique : Verdict::NotCertified;
}

/// Fills in threshold, verdict and kappa.
inline Certificate finish_certificate(Certificate cert, double alpha, double lambda1) {
    cert.threshold = threshold(alpha, lambda1);
    cert.verdict = verdict_for(cert.eta, cert.threshold, cert.biactive_ok);
    cert.kappa = std::abs(cert.eta) / cert.threshold;
    return cert;
}

inline Certificate certify(const KktSolution& s, const ProblemData& data, double lambda1, double tau = 0.0) {
    const auto c = classify_nodes(s.y, data.psi_h, tau);
    return finish_certificate(compute_eta(s.y, s.p, data.psi_h, c), data.alpha, lambda1);
}

struct KappaTrack {
    double kappa_max = 0.0;
    bool uniform_ok = true;   ///< kappa_max < 1
};

inline KappaTrack track_kappa(const std::vector<Certificate>& certs) {
    KappaTrack t;
    for (const auto& c : certs) {
        t.kappa_max = std::max(t.kappa_max, std::abs(c.eta) / c.threshold);
    }
    t.uniform_ok = t.kappa_max < 1.0;
    return t;
}

inline KappaTrack track_kappa(const std::vector<KktSolution>& solutions, const ProblemData& data, double mu_star,
                              double tau = 0.0) {
    KappaTrack t;
    for (const auto& s : solutions) {
        const auto c = classify_nodes(s.y, data.psi_h, tau);
        t.kappa_max = std::max(t.kappa_max, std::abs(compute_eta(s.y, s.p, data.psi_h, c).eta) / mu_star);
    }
    t.uniform_ok = t.kappa_max < 1.0;
    return t;
}

/// Nodal multiplier densities of the penalized problem:
/// xi = -gamma^3 [(y - psi)^-]^3 and mu = -3 gamma^3 [(y - psi)^-]^2 p.
struct Multipliers {
    NodalField xi;
    NodalField mu;
};

inline Multipliers multiplier_fields(const NodalField& y, const NodalField& p, const NodalField& psi, double gamma) {
    if (y.mesh_ptr() != p.mesh_ptr() || y.mesh_ptr() != psi.mesh_ptr()) {
        throw MeshMismatch("multiplier_fields: fields on different meshes");
    }
    const double g3 = gamma * gamma * gamma;
    const Vector w = (y.values() - psi.values()).cwiseMin(0.0);
    Vector xi = -g3 * w.cwiseProduct(w).cwiseProduct(w);
    Vector mu = -3.0 * g3 * w.cwiseProduct(w).cwiseProduct(p.values());
    // boundary nodes carry no multiplier
    const Index n = y.mesh().num_interior();
    xi.tail(xi.size() - n).setZero();
    mu.tail(mu.size() - n).setZero();
    return {NodalField(y.mesh_ptr(), std::move(xi), FieldKind::ZeroTrace),
            NodalField(y.mesh_ptr(), std::move(mu), FieldKind::ZeroTrace)};
}

/// The same multipliers as interior load vectors entering the stationarity
/// system: the state equation reads A y = load(f + u) + xi_load and the
/// adjoint equation A p = M y - load_y0 - mu_load. Lumping gives
/// xi_load = m xi and mu_load = 3 gamma^3 m w^2 p (note the sign).
inline std::pair<Vector, Vector> stationarity_multipliers(const KktSolution& s, const ProblemData& data) {
    const auto [xi, mu] = multiplier_fields(s.y, s.p, data.psi_h, s.gamma);
    const auto m = data.lumped_interior();
    return {m.cwiseProduct(xi.interior()), -m.cwiseProduct(mu.interior())};
}

} // namespace obsctl
