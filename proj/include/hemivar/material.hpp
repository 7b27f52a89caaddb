// Hemitropic constitutive law: strain/torsion kinematics, force and couple
// stresses, energy density in direct and decomposed form, admissibility of
// the nine moduli.
#pragma once

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>

#include "hemivar/common.hpp"

namespace hemivar {

/// The nine hemitropic moduli plus mass density. rho only scales body
/// loads at assembly time; the constitutive law never reads it.
struct MaterialParams {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double delta = 0.0;
    double lambda = 0.0;
    double mu = 0.0;
    double nu = 0.0;
    double kappa = 0.0;
    double epsilon = 0.0;
    double rho = 1.0;
};

/// Asymmetric strain u_pq and torsion (curvature) om_pq at a point.
/// Both vanish identically on generalized rigid displacement fields.
struct StrainState {
    Mat3 u = Mat3::Zero();   // u(p,q) = d_p u_q - sum_k eps_pqk om_k
    Mat3 om = Mat3::Zero();  // om(p,q) = d_p om_q

    static StrainState Zero() { return StrainState{}; }
};

/// Force stress tau_pq and couple stress mu_pq; linear in StrainState.
struct StressState {
    Mat3 tau = Mat3::Zero();
    Mat3 mu = Mat3::Zero();
};

enum class EnergyMode { direct, decomposed };

/// Kinematics: strain and torsion tensors from field gradients and the
/// microrotation value.
inline StrainState strain_tensors(const Mat3& grad_u, const Mat3& grad_om, const Vec3& om) {
    StrainState s;
    s.om = grad_om;
    s.u = grad_u;
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
            for (int k = 0; k < 3; ++k) s.u(p, q) -= levi_civita(p, q, k) * om[k];
    return s;
}

/// Constitutive law expressed in strain-state variables. The microrotation
/// terms of the raw law cancel against the strain definition, so stresses
/// depend on (u_pq, om_pq) alone.
inline StressState stress_tensors(const StrainState& s, const MaterialParams& p) {
    StressState r;
    const double tr_u = s.u.trace();
    const double tr_om = s.om.trace();
    r.tau = (p.mu + p.alpha) * s.u + (p.mu - p.alpha) * s.u.transpose() +
            (p.kappa + p.nu) * s.om + (p.kappa - p.nu) * s.om.transpose();
    r.mu = (p.kappa + p.nu) * s.u + (p.kappa - p.nu) * s.u.transpose() +
           (p.gamma + p.epsilon) * s.om + (p.gamma - p.epsilon) * s.om.transpose();
    r.tau.diagonal().array() += p.lambda * tr_u + p.delta * tr_om;
    r.mu.diagonal().array() += p.delta * tr_u + p.beta * tr_om;
    return r;
}

namespace detail {

inline double frob(const Mat3& a, const Mat3& b) { return (a.array() * b.array()).sum(); }

/// eps contraction: v_i = sum_jk eps_ijk m_jk. Applied to the strain tensor
/// this equals curl u - 2 om; applied to the torsion tensor it equals curl om.
inline Vec3 eps_contract(const Mat3& m) {
    return Vec3(m(1, 2) - m(2, 1), m(2, 0) - m(0, 2), m(0, 1) - m(1, 0));
}

}  // namespace detail

/// Symmetric bilinear energy density E(U,U'). The direct mode evaluates the
/// defining tensor sum; the decomposed mode evaluates the equivalent
/// completed-square form, which requires 3*lambda+2*mu > 0 and alpha > 0
/// (and mu > 0) as divisors.
inline double energy_density(const StrainState& s, const StrainState& s2,
                             const MaterialParams& p, EnergyMode mode = EnergyMode::direct) {
    using detail::frob;
    if (mode == EnergyMode::direct) {
        double e = 0.0;
        e += (p.mu + p.alpha) * frob(s2.u, s.u);
        e += (p.mu - p.alpha) * frob(s2.u, s.u.transpose());
        e += (p.kappa + p.nu) * (frob(s2.u, s.om) + frob(s2.om, s.u));
        e += (p.kappa - p.nu) *
             (frob(s2.u, s.om.transpose()) + frob(s2.om, s.u.transpose()));
        e += (p.gamma + p.epsilon) * frob(s2.om, s.om);
        e += (p.gamma - p.epsilon) * frob(s2.om, s.om.transpose());
        e += p.delta * (s2.u.trace() * s.om.trace() + s2.om.trace() * s.u.trace());
        e += p.lambda * s2.u.trace() * s.u.trace();
        e += p.beta * s2.om.trace() * s.om.trace();
        return e;
    }

    const double k3l2m = 3.0 * p.lambda + 2.0 * p.mu;
    if (k3l2m <= 0.0 || p.alpha <= 0.0 || p.mu <= 0.0)
        throw std::domain_error(
            "decomposed energy form needs 3*lambda+2*mu > 0, alpha > 0 and mu > 0");
    const double k3d2k = 3.0 * p.delta + 2.0 * p.kappa;

    const double div_u = s.u.trace(), div_u2 = s2.u.trace();
    const double div_om = s.om.trace(), div_om2 = s2.om.trace();
    const Vec3 cu = detail::eps_contract(s.u);    // curl u - 2 om
    const Vec3 cu2 = detail::eps_contract(s2.u);
    const Vec3 co = detail::eps_contract(s.om);   // curl om
    const Vec3 co2 = detail::eps_contract(s2.om);

    double e = 0.0;
    e += k3l2m / 3.0 * (div_u + k3d2k / k3l2m * div_om) * (div_u2 + k3d2k / k3l2m * div_om2);
    e += (3.0 * p.beta + 2.0 * p.gamma - k3d2k * k3d2k / k3l2m) / 3.0 * div_om * div_om2;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) {
            if (k != j) {
                const double su = s.u(k, j) + s.u(j, k);
                const double su2 = s2.u(k, j) + s2.u(j, k);
                const double so = s.om(k, j) + s.om(j, k);
                const double so2 = s2.om(k, j) + s2.om(j, k);
                e += p.mu / 2.0 * (su + p.kappa / p.mu * so) * (su2 + p.kappa / p.mu * so2);
                e += (p.gamma - p.kappa * p.kappa / p.mu) *
                     (0.5 * so * so2 +
                      (s.om(k, k) - s.om(j, j)) * (s2.om(k, k) - s2.om(j, j)) / 3.0);
            }
            const double du = s.u(k, k) - s.u(j, j);
            const double du2 = s2.u(k, k) - s2.u(j, j);
            const double dom = s.om(k, k) - s.om(j, j);
            const double dom2 = s2.om(k, k) - s2.om(j, j);
            e += p.mu / 3.0 * (du + p.kappa / p.mu * dom) * (du2 + p.kappa / p.mu * dom2);
        }
    e += p.alpha * (cu + p.nu / p.alpha * co).dot(cu2 + p.nu / p.alpha * co2);
    e += (p.epsilon - p.nu * p.nu / p.alpha) * co.dot(co2);
    return e;
}

/// Packs a StrainState as an 18-vector: row-major u_pq first, then om_pq.
inline Vec18 strain_vector(const StrainState& s) {
    Vec18 v;
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
            v[3 * p + q] = s.u(p, q);
            v[9 + 3 * p + q] = s.om(p, q);
        }
    return v;
}

inline StrainState strain_from_vector(const Vec18& v) {
    StrainState s;
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
            s.u(p, q) = v[3 * p + q];
            s.om(p, q) = v[9 + 3 * p + q];
        }
    return s;
}

/// The 18x18 symmetric matrix M with E(U,U') = vec(U)^T M vec(U') in the
/// ordering of strain_vector. Single source of truth for c0_margin and for
/// element stiffness assembly.
inline Mat18 quadratic_form_matrix(const MaterialParams& p) {
    Mat18 m;
    std::array<StrainState, 18> basis;
    for (int i = 0; i < 18; ++i) {
        Vec18 e = Vec18::Zero();
        e[i] = 1.0;
        basis[i] = strain_from_vector(e);
    }
    for (int i = 0; i < 18; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = energy_density(basis[i], basis[j], p, EnergyMode::direct);
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

struct AdmissibilityCondition {
    const char* name;
    double value;
    double scale;
};

namespace detail {

inline std::vector<AdmissibilityCondition> full_condition_list(const MaterialParams& p) {
    const double s0 =
        std::max({std::abs(p.alpha), std::abs(p.beta), std::abs(p.gamma), std::abs(p.delta),
                  std::abs(p.lambda), std::abs(p.mu), std::abs(p.nu), std::abs(p.kappa),
                  std::abs(p.epsilon), 1e-300});
    const double s1 = s0, s2 = s0 * s0, s3 = s0 * s0 * s0;
    const double la = p.lambda, mu = p.mu, al = p.alpha, be = p.beta, ga = p.gamma,
                 de = p.delta, nu = p.nu, ka = p.kappa, ep = p.epsilon;
    return {
        {"mu > 0", mu, s1},
        {"alpha > 0", al, s1},
        {"gamma > 0", ga, s1},
        {"epsilon > 0", ep, s1},
        {"lambda + 2 mu > 0", la + 2 * mu, s1},
        {"mu gamma - kappa^2 > 0", mu * ga - ka * ka, s2},
        {"alpha epsilon - nu^2 > 0", al * ep - nu * nu, s2},
        {"(lambda+mu)(beta+gamma) - (delta+kappa)^2 > 0",
         (la + mu) * (be + ga) - (de + ka) * (de + ka), s2},
        {"(3 lambda+2 mu)(3 beta+2 gamma) - (3 delta+2 kappa)^2 > 0",
         (3 * la + 2 * mu) * (3 * be + 2 * ga) - (3 * de + 2 * ka) * (3 * de + 2 * ka), s2},
        {"(mu+alpha)(gamma+epsilon) - (kappa+nu)^2 > 0",
         (mu + al) * (ga + ep) - (ka + nu) * (ka + nu), s2},
        {"(lambda+2 mu)(beta+2 gamma) - (delta+2 kappa)^2 > 0",
         (la + 2 * mu) * (be + 2 * ga) - (de + 2 * ka) * (de + 2 * ka), s2},
        {"mu[(lambda+mu)(beta+gamma)-(delta+kappa)^2] + (lambda+mu)(mu gamma-kappa^2) > 0",
         mu * ((la + mu) * (be + ga) - (de + ka) * (de + ka)) +
             (la + mu) * (mu * ga - ka * ka),
         s3},
        {"mu[(3l+2m)(3b+2g)-(3d+2k)^2] + (3l+2m)(mu gamma-kappa^2) > 0",
         mu * ((3 * la + 2 * mu) * (3 * be + 2 * ga) - (3 * de + 2 * ka) * (3 * de + 2 * ka)) +
             (3 * la + 2 * mu) * (mu * ga - ka * ka),
         s3},
    };
}

inline std::vector<AdmissibilityCondition> reduced_condition_list(const MaterialParams& p) {
    const double s0 =
        std::max({std::abs(p.alpha), std::abs(p.beta), std::abs(p.gamma), std::abs(p.delta),
                  std::abs(p.lambda), std::abs(p.mu), std::abs(p.nu), std::abs(p.kappa),
                  std::abs(p.epsilon), 1e-300});
    const double s1 = s0, s2 = s0 * s0;
    const double la = p.lambda, mu = p.mu, al = p.alpha, be = p.beta, ga = p.gamma,
                 de = p.delta, nu = p.nu, ka = p.kappa, ep = p.epsilon;
    return {
        {"mu > 0", mu, s1},
        {"alpha > 0", al, s1},
        {"gamma > 0", ga, s1},
        {"epsilon > 0", ep, s1},
        {"3 lambda + 2 mu > 0", 3 * la + 2 * mu, s1},
        {"mu gamma - kappa^2 > 0", mu * ga - ka * ka, s2},
        {"alpha epsilon - nu^2 > 0", al * ep - nu * nu, s2},
        {"(mu+alpha)(gamma+epsilon) - (kappa+nu)^2 > 0",
         (mu + al) * (ga + ep) - (ka + nu) * (ka + nu), s2},
        {"(3 lambda+2 mu)(3 beta+2 gamma) - (3 delta+2 kappa)^2 > 0",
         (3 * la + 2 * mu) * (3 * be + 2 * ga) - (3 * de + 2 * ka) * (3 * de + 2 * ka), s2},
    };
}

// Strict inequalities are taken as value > kStrictTol * scale to avoid
// floating-point false positives at equality boundaries.
inline constexpr double kStrictTol = 1e-14;

inline bool holds(const std::vector<AdmissibilityCondition>& conds) {
    for (const auto& c : conds)
        if (!(c.value > kStrictTol * c.scale)) return false;
    return true;
}

inline double min_raw_margin(const std::vector<AdmissibilityCondition>& conds) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : conds) m = std::min(m, c.value);
    return m;
}

inline double min_normalized_margin(const std::vector<AdmissibilityCondition>& conds) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : conds) m = std::min(m, c.value / c.scale);
    return m;
}

}  // namespace detail

struct AdmissibilityReport {
    bool admissible = false;
    double margin = 0.0;             // minimum raw slack over the full list
    double normalized_margin = 0.0;  // minimum slack scaled per inequality
    bool reduced_applies = false;    // 3 lambda + 2 mu > 0
    bool reduced_admissible = false;
    double reduced_margin = 0.0;
};

/// Evaluates the full positivity condition list; when 3*lambda+2*mu > 0 the
/// reduced list is evaluated too and the two verdicts are cross-checked
/// (they are equivalent on that regime). Never throws on inadmissible input.
inline AdmissibilityReport check_admissible(const MaterialParams& p) {
    AdmissibilityReport r;
    const auto full = detail::full_condition_list(p);
    r.admissible = detail::holds(full);
    r.margin = detail::min_raw_margin(full);
    r.normalized_margin = detail::min_normalized_margin(full);
    r.reduced_applies = 3.0 * p.lambda + 2.0 * p.mu > 0.0;
    if (r.reduced_applies) {
        const auto red = detail::reduced_condition_list(p);
        r.reduced_admissible = detail::holds(red);
        r.reduced_margin = detail::min_raw_margin(red);
        const double band = 1e-12;
        if (r.reduced_admissible != r.admissible &&
            std::abs(r.normalized_margin) > band &&
            std::abs(detail::min_normalized_margin(red)) > band)
            throw std::logic_error("full and reduced admissibility lists disagree");
    }
    return r;
}

/// Largest c0 with E(U,U) >= c0 * sum(u_pq^2 + om_pq^2): the minimum
/// eigenvalue of the 18x18 quadratic form. Positive iff admissible.
inline double c0_margin(const MaterialParams& p) {
    Eigen::SelfAdjointEigenSolver<Mat18> es(quadratic_form_matrix(p),
                                            Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Boundary traction pair (tau^(n), mu^(n)) by contraction of the stresses
/// with a unit normal.
inline Vec6 traction(const StrainState& s, const MaterialParams& p, const Vec3& n) {
    if (std::abs(n.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("traction: normal must be a unit vector");
    const StressState st = stress_tensors(s, p);
    Vec6 t;
    t.head<3>() = st.tau.transpose() * n;  // tau^(n)_q = sum_p tau_pq n_p
    t.tail<3>() = st.mu.transpose() * n;
    return t;
}

}  // namespace hemivar
