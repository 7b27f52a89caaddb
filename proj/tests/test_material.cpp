#include "hemivar/material.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace hemivar;

namespace {

MaterialParams unit_sample() {
    MaterialParams p;
    p.mu = p.alpha = p.gamma = p.epsilon = p.lambda = p.beta = 1.0;
    p.delta = p.kappa = p.nu = 0.0;
    return p;
}

StrainState random_strain(Rng& rng) {
    StrainState s;
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
            s.u(p, q) = rng.normal();
            s.om(p, q) = rng.normal();
        }
    return s;
}

// Constitutive law evaluated from raw field gradients, following the tensor
// definitions verbatim; independent of the strain-state route in the library.
StressState raw_stress_oracle(const Mat3& gu, const Mat3& go, const Vec3& om,
                              const MaterialParams& p) {
    StressState r;
    const double div_u = gu.trace(), div_om = go.trace();
    for (int pp = 0; pp < 3; ++pp)
        for (int q = 0; q < 3; ++q) {
            double eps_pq = 0.0, eps_qp = 0.0;
            for (int k = 0; k < 3; ++k) {
                eps_pq += levi_civita(pp, q, k) * om[k];
                eps_qp += levi_civita(q, pp, k) * om[k];
            }
            r.tau(pp, q) = (p.mu + p.alpha) * gu(pp, q) + (p.mu - p.alpha) * gu(q, pp) +
                           (p.kappa + p.nu) * go(pp, q) + (p.kappa - p.nu) * go(q, pp) -
                           2.0 * p.alpha * eps_pq;
            r.mu(pp, q) = (p.kappa + p.nu) * (gu(pp, q) - eps_pq) +
                          (p.kappa - p.nu) * (gu(q, pp) - eps_qp) +
                          (p.gamma + p.epsilon) * go(pp, q) +
                          (p.gamma - p.epsilon) * go(q, pp);
            if (pp == q) {
                r.tau(pp, q) += p.lambda * div_u + p.delta * div_om;
                r.mu(pp, q) += p.delta * div_u + p.beta * div_om;
            }
        }
    return r;
}

// Traction via the 6x6 boundary stress operator applied to the field,
// independent of the stress-contraction route.
Vec6 operator_traction_oracle(const Mat3& gu, const Mat3& go, const Vec3& om,
                              const MaterialParams& p, const Vec3& n) {
    Vec6 t;
    const double div_u = gu.trace(), div_om = go.trace();
    const Vec3 dn_u = gu.transpose() * n;   // d_n u_p
    const Vec3 dn_om = go.transpose() * n;
    for (int pp = 0; pp < 3; ++pp) {
        double ngrad_u = 0.0, ngrad_om = 0.0, curl_u = 0.0, curl_om = 0.0;
        for (int q = 0; q < 3; ++q) {
            ngrad_u += n[q] * gu(pp, q);
            ngrad_om += n[q] * go(pp, q);
        }
        for (int q = 0; q < 3; ++q)
            for (int k = 0; k < 3; ++k) {
                curl_u += levi_civita(pp, q, k) * n[k] * om[q];
                curl_om += levi_civita(pp, q, k) * n[k] * om[q];
            }
        t[pp] = (p.mu + p.alpha) * dn_u[pp] + (p.mu - p.alpha) * ngrad_u +
                p.lambda * n[pp] * div_u + (p.kappa + p.nu) * dn_om[pp] +
                (p.kappa - p.nu) * ngrad_om + p.delta * n[pp] * div_om -
                2.0 * p.alpha * curl_u;
        t[3 + pp] = (p.kappa + p.nu) * dn_u[pp] + (p.kappa - p.nu) * ngrad_u +
                    p.delta * n[pp] * div_u + (p.gamma + p.epsilon) * dn_om[pp] +
                    (p.gamma - p.epsilon) * ngrad_om + p.beta * n[pp] * div_om -
                    2.0 * p.nu * curl_om;
    }
    return t;
}

}  // namespace

TEST(Material, StrainTensorsZeroInput) {
    const StrainState s = strain_tensors(Mat3::Zero(), Mat3::Zero(), Vec3::Zero());
    EXPECT_EQ(s.u.norm(), 0.0);
    EXPECT_EQ(s.om.norm(), 0.0);
}

TEST(Material, StrainTensorsRigidField) {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec3 a = rng.unit_vector() * rng.uniform(0.1, 3.0);
        // u = a x x + b, om = a: d_p u_q = skew(a)(q,p), grad_om = 0
        const StrainState s = strain_tensors(skew(a).transpose(), Mat3::Zero(), a);
        EXPECT_LT(s.u.norm(), 1e-15 * a.norm());
        EXPECT_EQ(s.om.norm(), 0.0);
    }
}

TEST(Material, StrainTensorsShear) {
    // u = (x2, 0, 0): only du_1/dx_2 nonzero, so u_21 = 1.
    Mat3 gu = Mat3::Zero();
    gu(1, 0) = 1.0;
    const StrainState s = strain_tensors(gu, Mat3::Zero(), Vec3::Zero());
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
            EXPECT_DOUBLE_EQ(s.u(p, q), (p == 1 && q == 0) ? 1.0 : 0.0);
    EXPECT_EQ(s.om.norm(), 0.0);
}

TEST(Material, StressTensorsZeroAndRigid) {
    const MaterialParams p = test_support::admissible_sample(3);
    const StressState z = stress_tensors(StrainState::Zero(), p);
    EXPECT_EQ(z.tau.norm(), 0.0);
    EXPECT_EQ(z.mu.norm(), 0.0);

    const Vec3 a(0.4, -1.2, 0.7);
    const StressState r = stress_tensors(strain_tensors(skew(a).transpose(), Mat3::Zero(), a), p);
    EXPECT_LT(r.tau.norm(), 1e-14);
    EXPECT_LT(r.mu.norm(), 1e-14);
}

TEST(Material, StressMatchesRawGradientRoute) {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const MaterialParams p = test_support::admissible_sample(rep);
        Mat3 gu, go;
        Vec3 om;
        for (int i = 0; i < 3; ++i) {
            om[i] = rng.normal();
            for (int j = 0; j < 3; ++j) {
                gu(i, j) = rng.normal();
                go(i, j) = rng.normal();
            }
        }
        const StressState lib = stress_tensors(strain_tensors(gu, go, om), p);
        const StressState raw = raw_stress_oracle(gu, go, om, p);
        EXPECT_LT((lib.tau - raw.tau).norm(), 1e-12 * (1.0 + raw.tau.norm()));
        EXPECT_LT((lib.mu - raw.mu).norm(), 1e-12 * (1.0 + raw.mu.norm()));
    }
}

TEST(Material, EnergyEqualsStressStrainContraction) {
    // E(U,U) = sum_pq (tau_pq u_pq + mu_pq om_pq); the potential energy is E/2.
    Rng rng(13);
    for (int rep = 0; rep < 50; ++rep) {
        const MaterialParams p = test_support::admissible_sample(100 + rep);
        const StrainState s = random_strain(rng);
        const StressState st = stress_tensors(s, p);
        const double contraction =
            (st.tau.array() * s.u.array()).sum() + (st.mu.array() * s.om.array()).sum();
        const double e = energy_density(s, s, p);
        EXPECT_NEAR(contraction, e, 1e-12 * std::abs(e));
    }
}

TEST(Material, EnergySymmetry) {
    Rng rng(17);
    const MaterialParams p = test_support::admissible_sample(1);
    for (int rep = 0; rep < 30; ++rep) {
        const StrainState a = random_strain(rng), b = random_strain(rng);
        const double eab = energy_density(a, b, p);
        const double eba = energy_density(b, a, p);
        EXPECT_NEAR(eab, eba, 1e-12 * (1.0 + std::abs(eab)));
    }
}

TEST(Material, EnergyZeroOnRigidAndZeroStates) {
    const MaterialParams p = unit_sample();
    EXPECT_EQ(energy_density(StrainState::Zero(), StrainState::Zero(), p), 0.0);
    const Vec3 a(1.0, 2.0, -0.5);
    const StrainState rigid = strain_tensors(skew(a).transpose(), Mat3::Zero(), a);
    EXPECT_LT(std::abs(energy_density(rigid, rigid, p)), 1e-28);
}

TEST(Material, DirectAndDecomposedAgree) {
    Rng rng(23);
    for (int ps = 0; ps < 20; ++ps) {
        const MaterialParams p = test_support::admissible_sample(200 + ps);
        ASSERT_GT(3.0 * p.lambda + 2.0 * p.mu, 0.0);
        for (int rep = 0; rep < 100; ++rep) {
            const StrainState a = random_strain(rng), b = random_strain(rng);
            const double direct = energy_density(a, b, p, EnergyMode::direct);
            const double decomp = energy_density(a, b, p, EnergyMode::decomposed);
            const double scale = std::abs(direct) + std::abs(decomp) + 1e-30;
            EXPECT_LT(std::abs(direct - decomp), 1e-12 * scale);
        }
    }
}

TEST(Material, DecomposedRejectsBadDivisors) {
    MaterialParams p = unit_sample();
    const StrainState s;
    p.lambda = -10.0;  // 3 lambda + 2 mu < 0
    EXPECT_THROW(energy_density(s, s, p, EnergyMode::decomposed), std::domain_error);
    p = unit_sample();
    p.alpha = 0.0;
    EXPECT_THROW(energy_density(s, s, p, EnergyMode::decomposed), std::domain_error);
    EXPECT_NO_THROW(energy_density(s, s, unit_sample(), EnergyMode::decomposed));
}

TEST(Material, CheckAdmissibleSamples) {
    const AdmissibilityReport ok = check_admissible(unit_sample());
    EXPECT_TRUE(ok.admissible);
    EXPECT_GT(ok.margin, 0.0);
    EXPECT_TRUE(ok.reduced_applies);
    EXPECT_TRUE(ok.reduced_admissible);

    MaterialParams p = unit_sample();
    p.alpha = 0.0;
    EXPECT_FALSE(check_admissible(p).admissible);

    // kappa^2 = mu gamma violates the strict inequality.
    p = unit_sample();
    p.kappa = 1.0;
    EXPECT_FALSE(check_admissible(p).admissible);
}

TEST(Material, C0MarginSignsAndScaling) {
    const MaterialParams p = unit_sample();
    const double c0 = c0_margin(p);
    EXPECT_GT(c0, 0.0);

    MaterialParams bad = p;
    bad.alpha = 0.0;
    EXPECT_LE(c0_margin(bad), 1e-14);

    MaterialParams scaled = p;
    const double t = 3.5;
    scaled.alpha *= t; scaled.beta *= t; scaled.gamma *= t; scaled.delta *= t;
    scaled.lambda *= t; scaled.mu *= t; scaled.nu *= t; scaled.kappa *= t;
    scaled.epsilon *= t;
    EXPECT_NEAR(c0_margin(scaled), t * c0, 1e-12 * t * c0);
}

TEST(Material, AdmissibilityEquivalences) {
    // full list <=> reduced list <=> positive definite 18x18 form, sampled.
    Rng rng(31);
    int checked = 0;
    for (int rep = 0; rep < 4000; ++rep) {
        MaterialParams p;
        p.mu = rng.uniform(-0.5, 2.0);
        p.alpha = rng.uniform(-0.5, 2.0);
        p.gamma = rng.uniform(-0.5, 2.0);
        p.epsilon = rng.uniform(-0.5, 2.0);
        p.lambda = rng.uniform(-0.5, 2.0);
        p.beta = rng.uniform(-0.5, 2.0);
        p.delta = rng.uniform(-1.0, 1.0);
        p.kappa = rng.uniform(-1.0, 1.0);
        p.nu = rng.uniform(-1.0, 1.0);
        if (3.0 * p.lambda + 2.0 * p.mu <= 0.0) continue;
        const AdmissibilityReport r = check_admissible(p);
        if (std::abs(r.normalized_margin) <= 1e-12) continue;  // boundary band
        const double c0 = c0_margin(p);
        if (std::abs(c0) <= 1e-12) continue;
        EXPECT_EQ(r.admissible, r.reduced_admissible);
        EXPECT_EQ(r.admissible, c0 > 0.0);
        ++checked;
    }
    EXPECT_GT(checked, 1000);
}

TEST(Material, StressIsGradientOfHalfEnergy) {
    // tau/mu entries = d(E/2)/d(strain entry), by central differences.
    Rng rng(37);
    for (int rep = 0; rep < 10; ++rep) {
        const MaterialParams p = test_support::admissible_sample(300 + rep);
        const StrainState s = random_strain(rng);
        const StressState st = stress_tensors(s, p);
        const Vec18 sv = strain_vector(s);
        const Vec18 stv = [&] {
            StrainState tmp;
            tmp.u = st.tau;
            tmp.om = st.mu;
            return strain_vector(tmp);
        }();
        const double h = 1e-6;
        for (int i = 0; i < 18; ++i) {
            Vec18 up = sv, dn = sv;
            up[i] += h;
            dn[i] -= h;
            const StrainState sp = strain_from_vector(up), sm = strain_from_vector(dn);
            const double fd =
                (energy_density(sp, sp, p) / 2.0 - energy_density(sm, sm, p) / 2.0) /
                (2.0 * h);
            EXPECT_NEAR(fd, stv[i], 1e-6 * (1.0 + std::abs(stv[i])));
        }
    }
}

TEST(Material, TractionContractionMatchesOperatorRoute) {
    Rng rng(41);
    for (int rep = 0; rep < 40; ++rep) {
        const MaterialParams p = test_support::admissible_sample(400 + rep);
        Mat3 gu, go;
        Vec3 om;
        for (int i = 0; i < 3; ++i) {
            om[i] = rng.normal();
            for (int j = 0; j < 3; ++j) {
                gu(i, j) = rng.normal();
                go(i, j) = rng.normal();
            }
        }
        const Vec3 n = rng.unit_vector();
        const Vec6 lib = traction(strain_tensors(gu, go, om), p, n);
        const Vec6 orc = operator_traction_oracle(gu, go, om, p, n);
        EXPECT_LT((lib - orc).norm(), 1e-12 * (1.0 + orc.norm()));
    }
}

TEST(Material, TractionZeroAndRigidAndBadNormal) {
    const MaterialParams p = unit_sample();
    const Vec3 n(0.0, 0.0, 1.0);
    EXPECT_EQ(traction(StrainState::Zero(), p, n).norm(), 0.0);
    const Vec3 a(0.3, 0.4, -0.9);
    EXPECT_LT(traction(strain_tensors(skew(a).transpose(), Mat3::Zero(), a), p, n).norm(), 1e-14);
    EXPECT_THROW(traction(StrainState::Zero(), p, Vec3(0, 0, 2)), std::invalid_argument);
}
