// Galerkin discretization of the energy form with piecewise-linear
// 6-component fields: stiffness/mass/H1 Gram assembly, constrained linear
// solves (Dirichlet elimination and nodewise normal clamping), discrete
// Green-identity residual and Korn constants.
#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/IterativeLinearSolvers>

#include <functional>
#include <optional>

#include "hemivar/material.hpp"
#include "hemivar/mesh.hpp"

namespace hemivar {

inline constexpr int kDofsPerNode = 6;

struct StiffnessMatrix {
    SpMat K;                  // 6*(#nodes), exactly symmetric
    int element_count = 0;
    int quadrature_order = 2;
};

struct SolverOptions {
    // above this dof count the direct factorization gives way to
    // diagonally preconditioned CG (config key solver.direct_threshold)
    int direct_threshold = 200000;
    double cg_tol = 1e-12;
    int cg_max_iter = 200000;
};

namespace detail {

struct ElementGeometry {
    std::array<Vec3, 4> grad;  // constant P1 shape gradients
    double volume = 0.0;
};

inline ElementGeometry element_geometry(const Mesh& m, const std::array<int, 4>& t) {
    ElementGeometry g;
    Mat3 d;
    for (int c = 0; c < 3; ++c) d.col(c) = m.nodes[t[c + 1]] - m.nodes[t[0]];
    g.volume = d.determinant() / 6.0;
    const Mat3 dinv = d.inverse();
    for (int a = 1; a < 4; ++a) g.grad[a] = dinv.row(a - 1).transpose();
    g.grad[0] = -(g.grad[1] + g.grad[2] + g.grad[3]);
    return g;
}

// 4-point degree-2 tet rule in barycentric coordinates, weights 1/4.
inline const std::array<std::array<double, 4>, 4>& tet_rule_deg2() {
    static const double a = 0.5854101966249685, b = 0.1381966011250105;
    static const std::array<std::array<double, 4>, 4> pts = {{
        {a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}}};
    return pts;
}

/// Strain-interpolation matrix at a point with shape values N: maps the 24
/// element dofs (4 nodes x (u, om)) to the 18 strain components.
inline Eigen::Matrix<double, 18, 24> element_b_matrix(const ElementGeometry& g,
                                                      const std::array<double, 4>& N) {
    Eigen::Matrix<double, 18, 24> B = Eigen::Matrix<double, 18, 24>::Zero();
    for (int a = 0; a < 4; ++a)
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) {
                B(3 * p + q, 6 * a + q) += g.grad[a][p];          // d_p u_q
                B(9 + 3 * p + q, 6 * a + 3 + q) += g.grad[a][p];  // d_p om_q
                for (int k = 0; k < 3; ++k)                       // -eps_pqk om_k
                    B(3 * p + q, 6 * a + 3 + k) -= levi_civita(p, q, k) * N[a];
            }
    return B;
}

}  // namespace detail

/// Assembles the symmetric stiffness K with B(U,U) = U^T K U, exact for P1
/// fields (the integrand is quadratic; the 4-point rule integrates it
/// exactly). Each symmetric entry pair is evaluated once, so K is exactly
/// symmetric.
inline StiffnessMatrix assemble_stiffness(const Mesh& m, const MaterialParams& p) {
    if (!check_admissible(p).admissible)
        throw std::invalid_argument("assemble_stiffness: inadmissible material");
    const Mat18 M = quadratic_form_matrix(p);
    std::vector<Triplet> trips;
    trips.reserve(m.tets.size() * 24 * 24);
    for (const auto& t : m.tets) {
        const auto g = detail::element_geometry(m, t);
        Eigen::Matrix<double, 24, 24> Ke = Eigen::Matrix<double, 24, 24>::Zero();
        for (const auto& bary : detail::tet_rule_deg2()) {
            const auto B = detail::element_b_matrix(g, bary);
            const Eigen::Matrix<double, 18, 24> C = M * B;
            const double w = g.volume / 4.0;
            for (int i = 0; i < 24; ++i)
                for (int j = i; j < 24; ++j) {
                    const double v = w * B.col(i).dot(C.col(j));
                    Ke(i, j) += v;
                    if (j != i) Ke(j, i) += v;
                }
        }
        for (int i = 0; i < 24; ++i)
            for (int j = 0; j < 24; ++j)
                trips.emplace_back(6 * t[i / 6] + i % 6, 6 * t[j / 6] + j % 6, Ke(i, j));
    }
    StiffnessMatrix s;
    s.K.resize(m.num_dofs(), m.num_dofs());
    s.K.setFromTriplets(trips.begin(), trips.end());
    s.element_count = static_cast<int>(m.tets.size());
    return s;
}

/// Scalar-consistent L2 Gram on 6-component P1 fields.
inline SpMat mass_gram(const Mesh& m) {
    std::vector<Triplet> trips;
    for (const auto& t : m.tets) {
        const double V = tet_volume(m, t);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const double v = V / 20.0 * (a == b ? 2.0 : 1.0);
                for (int c = 0; c < 6; ++c)
                    trips.emplace_back(6 * t[a] + c, 6 * t[b] + c, v);
            }
    }
    SpMat M(m.num_dofs(), m.num_dofs());
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

/// Full H1 Gram: mass plus the gradient Gram of each component.
inline SpMat h1_gram(const Mesh& m) {
    std::vector<Triplet> trips;
    for (const auto& t : m.tets) {
        const auto g = detail::element_geometry(m, t);
        const double V = g.volume;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const double v =
                    V / 20.0 * (a == b ? 2.0 : 1.0) + V * g.grad[a].dot(g.grad[b]);
                for (int c = 0; c < 6; ++c)
                    trips.emplace_back(6 * t[a] + c, 6 * t[b] + c, v);
            }
    }
    SpMat M(m.num_dofs(), m.num_dofs());
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

/// Volume and surface load data. Body load given nodally (P1), surface data
/// per boundary-node index of the TraceMap; surface terms use the same
/// lumped nodal quadrature as the friction functional.
struct LoadData {
    VecX body;                       // 6*num_nodes or empty
    std::vector<double> F0;          // scalar normal traction per boundary node (S2)
    std::vector<Vec3> phi;           // couple traction per boundary node (S2)
    std::vector<Vec6> psi_s1;        // 6-vector traction per boundary node (S1)
};

inline VecX assemble_load(const Mesh& m, const TraceMap& tm, const LoadData& l) {
    VecX f = VecX::Zero(m.num_dofs());
    if (l.body.size() > 0) {
        if (l.body.size() != m.num_dofs())
            throw std::invalid_argument("assemble_load: body load size mismatch");
        for (const auto& t : m.tets) {
            const double V = tet_volume(m, t);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    const double v = V / 20.0 * (a == b ? 2.0 : 1.0);
                    for (int c = 0; c < 6; ++c) f[6 * t[a] + c] += v * l.body[6 * t[b] + c];
                }
        }
    }
    const int nb = tm.num_boundary_nodes();
    auto check = [&](size_t got, const char* name) {
        if (got != 0 && static_cast<int>(got) != nb)
            throw std::invalid_argument(std::string("assemble_load: ") + name +
                                        " size mismatch");
    };
    check(l.F0.size(), "F0");
    check(l.phi.size(), "phi");
    check(l.psi_s1.size(), "psi_s1");
    for (int b = 0; b < nb; ++b) {
        const int node = tm.boundary_nodes[b];
        if (!l.F0.empty())
            f.segment<3>(6 * node) += tm.weight_s2[b] * l.F0[b] * tm.normal[b];
        if (!l.phi.empty()) f.segment<3>(6 * node + 3) += tm.weight_s2[b] * l.phi[b];
        if (!l.psi_s1.empty()) f.segment<6>(6 * node) += tm.weight_s1[b] * l.psi_s1[b];
    }
    return f;
}

struct DirichletBC {
    std::vector<int> dofs;      // global dof indices
    std::vector<double> values; // same length
};

namespace detail {

/// Counts eigenvalues of the (symmetric) reduced matrix below tol * max;
/// used to report the numerical null space of a singular constrained solve.
inline int numerical_null_dim(const SpMat& A) {
    if (A.rows() > 8000)
        return -1;  // too large for a dense diagnostic
    Eigen::SelfAdjointEigenSolver<MatX> es(MatX(A), Eigen::EigenvaluesOnly);
    const double scale = std::max(std::abs(es.eigenvalues().maxCoeff()),
                                  std::abs(es.eigenvalues().minCoeff()));
    int dim = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()[i]) <= 1e-10 * scale) ++dim;
    return dim;
}

inline VecX solve_reduced(const SpMat& A, const VecX& b, const SolverOptions& opts,
                          const char* context) {
    VecX x;
    bool ok = false;
    if (A.rows() <= opts.direct_threshold) {
        Eigen::SimplicialLDLT<SpMat> ldlt(A);
        if (ldlt.info() == Eigen::Success) {
            // near-zero pivots expose rank deficiency even when the right-hand
            // side happens to be consistent
            const VecX d = ldlt.vectorD().cwiseAbs();
            if (d.size() > 0 && d.minCoeff() <= 1e-12 * d.maxCoeff()) {
                const int dim = numerical_null_dim(A);
                if (dim > 0)
                    throw SingularSystemError(
                        std::string(context) + ": singular constrained system", dim);
            }
            x = ldlt.solve(b);
            ok = x.allFinite();
        }
    } else {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg(A);
        cg.setTolerance(opts.cg_tol);
        cg.setMaxIterations(opts.cg_max_iter);
        x = cg.solve(b);
        ok = cg.info() == Eigen::Success && x.allFinite();
    }
    const double scale = b.norm() + A.norm() * (ok ? x.norm() : 0.0);
    if (!ok || (scale > 0.0 && (A * x - b).norm() > 1e-10 * scale)) {
        const int dim = numerical_null_dim(A);
        if (dim > 0)
            throw SingularSystemError(std::string(context) + ": singular constrained system",
                                      dim);
        throw std::runtime_error(std::string(context) + ": linear solve failed");
    }
    return x;
}

}  // namespace detail

/// Solves K x = f with Dirichlet values imposed by elimination. Dirichlet
/// values are reproduced exactly; the reduced residual is checked.
inline VecX solve_linear_mixed(const StiffnessMatrix& s, const VecX& f,
                               const DirichletBC& bc, const SolverOptions& opts = {}) {
    const Eigen::Index n = s.K.rows();
    if (bc.dofs.size() != bc.values.size())
        throw std::invalid_argument("solve_linear_mixed: malformed Dirichlet data");
    if (bc.dofs.empty())
        throw std::invalid_argument(
            "solve_linear_mixed: empty Dirichlet set (semicoercive system)");
    std::vector<int> map(n, -1);  // free dof -> reduced index
    std::vector<char> fixed(n, 0);
    VecX x = VecX::Zero(n);
    for (size_t i = 0; i < bc.dofs.size(); ++i) {
        fixed[bc.dofs[i]] = 1;
        x[bc.dofs[i]] = bc.values[i];
    }
    int nf = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed[i]) map[i] = nf++;
    std::vector<Triplet> trips;
    VecX bf = VecX::Zero(nf);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (fixed[i]) continue;
        bf[map[i]] = f[i];
    }
    for (int col = 0; col < s.K.outerSize(); ++col)
        for (SpMat::InnerIterator it(s.K, col); it; ++it) {
            if (fixed[it.row()]) continue;
            if (fixed[it.col()])
                bf[map[it.row()]] -= it.value() * x[it.col()];
            else
                trips.emplace_back(map[it.row()], map[it.col()], it.value());
        }
    SpMat Kff(nf, nf);
    Kff.setFromTriplets(trips.begin(), trips.end());
    const VecX xf = detail::solve_reduced(Kff, bf, opts, "solve_linear_mixed");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed[i]) x[i] = xf[map[i]];
    return x;
}

/// Solves K x = f with the scalar constraint u.n = 0 imposed nodewise on the
/// given boundary nodes (local rotation of the displacement dofs so one axis
/// aligns with n, then elimination of that axis). Reports the numerical
/// null-space dimension when the clamped system is singular (rotational or
/// ruled surfaces).
inline VecX solve_normal_clamped(const StiffnessMatrix& s, const Mesh& m,
                                 const TraceMap& tm, const std::vector<int>& clamp_nodes,
                                 const VecX& f, const SolverOptions& opts = {}) {
    const Eigen::Index n = s.K.rows();
    // per-node rotation R = [n t1 t2]; global change of basis x = T x_hat
    std::vector<Mat3> rot(clamp_nodes.size());
    std::vector<int> node_slot(m.num_nodes(), -1);
    for (size_t i = 0; i < clamp_nodes.size(); ++i) {
        const int b = tm.node_to_boundary[clamp_nodes[i]];
        if (b < 0)
            throw std::invalid_argument("solve_normal_clamped: node not on boundary");
        Mat3 R;
        R.col(0) = tm.normal[b];
        R.col(1) = tm.tangent1[b];
        R.col(2) = tm.tangent2[b];
        rot[i] = R;
        node_slot[clamp_nodes[i]] = static_cast<int>(i);
    }
    std::vector<Triplet> ttrips;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int node = static_cast<int>(i / 6), comp = static_cast<int>(i % 6);
        const int slot = node_slot[node];
        if (slot >= 0 && comp < 3) {
            for (int c = 0; c < 3; ++c)
                ttrips.emplace_back(i, 6 * node + c, rot[slot](comp, c));
        } else {
            ttrips.emplace_back(i, i, 1.0);
        }
    }
    SpMat T(n, n);
    T.setFromTriplets(ttrips.begin(), ttrips.end());
    const SpMat Khat = T.transpose() * s.K * T;
    const VecX fhat = T.transpose() * f;

    std::vector<char> fixed(n, 0);
    for (int cn : clamp_nodes) fixed[6 * cn + 0] = 1;  // rotated axis 0 = u.n
    std::vector<int> map(n, -1);
    int nf = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed[i]) map[i] = nf++;
    std::vector<Triplet> trips;
    VecX bf(nf);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed[i]) bf[map[i]] = fhat[i];
    for (int col = 0; col < Khat.outerSize(); ++col)
        for (SpMat::InnerIterator it(Khat, col); it; ++it)
            if (!fixed[it.row()] && !fixed[it.col()])
                trips.emplace_back(map[it.row()], map[it.col()], it.value());
    SpMat Kff(nf, nf);
    Kff.setFromTriplets(trips.begin(), trips.end());
    const VecX xf = detail::solve_reduced(Kff, bf, opts, "solve_normal_clamped");
    VecX xhat = VecX::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed[i]) xhat[i] = xf[map[i]];
    return T * xhat;
}

/// Analytic field for manufactured verification: value, gradients and the
/// applied equilibrium operator L(d)U.
struct AnalyticField {
    std::function<Vec6(const Vec3&)> value;
    std::function<Mat3(const Vec3&)> grad_u;   // (p,q) = d_p u_q
    std::function<Mat3(const Vec3&)> grad_om;
    std::function<Vec6(const Vec3&)> equilibrium;  // L(d)U
};

/// Quadrature residual of the Green identity
///   int(L(d)U . V + E(U,V)) - <T(d,n)U, V>_S
/// for an analytic U and a P1 nodal field V. Vanishes to quadrature
/// accuracy for polynomial U of low degree.
inline double greens_residual(const Mesh& m, const MaterialParams& p,
                              const AnalyticField& U, const VecX& V) {
    if (V.size() != m.num_dofs())
        throw std::invalid_argument("greens_residual: nodal field size mismatch");
    double vol_sum = 0.0;
    for (const auto& t : m.tets) {
        const auto g = detail::element_geometry(m, t);
        for (const auto& bary : detail::tet_rule_deg2()) {
            Vec3 x = Vec3::Zero();
            for (int a = 0; a < 4; ++a) x += bary[a] * m.nodes[t[a]];
            Vec6 Vq = Vec6::Zero();
            for (int a = 0; a < 4; ++a) Vq += bary[a] * V.segment<6>(6 * t[a]);
            // discrete strain of V at the quadrature point
            const auto B = detail::element_b_matrix(g, bary);
            Eigen::Matrix<double, 24, 1> vd;
            for (int a = 0; a < 4; ++a) vd.segment<6>(6 * a) = V.segment<6>(6 * t[a]);
            const StrainState sv = strain_from_vector(B * vd);
            const StrainState su =
                strain_tensors(U.grad_u(x), U.grad_om(x), U.value(x).tail<3>());
            const double w = g.volume / 4.0;
            vol_sum += w * (U.equilibrium(x).dot(Vq) + energy_density(su, sv, p));
        }
    }
    double surf_sum = 0.0;
    for (const auto& bt : m.boundary_tris) {
        const Vec3 p0 = m.nodes[bt.nodes[0]], p1 = m.nodes[bt.nodes[1]],
                   p2 = m.nodes[bt.nodes[2]];
        Vec3 nrm = (p1 - p0).cross(p2 - p0) / 2.0;
        const double area = nrm.norm();
        nrm /= area;
        // 3-point edge-midpoint rule, exact for quadratics
        const std::array<Vec3, 3> q = {(p0 + p1) / 2.0, (p1 + p2) / 2.0, (p2 + p0) / 2.0};
        const std::array<std::array<double, 3>, 3> sh = {
            {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}};
        for (int k = 0; k < 3; ++k) {
            const StrainState su =
                strain_tensors(U.grad_u(q[k]), U.grad_om(q[k]), U.value(q[k]).tail<3>());
            const Vec6 TU = traction(su, p, nrm);
            Vec6 Vq = Vec6::Zero();
            for (int a = 0; a < 3; ++a) Vq += sh[k][a] * V.segment<6>(6 * bt.nodes[a]);
            surf_sum += area / 3.0 * TU.dot(Vq);
        }
    }
    return std::abs(vol_sum - surf_sum);
}

/// Discrete Korn constants: picks c2 = max(0, -lambda_min(K, mass)) + 1 and
/// returns (c1, c2) with c1 the minimum generalized eigenvalue of
/// (K + c2 mass, h1); then B(U,U) >= c1 ||U||_H1^2 - c2 ||U||_L2^2 for all
/// nodal fields.
inline std::pair<double, double> korn_constants(const StiffnessMatrix& s, const SpMat& mass,
                                                const SpMat& h1) {
    const MatX K = MatX(s.K), M = MatX(mass), H = MatX(h1);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatX> km(K, M, Eigen::EigenvaluesOnly);
    const double c2 = std::max(0.0, -km.eigenvalues().minCoeff()) + 1.0;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatX> kh(K + c2 * M, H,
                                                      Eigen::EigenvaluesOnly);
    const double c1 = kh.eigenvalues().minCoeff();
    if (!(c1 > 0.0))
        throw std::runtime_error("korn_constants: nonpositive c1");
    return {c1, c2};
}

}  // namespace hemivar
