// Discrete Steklov-Poincare (Dirichlet-to-Neumann) operators as Schur
// complements of the stiffness matrix onto the S-surface dofs, the rigid
// trace space Lambda(S) with its L2(S)-orthogonal projection, and the
// coercivity estimate on the complement.
//
// Sign convention: <A h, h'> equals the energy B(Gh, Gh') >= 0 for both the
// interior and the truncated-exterior operator; exterior surface data are
// interpreted w.r.t. the meshed annulus' outward normal, which makes the
// exterior variational inequality formally identical to the interior one.
#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>

#include "hemivar/fem.hpp"

namespace hemivar {

enum class DtnKind { interior_plus, exterior_minus };

/// The S-surface trace space: boundary nodes tagged S1/S2 (FAR excluded),
/// with lumped weights, normals and tangent frames copied from the TraceMap.
/// Boundary fields are vectors of size 6 * num_nodes() in node order.
struct BoundarySpace {
    std::vector<int> nodes;            // mesh node ids, ascending
    std::vector<int> mesh_to_surface;  // -1 when not on S
    std::vector<Vec3> normal;
    std::vector<double> weight;        // lumped S1+S2 area share
    std::vector<double> weight_s2;     // lumped S2 area share
    std::vector<char> is_s1;           // Dirichlet-side assignment (S1 wins)
    std::vector<Vec3> tangent1, tangent2;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int dim() const { return 6 * num_nodes(); }

    /// Weighted L2(S) inner product of boundary fields.
    double l2_inner(const VecX& a, const VecX& b) const {
        double s = 0.0;
        for (int i = 0; i < num_nodes(); ++i)
            s += weight[i] * a.segment<6>(6 * i).dot(b.segment<6>(6 * i));
        return s;
    }
    VecX apply_weight(const VecX& a) const {
        VecX r(a.size());
        for (int i = 0; i < num_nodes(); ++i)
            r.segment<6>(6 * i) = weight[i] * a.segment<6>(6 * i);
        return r;
    }
};

inline BoundarySpace build_boundary_space(const Mesh& m, const TraceMap& tm) {
    BoundarySpace s;
    s.mesh_to_surface.assign(m.num_nodes(), -1);
    for (int b = 0; b < tm.num_boundary_nodes(); ++b) {
        if (tm.part[b] == PartTag::FAR) continue;
        s.mesh_to_surface[tm.boundary_nodes[b]] = static_cast<int>(s.nodes.size());
        s.nodes.push_back(tm.boundary_nodes[b]);
        s.normal.push_back(tm.normal[b]);
        s.weight.push_back(tm.weight_s1[b] + tm.weight_s2[b]);
        s.weight_s2.push_back(tm.weight_s2[b]);
        s.is_s1.push_back(tm.part[b] == PartTag::S1);
        s.tangent1.push_back(tm.tangent1[b]);
        s.tangent2.push_back(tm.tangent2[b]);
    }
    if (s.nodes.empty()) throw ValidationError("mesh has no S-surface nodes");
    return s;
}

/// Six raw generalized rigid traces on S: (a x (x - x0) + b, a) for the
/// canonical generators, rotations taken about the weighted surface centroid.
inline MatX rigid_generators(const Mesh& m, const BoundarySpace& s) {
    Vec3 centroid = Vec3::Zero();
    double wsum = 0.0;
    for (int i = 0; i < s.num_nodes(); ++i) {
        centroid += s.weight[i] * m.nodes[s.nodes[i]];
        wsum += s.weight[i];
    }
    centroid /= wsum;
    MatX gen = MatX::Zero(s.dim(), 6);
    for (int g = 0; g < 6; ++g) {
        const Vec3 a = g < 3 ? Vec3(Vec3::Unit(g)) : Vec3::Zero();
        const Vec3 b = g >= 3 ? Vec3(Vec3::Unit(g - 3)) : Vec3::Zero();
        for (int i = 0; i < s.num_nodes(); ++i) {
            gen.block<3, 1>(6 * i, g) = a.cross(m.nodes[s.nodes[i]] - centroid) + b;
            gen.block<3, 1>(6 * i + 3, g) = a;
        }
    }
    return gen;
}

/// Orthonormalized rigid trace basis (boundary-L2 inner product), columns
/// spanning the discrete Lambda(S).
inline MatX rigid_basis(const Mesh& m, const BoundarySpace& s) {
    MatX basis = rigid_generators(m, s);
    for (int k = 0; k < 6; ++k) {
        VecX col = basis.col(k);
        for (int j = 0; j < k; ++j)
            col -= s.l2_inner(basis.col(j), col) * basis.col(j);
        // re-orthogonalize once for numerical cleanliness
        for (int j = 0; j < k; ++j)
            col -= s.l2_inner(basis.col(j), col) * basis.col(j);
        const double nrm = std::sqrt(s.l2_inner(col, col));
        if (!(nrm > 1e-12))
            throw ValidationError("rigid_basis: degenerate surface geometry");
        basis.col(k) = col / nrm;
    }
    return basis;
}

/// Splits h into its rigid component Ph and the L2(S)-orthogonal remainder.
inline std::pair<VecX, VecX> project_P(const VecX& h, const BoundarySpace& s,
                                       const MatX& basis) {
    VecX ph = VecX::Zero(h.size());
    for (int k = 0; k < basis.cols(); ++k)
        ph += s.l2_inner(basis.col(k), h) * basis.col(k);
    return {ph, h - ph};
}

/// Dense discrete Dirichlet-to-Neumann operator on the S-surface dofs with
/// the retained interior factorization for harmonic reconstruction.
struct DtnOperator {
    DtnKind kind = DtnKind::interior_plus;
    MatX A;             // dim x dim, symmetric PSD (PD for exterior)
    BoundarySpace space;
    MatX kernel_basis;  // dim x 6 rigid traces (interior), dim x 0 (exterior)
    double coercivity_c = 0.0;

    // reconstruction data
    std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> interior_factor;
    SpMat K_ib;                    // interior rows x boundary cols
    std::vector<int> interior_dofs;
    int mesh_dofs = 0;

    int dim() const { return space.dim(); }
};

/// c with <A h, h> >= c ||h - Ph||^2 in the discrete H^(1/2) surrogate norm
/// ||v||^2 = <A v, v> + ||v||_L2(S)^2: the smallest nonzero eigenvalue of the
/// pencil (A, A + W). `kernel_dim` eigenvalues are expected (and verified)
/// to sit at zero.
inline double coercivity_estimate(const MatX& A, const BoundarySpace& s, int kernel_dim) {
    MatX W = MatX::Zero(A.rows(), A.cols());
    for (int i = 0; i < s.num_nodes(); ++i)
        for (int c = 0; c < 6; ++c) W(6 * i + c, 6 * i + c) = s.weight[i];
    Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es(A, A + W, Eigen::EigenvaluesOnly);
    const VecX ev = es.eigenvalues();  // ascending, in [0, 1)
    int zeros = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] <= 1e-8) ++zeros;
    if (zeros != kernel_dim)
        throw std::runtime_error("coercivity_estimate: kernel dimension " +
                                 std::to_string(zeros) + ", expected " +
                                 std::to_string(kernel_dim));
    return ev[kernel_dim];
}

inline double coercivity_estimate(const DtnOperator& d) {
    return coercivity_estimate(d.A, d.space,
                               d.kind == DtnKind::interior_plus ? 6 : 0);
}

/// Builds the Schur complement A = K_bb - K_bi K_ii^-1 K_ib onto the
/// S-surface dofs. FAR nodes (truncated exterior) are eliminated with zero
/// Dirichlet values beforehand, realizing the decay condition. When a cached
/// operator matrix is supplied (see save_dtn/load_dtn) the Schur solves are
/// skipped and only the interior factorization is formed.
inline DtnOperator build_dtn(const StiffnessMatrix& K, const Mesh& m, DtnKind kind,
                             const MatX* cached_A = nullptr,
                             bool with_coercivity = true) {
    if ((kind == DtnKind::exterior_minus) != (m.region == Region::exterior_truncated))
        throw std::invalid_argument("build_dtn: kind inconsistent with mesh region");
    const TraceMap tm = build_trace_map(m);
    DtnOperator d;
    d.kind = kind;
    d.space = build_boundary_space(m, tm);
    d.mesh_dofs = m.num_dofs();

    std::vector<char> is_far(m.num_nodes(), 0);
    for (int b = 0; b < tm.num_boundary_nodes(); ++b)
        if (tm.part[b] == PartTag::FAR) is_far[tm.boundary_nodes[b]] = 1;

    const int nb = d.dim();
    std::vector<int> dof_class(m.num_dofs(), 0);  // 0 interior, 1 boundary, 2 far
    std::vector<int> bmap(m.num_dofs(), -1);
    for (int i = 0; i < m.num_nodes(); ++i) {
        const int si = d.space.mesh_to_surface[i];
        for (int c = 0; c < 6; ++c) {
            if (si >= 0) {
                dof_class[6 * i + c] = 1;
                bmap[6 * i + c] = 6 * si + c;
            } else if (is_far[i]) {
                dof_class[6 * i + c] = 2;
            }
        }
    }
    std::vector<int> imap(m.num_dofs(), -1);
    for (int i = 0; i < m.num_dofs(); ++i)
        if (dof_class[i] == 0) {
            imap[i] = static_cast<int>(d.interior_dofs.size());
            d.interior_dofs.push_back(i);
        }
    const int ni = static_cast<int>(d.interior_dofs.size());  // may be zero


    std::vector<Triplet> tii, tib;
    MatX Kbb = MatX::Zero(nb, nb);
    for (int col = 0; col < K.K.outerSize(); ++col)
        for (SpMat::InnerIterator it(K.K, col); it; ++it) {
            const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
            if (dof_class[r] == 2 || dof_class[c] == 2) continue;  // FAR eliminated
            if (dof_class[r] == 0 && dof_class[c] == 0)
                tii.emplace_back(imap[r], imap[c], it.value());
            else if (dof_class[r] == 0 && dof_class[c] == 1)
                tib.emplace_back(imap[r], bmap[c], it.value());
            else if (dof_class[r] == 1 && dof_class[c] == 1)
                Kbb(bmap[r], bmap[c]) += it.value();
        }
    SpMat Kii(ni, ni);
    Kii.setFromTriplets(tii.begin(), tii.end());
    d.K_ib.resize(ni, nb);
    d.K_ib.setFromTriplets(tib.begin(), tib.end());

    if (ni > 0) {
        d.interior_factor = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
        d.interior_factor->compute(Kii);
        if (d.interior_factor->info() != Eigen::Success)
            throw std::runtime_error("build_dtn: singular interior block");
    }

    if (cached_A) {
        if (cached_A->rows() != nb || cached_A->cols() != nb)
            throw std::invalid_argument("build_dtn: cached operator size mismatch");
        d.A = *cached_A;
    } else if (ni > 0) {
        const MatX X = d.interior_factor->solve(MatX(d.K_ib));
        d.A = Kbb - MatX(d.K_ib).transpose() * X;
    } else {
        d.A = Kbb;
    }

    if (kind == DtnKind::interior_plus) d.kernel_basis = rigid_basis(m, d.space);
    else d.kernel_basis = MatX::Zero(nb, 0);
    if (with_coercivity) d.coercivity_c = coercivity_estimate(d);
    return d;
}

/// Discrete harmonic extension G h: interior dofs solve K_ii x = -K_ib h,
/// the trace equals h exactly, FAR dofs stay zero.
inline VecX apply_reconstruct(const DtnOperator& d, const VecX& h) {
    if (h.size() != d.dim())
        throw std::invalid_argument("apply_reconstruct: boundary field size mismatch");
    VecX full = VecX::Zero(d.mesh_dofs);
    if (!d.interior_dofs.empty()) {
        const VecX xi = d.interior_factor->solve(-(d.K_ib * h));
        for (size_t k = 0; k < d.interior_dofs.size(); ++k)
            full[d.interior_dofs[k]] = xi[k];
    }
    for (int i = 0; i < d.space.num_nodes(); ++i)
        full.segment<6>(6 * d.space.nodes[i]) = h.segment<6>(6 * i);
    return full;
}

/// Discrete H^(1/2) surrogate norm ||v||^2 = <A v, v> + ||v||_L2(S)^2.
inline double surrogate_half_norm(const DtnOperator& d, const VecX& v) {
    return std::sqrt(std::max(0.0, v.dot(d.A * v) + d.space.l2_inner(v, v)));
}

// --- binary operator cache -------------------------------------------------
// layout: "DTN1" | uint64 dim | uint64 kernel columns | dim*dim row-major
// doubles | kernel fields (dim doubles each)

inline void save_dtn(const DtnOperator& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dtn cache: " + path);
    out.write("DTN1", 4);
    const std::uint64_t n = static_cast<std::uint64_t>(d.dim());
    const std::uint64_t k = static_cast<std::uint64_t>(d.kernel_basis.cols());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&k), 8);
    for (std::uint64_t r = 0; r < n; ++r)
        for (std::uint64_t c = 0; c < n; ++c) {
            const double v = d.A(r, c);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    for (std::uint64_t j = 0; j < k; ++j)
        for (std::uint64_t r = 0; r < n; ++r) {
            const double v = d.kernel_basis(r, j);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
}

struct DtnCache {
    MatX A;
    MatX kernel_basis;
};

inline DtnCache load_dtn(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open dtn cache: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DTN1", 4) != 0)
        throw ParseError("bad dtn cache magic in " + path);
    std::uint64_t n = 0, k = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&k), 8);
    if (!in || n == 0 || n > (1u << 24) || k > 6)
        throw ParseError("bad dtn cache dimensions in " + path);
    DtnCache c;
    c.A.resize(n, n);
    for (std::uint64_t r = 0; r < n; ++r)
        for (std::uint64_t cc = 0; cc < n; ++cc) in.read(reinterpret_cast<char*>(&c.A(r, cc)), 8);
    c.kernel_basis.resize(n, k);
    for (std::uint64_t j = 0; j < k; ++j)
        for (std::uint64_t r = 0; r < n; ++r)
            in.read(reinterpret_cast<char*>(&c.kernel_basis(r, j)), 8);
    if (!in) throw ParseError("truncated dtn cache " + path);
    return c;
}

}  // namespace hemivar
