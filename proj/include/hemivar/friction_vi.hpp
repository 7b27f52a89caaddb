// Tresca friction on the boundary: the nonsmooth functional j, the total
// energy functional, the Uzawa dual-projection and semismooth active-set
// solvers for the boundary variational inequality, and the KKT /
// complementarity verification of the equivalence with the pointwise
// contact conditions.
#pragma once

#include <Eigen/LU>

#include "hemivar/solvability.hpp"

namespace hemivar {

/// Per-surface-node Tresca data. g = friction_coeff * |F0| is the slip
/// bound; phi0 the tangential offset produced by the homogenizing auxiliary
/// solve; F0/phi the normal and couple data of the original problem.
struct FrictionSpec {
    std::vector<double> g;
    std::vector<Vec3> phi0;
    std::vector<double> F0;
    std::vector<Vec3> phi;
    std::vector<double> friction_coeff;

    static FrictionSpec zero(int n) {
        FrictionSpec f;
        f.g.assign(n, 0.0);
        f.phi0.assign(n, Vec3::Zero());
        f.F0.assign(n, 0.0);
        f.phi.assign(n, Vec3::Zero());
        f.friction_coeff.assign(n, 0.0);
        return f;
    }
};

/// g = friction_coeff * |F0| nodewise; phi0 defaults to zero.
inline FrictionSpec make_friction_spec(const BoundarySpace& s,
                                       const std::vector<double>& F0,
                                       const std::vector<Vec3>& phi,
                                       const std::vector<double>& friction_coeff) {
    const int n = s.num_nodes();
    if (static_cast<int>(F0.size()) != n || static_cast<int>(phi.size()) != n ||
        static_cast<int>(friction_coeff.size()) != n)
        throw std::invalid_argument("make_friction_spec: size mismatch");
    FrictionSpec f = FrictionSpec::zero(n);
    f.F0 = F0;
    f.phi = phi;
    f.friction_coeff = friction_coeff;
    for (int i = 0; i < n; ++i) {
        if (friction_coeff[i] < 0.0)
            throw std::invalid_argument("make_friction_spec: negative friction coefficient");
        f.g[i] = friction_coeff[i] * std::abs(F0[i]);
    }
    return f;
}

inline void validate_friction(const FrictionSpec& f, const BoundarySpace& s) {
    const int n = s.num_nodes();
    if (static_cast<int>(f.g.size()) != n || static_cast<int>(f.phi0.size()) != n)
        throw std::invalid_argument("friction spec size mismatch");
    for (int i = 0; i < n; ++i) {
        if (f.g[i] < 0.0) throw std::invalid_argument("friction: negative slip bound");
        if (!f.F0.empty() && !f.friction_coeff.empty()) {
            const double expect = f.friction_coeff[i] * std::abs(f.F0[i]);
            if (std::abs(f.g[i] - expect) > 1e-12 * (1.0 + std::abs(expect)))
                throw std::invalid_argument("friction: g != F |F0| at a node");
        }
        const double pn = std::abs(f.phi0[i].dot(s.normal[i]));
        if (pn > 1e-12 * std::max(1e-300, f.phi0[i].norm()))
            throw std::invalid_argument("friction: phi0 not tangential");
    }
}

enum class VIKind { coercive_A0, semicoercive_B0, semicoercive_C0, exterior_D0 };

inline bool is_semicoercive(VIKind k) {
    return k == VIKind::semicoercive_B0 || k == VIKind::semicoercive_C0;
}

/// Boundary variational inequality on the Steklov-Poincare operator:
/// minimize 1/2 <A h, h> + j(h) - <rhs, h> over the constraint subspace
/// (S1 trace zero for the coercive and exterior kinds).
struct VIProblem {
    const DtnOperator* op = nullptr;
    VIKind kind = VIKind::coercive_A0;
    FrictionSpec friction;
    VecX rhs;                      // lumped boundary load functional
    std::vector<char> constrained; // per boundary dof

    int dim() const { return op->dim(); }
};

/// Assembles the lumped linear functional from per-node normal data (F0, or
/// the derived psi for the semicoercive kinds), couple data, and optionally
/// an S1 traction (Problem C / exterior Neumann variant).
inline VecX assemble_boundary_rhs(const BoundarySpace& s,
                                  const std::vector<double>& normal_data,
                                  const std::vector<Vec3>& couple_data,
                                  const std::vector<Vec6>* psi_s1 = nullptr) {
    VecX r = VecX::Zero(s.dim());
    for (int i = 0; i < s.num_nodes(); ++i) {
        if (!normal_data.empty())
            r.segment<3>(6 * i) += s.weight_s2[i] * normal_data[i] * s.normal[i];
        if (!couple_data.empty())
            r.segment<3>(6 * i + 3) += s.weight_s2[i] * couple_data[i];
        if (psi_s1) {
            const double w1 = s.weight[i] - s.weight_s2[i];
            r.segment<6>(6 * i) += w1 * (*psi_s1)[i];
        }
    }
    return r;
}

inline VIProblem make_vi_problem(const DtnOperator& op, FrictionSpec friction,
                                 VIKind kind, const std::vector<double>& normal_data,
                                 const std::vector<Vec3>& couple_data,
                                 const std::vector<Vec6>* psi_s1 = nullptr) {
    validate_friction(friction, op.space);
    if (kind == VIKind::exterior_D0 && op.kind != DtnKind::exterior_minus)
        throw std::invalid_argument("make_vi_problem: exterior kind needs exterior operator");
    if (kind != VIKind::exterior_D0 && op.kind != DtnKind::interior_plus)
        throw std::invalid_argument("make_vi_problem: interior kind needs interior operator");
    VIProblem p;
    p.op = &op;
    p.kind = kind;
    p.friction = std::move(friction);
    p.rhs = assemble_boundary_rhs(op.space, normal_data, couple_data, psi_s1);
    p.constrained.assign(op.space.dim(), 0);
    const bool constrain_s1 = kind == VIKind::coercive_A0 || kind == VIKind::exterior_D0;
    if (constrain_s1) {
        bool any = false;
        for (int i = 0; i < op.space.num_nodes(); ++i)
            if (op.space.is_s1[i]) {
                any = true;
                for (int c = 0; c < 6; ++c) p.constrained[6 * i + c] = 1;
            }
        if (kind == VIKind::coercive_A0 && !any)
            throw std::invalid_argument(
                "make_vi_problem: coercive kind requires a nonempty S1 part");
    }
    if (is_semicoercive(kind) && op.kernel_basis.cols() != 6)
        throw std::invalid_argument("make_vi_problem: semicoercive kind needs the rigid basis");
    return p;
}

/// j(psi) = sum over S2 nodes of w_i g_i |psi_s - phi0| (lumped quadrature;
/// the nodal rule makes the functional separable per node).
inline double friction_functional(const VecX& psi, const FrictionSpec& fs,
                                  const BoundarySpace& s) {
    if (psi.size() != s.dim())
        throw std::invalid_argument("friction_functional: field size mismatch");
    double j = 0.0;
    for (int i = 0; i < s.num_nodes(); ++i) {
        if (s.weight_s2[i] <= 0.0 || fs.g[i] <= 0.0) continue;
        const Vec3 u = psi.segment<3>(6 * i);
        const Vec3 us = u - u.dot(s.normal[i]) * s.normal[i];
        j += s.weight_s2[i] * fs.g[i] * (us - fs.phi0[i]).norm();
    }
    return j;
}

/// J(h) = 1/2 <A h, h> + j(h) - <rhs, h> on the constraint subspace.
inline double total_functional(const VecX& h, const VIProblem& prob) {
    if (h.size() != prob.dim())
        throw std::invalid_argument("total_functional: field size mismatch");
    for (int d = 0; d < prob.dim(); ++d)
        if (prob.constrained[d] && std::abs(h[d]) > 1e-12 * (1.0 + h.norm()))
            throw std::invalid_argument("total_functional: constraint violation on S1");
    return 0.5 * h.dot(prob.op->A * h) + friction_functional(h, prob.friction, prob.op->space) -
           prob.rhs.dot(h);
}

struct VIOptions {
    double tol = 1e-9;       // combined primal/dual relative residual
    int max_iter = 100000;
    double rho = 0.0;        // dual step; 0 selects 1 / diag-scale
    VecX lambda0;            // optional multiplier start (3 per surface node)
};

struct KktCheck {
    std::string name;
    double violation = 0.0;  // relative to the check's scale
    int worst_node = -1;     // surface node index, -1 if none
    bool pass = false;
};

struct KktReport {
    std::vector<KktCheck> checks;
    int indeterminate_nodes = 0;  // g = 0 and zero traction: (iv) vacuous
    bool all_pass = false;
};

struct VISolution {
    VecX h0;                    // boundary trace field
    std::vector<Vec3> lambda;   // weighted tangential multiplier per surface node
    double energy = 0.0;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> energy_trace;
    VecX interior;              // reconstructed nodal field G h0
};

class MarginError : public std::runtime_error {
  public:
    MarginError(const std::string& msg, MarginReport report)
        : std::runtime_error(msg), report_(std::move(report)) {}
    const MarginReport& report() const { return report_; }

  private:
    MarginReport report_;
};

namespace detail {

struct ContactNode {
    int si;       // surface node index
    double r;     // ball radius w_i g_i
    Vec3 n, phi0;
};

inline std::vector<ContactNode> contact_nodes(const VIProblem& p) {
    std::vector<ContactNode> out;
    const BoundarySpace& s = p.op->space;
    for (int i = 0; i < s.num_nodes(); ++i) {
        if (s.weight_s2[i] <= 0.0 || p.friction.g[i] <= 0.0) continue;
        if (p.constrained[6 * i]) continue;  // interface nodes are Dirichlet
        out.push_back({i, s.weight_s2[i] * p.friction.g[i], s.normal[i],
                       p.friction.phi0[i]});
    }
    return out;
}

inline Vec3 tangential(const Vec3& v, const Vec3& n) { return v - v.dot(n) * n; }

inline Vec3 ball_project(const Vec3& v, double r) {
    const double nv = v.norm();
    return nv <= r ? v : Vec3((r / nv) * v);
}

/// Shared quadratic-subproblem solver: factorizes the reduced operator once
/// (free dofs for the constrained kinds; a saddle system bordered with the
/// weighted kernel for the semicoercive kinds) and solves A h = b with
/// h = 0 on S1 and, when semicoercive, X^T W h = 0.
class QuadraticSolver {
  public:
    QuadraticSolver(const VIProblem& p) : prob_(p) {
        const int n = p.dim();
        for (int d = 0; d < n; ++d)
            if (!p.constrained[d]) free_.push_back(d);
        const int nf = static_cast<int>(free_.size());
        const bool semi = is_semicoercive(p.kind);
        const int nk = semi ? 6 : 0;
        MatX M(nf + nk, nf + nk);
        M.setZero();
        for (int a = 0; a < nf; ++a)
            for (int b = 0; b < nf; ++b) M(a, b) = p.op->A(free_[a], free_[b]);
        if (semi) {
            const MatX WX = [&] {
                MatX wx(n, 6);
                for (int k = 0; k < 6; ++k)
                    wx.col(k) = p.op->space.apply_weight(p.op->kernel_basis.col(k));
                return wx;
            }();
            for (int a = 0; a < nf; ++a)
                for (int k = 0; k < 6; ++k) {
                    M(a, nf + k) = WX(free_[a], k);
                    M(nf + k, a) = WX(free_[a], k);
                }
        }
        lu_.compute(M);
        nf_ = nf;
        nk_ = nk;
    }

    VecX solve(const VecX& b) const {
        VecX rb = VecX::Zero(nf_ + nk_);
        for (int a = 0; a < nf_; ++a) rb[a] = b[free_[a]];
        const VecX y = lu_.solve(rb);
        VecX h = VecX::Zero(prob_.dim());
        for (int a = 0; a < nf_; ++a) h[free_[a]] = y[a];
        return h;
    }

    const std::vector<int>& free_dofs() const { return free_; }

  private:
    const VIProblem& prob_;
    std::vector<int> free_;
    Eigen::PartialPivLU<MatX> lu_;
    int nf_ = 0, nk_ = 0;
};

/// Minimizes J(base + X c) over the 6 kernel coefficients (the quadratic
/// part is constant there): coordinate descent with golden-section line
/// searches plus random-direction polish, valid by convexity.
inline VecX kernel_search(const VIProblem& p, const VecX& base) {
    const MatX& X = p.op->kernel_basis;
    using C6 = Eigen::Matrix<double, 6, 1>;
    auto value = [&](const C6& c) {
        const VecX h = base + X * c;
        return friction_functional(h, p.friction, p.op->space) - p.rhs.dot(h);
    };
    C6 c = C6::Zero();
    double best = value(c);
    const double scale0 = std::abs(best) + 1.0;
    double window = 2.0 + base.norm();
    for (int sweep = 0; sweep < 80; ++sweep) {
        const double before = best;
        for (int j = 0; j < 6; ++j) {
            C6 trial = c;
            const double opt = golden_min(
                [&](double t) {
                    trial[j] = t;
                    return value(trial);
                },
                c[j] - window, c[j] + window, 1e-11);
            trial[j] = opt;
            const double v = value(trial);
            if (v < best) {
                best = v;
                c = trial;
            }
            if (std::abs(opt - (c[j] - window)) < 1e-6 * window ||
                std::abs(opt - (c[j] + window)) < 1e-6 * window) {
                window *= 2.0;  // minimizer at the window edge: widen
                if (window > 1e12)
                    throw NoConvergenceError(
                        "kernel search: unbounded descent along a rigid direction",
                        best, sweep);
            }
        }
        bool improved = before - best > 1e-12 * scale0;
        Rng dir_rng(1234 + sweep);
        for (int pr = 0; pr < 12 && !improved; ++pr) {
            C6 d;
            for (int k = 0; k < 6; ++k) d[k] = dir_rng.normal();
            d.normalize();
            C6 trial;
            const double opt = golden_min(
                [&](double t) {
                    trial = c + t * d;
                    return value(trial);
                },
                -window, window, 1e-11);
            trial = c + opt * d;
            const double v = value(trial);
            if (v < best - 1e-13 * scale0) {
                best = v;
                c = trial;
                improved = true;
            }
        }
        if (!improved) break;
    }
    return base + X * c;
}

inline double default_rho(const VIProblem& p, const std::vector<ContactNode>& nodes) {
    if (nodes.empty()) return 1.0;
    double acc = 0.0;
    for (const auto& cn : nodes) {
        const int b0 = 6 * cn.si;
        const Mat3 blk = p.op->A.block<3, 3>(b0, b0);
        const Mat3 pt = Mat3::Identity() - cn.n * cn.n.transpose();
        acc += (pt * blk * pt).trace() / 2.0;
    }
    const double mean = acc / static_cast<double>(nodes.size());
    return mean > 0.0 ? 1.0 / mean : 1.0;
}

inline void scatter_lambda(const VIProblem& p, const std::vector<ContactNode>& nodes,
                           const std::vector<Vec3>& lambda, VecX& out) {
    out.setZero();
    for (size_t k = 0; k < nodes.size(); ++k)
        out.segment<3>(6 * nodes[k].si) += lambda[k];
}

inline void margin_gate(const VIProblem& p) {
    if (!is_semicoercive(p.kind)) return;
    const MarginReport r =
        check_necessary(p.op->space, p.friction.g, p.rhs, p.op->kernel_basis);
    if (!r.strict)
        throw MarginError(
            r.necessary_holds
                ? "semicoercive margin at the boundary case (M within tolerance of zero)"
                : "semicoercive necessary condition fails (M < 0)",
            r);
}

}  // namespace detail

/// Uzawa dual iteration: exact quadratic subproblem solves alternate with a
/// nodewise ball-projection of the multipliers; the dual step is halved
/// whenever the residual or the energy J(h_k) would increase, keeping the
/// energy trace monotone.
inline VISolution solve_uzawa(const VIProblem& prob, const VIOptions& opts = {}) {
    detail::margin_gate(prob);
    const auto nodes = detail::contact_nodes(prob);
    const detail::QuadraticSolver quad(prob);
    const bool semi = is_semicoercive(prob.kind);

    std::vector<Vec3> lambda(nodes.size(), Vec3::Zero());
    if (opts.lambda0.size() > 0) {
        if (opts.lambda0.size() != 3 * prob.op->space.num_nodes())
            throw std::invalid_argument("solve_uzawa: lambda0 size mismatch");
        for (size_t k = 0; k < nodes.size(); ++k) {
            const Vec3 raw = opts.lambda0.segment<3>(3 * nodes[k].si);
            lambda[k] = detail::ball_project(detail::tangential(raw, nodes[k].n),
                                             nodes[k].r);
        }
    }
    double rho = opts.rho > 0.0 ? opts.rho : detail::default_rho(prob, nodes);

    VecX jst = VecX::Zero(prob.dim());
    auto subsolve = [&](const std::vector<Vec3>& lam) {
        detail::scatter_lambda(prob, nodes, lam, jst);
        VecX h = quad.solve(prob.rhs - jst);
        if (semi) h = detail::kernel_search(prob, h);
        return h;
    };

    VISolution sol;
    VecX h = subsolve(lambda);
    double energy = total_functional(h, prob);
    sol.energy_trace.push_back(energy);
    double lam_scale = 1e-30;
    for (const auto& cn : nodes) lam_scale = std::max(lam_scale, cn.r);

    int it = 1;
    for (; it <= opts.max_iter; ++it) {
        // propose a dual step; backtrack rho on energy increase
        std::vector<Vec3> lam_new(nodes.size());
        VecX h_new;
        double energy_new = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 60 && !accepted; ++bt) {
            for (size_t k = 0; k < nodes.size(); ++k) {
                const auto& cn = nodes[k];
                const Vec3 slip =
                    detail::tangential(h.segment<3>(6 * cn.si), cn.n) - cn.phi0;
                const Vec3 trial = lambda[k] + rho * cn.r * slip;
                lam_new[k] = detail::ball_project(detail::tangential(trial, cn.n), cn.r);
            }
            h_new = subsolve(lam_new);
            energy_new = total_functional(h_new, prob);
            if (energy_new <= energy + 1e-12 * (std::abs(energy) + 1.0))
                accepted = true;
            else
                rho /= 2.0;
        }
        if (!accepted)
            throw NoConvergenceError("solve_uzawa: dual step exhausted backtracking",
                                     energy_new - energy, it);

        double dual_change = 0.0;
        for (size_t k = 0; k < nodes.size(); ++k)
            dual_change = std::max(dual_change, (lam_new[k] - lambda[k]).norm());
        const double h_scale = std::max(h_new.lpNorm<Eigen::Infinity>(), 1e-30);
        const double primal = (h_new - h).lpNorm<Eigen::Infinity>() / h_scale;
        const double dual = dual_change / lam_scale;
        lambda.swap(lam_new);
        h.swap(h_new);
        energy = energy_new;
        sol.energy_trace.push_back(energy);
        sol.residual = std::max(primal, dual);
        if (sol.residual <= opts.tol) break;
    }
    if (sol.residual > opts.tol && !nodes.empty())
        throw NoConvergenceError("solve_uzawa: no convergence", sol.residual,
                                 opts.max_iter);

    sol.h0 = h;
    sol.energy = energy;
    sol.iterations = std::min(it, opts.max_iter);
    sol.lambda.assign(prob.op->space.num_nodes(), Vec3::Zero());
    for (size_t k = 0; k < nodes.size(); ++k) sol.lambda[nodes[k].si] = lambda[k];
    sol.interior = apply_reconstruct(*prob.op, h);
    return sol;
}

/// Primal-dual active set (semismooth Newton with frozen slip directions):
/// stick nodes contribute equality constraints, slip nodes a known multiplier
/// on the ball surface. Typically converges in a handful of iterations and
/// must agree with solve_uzawa; stagnation raises an error recommending the
/// Uzawa fallback.
inline VISolution solve_semismooth(const VIProblem& prob, const VIOptions& opts = {}) {
    detail::margin_gate(prob);
    const auto nodes = detail::contact_nodes(prob);
    const bool semi = is_semicoercive(prob.kind);
    const int n = prob.dim();
    std::vector<int> free;
    for (int d = 0; d < n; ++d)
        if (!prob.constrained[d]) free.push_back(d);
    const int nf = static_cast<int>(free.size());
    std::vector<int> dof_map(n, -1);
    for (int a = 0; a < nf; ++a) dof_map[free[a]] = a;
    const int nk = semi ? 6 : 0;

    double cscale = 0.0;
    {
        const double r = detail::default_rho(prob, nodes);
        cscale = r > 0.0 ? 1.0 / r : 1.0;
    }

    std::vector<Vec3> lambda(nodes.size(), Vec3::Zero());
    VecX h = VecX::Zero(n);
    double best_residual = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    VISolution sol;

    const int max_iter = std::min(opts.max_iter, 200);
    int it = 1;
    for (; it <= max_iter; ++it) {
        // classify nodes from the current iterate
        std::vector<int> stick;
        std::vector<Vec3> slip_dir(nodes.size(), Vec3::Zero());
        std::vector<char> is_stick(nodes.size(), 0);
        for (size_t k = 0; k < nodes.size(); ++k) {
            const auto& cn = nodes[k];
            const Vec3 slip = detail::tangential(h.segment<3>(6 * cn.si), cn.n) - cn.phi0;
            const Vec3 trial = detail::tangential(lambda[k] + cscale * slip, cn.n);
            if (trial.norm() <= cn.r) {
                is_stick[k] = 1;
                stick.push_back(static_cast<int>(k));
            } else {
                slip_dir[k] = trial.normalized();
            }
        }
        const int ns = static_cast<int>(stick.size());
        const int dim = nf + nk + 2 * ns;
        MatX M = MatX::Zero(dim, dim);
        VecX b = VecX::Zero(dim);
        for (int a = 0; a < nf; ++a) {
            for (int c = 0; c < nf; ++c) M(a, c) = prob.op->A(free[a], free[c]);
            b[a] = prob.rhs[free[a]];
        }
        if (semi) {
            for (int k = 0; k < 6; ++k) {
                const VecX wx = prob.op->space.apply_weight(prob.op->kernel_basis.col(k));
                for (int a = 0; a < nf; ++a) {
                    M(a, nf + k) = wx[free[a]];
                    M(nf + k, a) = wx[free[a]];
                }
            }
        }
        // slip nodes: known multiplier r * d moves to the right-hand side
        for (size_t k = 0; k < nodes.size(); ++k) {
            if (is_stick[k]) continue;
            const auto& cn = nodes[k];
            const Vec3 lam = cn.r * slip_dir[k];
            for (int c = 0; c < 3; ++c) {
                const int a = dof_map[6 * cn.si + c];
                if (a >= 0) b[a] -= lam[c];
            }
        }
        // stick nodes: unknown tangential multiplier + zero-slip constraint
        const BoundarySpace& sp = prob.op->space;
        for (int s = 0; s < ns; ++s) {
            const auto& cn = nodes[stick[s]];
            const Vec3 t1 = sp.tangent1[cn.si], t2 = sp.tangent2[cn.si];
            const int col = nf + nk + 2 * s;
            for (int c = 0; c < 3; ++c) {
                const int a = dof_map[6 * cn.si + c];
                if (a < 0) continue;
                M(a, col) += t1[c];
                M(a, col + 1) += t2[c];
                M(col, a) += t1[c];
                M(col + 1, a) += t2[c];
            }
            b[col] = cn.phi0.dot(t1);
            b[col + 1] = cn.phi0.dot(t2);
        }
        const Eigen::PartialPivLU<MatX> lu(M);
        const VecX y = lu.solve(b);
        VecX h_new = VecX::Zero(n);
        for (int a = 0; a < nf; ++a) h_new[free[a]] = y[a];
        if (semi) h_new = detail::kernel_search(prob, h_new);
        std::vector<Vec3> lam_new(nodes.size());
        for (size_t k = 0; k < nodes.size(); ++k) {
            if (is_stick[k]) continue;
            lam_new[k] = nodes[k].r * slip_dir[k];
        }
        for (int s = 0; s < ns; ++s) {
            const auto& cn = nodes[stick[s]];
            lam_new[stick[s]] = y[nf + nk + 2 * s] * sp.tangent1[cn.si] +
                                y[nf + nk + 2 * s + 1] * sp.tangent2[cn.si];
        }

        // complementarity fixed-point residual
        double res = 0.0, rscale = 1e-30;
        for (size_t k = 0; k < nodes.size(); ++k) {
            const auto& cn = nodes[k];
            const Vec3 slip =
                detail::tangential(h_new.segment<3>(6 * cn.si), cn.n) - cn.phi0;
            const Vec3 fp = lam_new[k] - detail::ball_project(detail::tangential(
                                             lam_new[k] + cscale * slip, cn.n),
                                         cn.r);
            res = std::max(res, fp.norm());
            rscale = std::max(rscale, cn.r);
        }
        const double rel = nodes.empty() ? 0.0 : res / rscale;
        h.swap(h_new);
        lambda.swap(lam_new);
        sol.residual = rel;
        sol.energy_trace.push_back(total_functional(h, prob));
        if (rel <= std::max(opts.tol, 1e-12)) break;
        if (rel < best_residual * 0.9) {
            best_residual = rel;
            stagnant = 0;
        } else if (++stagnant >= 15) {
            throw NoConvergenceError(
                "solve_semismooth: Newton stagnation, rerun with vi.solver = uzawa", rel,
                it);
        }
    }
    if (sol.residual > std::max(opts.tol, 1e-12) && !nodes.empty())
        throw NoConvergenceError(
            "solve_semismooth: no convergence, rerun with vi.solver = uzawa",
            sol.residual, max_iter);

    sol.h0 = h;
    sol.energy = total_functional(h, prob);
    sol.iterations = std::min(it, max_iter);
    sol.lambda.assign(prob.op->space.num_nodes(), Vec3::Zero());
    for (size_t k = 0; k < nodes.size(); ++k) sol.lambda[nodes[k].si] = lambda[k];
    sol.interior = apply_reconstruct(*prob.op, h);
    return sol;
}

/// Discrete KKT / complementarity verification of the converged solution:
/// dual feasibility, stick where strict, slip/traction alignment, the
/// stationarity residual on free dofs, and the variational inequality
/// itself on random feasible probes.
inline KktReport kkt_verify(const VISolution& sol, const VIProblem& prob,
                            double tol = 1e-7) {
    KktReport rep;
    const auto nodes = detail::contact_nodes(prob);
    const BoundarySpace& sp = prob.op->space;

    double gscale = 1e-30, hscale = 1e-30;
    for (const auto& cn : nodes) gscale = std::max(gscale, cn.r);
    hscale = std::max(hscale, sol.h0.lpNorm<Eigen::Infinity>());
    for (const auto& cn : nodes) hscale = std::max(hscale, cn.phi0.norm());

    KktCheck feas{"dual feasibility |lambda| <= w g", 0.0, -1, false};
    KktCheck stick{"stick where |lambda| < w g", 0.0, -1, false};
    KktCheck align{"slip aligned with the multiplier", 0.0, -1, false};
    for (size_t k = 0; k < nodes.size(); ++k) {
        const auto& cn = nodes[k];
        const Vec3 lam = sol.lambda[cn.si];
        const Vec3 slip = detail::tangential(sol.h0.segment<3>(6 * cn.si), cn.n) - cn.phi0;
        const double v1 = (lam.norm() - cn.r) / gscale;
        if (v1 > feas.violation) {
            feas.violation = v1;
            feas.worst_node = cn.si;
        }
        if (lam.norm() < cn.r - tol * gscale) {
            const double v2 = slip.norm() / hscale;
            if (v2 > stick.violation) {
                stick.violation = v2;
                stick.worst_node = cn.si;
            }
        }
        const double v3 =
            (lam.norm() * slip.norm() - lam.dot(slip)) / (gscale * hscale);
        if (v3 > align.violation) {
            align.violation = v3;
            align.worst_node = cn.si;
        }
    }
    rep.indeterminate_nodes = 0;
    for (int i = 0; i < sp.num_nodes(); ++i)
        if (sp.weight_s2[i] > 0.0 && prob.friction.g[i] <= 0.0 &&
            sol.lambda[i].norm() <= 1e-30)
            ++rep.indeterminate_nodes;

    // stationarity: A h + Js^T lambda - rhs on free dofs
    VecX jst = VecX::Zero(prob.dim());
    detail::scatter_lambda(prob, nodes, [&] {
        std::vector<Vec3> l(nodes.size());
        for (size_t k = 0; k < nodes.size(); ++k) l[k] = sol.lambda[nodes[k].si];
        return l;
    }(), jst);
    VecX r = prob.op->A * sol.h0 + jst - prob.rhs;
    if (is_semicoercive(prob.kind)) {
        // the kernel multiplier of the bordered solve shows up as a rigid
        // component of the residual; project it out
        const auto [pr, qr] = project_P(
            [&] {
                VecX rw = r;
                for (int i = 0; i < sp.num_nodes(); ++i)
                    rw.segment<6>(6 * i) /= std::max(sp.weight[i], 1e-300);
                return rw;
            }(),
            sp, prob.op->kernel_basis);
        VecX qw = qr;
        for (int i = 0; i < sp.num_nodes(); ++i)
            qw.segment<6>(6 * i) *= sp.weight[i];
        r = qw;
    }
    const double rscale =
        std::max(prob.rhs.lpNorm<Eigen::Infinity>(),
                 (prob.op->A * sol.h0).lpNorm<Eigen::Infinity>()) + 1e-30;
    KktCheck stat{"boundary stationarity residual", 0.0, -1, false};
    for (int d = 0; d < prob.dim(); ++d) {
        if (prob.constrained[d]) continue;
        const double v = std::abs(r[d]) / rscale;
        if (v > stat.violation) {
            stat.violation = v;
            stat.worst_node = d / 6;
        }
    }

    // the variational inequality itself on random feasible probes
    KktCheck vi{"variational inequality on random probes", 0.0, -1, false};
    Rng rng(987654321);
    const double j0 = friction_functional(sol.h0, prob.friction, sp);
    for (int probe = 0; probe < 100; ++probe) {
        VecX ht = rng.normal_vector(prob.dim()) * hscale;
        for (int d = 0; d < prob.dim(); ++d)
            if (prob.constrained[d]) ht[d] = 0.0;
        const VecX dlt = ht - sol.h0;
        const double lhs = (prob.op->A * sol.h0).dot(dlt) +
                           friction_functional(ht, prob.friction, sp) - j0 -
                           prob.rhs.dot(dlt);
        const double scale = std::abs((prob.op->A * sol.h0).dot(dlt)) +
                             friction_functional(ht, prob.friction, sp) + j0 +
                             std::abs(prob.rhs.dot(dlt)) + 1e-30;
        const double v = std::max(0.0, -lhs) / scale;
        if (v > vi.violation) vi.violation = v;
    }

    for (KktCheck* c : {&feas, &stick, &align, &stat, &vi}) {
        c->pass = c->violation <= tol;
        rep.checks.push_back(*c);
    }
    rep.all_pass = true;
    for (const auto& c : rep.checks) rep.all_pass &= c.pass;
    return rep;
}

}  // namespace hemivar
