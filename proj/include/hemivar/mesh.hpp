// Tetrahedral meshes with a tagged boundary partition S = S1 u S2 (and FAR
// for truncated exterior domains), plus the nodal trace data (normals,
// lumped boundary weights, tangent frames) used by the boundary solvers.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hemivar/common.hpp"

namespace hemivar {

enum class PartTag { S1, S2, FAR };

enum class Region { interior, exterior_truncated };

struct BoundaryTri {
    std::array<int, 3> nodes;
    PartTag tag;
};

struct Mesh {
    std::vector<Vec3> nodes;
    std::vector<std::array<int, 4>> tets;
    std::vector<BoundaryTri> boundary_tris;
    Region region = Region::interior;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_dofs() const { return 6 * num_nodes(); }
};

inline double tet_volume(const Mesh& m, const std::array<int, 4>& t) {
    const Vec3 a = m.nodes[t[1]] - m.nodes[t[0]];
    const Vec3 b = m.nodes[t[2]] - m.nodes[t[0]];
    const Vec3 c = m.nodes[t[3]] - m.nodes[t[0]];
    return a.cross(b).dot(c) / 6.0;
}

inline double triangle_area(const Mesh& m, const std::array<int, 3>& t) {
    const Vec3 a = m.nodes[t[1]] - m.nodes[t[0]];
    const Vec3 b = m.nodes[t[2]] - m.nodes[t[0]];
    return a.cross(b).norm() / 2.0;
}

/// Splits v into its normal component and tangential part w.r.t. unit n:
/// v = v_n * n + v_s with v_s . n = 0.
inline std::pair<double, Vec3> tangential_decompose(const Vec3& v, const Vec3& n) {
    if (std::abs(n.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("tangential_decompose: normal must be a unit vector");
    const double vn = v.dot(n);
    return {vn, v - vn * n};
}

namespace detail {

inline std::array<int, 3> sorted_tri(int a, int b, int c) {
    std::array<int, 3> t{a, b, c};
    std::sort(t.begin(), t.end());
    return t;
}

inline std::array<int, 2> sorted_edge(int a, int b) {
    return a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a};
}

}  // namespace detail

/// Structural validation: positive tet orientation, closed tagged boundary,
/// every boundary triangle the free face of exactly one tet, FAR only on
/// truncated exterior meshes. Throws ValidationError. Also canonically
/// orients each stored boundary triangle so its normal points outward.
inline void validate_mesh(Mesh& m) {
    if (m.nodes.empty() || m.tets.empty())
        throw ValidationError("mesh has no nodes or no tets");
    for (const auto& t : m.tets)
        for (int v : t)
            if (v < 0 || v >= m.num_nodes())
                throw ValidationError("tet references node " + std::to_string(v) +
                                      " out of range");
    for (size_t i = 0; i < m.tets.size(); ++i)
        if (tet_volume(m, m.tets[i]) <= 0.0)
            throw ValidationError("tet " + std::to_string(i) +
                                  " is degenerate or negatively oriented");

    // face -> (tet index, opposite vertex); boundary faces occur once.
    std::map<std::array<int, 3>, std::pair<int, int>> face_count;
    for (size_t ti = 0; ti < m.tets.size(); ++ti) {
        const auto& t = m.tets[ti];
        static constexpr int f[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
        for (int k = 0; k < 4; ++k) {
            const auto key = detail::sorted_tri(t[f[k][0]], t[f[k][1]], t[f[k][2]]);
            auto it = face_count.find(key);
            if (it == face_count.end())
                face_count[key] = {static_cast<int>(ti), t[k]};
            else
                it->second.first = -1;  // interior face (seen twice)
        }
    }
    std::map<std::array<int, 3>, int> tagged;
    for (size_t bi = 0; bi < m.boundary_tris.size(); ++bi) {
        auto& bt = m.boundary_tris[bi];
        const auto key = detail::sorted_tri(bt.nodes[0], bt.nodes[1], bt.nodes[2]);
        if (tagged.count(key))
            throw ValidationError("boundary triangle listed twice");
        tagged[key] = static_cast<int>(bi);
        auto it = face_count.find(key);
        if (it == face_count.end() || it->second.first < 0)
            throw ValidationError("boundary triangle " + std::to_string(bi) +
                                  " is not a free face of exactly one tet");
        // orient outward: normal must point away from the opposite vertex
        const Vec3 opp = m.nodes[it->second.second];
        const Vec3 p0 = m.nodes[bt.nodes[0]];
        const Vec3 nrm = (m.nodes[bt.nodes[1]] - p0).cross(m.nodes[bt.nodes[2]] - p0);
        if (nrm.dot(p0 - opp) < 0.0) std::swap(bt.nodes[1], bt.nodes[2]);
        if (bt.tag == PartTag::FAR && m.region != Region::exterior_truncated)
            throw ValidationError("FAR tag on an interior-region mesh");
    }
    for (const auto& [key, val] : face_count)
        if (val.first >= 0 && !tagged.count(key))
            throw ValidationError("open boundary: untagged free face (" +
                                  std::to_string(key[0]) + "," + std::to_string(key[1]) +
                                  "," + std::to_string(key[2]) + ")");

    // closed boundary: each boundary edge shared by exactly two boundary tris
    std::map<std::array<int, 2>, int> edge_count;
    for (const auto& bt : m.boundary_tris)
        for (int k = 0; k < 3; ++k)
            edge_count[detail::sorted_edge(bt.nodes[k], bt.nodes[(k + 1) % 3])]++;
    for (const auto& [e, c] : edge_count)
        if (c != 2)
            throw ValidationError("boundary not closed: edge (" + std::to_string(e[0]) +
                                  "," + std::to_string(e[1]) + ") on " +
                                  std::to_string(c) + " boundary triangles");
}

/// Plain-text mesh format:
///   nodes N        then N lines "x y z"
///   tets M         then M lines "i j k l"   (zero-based)
///   btris K        then K lines "i j k TAG" (TAG in S1|S2|FAR)
/// '#' starts a comment. Region is exterior_truncated iff a FAR tag occurs.
inline Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file: " + path);
    Mesh m;
    int lineno = 0;
    bool far_seen = false;
    auto next_line = [&](std::string& out) -> bool {
        std::string raw;
        while (std::getline(in, raw)) {
            ++lineno;
            const auto h = raw.find('#');
            if (h != std::string::npos) raw.erase(h);
            std::istringstream probe(raw);
            std::string tok;
            if (probe >> tok) {
                out = raw;
                return true;
            }
        }
        return false;
    };
    auto expect_count = [&](const char* kw) -> int {
        std::string line;
        if (!next_line(line)) throw ParseError(std::string("expected '") + kw + " N'", lineno);
        std::istringstream ss(line);
        std::string key;
        long n = -1;
        ss >> key >> n;
        if (key != kw || n < 0)
            throw ParseError(std::string("expected '") + kw + " N', got '" + line + "'",
                             lineno);
        return static_cast<int>(n);
    };

    const int nn = expect_count("nodes");
    m.nodes.reserve(nn);
    for (int i = 0; i < nn; ++i) {
        std::string line;
        if (!next_line(line)) throw ParseError("unexpected end of file in node list", lineno);
        std::istringstream ss(line);
        Vec3 x;
        if (!(ss >> x[0] >> x[1] >> x[2]))
            throw ParseError("malformed node line '" + line + "'", lineno);
        m.nodes.push_back(x);
    }
    const int nt = expect_count("tets");
    m.tets.reserve(nt);
    for (int i = 0; i < nt; ++i) {
        std::string line;
        if (!next_line(line)) throw ParseError("unexpected end of file in tet list", lineno);
        std::istringstream ss(line);
        std::array<int, 4> t;
        if (!(ss >> t[0] >> t[1] >> t[2] >> t[3]))
            throw ParseError("malformed tet line '" + line + "'", lineno);
        m.tets.push_back(t);
    }
    const int nb = expect_count("btris");
    m.boundary_tris.reserve(nb);
    for (int i = 0; i < nb; ++i) {
        std::string line;
        if (!next_line(line))
            throw ParseError("unexpected end of file in boundary list", lineno);
        std::istringstream ss(line);
        BoundaryTri bt;
        std::string tag;
        if (!(ss >> bt.nodes[0] >> bt.nodes[1] >> bt.nodes[2] >> tag))
            throw ParseError("malformed boundary line '" + line + "'", lineno);
        if (tag == "S1")
            bt.tag = PartTag::S1;
        else if (tag == "S2")
            bt.tag = PartTag::S2;
        else if (tag == "FAR")
            bt.tag = PartTag::FAR, far_seen = true;
        else
            throw ParseError("unknown boundary tag '" + tag + "'", lineno);
        m.boundary_tris.push_back(bt);
    }
    m.region = far_seen ? Region::exterior_truncated : Region::interior;
    validate_mesh(m);
    return m;
}

inline void save_mesh(const Mesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mesh file: " + path);
    out.precision(17);
    out << "nodes " << m.nodes.size() << "\n";
    for (const auto& x : m.nodes) out << x[0] << " " << x[1] << " " << x[2] << "\n";
    out << "tets " << m.tets.size() << "\n";
    for (const auto& t : m.tets) out << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
    out << "btris " << m.boundary_tris.size() << "\n";
    for (const auto& bt : m.boundary_tris) {
        const char* tag = bt.tag == PartTag::S1 ? "S1" : bt.tag == PartTag::S2 ? "S2" : "FAR";
        out << bt.nodes[0] << " " << bt.nodes[1] << " " << bt.nodes[2] << " " << tag << "\n";
    }
}

/// Uniform 1->8 refinement (corner tets plus octahedron split along a fixed
/// midpoint diagonal). Boundary tags are inherited by the four child faces.
inline Mesh refine_uniform(const Mesh& m) {
    Mesh r;
    r.nodes = m.nodes;
    r.region = m.region;
    std::map<std::array<int, 2>, int> midpoint;
    auto mid = [&](int a, int b) -> int {
        const auto key = detail::sorted_edge(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int idx = static_cast<int>(r.nodes.size());
        r.nodes.push_back((m.nodes[a] + m.nodes[b]) / 2.0);
        midpoint[key] = idx;
        return idx;
    };
    auto push_tet = [&](int a, int b, int c, int d) {
        std::array<int, 4> t{a, b, c, d};
        if (tet_volume(r, t) < 0.0) std::swap(t[2], t[3]);
        r.tets.push_back(t);
    };
    for (const auto& t : m.tets) {
        const int v0 = t[0], v1 = t[1], v2 = t[2], v3 = t[3];
        const int m01 = mid(v0, v1), m02 = mid(v0, v2), m03 = mid(v0, v3);
        const int m12 = mid(v1, v2), m13 = mid(v1, v3), m23 = mid(v2, v3);
        push_tet(v0, m01, m02, m03);
        push_tet(m01, v1, m12, m13);
        push_tet(m02, m12, v2, m23);
        push_tet(m03, m13, m23, v3);
        // octahedron split along the (m02, m13) diagonal
        push_tet(m01, m02, m03, m13);
        push_tet(m01, m02, m12, m13);
        push_tet(m02, m03, m13, m23);
        push_tet(m02, m12, m13, m23);
    }
    for (const auto& bt : m.boundary_tris) {
        const int a = bt.nodes[0], b = bt.nodes[1], c = bt.nodes[2];
        const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
        r.boundary_tris.push_back({{a, ab, ca}, bt.tag});
        r.boundary_tris.push_back({{ab, b, bc}, bt.tag});
        r.boundary_tris.push_back({{ca, bc, c}, bt.tag});
        r.boundary_tris.push_back({{ab, bc, ca}, bt.tag});
    }
    validate_mesh(r);
    return r;
}

/// Per-node boundary data. Interface nodes on the S1/S2 closure curve are
/// assigned to S1 (the Dirichlet constraint wins), but their S2 area share
/// still enters the lumped weights used for surface quadrature.
struct TraceMap {
    std::vector<int> boundary_nodes;        // mesh node indices, ascending
    std::vector<int> node_to_boundary;      // -1 for interior nodes
    std::vector<Vec3> normal;               // unit outward normal per boundary node
    std::vector<double> weight;             // lumped area weight over all tags
    std::vector<double> weight_s1;          // lumped area from S1 triangles
    std::vector<double> weight_s2;          // lumped area from S2 triangles
    std::vector<PartTag> part;              // assigned part per boundary node
    std::vector<Vec3> tangent1, tangent2;   // deterministic orthonormal frame

    int num_boundary_nodes() const { return static_cast<int>(boundary_nodes.size()); }
};

/// Builds the trace map: area-weighted nodal normals (renormalized), lumped
/// weights per tag, deterministic tangent frames (smallest-|component| axis
/// rule), and the S1-wins part assignment.
inline TraceMap build_trace_map(const Mesh& m) {
    TraceMap tm;
    tm.node_to_boundary.assign(m.nodes.size(), -1);
    std::vector<char> on_boundary(m.nodes.size(), 0);
    for (const auto& bt : m.boundary_tris)
        for (int v : bt.nodes) on_boundary[v] = 1;
    for (int i = 0; i < m.num_nodes(); ++i)
        if (on_boundary[i]) {
            tm.node_to_boundary[i] = static_cast<int>(tm.boundary_nodes.size());
            tm.boundary_nodes.push_back(i);
        }
    const int nb = tm.num_boundary_nodes();
    tm.normal.assign(nb, Vec3::Zero());
    tm.weight.assign(nb, 0.0);
    tm.weight_s1.assign(nb, 0.0);
    tm.weight_s2.assign(nb, 0.0);
    std::vector<char> has_s1(nb, 0), has_s2(nb, 0), has_far(nb, 0);
    for (const auto& bt : m.boundary_tris) {
        const Vec3 p0 = m.nodes[bt.nodes[0]];
        const Vec3 an = (m.nodes[bt.nodes[1]] - p0).cross(m.nodes[bt.nodes[2]] - p0) / 2.0;
        const double area = an.norm();
        for (int v : bt.nodes) {
            const int b = tm.node_to_boundary[v];
            tm.normal[b] += an;  // area-weighted: an = area * unit normal
            tm.weight[b] += area / 3.0;
            if (bt.tag == PartTag::S1) tm.weight_s1[b] += area / 3.0, has_s1[b] = 1;
            if (bt.tag == PartTag::S2) tm.weight_s2[b] += area / 3.0, has_s2[b] = 1;
            if (bt.tag == PartTag::FAR) has_far[b] = 1;
        }
    }
    tm.part.assign(nb, PartTag::S2);
    tm.tangent1.assign(nb, Vec3::Zero());
    tm.tangent2.assign(nb, Vec3::Zero());
    for (int b = 0; b < nb; ++b) {
        const double len = tm.normal[b].norm();
        if (len <= 0.0) throw ValidationError("degenerate nodal normal");
        tm.normal[b] /= len;
        tm.part[b] = has_s1[b] ? PartTag::S1 : (has_s2[b] ? PartTag::S2 : PartTag::FAR);
        if (has_far[b] && (has_s1[b] || has_s2[b]))
            throw ValidationError("FAR surface touches S1/S2");
        // tangent frame: axis with the smallest |n| component, ties by index
        const Vec3& n = tm.normal[b];
        int k = 0;
        for (int i = 1; i < 3; ++i)
            if (std::abs(n[i]) < std::abs(n[k])) k = i;
        Vec3 e = Vec3::Zero();
        e[k] = 1.0;
        tm.tangent1[b] = (e - e.dot(n) * n).normalized();
        tm.tangent2[b] = n.cross(tm.tangent1[b]);
    }
    return tm;
}

// --- structured generators (test utilities and the make-mesh CLI) ---------

namespace detail {

/// Kuhn subdivision of the hex cell with opposite corners v000..v111:
/// six tets sharing the main diagonal; quad faces always split along the
/// (low,low)-(high,high) diagonal, so structured grids stay conforming.
inline void kuhn_split(std::vector<std::array<int, 4>>& tets, const int v[2][2][2]) {
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) {
        int c[3] = {0, 0, 0};
        std::array<int, 4> t;
        t[0] = v[0][0][0];
        for (int s = 0; s < 3; ++s) {
            c[p[s]] = 1;
            t[s + 1] = v[c[0]][c[1]][c[2]];
        }
        tets.push_back(t);
    }
}

}  // namespace detail

/// Structured mesh of [0,1]^3 with n subdivisions per axis (6 n^3 tets).
/// Boundary faces are tagged via `tag_of(face normal direction)`; pass
/// {} to tag everything S2.
inline Mesh make_cube_mesh(int n,
                           const std::function<PartTag(const Vec3&)>& tag_of = {}) {
    if (n < 1) throw std::invalid_argument("make_cube_mesh: n must be >= 1");
    Mesh m;
    const int nn = n + 1;
    auto id = [&](int i, int j, int k) { return (i * nn + j) * nn + k; };
    for (int i = 0; i < nn; ++i)
        for (int j = 0; j < nn; ++j)
            for (int k = 0; k < nn; ++k)
                m.nodes.push_back(Vec3(double(i) / n, double(j) / n, double(k) / n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                int v[2][2][2];
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        for (int c = 0; c < 2; ++c) v[a][b][c] = id(i + a, j + b, k + c);
                detail::kuhn_split(m.tets, v);
            }
    // orient tets positively
    for (auto& t : m.tets)
        if (tet_volume(m, t) < 0.0) std::swap(t[2], t[3]);
    // boundary: collect free faces, tag by outward direction
    std::map<std::array<int, 3>, std::pair<int, int>> faces;
    for (size_t ti = 0; ti < m.tets.size(); ++ti) {
        const auto& t = m.tets[ti];
        static constexpr int f[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
        for (int kk = 0; kk < 4; ++kk) {
            const auto key =
                detail::sorted_tri(t[f[kk][0]], t[f[kk][1]], t[f[kk][2]]);
            auto it = faces.find(key);
            if (it == faces.end())
                faces[key] = {static_cast<int>(ti), t[kk]};
            else
                it->second.first = -1;
        }
    }
    for (const auto& [key, val] : faces) {
        if (val.first < 0) continue;
        const Vec3 p0 = m.nodes[key[0]];
        Vec3 nrm = (m.nodes[key[1]] - p0).cross(m.nodes[key[2]] - p0);
        if (nrm.dot(p0 - m.nodes[val.second]) < 0.0) nrm = -nrm;
        nrm.normalize();
        const PartTag tag = tag_of ? tag_of(nrm) : PartTag::S2;
        m.boundary_tris.push_back({{key[0], key[1], key[2]}, tag});
    }
    validate_mesh(m);
    return m;
}

/// Axis-aligned box [0,dims] as a scaled cube grid.
inline Mesh make_box_mesh(int n, const Vec3& dims,
                          const std::function<PartTag(const Vec3&)>& tag_of = {}) {
    if (dims.minCoeff() <= 0.0)
        throw std::invalid_argument("make_box_mesh: dimensions must be positive");
    Mesh m = make_cube_mesh(n, tag_of);
    for (auto& x : m.nodes) x = x.cwiseProduct(dims).eval();
    validate_mesh(m);
    return m;
}

/// Truncated exterior annulus around the cube [-1,1]^3: the region between
/// the inner cube surface S and a far cube shell at half-width R (zero
/// Dirichlet there approximates the decay condition). The inner surface
/// triangulation depends only on n_inner, not on R, so traces from
/// different truncation radii are comparable node by node.
/// Inner surface faces are tagged via tag_of(outward-of-annulus normal);
/// the outer shell is tagged FAR.
inline Mesh make_shell_mesh(int n_inner, double far_radius, double growth = 1.6,
                            const std::function<PartTag(const Vec3&)>& tag_of = {}) {
    if (n_inner < 1) throw std::invalid_argument("make_shell_mesh: n_inner must be >= 1");
    if (far_radius <= 1.0) throw std::invalid_argument("make_shell_mesh: radius must exceed 1");
    // 1-d coordinate ladder: uniform inside [-1,1], geometric growth outside
    std::vector<double> pos;
    for (int i = 0; i <= n_inner; ++i) pos.push_back(-1.0 + 2.0 * double(i) / n_inner);
    double h = 2.0 / n_inner, c = 1.0;
    while (c + h < far_radius * (1.0 - 1e-9)) {
        c += h;
        pos.push_back(c);
        h *= growth;
    }
    pos.push_back(far_radius);
    std::vector<double> coords;
    for (auto it = pos.rbegin(); it != pos.rend(); ++it)
        if (*it > 1.0 + 1e-12) coords.push_back(-*it);
    for (double v : pos) coords.push_back(v);
    const int nc = static_cast<int>(coords.size());

    Mesh m;
    m.region = Region::exterior_truncated;
    std::vector<int> node_id(static_cast<size_t>(nc) * nc * nc, -1);
    auto inside_inner = [&](double v) { return v > -1.0 + 1e-12 && v < 1.0 - 1e-12; };
    auto idx = [&](int i, int j, int k) { return (static_cast<size_t>(i) * nc + j) * nc + k; };
    for (int i = 0; i < nc; ++i)
        for (int j = 0; j < nc; ++j)
            for (int k = 0; k < nc; ++k) {
                // skip nodes strictly interior to the inner cube
                if (inside_inner(coords[i]) && inside_inner(coords[j]) &&
                    inside_inner(coords[k]))
                    continue;
                node_id[idx(i, j, k)] = static_cast<int>(m.nodes.size());
                m.nodes.push_back(Vec3(coords[i], coords[j], coords[k]));
            }
    auto cell_in_inner = [&](int i, int j, int k) {
        auto mid = [&](int a) { return (coords[a] + coords[a + 1]) / 2.0; };
        return std::abs(mid(i)) < 1.0 && std::abs(mid(j)) < 1.0 && std::abs(mid(k)) < 1.0;
    };
    for (int i = 0; i + 1 < nc; ++i)
        for (int j = 0; j + 1 < nc; ++j)
            for (int k = 0; k + 1 < nc; ++k) {
                if (cell_in_inner(i, j, k)) continue;
                int v[2][2][2];
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        for (int c2 = 0; c2 < 2; ++c2)
                            v[a][b][c2] = node_id[idx(i + a, j + b, k + c2)];
                detail::kuhn_split(m.tets, v);
            }
    for (auto& t : m.tets)
        if (tet_volume(m, t) < 0.0) std::swap(t[2], t[3]);

    std::map<std::array<int, 3>, std::pair<int, int>> faces;
    for (size_t ti = 0; ti < m.tets.size(); ++ti) {
        const auto& t = m.tets[ti];
        static constexpr int f[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
        for (int kk = 0; kk < 4; ++kk) {
            const auto key = detail::sorted_tri(t[f[kk][0]], t[f[kk][1]], t[f[kk][2]]);
            auto it = faces.find(key);
            if (it == faces.end())
                faces[key] = {static_cast<int>(ti), t[kk]};
            else
                it->second.first = -1;
        }
    }
    for (const auto& [key, val] : faces) {
        if (val.first < 0) continue;
        const Vec3 p0 = m.nodes[key[0]];
        Vec3 nrm = (m.nodes[key[1]] - p0).cross(m.nodes[key[2]] - p0);
        if (nrm.dot(p0 - m.nodes[val.second]) < 0.0) nrm = -nrm;
        nrm.normalize();
        const Vec3 centroid = (m.nodes[key[0]] + m.nodes[key[1]] + m.nodes[key[2]]) / 3.0;
        const bool on_far = centroid.lpNorm<Eigen::Infinity>() > 1.0 + 1e-9;
        PartTag tag = PartTag::FAR;
        if (!on_far && tag_of) {
            // tag inner faces by the body-outward direction so that the same
            // face selectors work for cube and shell meshes
            int axis = 0;
            for (int a = 1; a < 3; ++a)
                if (std::abs(centroid[a]) > std::abs(centroid[axis])) axis = a;
            Vec3 body_outward = Vec3::Zero();
            body_outward[axis] = centroid[axis] > 0.0 ? 1.0 : -1.0;
            tag = tag_of(body_outward);
        } else if (!on_far) {
            tag = PartTag::S2;
        }
        m.boundary_tris.push_back({{key[0], key[1], key[2]}, tag});
    }
    validate_mesh(m);
    return m;
}

/// Face-based cube tagging helper: S1 on the selected outward directions
/// ("x-","x+","y-","y+","z-","z+"), S2 elsewhere.
inline std::function<PartTag(const Vec3&)> tag_faces_s1(const std::vector<std::string>& dirs) {
    return [dirs](const Vec3& n) {
        for (const auto& d : dirs) {
            if (d.size() != 2) continue;
            const int axis = d[0] == 'x' ? 0 : d[0] == 'y' ? 1 : 2;
            const double sign = d[1] == '-' ? -1.0 : 1.0;
            if (n[axis] * sign > 0.9) return PartTag::S1;
        }
        return PartTag::S2;
    };
}

}  // namespace hemivar
