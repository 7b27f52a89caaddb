#include "hemivar/mesh.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace hemivar;

namespace {

std::string write_temp(const std::string& content) {
    static int counter = 0;
    const auto path = std::filesystem::temp_directory_path() /
                      ("hemivar_mesh_" + std::to_string(counter++) + ".mesh");
    std::ofstream out(path);
    out << content;
    return path.string();
}

const char* kUnitCube = R"(# canonical 6-tet cube
nodes 8
0 0 0
1 0 0
0 1 0
1 1 0
0 0 1
1 0 1
0 1 1
1 1 1
tets 6
0 1 3 7
0 1 7 5
0 2 7 3
0 2 6 7
0 4 7 6
0 4 5 7
btris 12
0 1 3 S1
0 3 2 S1
4 7 5 S2
4 6 7 S2
0 5 1 S2
0 4 5 S2
2 3 7 S2
2 7 6 S2
0 2 6 S2
0 6 4 S2
1 7 3 S2
1 5 7 S2
)";

}  // namespace

TEST(Mesh, LoadUnitCube) {
    const Mesh m = load_mesh(write_temp(kUnitCube));
    EXPECT_EQ(m.num_nodes(), 8);
    EXPECT_EQ(m.tets.size(), 6u);
    EXPECT_EQ(m.boundary_tris.size(), 12u);
    EXPECT_EQ(m.region, Region::interior);
    double vol = 0.0;
    for (const auto& t : m.tets) vol += tet_volume(m, t);
    EXPECT_NEAR(vol, 1.0, 1e-14);
}

TEST(Mesh, LoadRejectsInvertedTet) {
    std::string bad = kUnitCube;
    bad.replace(bad.find("0 1 3 7"), 7, "1 0 3 7");
    EXPECT_THROW(load_mesh(write_temp(bad)), ValidationError);
}

TEST(Mesh, LoadRejectsOpenBoundary) {
    std::string bad = kUnitCube;
    bad.replace(bad.find("btris 12"), 8, "btris 11");
    bad.erase(bad.rfind("1 5 7 S2"));
    EXPECT_THROW(load_mesh(write_temp(bad)), ValidationError);
}

TEST(Mesh, LoadRejectsUnknownTagWithLine) {
    std::string bad = kUnitCube;
    bad.replace(bad.find("0 1 3 S1"), 8, "0 1 3 SX");
    try {
        load_mesh(write_temp(bad));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_GT(e.line(), 0);
        EXPECT_NE(std::string(e.what()).find("SX"), std::string::npos);
    }
}

TEST(Mesh, FarTagRequiresExteriorRegion) {
    // FAR implies exterior region at load; but a hand-built interior mesh
    // with a FAR tag must fail validation.
    Mesh m = make_cube_mesh(1);
    m.boundary_tris[0].tag = PartTag::FAR;
    EXPECT_THROW(validate_mesh(m), ValidationError);
}

TEST(Mesh, TangentialDecompose) {
    Rng rng(5);
    const Vec3 n = rng.unit_vector();
    auto [vn, vs] = tangential_decompose(n, n);
    EXPECT_NEAR(vn, 1.0, 1e-14);
    EXPECT_LT(vs.norm(), 1e-14);

    Vec3 perp = n.cross(rng.unit_vector());
    perp.normalize();
    auto [pn, psv] = tangential_decompose(perp, n);
    EXPECT_LT(std::abs(pn), 1e-14);
    EXPECT_LT((psv - perp).norm(), 1e-14);

    for (int rep = 0; rep < 50; ++rep) {
        const Vec3 v = rng.normal_vector(3);
        const Vec3 nn = rng.unit_vector();
        auto [a, s] = tangential_decompose(v, nn);
        EXPECT_LT((a * nn + s - v).norm(), 1e-14 * (1.0 + v.norm()));
        EXPECT_LT(std::abs(s.dot(nn)), 1e-14 * (1.0 + v.norm()));
    }
    EXPECT_THROW(tangential_decompose(Vec3(1, 0, 0), Vec3(0, 0, 2)),
                 std::invalid_argument);
}

TEST(Mesh, RefineUniformCounts) {
    const Mesh m = load_mesh(write_temp(kUnitCube));
    const Mesh r = refine_uniform(m);
    EXPECT_EQ(r.num_nodes(), 27);
    EXPECT_EQ(r.tets.size(), 48u);
    EXPECT_EQ(r.boundary_tris.size(), 48u);

    double vol = 0.0, vol_r = 0.0;
    for (const auto& t : m.tets) vol += tet_volume(m, t);
    for (const auto& t : r.tets) vol_r += tet_volume(r, t);
    EXPECT_NEAR(vol, vol_r, 1e-12);

    auto tag_area = [](const Mesh& mm, PartTag tag) {
        double a = 0.0;
        for (const auto& bt : mm.boundary_tris)
            if (bt.tag == tag) a += triangle_area(mm, bt.nodes);
        return a;
    };
    EXPECT_NEAR(tag_area(m, PartTag::S1), tag_area(r, PartTag::S1), 1e-12);
    EXPECT_NEAR(tag_area(m, PartTag::S2), tag_area(r, PartTag::S2), 1e-12);
}

TEST(Mesh, GeneratorCubeMatchesCanonicalCounts) {
    const Mesh m = make_cube_mesh(1, tag_faces_s1({"z-"}));
    EXPECT_EQ(m.num_nodes(), 8);
    EXPECT_EQ(m.tets.size(), 6u);
    EXPECT_EQ(m.boundary_tris.size(), 12u);
    int s1 = 0;
    for (const auto& bt : m.boundary_tris) s1 += bt.tag == PartTag::S1;
    EXPECT_EQ(s1, 2);

    const Mesh m3 = make_cube_mesh(3);
    EXPECT_EQ(m3.num_nodes(), 64);
    EXPECT_EQ(m3.tets.size(), 6u * 27u);
}

TEST(Mesh, BoundaryNormalsPointOutward) {
    const Mesh m = make_cube_mesh(2, tag_faces_s1({"x+"}));
    for (const auto& bt : m.boundary_tris) {
        const Vec3 p0 = m.nodes[bt.nodes[0]];
        const Vec3 n = (m.nodes[bt.nodes[1]] - p0).cross(m.nodes[bt.nodes[2]] - p0);
        const Vec3 centroid =
            (m.nodes[bt.nodes[0]] + m.nodes[bt.nodes[1]] + m.nodes[bt.nodes[2]]) / 3.0;
        EXPECT_GT(n.dot(centroid - Vec3(0.5, 0.5, 0.5)), 0.0);
    }
}

TEST(Mesh, TraceMapNormalsAndWeights) {
    const Mesh m = make_cube_mesh(2, tag_faces_s1({"z-"}));
    const TraceMap tm = build_trace_map(m);
    EXPECT_EQ(tm.num_boundary_nodes(), 26);  // 27 nodes, one interior
    double total = 0.0;
    for (int b = 0; b < tm.num_boundary_nodes(); ++b) {
        EXPECT_NEAR(tm.normal[b].norm(), 1.0, 1e-12);
        total += tm.weight[b];
        // interior nodes of a flat face carry the exact face normal
        const Vec3 x = m.nodes[tm.boundary_nodes[b]];
        int on_faces = 0;
        for (int a = 0; a < 3; ++a) on_faces += (x[a] == 0.0 || x[a] == 1.0);
        if (on_faces == 1) {
            Vec3 expect = Vec3::Zero();
            for (int a = 0; a < 3; ++a)
                if (x[a] == 0.0) expect[a] = -1.0;
                else if (x[a] == 1.0) expect[a] = 1.0;
            EXPECT_LT((tm.normal[b] - expect).norm(), 1e-12);
        }
        // orthonormal deterministic frame
        EXPECT_NEAR(tm.tangent1[b].norm(), 1.0, 1e-12);
        EXPECT_LT(std::abs(tm.tangent1[b].dot(tm.normal[b])), 1e-12);
        EXPECT_LT((tm.tangent2[b] - tm.normal[b].cross(tm.tangent1[b])).norm(), 1e-12);
    }
    EXPECT_NEAR(total, 6.0, 1e-12);  // cube surface area

    // interface nodes (on the rim of the z- face) are assigned to S1
    for (int b = 0; b < tm.num_boundary_nodes(); ++b) {
        const Vec3 x = m.nodes[tm.boundary_nodes[b]];
        if (x[2] == 0.0)
            EXPECT_EQ(tm.part[b], PartTag::S1);
        else
            EXPECT_EQ(tm.part[b], PartTag::S2);
    }
}

TEST(Mesh, ShellGeneratorBasics) {
    const Mesh s = make_shell_mesh(2, 4.0, 1.6, tag_faces_s1({"z-"}));
    EXPECT_EQ(s.region, Region::exterior_truncated);
    int far = 0, s1 = 0, s2 = 0;
    for (const auto& bt : s.boundary_tris) {
        far += bt.tag == PartTag::FAR;
        s1 += bt.tag == PartTag::S1;
        s2 += bt.tag == PartTag::S2;
    }
    EXPECT_GT(far, 0);
    EXPECT_EQ(s1, 8);       // inner z- face: 2x2 cells x 2 tris
    EXPECT_EQ(s2, 5 * 8);   // five remaining inner faces

    // inner surface nodes: normals point into the body cube (annulus-outward)
    const TraceMap tm = build_trace_map(s);
    for (int b = 0; b < tm.num_boundary_nodes(); ++b) {
        const Vec3 x = s.nodes[tm.boundary_nodes[b]];
        if (tm.part[b] == PartTag::FAR) continue;
        EXPECT_NEAR(x.lpNorm<Eigen::Infinity>(), 1.0, 1e-12);
        int flat_faces = 0;
        for (int a = 0; a < 3; ++a) flat_faces += std::abs(std::abs(x[a]) - 1.0) < 1e-12;
        if (flat_faces == 1) {
            // face-interior node: normal is the inward axis direction
            int axis = 0;
            for (int a = 0; a < 3; ++a)
                if (std::abs(std::abs(x[a]) - 1.0) < 1e-12) axis = a;
            EXPECT_NEAR(std::abs(tm.normal[b][axis]), 1.0, 1e-12);
            EXPECT_LT(tm.normal[b][axis] * x[axis], 0.0);
        }
    }

    // inner surface triangulation is independent of the truncation radius
    const Mesh s2m = make_shell_mesh(2, 8.0, 1.6, tag_faces_s1({"z-"}));
    auto inner_key = [](const Mesh& mm) {
        std::vector<std::array<std::array<double, 3>, 3>> tris;
        for (const auto& bt : mm.boundary_tris) {
            if (bt.tag == PartTag::FAR) continue;
            std::array<std::array<double, 3>, 3> tri;
            for (int v = 0; v < 3; ++v)
                for (int a = 0; a < 3; ++a) tri[v][a] = mm.nodes[bt.nodes[v]][a];
            std::sort(tri.begin(), tri.end());
            tris.push_back(tri);
        }
        std::sort(tris.begin(), tris.end());
        return tris;
    };
    EXPECT_EQ(inner_key(s), inner_key(s2m));
}

TEST(Mesh, ConvexVolumeMatchesHull) {
    // Kuhn cube at two resolutions fills exactly the same volume.
    for (int n : {1, 2, 3}) {
        const Mesh m = make_cube_mesh(n);
        double vol = 0.0;
        for (const auto& t : m.tets) vol += tet_volume(m, t);
        EXPECT_NEAR(vol, 1.0, 1e-12);
    }
}
