#include <doctest.h>

#include "meshes.hpp"
#include "viscofrac/error.hpp"
#include "viscofrac/lip_mesh.hpp"
#include "viscofrac/mesh.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace viscofrac;
using mesh::Vec2;

namespace {

const char* kTriangleMsh = R"($MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
1 5 "edge"
2 1 "domain"
$EndPhysicalNames
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
2
1 1 2 5 1 1 2
2 2 2 1 1 1 2 3
$EndElements
)";

std::string square_msh(const std::string& second_element) {
    return "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n"
           "$Elements\n2\n1 2 2 1 1 1 2 3\n" +
           second_element + "\n$EndElements\n";
}

// All-pairs distances by Floyd-Warshall over the lip edge graph.
std::vector<std::vector<double>> floyd_warshall(const mesh::LipMesh& lip) {
    const std::size_t n = lip.num_vertices();
    std::vector<std::vector<double>> D(n, std::vector<double>(n, mesh::kUnreachable));
    for (std::size_t i = 0; i < n; ++i) {
        D[i][i] = 0.0;
        for (const auto& e : lip.adjacency[i]) D[i][e.to] = std::min(D[i][e.to], e.length);
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) D[i][j] = std::min(D[i][j], D[i][k] + D[k][j]);
    return D;
}

}  // namespace

TEST_SUITE("mesh") {
    TEST_CASE("single right triangle: area and shape gradients") {
        std::istringstream in(kTriangleMsh);
        const auto m = mesh::parse_msh(in);
        REQUIRE(m.num_elements() == 1);
        CHECK(m.element_area[0] == doctest::Approx(0.5).epsilon(1e-15));
        const auto& G = m.shape_grads[0];
        CHECK(G(0, 0) == doctest::Approx(-1.0));
        CHECK(G(1, 0) == doctest::Approx(-1.0));
        CHECK(G(0, 1) == doctest::Approx(1.0));
        CHECK(G(1, 1) == doctest::Approx(0.0));
        CHECK(G(0, 2) == doctest::Approx(0.0));
        CHECK(G(1, 2) == doctest::Approx(1.0));
        CHECK(m.node_set("edge") == std::vector<int>{0, 1});
    }

    TEST_CASE("unit square from two triangles") {
        std::istringstream in(square_msh("2 2 2 1 1 1 3 4"));
        const auto m = mesh::parse_msh(in);
        CHECK(m.num_elements() == 2);
        CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("quad element rejected with line number") {
        std::istringstream in(square_msh("2 3 2 1 1 1 2 3 4"));
        try {
            mesh::parse_msh(in);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("unsupported element type") != std::string::npos);
            CHECK(e.line() == 14);
        }
    }

    TEST_CASE("bad version and degenerate triangle rejected") {
        std::string s = kTriangleMsh;
        s.replace(s.find("2.2 0 8"), 7, "4.1 0 8");
        std::istringstream in(s);
        CHECK_THROWS_AS(mesh::parse_msh(in), ParseError);

        // second triangle repeats a node -> zero area
        std::istringstream deg2(square_msh("2 2 2 1 1 1 1 3"));
        try {
            mesh::parse_msh(deg2);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 14);
        }
    }

    TEST_CASE("clockwise triangles are reoriented") {
        const auto m = mesh::make_mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 2, 1}});
        CHECK(m.element_area[0] == doctest::Approx(0.5));
        const Vec2 e1 = m.nodes[m.triangles[0][1]] - m.nodes[m.triangles[0][0]];
        const Vec2 e2 = m.nodes[m.triangles[0][2]] - m.nodes[m.triangles[0][0]];
        CHECK(e1.x() * e2.y() - e1.y() * e2.x() > 0);
    }

    TEST_CASE("shape gradients sum to zero and areas positive") {
        const auto m = testsupport::jitter(testsupport::rect_mesh(0, 0, 3, 2, 6, 4), 0.2, 7);
        for (std::size_t e = 0; e < m.num_elements(); ++e) {
            CHECK(m.element_area[e] > 0);
            CHECK(m.shape_grads[e].rowwise().sum().norm() < 1e-12);
        }
        CHECK(m.total_area() == doctest::Approx(6.0).epsilon(1e-12));
    }

    TEST_CASE("msh writer round trip keeps node sets") {
        const auto m = testsupport::rect_mesh(0, 0, 2, 1, 4, 2);
        const auto path = std::filesystem::temp_directory_path() / "viscofrac_rt.msh";
        testsupport::write_msh(m, path);
        const auto r = mesh::load_msh(path);
        CHECK(r.num_nodes() == m.num_nodes());
        CHECK(r.num_elements() == m.num_elements());
        for (const auto& [name, ids] : m.node_sets) CHECK(r.node_set(name) == ids);
        for (std::size_t n = 0; n < m.num_nodes(); ++n) CHECK((r.nodes[n] - m.nodes[n]).norm() < 1e-14);
        std::filesystem::remove(path);
    }

    TEST_CASE("point locator") {
        const auto m = testsupport::annulus(1.0, 2.0, 4, 24);
        const mesh::PointLocator loc(m);
        CHECK(loc.inside({1.5, 0.0}));
        CHECK_FALSE(loc.inside({0.0, 0.0}));
        CHECK_FALSE(loc.inside({2.5, 0.0}));
    }

    TEST_CASE("lip mesh of four triangles forming a square") {
        // Four triangles around the square centre.
        const auto m = mesh::make_mesh({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}},
                                       {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}});
        const auto lip = mesh::build_lip_mesh(m);
        CHECK(lip.num_vertices() == 4);
        CHECK(lip.num_cells() >= 2);
    }

    TEST_CASE("lip mesh invariants") {
        const auto m = testsupport::jitter(testsupport::rect_mesh(0, 0, 4, 3, 8, 6), 0.15, 3);
        const auto lip = mesh::build_lip_mesh(m);
        REQUIRE(lip.num_vertices() == m.num_elements());
        for (std::size_t i = 0; i < lip.num_vertices(); ++i) CHECK((lip.vertices[i] - m.centroid(i)).norm() == 0.0);
        for (const auto& adj : lip.adjacency)
            for (const auto& e : adj) CHECK(e.length > 0);
        const std::vector<double> c(lip.num_vertices(), 0.37);
        for (std::size_t t = 0; t < lip.num_cells(); ++t) CHECK(lip.cell_gradient(t, c).norm() < 1e-12);
        // Linear fields are reproduced exactly.
        std::vector<double> lin(lip.num_vertices());
        for (std::size_t i = 0; i < lin.size(); ++i) lin[i] = 2.0 * lip.vertices[i].x() - 0.5 * lip.vertices[i].y();
        for (std::size_t t = 0; t < lip.num_cells(); ++t)
            CHECK((lip.cell_gradient(t, lin) - Eigen::Vector2d(2.0, -0.5)).norm() < 1e-10);
    }

    TEST_CASE("strip with collinear centroids") {
        // Two elements are too few; a collinear triple is rejected; a thin strip
        // keeps only non-degenerate cells.
        const auto two = testsupport::rect_mesh(0, 0, 1, 1, 1, 1);
        CHECK_THROWS_AS(mesh::build_lip_mesh(two), ConstructionError);
        CHECK_THROWS_AS(mesh::make_lip_mesh({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}), ConstructionError);
        const auto strip = testsupport::rect_mesh(0, 0, 4, 1, 4, 1);
        const auto lip = mesh::build_lip_mesh(strip);
        for (const auto& c : lip.cells) {
            const Vec2 a = lip.vertices[c.vertices[1]] - lip.vertices[c.vertices[0]];
            const Vec2 b = lip.vertices[c.vertices[2]] - lip.vertices[c.vertices[0]];
            CHECK(std::abs(a.x() * b.y() - a.y() * b.x()) > 1e-12);
        }
    }

    TEST_CASE("annulus lip mesh does not cross the hole") {
        const auto m = testsupport::annulus(1.0, 2.0, 3, 32);
        const auto lip = mesh::build_lip_mesh(m);
        const mesh::PointLocator loc(m);
        for (const auto& c : lip.cells) {
            const Vec2 g = (lip.vertices[c.vertices[0]] + lip.vertices[c.vertices[1]] + lip.vertices[c.vertices[2]]) / 3;
            CHECK(loc.inside(g));
        }
        for (std::size_t i = 0; i < lip.num_vertices(); ++i) {
            for (const auto& e : lip.adjacency[i]) {
                // Edge midpoint and quarter points stay in the material.
                for (double s : {0.25, 0.5, 0.75}) {
                    const Vec2 p = (1 - s) * lip.vertices[i] + s * lip.vertices[e.to];
                    CHECK(loc.inside(p));
                }
            }
        }
    }

    TEST_CASE("shortest paths: identity and line graph") {
        const std::vector<double> xs{0.0, 1.0, 2.0};
        const auto chain = mesh::make_lip_chain(xs);
        const std::vector<int> src{0};
        const auto d = mesh::shortest_path_distances(chain, src);
        CHECK(d[0] == 0.0);
        CHECK(d[1] == doctest::Approx(1.0));
        CHECK(d[2] == doctest::Approx(2.0));
        CHECK_THROWS_AS(mesh::shortest_path_distances(chain, std::vector<int>{}), DomainError);
    }

    TEST_CASE("disconnected vertices are unreachable") {
        const auto lip = mesh::make_lip_mesh({{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 6}}, {{0, 1, 2}, {3, 4, 5}});
        const auto d = mesh::shortest_path_distances(lip, std::vector<int>{0});
        CHECK(d[3] == mesh::kUnreachable);
        CHECK(d[2] == doctest::Approx(1.0));
    }

    TEST_CASE("shortest paths match Floyd-Warshall on a random 50-vertex lip mesh") {
        // 5 x 5 cells with 2 triangles each = 50 base elements -> 50 lip vertices.
        const auto m = testsupport::jitter(testsupport::rect_mesh(0, 0, 5, 5, 5, 5), 0.3, 11);
        const auto lip = mesh::build_lip_mesh(m);
        REQUIRE(lip.num_vertices() == 50);
        const auto D = floyd_warshall(lip);
        std::mt19937 rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<int> src;
            for (int v = 0; v < 50; ++v)
                if (rng() % 7 == 0) src.push_back(v);
            if (src.empty()) src.push_back(static_cast<int>(rng() % 50));
            const auto d = mesh::shortest_path_distances(lip, src);
            for (int x = 0; x < 50; ++x) {
                double best = mesh::kUnreachable;
                for (int s : src) best = std::min(best, D[x][s]);
                CHECK(d[x] == doctest::Approx(best).epsilon(1e-12));
            }
        }
        // Graph distance dominates Euclidean distance, triangle inequality holds.
        for (int a = 0; a < 50; ++a)
            for (int b = 0; b < 50; ++b) {
                CHECK(D[a][b] >= (lip.vertices[a] - lip.vertices[b]).norm() - 1e-12);
                for (int c = 0; c < 50; c += 7) CHECK(D[a][c] <= D[a][b] + D[b][c] + 1e-12);
            }
    }

    TEST_CASE("offset distances equal brute-force min over sources") {
        const auto m = testsupport::rect_mesh(0, 0, 3, 3, 3, 3);
        const auto lip = mesh::build_lip_mesh(m);
        const auto D = floyd_warshall(lip);
        std::mt19937 rng(1);
        std::uniform_real_distribution<double> u(0.0, 2.0);
        std::vector<double> off(lip.num_vertices());
        for (auto& o : off) o = (rng() % 3 == 0) ? mesh::kUnreachable : u(rng);
        off[0] = 0.1;
        const auto r = mesh::offset_distances(lip, off);
        for (std::size_t x = 0; x < off.size(); ++x) {
            double best = mesh::kUnreachable;
            for (std::size_t y = 0; y < off.size(); ++y)
                if (off[y] != mesh::kUnreachable) best = std::min(best, off[y] + D[x][y]);
            CHECK(r[x] == doctest::Approx(best).epsilon(1e-12));
        }
    }

    TEST_CASE("fewer than three elements") {
        const auto m = testsupport::unit_triangle();
        CHECK_THROWS_AS(mesh::build_lip_mesh(m), ConstructionError);
    }
}
