#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "eit/mesh.hpp"

using namespace eit;

namespace {

// conforming = every interior edge in exactly 2 triangles, boundary in 1
std::map<std::pair<int, int>, int> edge_use_counts(const Mesh& mesh) {
    std::map<std::pair<int, int>, int> counts;
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            const int a = t[e], b = t[(e + 1) % 3];
            counts[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    return counts;
}

}  // namespace

TEST_CASE("coarse disk mesh has sensible area and size") {
    const Mesh mesh = build_disk_mesh(0.5);
    CHECK(mesh.n_triangles() >= 4);
    CHECK(std::abs(mesh.total_area() - M_PI) / M_PI < 0.10);
    // coarsest supported resolution still meets the 2% area invariant
    CHECK(std::abs(mesh.total_area() - M_PI) / M_PI < 0.02);
    CHECK(mesh.max_edge_length() <= 1.5 * 0.5);
}

TEST_CASE("area error at target_h 0.1 is below 0.5 percent") {
    const Mesh mesh = build_disk_mesh(0.1);
    CHECK(std::abs(mesh.total_area() - M_PI) / M_PI < 0.005);
    CHECK(mesh.max_edge_length() <= 1.5 * 0.1);
}

TEST_CASE("boundary convergence is at least first order") {
    const double err_coarse = std::abs(build_disk_mesh(0.05).total_area() - M_PI);
    const double err_fine = std::abs(build_disk_mesh(0.025).total_area() - M_PI);
    CHECK(err_coarse / err_fine >= 2.0);
}

TEST_CASE("triangles are positive and ccw, boundary vertices on the circle") {
    const Mesh mesh = build_disk_mesh(0.2);
    for (double a : mesh.element_areas) CHECK(a > 0.0);
    for (const auto& be : mesh.boundary_edges) {
        CHECK(std::abs(std::hypot(mesh.vertices[be.a].x, mesh.vertices[be.a].y) - 1.0) <=
              1e-12);
        CHECK(std::abs(std::hypot(mesh.vertices[be.b].x, mesh.vertices[be.b].y) - 1.0) <=
              1e-12);
    }
}

TEST_CASE("triangulation is conforming") {
    const Mesh mesh = build_disk_mesh(0.17);
    const auto counts = edge_use_counts(mesh);
    std::set<std::pair<int, int>> boundary;
    for (const auto& be : mesh.boundary_edges)
        boundary.insert({std::min(be.a, be.b), std::max(be.a, be.b)});
    int boundary_seen = 0;
    for (const auto& [edge, count] : counts) {
        if (boundary.count(edge)) {
            CHECK(count == 1);
            ++boundary_seen;
        } else {
            CHECK(count == 2);
        }
    }
    CHECK(boundary_seen == static_cast<int>(mesh.boundary_edges.size()));
}

TEST_CASE("rebuild is bit-identical and refinement quadruples triangles") {
    const Mesh a = build_disk_mesh(0.13);
    const Mesh b = build_disk_mesh(0.13);
    REQUIRE(a.n_vertices() == b.n_vertices());
    for (int i = 0; i < a.n_vertices(); ++i) {
        CHECK(a.vertices[i].x == b.vertices[i].x);
        CHECK(a.vertices[i].y == b.vertices[i].y);
    }
    for (const double h : {0.5, 0.4, 0.3, 0.23, 0.11}) {
        CHECK(build_disk_mesh(h / 2).n_triangles() >= 4 * build_disk_mesh(h).n_triangles());
    }
}

TEST_CASE("target_h outside range is rejected") {
    CHECK_THROWS(build_disk_mesh(0.009));
    CHECK_THROWS(build_disk_mesh(0.51));
    CHECK_THROWS(build_disk_mesh(-1.0));
}

TEST_CASE("16 electrodes at half coverage") {
    const Mesh mesh = build_disk_mesh(0.1);
    const ElectrodeLayout layout = place_electrodes(mesh, 16, 0.5, 0.1);
    REQUIRE(layout.electrode_edges.size() == 16);

    // disjoint, >= 2 edges each, contiguous runs in ccw boundary order
    std::set<int> seen;
    for (const auto& edges : layout.electrode_edges) {
        CHECK(edges.size() >= 2);
        for (std::size_t i = 0; i < edges.size(); ++i) {
            CHECK(seen.insert(edges[i]).second);
            if (i > 0) {
                const int n_edges = static_cast<int>(mesh.boundary_edges.size());
                CHECK((edges[i - 1] + 1) % n_edges == edges[i] % n_edges);
            }
        }
    }

    double total_arc = 0.0;
    for (int m = 0; m < 16; ++m) total_arc += layout.electrode_length(mesh, m);
    const Vec2 e0 = mesh.vertices[mesh.boundary_edges[0].a];
    const Vec2 e1 = mesh.vertices[mesh.boundary_edges[0].b];
    const double edge_len = std::hypot(e1.x - e0.x, e1.y - e0.y);
    CHECK(std::abs(total_arc - M_PI) <= edge_len);
}

TEST_CASE("single electrode with near-full coverage takes nearly all edges") {
    const Mesh mesh = build_disk_mesh(0.2);
    const ElectrodeLayout layout = place_electrodes(mesh, 1, 0.99, 0.1);
    REQUIRE(layout.electrode_edges.size() == 1);
    CHECK(layout.electrode_edges[0].size() >=
          static_cast<std::size_t>(0.95 * mesh.boundary_edges.size()));
}

TEST_CASE("resolution guard rejects too few edges per electrode") {
    const Mesh coarse = build_disk_mesh(0.5);
    CHECK_THROWS(place_electrodes(coarse, 16, 0.1, 0.1));
    CHECK_THROWS(place_electrodes(coarse, 48, 0.5, 0.1));
}

TEST_CASE("electrode parameter validation") {
    const Mesh mesh = build_disk_mesh(0.2);
    CHECK_THROWS(place_electrodes(mesh, 16, 0.0, 0.1));
    CHECK_THROWS(place_electrodes(mesh, 16, 1.0, 0.1));
    CHECK_THROWS(place_electrodes(mesh, 16, 0.5, 0.0));
    CHECK_THROWS(place_electrodes(mesh, 0, 0.5, 0.1));
}

TEST_CASE("text export round-trips geometry and boundary") {
    const Mesh mesh = build_disk_mesh(0.22);
    std::stringstream buf;
    write_mesh_text(mesh, buf);
    const Mesh back = read_mesh_text(buf);
    REQUIRE(back.n_vertices() == mesh.n_vertices());
    REQUIRE(back.n_triangles() == mesh.n_triangles());
    for (int i = 0; i < mesh.n_vertices(); ++i) {
        CHECK(back.vertices[i].x == mesh.vertices[i].x);
        CHECK(back.vertices[i].y == mesh.vertices[i].y);
    }
    REQUIRE(back.boundary_edges.size() == mesh.boundary_edges.size());
    for (std::size_t i = 0; i < mesh.boundary_edges.size(); ++i) {
        CHECK(back.boundary_edges[i].mid_angle ==
              doctest::Approx(mesh.boundary_edges[i].mid_angle).epsilon(1e-12));
    }
    CHECK(back.fingerprint() == mesh.fingerprint());
}
