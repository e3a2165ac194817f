#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace eit {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// One edge of the outer circle: the vertex pair (ccw order) and the angle of
// the arc midpoint, used to assign edges to electrodes.
struct BoundaryEdge {
    int a = -1;
    int b = -1;
    double mid_angle = 0.0;
};

// Conforming triangulation of the unit disk. Vertices on the boundary lie on
// the unit circle; triangles are counterclockwise. Immutable after build.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;  // ccw order around the circle
    std::vector<double> element_areas;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }

    double total_area() const;
    Vec2 centroid(int tri) const;
    double max_edge_length() const;

    // Identity tag tying dependent objects (conductivity fields, datasets,
    // trained models) to the discretization they were built on.
    std::uint64_t fingerprint() const;

    // Index of the triangle whose closed hull contains p, or -1. Linear scan
    // with a bounding-box precheck; fine for cut profiles and tests.
    int find_triangle(const Vec2& p) const;
};

// Structured concentric-ring triangulation: ring i of n carries 16*i vertices
// at radius i/n, so the mesh (and everything assembled on it) is invariant
// under rotation by 2*pi/16. Deterministic for fixed target_h.
Mesh build_disk_mesh(double target_h);

// Electrode m occupies the arc centered at 2*pi*m/M of width
// coverage * 2*pi/M. Boundary edges are assigned by arc midpoint.
struct ElectrodeLayout {
    int M = 0;
    double coverage = 0.0;
    double z = 0.0;  // contact impedance, shared by all electrodes
    std::vector<std::vector<int>> electrode_edges;  // boundary-edge indices, ccw
    std::uint64_t mesh_id = 0;

    double electrode_length(const Mesh& mesh, int m) const;
};

ElectrodeLayout place_electrodes(const Mesh& mesh, int M, double coverage, double z);

// Plain-text exchange format: "vertices N triangles T" header, one vertex per
// line, one 0-based index triple per line.
void write_mesh_text(const Mesh& mesh, std::ostream& out);
Mesh read_mesh_text(std::istream& in);
void save_mesh_text(const Mesh& mesh, const std::string& path);
Mesh load_mesh_text(const std::string& path);

}  // namespace eit
