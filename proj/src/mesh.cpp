#include "eit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace eit {

namespace {

constexpr int kSectors = 16;

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

double wrap_angle(double a) {
    while (a <= -M_PI) a += 2.0 * M_PI;
    while (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

double Mesh::total_area() const {
    double s = 0.0;
    for (double a : element_areas) s += a;
    return s;
}

Vec2 Mesh::centroid(int tri) const {
    const auto& t = triangles[tri];
    return {(vertices[t[0]].x + vertices[t[1]].x + vertices[t[2]].x) / 3.0,
            (vertices[t[0]].y + vertices[t[1]].y + vertices[t[2]].y) / 3.0};
}

double Mesh::max_edge_length() const {
    double m = 0.0;
    for (const auto& t : triangles) {
        for (int e = 0; e < 3; ++e) {
            const Vec2& a = vertices[t[e]];
            const Vec2& b = vertices[t[(e + 1) % 3]];
            m = std::max(m, std::hypot(b.x - a.x, b.y - a.y));
        }
    }
    return m;
}

std::uint64_t Mesh::fingerprint() const {
    std::uint64_t h = 14695981039346656037ULL;
    if (!vertices.empty())
        h = fnv1a(vertices.data(), vertices.size() * sizeof(Vec2), h);
    if (!triangles.empty())
        h = fnv1a(triangles.data(), triangles.size() * sizeof(triangles[0]), h);
    return h;
}

int Mesh::find_triangle(const Vec2& p) const {
    for (int t = 0; t < n_triangles(); ++t) {
        const auto& tri = triangles[t];
        const Vec2& a = vertices[tri[0]];
        const Vec2& b = vertices[tri[1]];
        const Vec2& c = vertices[tri[2]];
        const double lox = std::min({a.x, b.x, c.x}), hix = std::max({a.x, b.x, c.x});
        const double loy = std::min({a.y, b.y, c.y}), hiy = std::max({a.y, b.y, c.y});
        const double eps = 1e-12;
        if (p.x < lox - eps || p.x > hix + eps || p.y < loy - eps || p.y > hiy + eps)
            continue;
        const double s0 = signed_area(a, b, p);
        const double s1 = signed_area(b, c, p);
        const double s2 = signed_area(c, a, p);
        const double tol = -1e-12 * element_areas[t];
        if (s0 >= tol && s1 >= tol && s2 >= tol) return t;
    }
    return -1;
}

Mesh build_disk_mesh(double target_h) {
    if (!(target_h >= 0.01 && target_h <= 0.5))
        throw std::invalid_argument("build_disk_mesh: target_h must be in [0.01, 0.5]");

    // floor keeps the halving property exact (n(h/2) >= 2 n(h), so refinement
    // at least quadruples the triangle count). Rings come in multiples of 4:
    // with 16 sectors this puts every electrode boundary half an edge away
    // from the nearest edge midpoint, so electrode arcs are identical at
    // every resolution and midpoint assignment never hits a tie.
    const int n = 4 * std::max(1, static_cast<int>(std::floor(0.5 / target_h)));

    Mesh mesh;
    mesh.vertices.reserve(1 + kSectors * n * (n + 1) / 2);
    mesh.vertices.push_back({0.0, 0.0});

    // ring i (1-based) starts at this vertex id
    std::vector<int> ring_start(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        ring_start[i] = mesh.n_vertices();
        const int cnt = kSectors * i;
        const double r = static_cast<double>(i) / n;
        for (int k = 0; k < cnt; ++k) {
            const double th = 2.0 * M_PI * k / cnt;
            mesh.vertices.push_back({r * std::cos(th), r * std::sin(th)});
        }
    }

    mesh.triangles.reserve(kSectors * n * n);
    for (int i = 1; i <= n; ++i) {
        const int outer = ring_start[i], n_outer = kSectors * i;
        const int inner = (i >= 2) ? ring_start[i - 1] : 0;
        const int n_inner = kSectors * (i - 1);
        for (int s = 0; s < kSectors; ++s) {
            for (int j = 0; j < i; ++j) {
                const int o0 = outer + (s * i + j) % n_outer;
                const int o1 = outer + (s * i + j + 1) % n_outer;
                const int i0 = (i >= 2) ? inner + (s * (i - 1) + j) % n_inner : 0;
                mesh.triangles.push_back({o0, o1, i0});
                if (j + 1 < i) {
                    const int i1 = inner + (s * (i - 1) + j + 1) % n_inner;
                    mesh.triangles.push_back({i0, o1, i1});
                }
            }
        }
    }

    mesh.element_areas.resize(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double a = signed_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                     mesh.vertices[tri[2]]);
        if (a <= 0.0) throw std::logic_error("build_disk_mesh: nonpositive triangle area");
        mesh.element_areas[t] = a;
    }

    const int outer = ring_start[n], n_outer = kSectors * n;
    mesh.boundary_edges.reserve(n_outer);
    for (int k = 0; k < n_outer; ++k) {
        const double mid = 2.0 * M_PI * (k + 0.5) / n_outer;
        mesh.boundary_edges.push_back(
            {outer + k, outer + (k + 1) % n_outer, wrap_angle(mid)});
    }
    // ccw order starting at the atan2 branch cut, matching the text importer
    std::sort(mesh.boundary_edges.begin(), mesh.boundary_edges.end(),
              [](const BoundaryEdge& l, const BoundaryEdge& r) {
                  return l.mid_angle < r.mid_angle;
              });
    return mesh;
}

ElectrodeLayout place_electrodes(const Mesh& mesh, int M, double coverage, double z) {
    if (M < 1) throw std::invalid_argument("place_electrodes: M must be >= 1");
    if (!(coverage > 0.0 && coverage < 1.0))
        throw std::invalid_argument("place_electrodes: coverage must be in (0, 1)");
    if (!(z > 0.0)) throw std::invalid_argument("place_electrodes: z must be > 0");

    ElectrodeLayout layout;
    layout.M = M;
    layout.coverage = coverage;
    layout.z = z;
    layout.mesh_id = mesh.fingerprint();
    layout.electrode_edges.assign(M, {});

    const double half_width = coverage * M_PI / M;
    for (int e = 0; e < static_cast<int>(mesh.boundary_edges.size()); ++e) {
        const double theta = mesh.boundary_edges[e].mid_angle;
        for (int m = 0; m < M; ++m) {
            const double center = 2.0 * M_PI * m / M;
            if (std::abs(wrap_angle(theta - center)) <= half_width) {
                layout.electrode_edges[m].push_back(e);
                break;  // arcs are disjoint (coverage < 1), at most one match
            }
        }
    }
    for (int m = 0; m < M; ++m) {
        auto& edges = layout.electrode_edges[m];
        if (edges.size() < 2) {
            std::ostringstream msg;
            msg << "place_electrodes: electrode " << m << " covers " << edges.size()
                << " boundary edges; need >= 2 (refine the mesh)";
            throw std::runtime_error(msg.str());
        }
        // a group that wraps past edge 0 (electrode centered at angle 0) is
        // rotated so it reads as one ccw-contiguous run
        for (std::size_t i = 1; i < edges.size(); ++i) {
            if (edges[i] != edges[i - 1] + 1) {
                std::rotate(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(i),
                            edges.end());
                break;
            }
        }
    }
    return layout;
}

double ElectrodeLayout::electrode_length(const Mesh& mesh, int m) const {
    double len = 0.0;
    for (int e : electrode_edges[m]) {
        const auto& be = mesh.boundary_edges[e];
        const Vec2& a = mesh.vertices[be.a];
        const Vec2& b = mesh.vertices[be.b];
        len += std::hypot(b.x - a.x, b.y - a.y);
    }
    return len;
}

void write_mesh_text(const Mesh& mesh, std::ostream& out) {
    out << "vertices " << mesh.n_vertices() << " triangles " << mesh.n_triangles() << "\n";
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << v.x << " " << v.y << "\n";
    for (const auto& t : mesh.triangles) out << t[0] << " " << t[1] << " " << t[2] << "\n";
}

Mesh read_mesh_text(std::istream& in) {
    std::string kw1, kw2;
    int nv = 0, nt = 0;
    in >> kw1 >> nv >> kw2 >> nt;
    if (!in || kw1 != "vertices" || kw2 != "triangles")
        throw std::runtime_error("read_mesh_text: bad header");
    Mesh mesh;
    mesh.vertices.resize(nv);
    for (auto& v : mesh.vertices) in >> v.x >> v.y;
    mesh.triangles.resize(nt);
    for (auto& t : mesh.triangles) in >> t[0] >> t[1] >> t[2];
    if (!in) throw std::runtime_error("read_mesh_text: truncated file");

    mesh.element_areas.resize(nt);
    for (int t = 0; t < nt; ++t) {
        const auto& tri = mesh.triangles[t];
        for (int k = 0; k < 3; ++k)
            if (tri[k] < 0 || tri[k] >= nv)
                throw std::runtime_error("read_mesh_text: vertex index out of range");
        const double a = signed_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                     mesh.vertices[tri[2]]);
        if (a <= 0.0) throw std::runtime_error("read_mesh_text: nonpositive triangle area");
        mesh.element_areas[t] = a;
    }

    // Recover boundary edges: edges referenced by exactly one triangle,
    // ordered ccw by midpoint angle.
    struct EdgeKey {
        int a, b;
        bool operator<(const EdgeKey& o) const {
            return a != o.a ? a < o.a : b < o.b;
        }
    };
    std::vector<std::pair<EdgeKey, int>> edges;  // key -> oriented first vertex
    edges.reserve(3 * nt);
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            int u = tri[k], v = tri[(k + 1) % 3];
            edges.push_back({{std::min(u, v), std::max(u, v)}, u});
        }
    }
    std::sort(edges.begin(), edges.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    for (std::size_t i = 0; i < edges.size();) {
        std::size_t j = i;
        while (j < edges.size() && !(edges[i].first < edges[j].first)) ++j;
        if (j - i == 1) {
            const int u = edges[i].second;
            const int v = (edges[i].first.a == u) ? edges[i].first.b : edges[i].first.a;
            const Vec2& pa = mesh.vertices[u];
            const Vec2& pb = mesh.vertices[v];
            const double mid = std::atan2(0.5 * (pa.y + pb.y), 0.5 * (pa.x + pb.x));
            mesh.boundary_edges.push_back({u, v, mid});
        } else if (j - i != 2) {
            throw std::runtime_error("read_mesh_text: non-conforming triangulation");
        }
        i = j;
    }
    std::sort(mesh.boundary_edges.begin(), mesh.boundary_edges.end(),
              [](const BoundaryEdge& l, const BoundaryEdge& r) {
                  return l.mid_angle < r.mid_angle;
              });
    return mesh;
}

void save_mesh_text(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mesh_text: cannot open " + path);
    write_mesh_text(mesh, out);
}

Mesh load_mesh_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mesh_text: cannot open " + path);
    return read_mesh_text(in);
}

}  // namespace eit
