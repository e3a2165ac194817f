#include "eit/fem.hpp"

#include <cmath>
#include <stdexcept>

#include "eit/rng.hpp"

namespace eit {

namespace {

// P1 stiffness of one triangle for unit conductivity:
// K_ij = (b_i b_j + c_i c_j) / (4 area).
void element_stiffness(const Mesh& mesh, int t, double k[3][3]) {
    const auto& tri = mesh.triangles[t];
    const Vec2& p0 = mesh.vertices[tri[0]];
    const Vec2& p1 = mesh.vertices[tri[1]];
    const Vec2& p2 = mesh.vertices[tri[2]];
    const double b[3] = {p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
    const double c[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
    const double f = 1.0 / (4.0 * mesh.element_areas[t]);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) k[i][j] = f * (b[i] * b[j] + c[i] * c[j]);
}

// Constant gradient of the P1 solution on triangle t.
Eigen::Vector2d element_gradient(const Mesh& mesh, int t, const Eigen::VectorXd& u) {
    const auto& tri = mesh.triangles[t];
    const Vec2& p0 = mesh.vertices[tri[0]];
    const Vec2& p1 = mesh.vertices[tri[1]];
    const Vec2& p2 = mesh.vertices[tri[2]];
    const double b[3] = {p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
    const double c[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
    const double f = 1.0 / (2.0 * mesh.element_areas[t]);
    Eigen::Vector2d g(0.0, 0.0);
    for (int i = 0; i < 3; ++i) {
        g.x() += f * b[i] * u[tri[i]];
        g.y() += f * c[i] * u[tri[i]];
    }
    return g;
}

void check_kirchhoff(const CurrentPattern& pattern) {
    const double scale = std::max(1.0, pattern.injections.cwiseAbs().maxCoeff());
    if (std::abs(pattern.injections.sum()) > 1e-12 * scale)
        throw std::invalid_argument("solve_cem: current pattern must sum to zero");
}

}  // namespace

CemSystem::CemSystem(const Mesh& mesh, const ElectrodeLayout& layout,
                     const SigmaField& sigma)
    : mesh_(&mesh), layout_(&layout), n_nodes_(mesh.n_vertices()), M_(layout.M) {
    if (sigma.mesh_id != mesh.fingerprint())
        throw std::invalid_argument("assemble_cem: sigma belongs to a different mesh");
    if (layout.mesh_id != mesh.fingerprint())
        throw std::invalid_argument("assemble_cem: layout belongs to a different mesh");
    if (static_cast<int>(sigma.values.size()) != mesh.n_triangles())
        throw std::invalid_argument("assemble_cem: sigma size mismatch");
    for (double v : sigma.values)
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("assemble_cem: conductivity must be positive and finite");

    const int n = n_nodes_;
    const int M = M_;
    const double zinv = 1.0 / layout.z;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(9 * mesh.n_triangles() + 64 * M);

    // volume term: integral of sigma grad(u) . grad(v)
    double k[3][3];
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        element_stiffness(mesh, t, k);
        const auto& tri = mesh.triangles[t];
        const double s = sigma.values[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trips.emplace_back(tri[i], tri[j], s * k[i][j]);
    }

    // electrode term: (1/z) integral over E_m of (u - U_m)(v - V_m), with U
    // expressed in the zero-mean basis z_m = e_m - ones/M. The U-U block and
    // the u-U coupling are small and dense in the reduced coordinates.
    Eigen::MatrixXd Dzz = Eigen::MatrixXd::Zero(M, M);  // (1/z) |E_m| on the diagonal
    std::vector<std::vector<std::pair<int, double>>> node_int(M);  // (1/z) int_{E_m} phi_i
    for (int m = 0; m < M; ++m) {
        for (int e : layout.electrode_edges[m]) {
            const auto& be = mesh.boundary_edges[e];
            const Vec2& pa = mesh.vertices[be.a];
            const Vec2& pb = mesh.vertices[be.b];
            const double len = std::hypot(pb.x - pa.x, pb.y - pa.y);
            // edge mass matrix [len/3, len/6; len/6, len/3]
            trips.emplace_back(be.a, be.a, zinv * len / 3.0);
            trips.emplace_back(be.b, be.b, zinv * len / 3.0);
            trips.emplace_back(be.a, be.b, zinv * len / 6.0);
            trips.emplace_back(be.b, be.a, zinv * len / 6.0);
            node_int[m].push_back({be.a, zinv * len / 2.0});
            node_int[m].push_back({be.b, zinv * len / 2.0});
            Dzz(m, m) += zinv * len;
        }
    }

    // coupling -(1/z) int_{E_m} phi_i, reduced: column q of CZ is
    // C(:,q) - (1/M) * rowsum(C)
    Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n);
    for (int m = 0; m < M; ++m)
        for (const auto& [node, w] : node_int[m]) row_sum[node] -= w;
    for (int q = 0; q < M - 1; ++q) {
        Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
        for (const auto& [node, w] : node_int[q]) col[node] -= w;
        for (int i = 0; i < n; ++i) {
            const double v = col[i] - row_sum[i] / M;
            if (v != 0.0) {
                trips.emplace_back(i, n + q, v);
                trips.emplace_back(n + q, i, v);
            }
        }
    }

    // reduced electrode block Z^T D Z
    for (int p = 0; p < M - 1; ++p) {
        for (int q = 0; q < M - 1; ++q) {
            double v = (p == q ? Dzz(p, p) : 0.0) - Dzz(p, p) / M - Dzz(q, q) / M +
                       Dzz.trace() / (M * M);
            trips.emplace_back(n + p, n + q, v);
        }
    }

    Eigen::SparseMatrix<double> A(n + M - 1, n + M - 1);
    A.setFromTriplets(trips.begin(), trips.end());
    solver_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    solver_->compute(A);
    if (solver_->info() != Eigen::Success)
        throw std::runtime_error("assemble_cem: factorization failed (system not SPD)");
}

CemSolution CemSystem::solve(const CurrentPattern& pattern) const {
    if (pattern.injections.size() != M_)
        throw std::invalid_argument("solve_cem: pattern length mismatch");
    check_kirchhoff(pattern);

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_nodes_ + M_ - 1);
    // (Z^T I)_q = I_q - mean(I) = I_q under the Kirchhoff condition
    const double mean = pattern.injections.sum() / M_;
    for (int q = 0; q < M_ - 1; ++q) rhs[n_nodes_ + q] = pattern.injections[q] - mean;

    const Eigen::VectorXd x = solver_->solve(rhs);
    CemSolution sol;
    sol.u = x.head(n_nodes_);
    const Eigen::VectorXd zeta = x.tail(M_ - 1);
    sol.U.resize(M_);
    const double zmean = zeta.sum() / M_;
    for (int m = 0; m < M_ - 1; ++m) sol.U[m] = zeta[m] - zmean;
    sol.U[M_ - 1] = -zmean;
    return sol;
}

CemSystem assemble_cem(const Mesh& mesh, const ElectrodeLayout& layout,
                       const SigmaField& sigma) {
    return CemSystem(mesh, layout, sigma);
}

std::vector<CurrentPattern> adjacent_protocol(int M) {
    if (M < 4) throw std::invalid_argument("adjacent_protocol: M must be >= 4");
    std::vector<CurrentPattern> patterns(M);
    for (int j = 0; j < M; ++j) {
        patterns[j].injections = Eigen::VectorXd::Zero(M);
        patterns[j].injections[j] = 1.0;
        patterns[j].injections[(j + 1) % M] = -1.0;
    }
    return patterns;
}

MeasurementFrame measure(const std::vector<Eigen::VectorXd>& electrode_voltages, int M) {
    if (static_cast<int>(electrode_voltages.size()) != M)
        throw std::invalid_argument("measure: expected one voltage vector per pattern");
    MeasurementFrame frame;
    frame.values.resize(M * (M - 3));
    int r = 0;
    for (int j = 0; j < M; ++j) {
        const Eigen::VectorXd& U = electrode_voltages[j];
        if (U.size() != M) throw std::invalid_argument("measure: voltage vector length mismatch");
        for (int t = 0; t < M - 3; ++t) {
            const int kk = (j + 2 + t) % M;
            frame.values[r++] = U[kk] - U[(kk + 1) % M];
        }
    }
    return frame;
}

std::vector<Eigen::VectorXd> solve_protocol(const CemSystem& system) {
    const auto patterns = adjacent_protocol(system.M());
    std::vector<Eigen::VectorXd> voltages;
    voltages.reserve(patterns.size());
    for (const auto& p : patterns) voltages.push_back(system.solve(p).U);
    return voltages;
}

std::vector<CemSolution> solve_protocol_full(const CemSystem& system) {
    const auto patterns = adjacent_protocol(system.M());
    std::vector<CemSolution> solutions;
    solutions.reserve(patterns.size());
    for (const auto& p : patterns) solutions.push_back(system.solve(p));
    return solutions;
}

MeasurementFrame measure_solutions(const std::vector<CemSolution>& solutions, int M) {
    std::vector<Eigen::VectorXd> voltages;
    voltages.reserve(solutions.size());
    for (const auto& s : solutions) voltages.push_back(s.U);
    return measure(voltages, M);
}

Eigen::MatrixXd jacobian_from_solutions(const Mesh& mesh,
                                        const std::vector<CemSolution>& solutions, int M) {
    if (static_cast<int>(solutions.size()) != M)
        throw std::invalid_argument("jacobian_from_solutions: expected M solutions");
    std::vector<Eigen::Matrix2Xd> grads(static_cast<std::size_t>(M),
                                        Eigen::Matrix2Xd(2, mesh.n_triangles()));
    for (int j = 0; j < M; ++j)
        for (int t = 0; t < mesh.n_triangles(); ++t)
            grads[static_cast<std::size_t>(j)].col(t) =
                element_gradient(mesh, t, solutions[static_cast<std::size_t>(j)].u);

    Eigen::MatrixXd J(M * (M - 3), mesh.n_triangles());
    int r = 0;
    for (int j = 0; j < M; ++j) {
        for (int t = 0; t < M - 3; ++t) {
            const int kk = (j + 2 + t) % M;
            const auto& gj = grads[static_cast<std::size_t>(j)];
            const auto& gk = grads[static_cast<std::size_t>(kk)];
            for (int T = 0; T < mesh.n_triangles(); ++T)
                J(r, T) = -mesh.element_areas[T] * gj.col(T).dot(gk.col(T));
            ++r;
        }
    }
    return J;
}

MeasurementFrame forward(const Mesh& mesh, const ElectrodeLayout& layout,
                         const SigmaField& sigma) {
    const CemSystem system(mesh, layout, sigma);
    return measure(solve_protocol(system), layout.M);
}

MeasurementFrame difference_frame(const MeasurementFrame& frame,
                                  const MeasurementFrame& background) {
    if (frame.values.size() != background.values.size())
        throw std::invalid_argument("difference_frame: length mismatch");
    if (background.is_difference)
        throw std::invalid_argument("difference_frame: background must be a raw frame");
    MeasurementFrame out;
    out.values = frame.values - background.values;
    out.noise_level = frame.noise_level;
    out.is_difference = true;
    return out;
}

Eigen::MatrixXd jacobian(const Mesh& mesh, const ElectrodeLayout& layout,
                         const SigmaField& sigma) {
    const CemSystem system(mesh, layout, sigma);
    return jacobian_from_solutions(mesh, solve_protocol_full(system), layout.M);
}

MeasurementFrame add_noise(const MeasurementFrame& frame, double level,
                           std::uint64_t seed) {
    if (level < 0.0) throw std::invalid_argument("add_noise: level must be >= 0");
    if (frame.noise_level != 0.0)
        throw std::invalid_argument("add_noise: frame already carries noise");
    MeasurementFrame out = frame;
    out.noise_level = level;
    if (level == 0.0) return out;

    const int n = static_cast<int>(frame.values.size());
    const double mean = frame.values.mean();
    const double var = (frame.values.array() - mean).square().sum() / (n - 1);
    const double s = std::sqrt(var);

    Rng rng(seed);
    for (int i = 0; i < n; ++i) out.values[i] += level * s * rng.normal();
    return out;
}

}  // namespace eit
