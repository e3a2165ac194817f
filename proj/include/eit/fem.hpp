#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <memory>
#include <vector>

#include "eit/mesh.hpp"
#include "eit/phantom.hpp"

namespace eit {

struct CurrentPattern {
    Eigen::VectorXd injections;  // length M, zero mean
};

struct CemSolution {
    Eigen::VectorXd u;  // nodal potential, one entry per mesh vertex
    Eigen::VectorXd U;  // electrode voltages, zero mean
};

// One clean or noisy frame of the adjacent protocol: M * (M - 3) voltage
// differences (208 for M = 16), ordered by injection pair then measurement
// pair.
struct MeasurementFrame {
    Eigen::VectorXd values;
    double noise_level = 0.0;
    bool is_difference = false;
};

// Assembled and factorized CEM operator for one (mesh, layout, sigma).
// Electrode voltages live in the zero-mean subspace spanned by
// z_m = e_m - (1/M) * ones, m = 0..M-2, which keeps the system symmetric
// positive definite and enforces sum U = 0 exactly. The factorization is
// immutable and reused across all patterns of a protocol and across the
// adjoint solves of the Jacobian.
class CemSystem {
public:
    CemSystem(const Mesh& mesh, const ElectrodeLayout& layout, const SigmaField& sigma);

    CemSolution solve(const CurrentPattern& pattern) const;

    const Mesh& mesh() const { return *mesh_; }
    const ElectrodeLayout& layout() const { return *layout_; }
    int n_nodes() const { return n_nodes_; }
    int M() const { return M_; }

private:
    const Mesh* mesh_;
    const ElectrodeLayout* layout_;
    int n_nodes_;
    int M_;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
};

CemSystem assemble_cem(const Mesh& mesh, const ElectrodeLayout& layout,
                       const SigmaField& sigma);

// Pattern j injects +1 at electrode j and -1 at electrode (j+1) mod M.
std::vector<CurrentPattern> adjacent_protocol(int M);

// For injection pair (j, j+1): differences U_k - U_{k+1 mod M} over the M-3
// adjacent pairs not touching the injectors, k = j+2, j+3, ... in ccw order.
MeasurementFrame measure(const std::vector<Eigen::VectorXd>& electrode_voltages, int M);

// assemble + solve the adjacent protocol + measure; clean raw frame.
MeasurementFrame forward(const Mesh& mesh, const ElectrodeLayout& layout,
                         const SigmaField& sigma);

// All M electrode-voltage vectors of the adjacent protocol (column j is the
// response to pattern j); forward() plus reciprocity checks build on this.
std::vector<Eigen::VectorXd> solve_protocol(const CemSystem& system);

// Full protocol solutions including the nodal potentials; one assembly serves
// both the frame and the Jacobian inside the Gauss-Newton loop.
std::vector<CemSolution> solve_protocol_full(const CemSystem& system);
MeasurementFrame measure_solutions(const std::vector<CemSolution>& solutions, int M);
Eigen::MatrixXd jacobian_from_solutions(const Mesh& mesh,
                                        const std::vector<CemSolution>& solutions, int M);

MeasurementFrame difference_frame(const MeasurementFrame& frame,
                                  const MeasurementFrame& background);

// Derivative of every measurement with respect to each triangle conductivity,
// via the adjoint identity: the adjoint state of measurement (k, k+1) under
// injection j is the protocol solution for pattern k, so M solves cover the
// whole matrix. Row r = j * (M-3) + t, column T:
//   dV_r / dsigma_T = -area_T * grad u_j |_T . grad u_k |_T.
Eigen::MatrixXd jacobian(const Mesh& mesh, const ElectrodeLayout& layout,
                         const SigmaField& sigma);

// frame + level * s * g with g standard normal per entry and s the sample
// standard deviation of the clean frame. Rejects frames that already carry
// noise; levels do not compose.
MeasurementFrame add_noise(const MeasurementFrame& frame, double level,
                           std::uint64_t seed);

}  // namespace eit
