#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "eit/fem.hpp"
#include "eit/mesh.hpp"
#include "eit/reconstruction.hpp"

namespace eit {

struct IrgnConfig {
    int max_iters = 20;
    double alpha0_rel = 1e-2;  // alpha0 = alpha0_rel * ||J^T d||_inf at sigma_init
    double q = 0.8;            // per-iteration regularization decay
    double sigma_init = 1.0;
    double box_lo = 0.05;
    double box_hi = 10.0;
    double tol = 1e-4;         // stop when the relative residual improves less than this
};

struct IrgnIterate {
    double residual_norm = 0.0;    // ||d - F(sigma_k)|| before the update
    double alpha = 0.0;
    double normal_eq_error = 0.0;  // relative ||(J^T J + aI) delta - rhs||
};

struct IrgnResult {
    ReconstructionField field;
    std::vector<IrgnIterate> history;
    bool aborted = false;
    std::string abort_reason;
};

// Tikhonov-regularized iteratively regularized Gauss-Newton on the given
// mesh:
//   sigma_{k+1} = clamp( sigma_k + (J^T J + a_k I)^{-1}
//                        (J^T (d - F(sigma_k)) - a_k (sigma_k - sigma_init)) )
// with a_k = alpha0 * q^k. A difference frame must come with the matching
// background frame so the raw data d can be restored; passing the background
// computed on this same mesh makes the fit a difference fit, which is how the
// two-mesh pipeline calls it. The regularized step is evaluated through the
// 208 x 208 dual form of the normal equations (algebraically identical, see
// the normal_eq_error check recorded per iterate).
IrgnResult irgn_reconstruct(const MeasurementFrame& frame, const Mesh& mesh,
                            const ElectrodeLayout& layout, const IrgnConfig& config,
                            const MeasurementFrame* background = nullptr);

// Area-weighted center of mass of the positive part of (sigma - background);
// used to test anomaly localization.
Vec2 perturbation_center_of_mass(const std::vector<double>& values, const Mesh& mesh);

}  // namespace eit
