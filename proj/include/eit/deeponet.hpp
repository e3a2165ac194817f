#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "eit/fem.hpp"
#include "eit/nn.hpp"
#include "eit/phantom.hpp"
#include "eit/reconstruction.hpp"

namespace eit {

// Branch/trunk operator network. The branch consumes a normalized
// 208-measurement difference frame, the trunk a 2-d point; both end in the
// shared latent dimension 512 and are combined by an inner product plus a
// scalar offset that starts at the background conductivity.
struct DeepONetModel {
    nn::Network branch;  // 208 -> 1024 -> 1024 -> 1024 -> 512 -> 512 -> 512 -> 512
    nn::Network trunk;   // 2 -> 256 -> 512
    double bias0 = 1.0;
    Eigen::VectorXd norm_mean;
    Eigen::VectorXd norm_std;
    double threshold = 0.1;
    std::uint64_t mesh_id = 0;  // mesh the training frames came from

    int frame_size() const { return branch.in_size(); }
    int latent_size() const { return branch.out_size(); }
};

DeepONetModel make_deeponet(std::uint64_t seed);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    int n_points = 1024;
    double lr = 1e-3;
    double lr_decay = 0.99;
    std::uint64_t seed = 0;
};

struct TrainRecord {
    MeasurementFrame frame;  // difference frame
    Phantom phantom;
};

struct TrainResult {
    DeepONetModel model;
    std::vector<double> loss_history;  // per-epoch mean squared error
};

TrainResult train(const std::vector<TrainRecord>& dataset, const TrainConfig& config);

struct PredictStats {
    int branch_evals = 0;
};

// One branch pass per frame, one trunk pass per point, inner product plus
// bias. Rejects raw (non-difference) frames and out-of-disk points.
Eigen::VectorXd predict(const DeepONetModel& model, const MeasurementFrame& frame,
                        const std::vector<Vec2>& points, PredictStats* stats = nullptr);

// predict with the values clamped from below at the threshold.
ReconstructionField reconstruct(const DeepONetModel& model, const MeasurementFrame& frame,
                                const std::vector<Vec2>& grid, double threshold);

// Flat view over (branch, trunk, bias0) for the optimizer and gradient tests.
Eigen::VectorXd model_params(const DeepONetModel& model);
void set_model_params(DeepONetModel& model, const Eigen::VectorXd& params);

}  // namespace eit
