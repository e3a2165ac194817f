#include "eit/deeponet.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "eit/parallel.hpp"
#include "eit/rng.hpp"

namespace eit {

namespace {

constexpr int kFrameSize = 208;

Eigen::VectorXd normalize_frame(const DeepONetModel& model, const MeasurementFrame& frame) {
    if (!frame.is_difference)
        throw std::invalid_argument("predict: frame must be background-differenced");
    if (frame.values.size() != model.frame_size())
        throw std::invalid_argument("predict: frame length mismatch");
    return (frame.values - model.norm_mean).cwiseQuotient(model.norm_std);
}

Eigen::MatrixXd points_matrix(const std::vector<Vec2>& points) {
    Eigen::MatrixXd X(2, static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (p.x * p.x + p.y * p.y > 1.0 + 1e-12)
            throw std::invalid_argument("predict: point outside the unit disk");
        X(0, static_cast<Eigen::Index>(i)) = p.x;
        X(1, static_cast<Eigen::Index>(i)) = p.y;
    }
    return X;
}

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(idx[i - 1], idx[j]);
    }
}

struct PhantomWork {
    nn::Gradients branch_grads;
    nn::Gradients trunk_grads;
    double dbias0 = 0.0;
    double sq_err_sum = 0.0;
};

}  // namespace

DeepONetModel make_deeponet(std::uint64_t seed) {
    DeepONetModel model;
    model.branch = nn::make_network({208, 1024, 1024, 1024, 512, 512, 512, 512},
                                    derive_seed(seed, 1));
    model.trunk = nn::make_network({2, 256, 512}, derive_seed(seed, 2));
    // damp the trunk output so the 512-term inner product starts near zero
    // and early predictions sit at the background bias
    auto& last = model.trunk.blocks.back();
    const double gamma = 1.0 / 512.0;
    last.inner.W *= gamma;
    last.inner.b *= gamma;
    if (last.skip_proj) *last.skip_proj *= gamma;
    model.bias0 = 1.0;
    model.norm_mean = Eigen::VectorXd::Zero(kFrameSize);
    model.norm_std = Eigen::VectorXd::Ones(kFrameSize);
    return model;
}

Eigen::VectorXd predict(const DeepONetModel& model, const MeasurementFrame& frame,
                        const std::vector<Vec2>& points, PredictStats* stats) {
    const Eigen::VectorXd nf = normalize_frame(model, frame);
    const Eigen::MatrixXd X = points_matrix(points);
    const Eigen::VectorXd b = nn::forward(model.branch, nf).output.col(0);
    if (stats) stats->branch_evals += 1;
    const Eigen::MatrixXd T = nn::forward(model.trunk, X).output;
    return (T.transpose() * b).array() + model.bias0;
}

ReconstructionField reconstruct(const DeepONetModel& model, const MeasurementFrame& frame,
                                const std::vector<Vec2>& grid, double threshold) {
    const Eigen::VectorXd preds = predict(model, frame, grid);
    ReconstructionField field;
    field.provenance = Provenance::DeepONet;
    field.values.resize(static_cast<std::size_t>(preds.size()));
    for (Eigen::Index i = 0; i < preds.size(); ++i)
        field.values[static_cast<std::size_t>(i)] = std::max(preds[i], threshold);
    return field;
}

Eigen::VectorXd model_params(const DeepONetModel& model) {
    const Eigen::VectorXd pb = nn::get_params(model.branch);
    const Eigen::VectorXd pt = nn::get_params(model.trunk);
    Eigen::VectorXd p(pb.size() + pt.size() + 1);
    p << pb, pt, model.bias0;
    return p;
}

void set_model_params(DeepONetModel& model, const Eigen::VectorXd& params) {
    const auto nb = model.branch.n_params();
    const auto nt = model.trunk.n_params();
    if (params.size() != nb + nt + 1)
        throw std::invalid_argument("set_model_params: parameter count mismatch");
    nn::set_params(model.branch, params.head(nb));
    nn::set_params(model.trunk, params.segment(nb, nt));
    model.bias0 = params[nb + nt];
}

TrainResult train(const std::vector<TrainRecord>& dataset, const TrainConfig& config) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (config.epochs < 1 || config.batch_size < 1 || config.n_points < 2)
        throw std::invalid_argument("train: bad config");
    for (const auto& rec : dataset) {
        if (!rec.frame.is_difference)
            throw std::invalid_argument("train: all frames must be difference frames");
        if (rec.frame.values.size() != kFrameSize)
            throw std::invalid_argument("train: frame length mismatch");
    }

    TrainResult result;
    result.model = make_deeponet(derive_seed(config.seed, 0xA11C));
    DeepONetModel& model = result.model;

    // per-entry standardization statistics over the training frames;
    // degenerate (constant) entries pass through unscaled
    model.norm_mean.setZero();
    for (const auto& rec : dataset) model.norm_mean += rec.frame.values;
    model.norm_mean /= static_cast<double>(dataset.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(kFrameSize);
    for (const auto& rec : dataset)
        var += (rec.frame.values - model.norm_mean).cwiseAbs2();
    var /= static_cast<double>(dataset.size());
    model.norm_std = var.cwiseSqrt();
    for (int i = 0; i < kFrameSize; ++i)
        if (model.norm_std[i] < 1e-12) model.norm_std[i] = 1.0;

    std::vector<Eigen::VectorXd> norm_frames(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
        norm_frames[i] = (dataset[i].frame.values - model.norm_mean)
                             .cwiseQuotient(model.norm_std);

    Eigen::VectorXd params = model_params(model);
    nn::AdamState adam = nn::make_adam(params.size(), config.lr);

    const int n_records = static_cast<int>(dataset.size());
    std::vector<int> order(static_cast<std::size_t>(n_records));
    std::iota(order.begin(), order.end(), 0);

    const int n_slots = std::min(thread_count(), config.batch_size);
    std::vector<PhantomWork> slots(static_cast<std::size_t>(n_slots));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        adam.lr = config.lr * std::pow(config.lr_decay, static_cast<double>(epoch));
        Rng shuffle_rng(derive_seed(config.seed, 0x5Bu, static_cast<std::uint64_t>(epoch)));
        shuffle_indices(order, shuffle_rng);

        double epoch_sq_err = 0.0;
        std::int64_t epoch_samples = 0;

        for (int batch_lo = 0; batch_lo < n_records; batch_lo += config.batch_size) {
            const int batch_hi = std::min(batch_lo + config.batch_size, n_records);
            const int batch_n = batch_hi - batch_lo;
            const double denom = static_cast<double>(batch_n) * config.n_points;

            nn::Gradients branch_acc = nn::zero_grads(model.branch);
            nn::Gradients trunk_acc = nn::zero_grads(model.trunk);
            double bias0_acc = 0.0;
            double batch_sq_err = 0.0;

            // waves of one phantom per worker; reduction stays in phantom
            // order so results do not depend on the thread count
            for (int wave_lo = batch_lo; wave_lo < batch_hi; wave_lo += n_slots) {
                const int wave_hi = std::min(wave_lo + n_slots, batch_hi);
                parallel_for(wave_lo, wave_hi, [&](int bi) {
                    const int rec_idx = order[static_cast<std::size_t>(bi)];
                    const auto& rec = dataset[static_cast<std::size_t>(rec_idx)];
                    PhantomWork& work = slots[static_cast<std::size_t>(bi - wave_lo)];

                    const std::uint64_t pt_seed =
                        derive_seed(config.seed, 0x9D0 + static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(rec_idx));
                    const PointSample pts =
                        sample_points(rec.phantom, config.n_points, pt_seed);

                    Eigen::MatrixXd X(2, config.n_points);
                    Eigen::VectorXd y(config.n_points);
                    for (int p = 0; p < config.n_points; ++p) {
                        X(0, p) = pts.points[static_cast<std::size_t>(p)].x;
                        X(1, p) = pts.points[static_cast<std::size_t>(p)].y;
                        y[p] = pts.labels[static_cast<std::size_t>(p)];
                    }

                    const nn::ForwardCache bc =
                        nn::forward(model.branch, norm_frames[static_cast<std::size_t>(rec_idx)]);
                    const nn::ForwardCache tc = nn::forward(model.trunk, X);
                    const Eigen::VectorXd b = bc.output.col(0);
                    const Eigen::MatrixXd& T = tc.output;

                    Eigen::VectorXd resid =
                        (T.transpose() * b).array() + model.bias0 - y.array();
                    work.sq_err_sum = resid.squaredNorm();
                    const Eigen::VectorXd g = (2.0 / denom) * resid;

                    work.branch_grads = nn::backward(model.branch, bc, T * g);
                    work.trunk_grads = nn::backward(model.trunk, tc, b * g.transpose());
                    work.dbias0 = g.sum();
                });
                for (int bi = wave_lo; bi < wave_hi; ++bi) {
                    PhantomWork& work = slots[static_cast<std::size_t>(bi - wave_lo)];
                    nn::accumulate_grads(branch_acc, work.branch_grads);
                    nn::accumulate_grads(trunk_acc, work.trunk_grads);
                    bias0_acc += work.dbias0;
                    batch_sq_err += work.sq_err_sum;
                }
            }

            const Eigen::VectorXd gb = nn::flatten_grads(model.branch, branch_acc);
            const Eigen::VectorXd gt = nn::flatten_grads(model.trunk, trunk_acc);
            Eigen::VectorXd grads(gb.size() + gt.size() + 1);
            grads << gb, gt, bias0_acc;
            nn::adam_step(adam, params, grads);
            set_model_params(model, params);

            epoch_sq_err += batch_sq_err;
            epoch_samples += static_cast<std::int64_t>(batch_n) * config.n_points;
        }
        result.loss_history.push_back(epoch_sq_err / static_cast<double>(epoch_samples));
    }
    return result;
}

}  // namespace eit
