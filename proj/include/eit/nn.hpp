#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eit::nn {

enum class Activation { LeakyRelu, Identity };

constexpr double kLeakySlope = 0.01;

struct DenseLayer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;  // out
};

// y = act(W x + b) + skip(x). The skip is the identity when the sizes match
// and a bias-free projection otherwise.
struct ResNetBlock {
    DenseLayer inner;
    std::optional<Eigen::MatrixXd> skip_proj;  // out x in, present iff in != out

    int in_size() const { return static_cast<int>(inner.W.cols()); }
    int out_size() const { return static_cast<int>(inner.W.rows()); }
};

ResNetBlock make_block(int in, int out, std::uint64_t seed, double inner_gain = 1.0);

// Plain sequence of blocks. All forward/backward paths are batched: a sample
// is a column, so a batch of N inputs is an in x N matrix.
struct Network {
    std::vector<ResNetBlock> blocks;
    Activation act = Activation::LeakyRelu;

    int in_size() const { return blocks.front().in_size(); }
    int out_size() const { return blocks.back().out_size(); }
    std::int64_t n_params() const;
};

Network make_network(const std::vector<int>& sizes, std::uint64_t seed,
                     Activation act = Activation::LeakyRelu);

// Per-block inputs and pre-activations retained for the backward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> preacts;
    Eigen::MatrixXd output;
};

Eigen::MatrixXd block_forward(const ResNetBlock& block, const Eigen::MatrixXd& x,
                              Activation act = Activation::LeakyRelu);

ForwardCache forward(const Network& net, const Eigen::MatrixXd& x);

struct BlockGrads {
    Eigen::MatrixXd dW;
    Eigen::VectorXd db;
    std::optional<Eigen::MatrixXd> dskip;
};

struct Gradients {
    std::vector<BlockGrads> blocks;
    Eigen::MatrixXd input_grad;
};

// Exact reverse-mode gradients of the composed map, summed over the batch.
Gradients backward(const Network& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& upstream);

// Flat parameter-vector view in a fixed order (per block: W row-major, b,
// skip projection row-major). Used by the optimizer and the gradient checks.
Eigen::VectorXd get_params(const Network& net);
void set_params(Network& net, const Eigen::VectorXd& params);
Eigen::VectorXd flatten_grads(const Network& net, const Gradients& grads);
void accumulate_grads(Gradients& into, const Gradients& from);
Gradients zero_grads(const Network& net);

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::int64_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(std::int64_t n_params, double lr);
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads);

// Checkpoint format: magic EITW, version, record count, then per record a
// (kind, rows, cols) header followed by row-major doubles. Kind 0 carries a
// dense layer (weights then bias), kind 1 a bias-free projection, kind 2 a
// bare scalar block. Round-trips are bit-exact.
void write_checkpoint(std::ostream& out, const std::vector<Network const*>& nets,
                      const std::vector<double>& scalars);
void read_checkpoint(std::istream& in, const std::vector<Network*>& nets,
                     std::vector<double>& scalars);

}  // namespace eit::nn
