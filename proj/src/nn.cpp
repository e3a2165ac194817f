#include "eit/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "eit/rng.hpp"

namespace eit::nn {

namespace {

Eigen::MatrixXd uniform_matrix(int rows, int cols, double limit, Rng& rng) {
    Eigen::MatrixXd W(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) W(i, j) = rng.uniform(-limit, limit);
    return W;
}

Eigen::MatrixXd apply_act(const Eigen::MatrixXd& z, Activation act) {
    if (act == Activation::Identity) return z;
    return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Eigen::MatrixXd act_grad(const Eigen::MatrixXd& z, Activation act) {
    if (act == Activation::Identity) return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void put_doubles(std::ostream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

void get_doubles(std::istream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
}

// row-major matrix record
void put_matrix(std::ostream& out, const Eigen::MatrixXd& M) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = M;
    put_doubles(out, rm.data(), static_cast<std::size_t>(rm.size()));
}

Eigen::MatrixXd get_matrix(std::istream& in, int rows, int cols) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    get_doubles(in, rm.data(), static_cast<std::size_t>(rm.size()));
    return rm;
}

}  // namespace

ResNetBlock make_block(int in, int out, std::uint64_t seed, double inner_gain) {
    Rng rng(seed);
    ResNetBlock block;
    // He-uniform fan-in scaling on the activated path, damped by the caller
    // so a deep residual stack keeps unit-scale activations; the projection
    // skip is variance-preserving (LeCun) since nothing rectifies it.
    block.inner.W = uniform_matrix(out, in, inner_gain * std::sqrt(6.0 / in), rng);
    const double bl = inner_gain / std::sqrt(in);
    block.inner.b.resize(out);
    for (int i = 0; i < out; ++i) block.inner.b[i] = rng.uniform(-bl, bl);
    if (in != out) block.skip_proj = uniform_matrix(out, in, std::sqrt(3.0 / in), rng);
    return block;
}

Network make_network(const std::vector<int>& sizes, std::uint64_t seed, Activation act) {
    if (sizes.size() < 2) throw std::invalid_argument("make_network: need >= 2 sizes");
    Network net;
    net.act = act;
    const double gain = 1.0 / std::sqrt(2.0 * static_cast<double>(sizes.size() - 1));
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
        net.blocks.push_back(make_block(sizes[i], sizes[i + 1], derive_seed(seed, i), gain));
    return net;
}

std::int64_t Network::n_params() const {
    std::int64_t n = 0;
    for (const auto& blk : blocks) {
        n += blk.inner.W.size() + blk.inner.b.size();
        if (blk.skip_proj) n += blk.skip_proj->size();
    }
    return n;
}

Eigen::MatrixXd block_forward(const ResNetBlock& block, const Eigen::MatrixXd& x,
                              Activation act) {
    if (x.rows() != block.in_size())
        throw std::invalid_argument("block_forward: input size mismatch");
    Eigen::MatrixXd z = (block.inner.W * x).colwise() + block.inner.b;
    Eigen::MatrixXd y = apply_act(z, act);
    if (block.skip_proj)
        y += *block.skip_proj * x;
    else
        y += x;
    return y;
}

ForwardCache forward(const Network& net, const Eigen::MatrixXd& x) {
    ForwardCache cache;
    cache.inputs.reserve(net.blocks.size());
    cache.preacts.reserve(net.blocks.size());
    Eigen::MatrixXd cur = x;
    for (const auto& blk : net.blocks) {
        if (cur.rows() != blk.in_size())
            throw std::invalid_argument("forward: input size mismatch");
        cache.inputs.push_back(cur);
        Eigen::MatrixXd z = (blk.inner.W * cur).colwise() + blk.inner.b;
        cache.preacts.push_back(z);
        Eigen::MatrixXd y = apply_act(z, net.act);
        if (blk.skip_proj)
            y += *blk.skip_proj * cur;
        else
            y += cur;
        cur = std::move(y);
    }
    cache.output = std::move(cur);
    return cache;
}

Gradients backward(const Network& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& upstream) {
    if (cache.inputs.size() != net.blocks.size())
        throw std::invalid_argument("backward: cache does not match network");
    Gradients grads;
    grads.blocks.resize(net.blocks.size());
    Eigen::MatrixXd g = upstream;  // dL/d(block output)
    for (int i = static_cast<int>(net.blocks.size()) - 1; i >= 0; --i) {
        const auto& blk = net.blocks[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd& x = cache.inputs[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd& z = cache.preacts[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd dz = g.cwiseProduct(act_grad(z, net.act));

        BlockGrads& bg = grads.blocks[static_cast<std::size_t>(i)];
        bg.dW.noalias() = dz * x.transpose();
        bg.db = dz.rowwise().sum();
        Eigen::MatrixXd dx = blk.inner.W.transpose() * dz;
        if (blk.skip_proj) {
            bg.dskip = g * x.transpose();
            dx.noalias() += blk.skip_proj->transpose() * g;
        } else {
            dx += g;
        }
        g = std::move(dx);
    }
    grads.input_grad = std::move(g);
    return grads;
}

Eigen::VectorXd get_params(const Network& net) {
    Eigen::VectorXd p(net.n_params());
    std::int64_t off = 0;
    for (const auto& blk : net.blocks) {
        for (int i = 0; i < blk.inner.W.rows(); ++i)
            for (int j = 0; j < blk.inner.W.cols(); ++j) p[off++] = blk.inner.W(i, j);
        for (int i = 0; i < blk.inner.b.size(); ++i) p[off++] = blk.inner.b[i];
        if (blk.skip_proj)
            for (int i = 0; i < blk.skip_proj->rows(); ++i)
                for (int j = 0; j < blk.skip_proj->cols(); ++j)
                    p[off++] = (*blk.skip_proj)(i, j);
    }
    return p;
}

void set_params(Network& net, const Eigen::VectorXd& params) {
    if (params.size() != net.n_params())
        throw std::invalid_argument("set_params: parameter count mismatch");
    std::int64_t off = 0;
    for (auto& blk : net.blocks) {
        for (int i = 0; i < blk.inner.W.rows(); ++i)
            for (int j = 0; j < blk.inner.W.cols(); ++j) blk.inner.W(i, j) = params[off++];
        for (int i = 0; i < blk.inner.b.size(); ++i) blk.inner.b[i] = params[off++];
        if (blk.skip_proj)
            for (int i = 0; i < blk.skip_proj->rows(); ++i)
                for (int j = 0; j < blk.skip_proj->cols(); ++j)
                    (*blk.skip_proj)(i, j) = params[off++];
    }
}

Eigen::VectorXd flatten_grads(const Network& net, const Gradients& grads) {
    Eigen::VectorXd g(net.n_params());
    std::int64_t off = 0;
    for (std::size_t k = 0; k < net.blocks.size(); ++k) {
        const auto& bg = grads.blocks[k];
        for (int i = 0; i < bg.dW.rows(); ++i)
            for (int j = 0; j < bg.dW.cols(); ++j) g[off++] = bg.dW(i, j);
        for (int i = 0; i < bg.db.size(); ++i) g[off++] = bg.db[i];
        if (bg.dskip)
            for (int i = 0; i < bg.dskip->rows(); ++i)
                for (int j = 0; j < bg.dskip->cols(); ++j) g[off++] = (*bg.dskip)(i, j);
    }
    return g;
}

Gradients zero_grads(const Network& net) {
    Gradients grads;
    grads.blocks.resize(net.blocks.size());
    for (std::size_t k = 0; k < net.blocks.size(); ++k) {
        const auto& blk = net.blocks[k];
        auto& bg = grads.blocks[k];
        bg.dW = Eigen::MatrixXd::Zero(blk.inner.W.rows(), blk.inner.W.cols());
        bg.db = Eigen::VectorXd::Zero(blk.inner.b.size());
        if (blk.skip_proj)
            bg.dskip = Eigen::MatrixXd::Zero(blk.skip_proj->rows(), blk.skip_proj->cols());
    }
    return grads;
}

void accumulate_grads(Gradients& into, const Gradients& from) {
    if (into.blocks.size() != from.blocks.size())
        throw std::invalid_argument("accumulate_grads: shape mismatch");
    for (std::size_t k = 0; k < into.blocks.size(); ++k) {
        into.blocks[k].dW += from.blocks[k].dW;
        into.blocks[k].db += from.blocks[k].db;
        if (into.blocks[k].dskip) *into.blocks[k].dskip += *from.blocks[k].dskip;
    }
}

AdamState make_adam(std::int64_t n_params, double lr) {
    AdamState state;
    state.m = Eigen::VectorXd::Zero(n_params);
    state.v = Eigen::VectorXd::Zero(n_params);
    state.lr = lr;
    return state;
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
    if (params.size() != state.m.size() || grads.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.t += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    params.array() -= state.lr * (state.m.array() / bc1) /
                      ((state.v.array() / bc2).sqrt() + state.eps);
}

void write_checkpoint(std::ostream& out, const std::vector<Network const*>& nets,
                      const std::vector<double>& scalars) {
    out.write("EITW", 4);
    put_u32(out, 1);  // version
    std::uint32_t records = 0;
    for (const auto* net : nets)
        for (const auto& blk : net->blocks) records += blk.skip_proj ? 2u : 1u;
    records += static_cast<std::uint32_t>(scalars.size());
    put_u32(out, records);
    for (const auto* net : nets) {
        for (const auto& blk : net->blocks) {
            put_u32(out, 0);  // kind: dense layer with bias
            put_u32(out, static_cast<std::uint32_t>(blk.inner.W.rows()));
            put_u32(out, static_cast<std::uint32_t>(blk.inner.W.cols()));
            put_matrix(out, blk.inner.W);
            put_doubles(out, blk.inner.b.data(), static_cast<std::size_t>(blk.inner.b.size()));
            if (blk.skip_proj) {
                put_u32(out, 1);  // kind: bias-free projection
                put_u32(out, static_cast<std::uint32_t>(blk.skip_proj->rows()));
                put_u32(out, static_cast<std::uint32_t>(blk.skip_proj->cols()));
                put_matrix(out, *blk.skip_proj);
            }
        }
    }
    for (double s : scalars) {
        put_u32(out, 2);  // kind: scalar
        put_u32(out, 1);
        put_u32(out, 1);
        put_doubles(out, &s, 1);
    }
    if (!out) throw std::runtime_error("write_checkpoint: write failed");
}

void read_checkpoint(std::istream& in, const std::vector<Network*>& nets,
                     std::vector<double>& scalars) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "EITW", 4) != 0)
        throw std::runtime_error("read_checkpoint: bad magic");
    const std::uint32_t version = get_u32(in);
    if (version != 1) throw std::runtime_error("read_checkpoint: unsupported version");
    const std::uint32_t records = get_u32(in);
    std::uint32_t consumed = 0;
    auto read_record = [&](std::uint32_t expect_kind, int rows, int cols) {
        const std::uint32_t kind = get_u32(in);
        const std::uint32_t r = get_u32(in);
        const std::uint32_t c = get_u32(in);
        if (kind != expect_kind || static_cast<int>(r) != rows || static_cast<int>(c) != cols)
            throw std::runtime_error("read_checkpoint: record shape mismatch");
        ++consumed;
        return get_matrix(in, rows, cols);
    };
    for (auto* net : nets) {
        for (auto& blk : net->blocks) {
            blk.inner.W = read_record(0, blk.out_size(), blk.in_size());
            get_doubles(in, blk.inner.b.data(), static_cast<std::size_t>(blk.inner.b.size()));
            if (blk.skip_proj)
                *blk.skip_proj = read_record(1, blk.out_size(), blk.in_size());
        }
    }
    for (double& s : scalars) {
        Eigen::MatrixXd m = read_record(2, 1, 1);
        s = m(0, 0);
    }
    if (consumed != records) throw std::runtime_error("read_checkpoint: record count mismatch");
    if (!in) throw std::runtime_error("read_checkpoint: truncated stream");
}

}  // namespace eit::nn
