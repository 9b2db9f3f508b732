#pragma once

// Reverse-mode differentiation over dense layers. A forward pass records one
// TapeEntry per layer; backward walks the tape in reverse and accumulates
// parameter gradients into each layer's LayerParams.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "infoproj/tensor_core.hpp"

namespace infoproj::nn {

/// y = x W + b with W stored in×out. An empty bias means the layer has none.
struct LayerParams {
    DenseMatrix weight;
    std::vector<double> bias;
    DenseMatrix grad_weight;
    std::vector<double> grad_bias;

    LayerParams() = default;
    LayerParams(DenseMatrix w, std::vector<double> b);

    void zero_grad();
    std::size_t in_dim() const noexcept { return weight.rows(); }
    std::size_t out_dim() const noexcept { return weight.cols(); }
};

/// Uniform(-1/sqrt(in), 1/sqrt(in)) weights and biases.
LayerParams init_linear(std::size_t in, std::size_t out, std::mt19937_64& rng, bool with_bias = true);

enum class LayerKind { Linear, Relu, BatchNorm, Fsq, SparseAutoencoder };

struct TapeEntry {
    std::size_t layer_index = 0;
    DenseMatrix input;
    DenseMatrix output;
    DenseMatrix aux;                 // normalized activations (BN), hidden code (SAE)
    std::vector<std::uint8_t> mask;  // ReLU / top-k keep mask
    std::vector<double> stats;       // per-column inverse std (BN)
};

class Tape {
public:
    void clear() { entries_.clear(); }
    void push(TapeEntry e) { entries_.push_back(std::move(e)); }
    std::span<const TapeEntry> entries() const noexcept { return entries_; }

private:
    std::vector<TapeEntry> entries_;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const noexcept = 0;
    virtual DenseMatrix forward(const DenseMatrix& x, TapeEntry& rec) const = 0;
    /// Returns dL/dx and accumulates parameter gradients.
    virtual DenseMatrix backward(const DenseMatrix& grad_out, const TapeEntry& rec) = 0;
    virtual std::vector<LayerParams*> params() { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;
};

class Linear final : public Layer {
public:
    explicit Linear(LayerParams p) : p_(std::move(p)) {}
    LayerKind kind() const noexcept override { return LayerKind::Linear; }
    DenseMatrix forward(const DenseMatrix& x, TapeEntry& rec) const override;
    DenseMatrix backward(const DenseMatrix& grad_out, const TapeEntry& rec) override;
    std::vector<LayerParams*> params() override { return {&p_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

    const LayerParams& layer_params() const noexcept { return p_; }

private:
    LayerParams p_;
};

class Relu final : public Layer {
public:
    LayerKind kind() const noexcept override { return LayerKind::Relu; }
    DenseMatrix forward(const DenseMatrix& x, TapeEntry& rec) const override;
    DenseMatrix backward(const DenseMatrix& grad_out, const TapeEntry& rec) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
};

/// Training-mode batch normalization (biased batch variance) with affine scale and shift.
class BatchNorm final : public Layer {
public:
    explicit BatchNorm(std::size_t dim, double eps = 1e-5);
    LayerKind kind() const noexcept override { return LayerKind::BatchNorm; }
    DenseMatrix forward(const DenseMatrix& x, TapeEntry& rec) const override;
    DenseMatrix backward(const DenseMatrix& grad_out, const TapeEntry& rec) override;
    std::vector<LayerParams*> params() override { return {&p_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }

private:
    LayerParams p_;  // weight is 1×dim (scale), bias is the shift
    double eps_;
};

/// Finite scalar quantization: round(floor(L/2) tanh(z) + 1/2) downward, with a
/// straight-through backward pass through floor(L/2) tanh(z).
class FsqQuantizer final : public Layer {
public:
    explicit FsqQuantizer(int levels);
    LayerKind kind() const noexcept override { return LayerKind::Fsq; }
    DenseMatrix forward(const DenseMatrix& x, TapeEntry& rec) const override;
    DenseMatrix backward(const DenseMatrix& grad_out, const TapeEntry& rec) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<FsqQuantizer>(*this); }

    int levels() const noexcept { return levels_; }

private:
    int levels_;
};

/// h = TopK((x - b_pre) W_enc), z = h W_dec + b_pre.
class SparseAutoencoder final : public Layer {
public:
    /// enc: in×hidden without bias; dec: hidden×in whose bias is b_pre.
    SparseAutoencoder(LayerParams enc, LayerParams dec, std::size_t k);
    LayerKind kind() const noexcept override { return LayerKind::SparseAutoencoder; }
    DenseMatrix forward(const DenseMatrix& x, TapeEntry& rec) const override;
    DenseMatrix backward(const DenseMatrix& grad_out, const TapeEntry& rec) override;
    std::vector<LayerParams*> params() override { return {&enc_, &dec_}; }
    std::unique_ptr<Layer> clone() const override {
        return std::make_unique<SparseAutoencoder>(*this);
    }

    std::size_t k() const noexcept { return k_; }
    void set_k(std::size_t k);
    const LayerParams& encoder() const noexcept { return enc_; }
    const LayerParams& decoder() const noexcept { return dec_; }

private:
    LayerParams enc_;
    LayerParams dec_;
    std::size_t k_;
};

/// Ordered stack of layers. Copyable (deep copy).
class Sequential {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    std::size_t size() const noexcept { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }

    /// Clears `tape` and records this pass. Throws ShapeMismatch.
    DenseMatrix forward(const DenseMatrix& x, Tape& tape) const;
    /// Forward without keeping a tape.
    DenseMatrix infer(const DenseMatrix& x) const;
    /// Accumulates gradients for the pass recorded on `tape`; returns dL/dx.
    DenseMatrix backward(const DenseMatrix& grad_out, const Tape& tape);

    std::vector<LayerParams*> params();
    void zero_grad();

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

enum class Activation { Identity, Relu };

/// Builds a Sequential of Linear layers with the given activation after each.
Sequential make_mlp(std::vector<LayerParams> layers, const std::vector<Activation>& activations);

/// Forward through a plain MLP, recording `tape`. Throws ShapeMismatch.
DenseMatrix mlp_forward(const DenseMatrix& x, const Sequential& net, Tape& tape);

struct TopKResult {
    std::vector<double> values;
    std::vector<std::uint8_t> kept;
};

/// Keeps the k largest entries (ties go to the lower index), zeroing the rest.
/// Throws KOutOfRange unless 1 <= k <= v.size().
TopKResult topk_activate(std::span<const double> v, std::size_t k);

/// Forward value of the quantizer for one scalar.
double fsq_value(double z, int levels);
/// Straight-through derivative floor(L/2) (1 - tanh^2 z).
double fsq_grad(double z, int levels);
/// Quantizes every entry. Throws BadParams if levels < 2.
DenseMatrix fsq_project(const DenseMatrix& v, int levels);

}  // namespace infoproj::nn
