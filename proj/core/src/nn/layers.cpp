#include "infoproj/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace infoproj::nn {

LayerParams::LayerParams(DenseMatrix w, std::vector<double> b)
    : weight(std::move(w)), bias(std::move(b)) {
    if (!bias.empty() && bias.size() != weight.cols())
        throw Error(Errc::ShapeMismatch, "bias length must equal output width");
    zero_grad();
}

void LayerParams::zero_grad() {
    grad_weight = DenseMatrix(weight.rows(), weight.cols());
    grad_bias.assign(bias.size(), 0.0);
}

LayerParams init_linear(std::size_t in, std::size_t out, std::mt19937_64& rng, bool with_bias) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseMatrix w(in, out);
    for (double& v : w.data()) v = u(rng);
    std::vector<double> b;
    if (with_bias) {
        b.resize(out);
        for (double& v : b) v = u(rng);
    }
    return {std::move(w), std::move(b)};
}

namespace {

void require_cols(const DenseMatrix& x, std::size_t cols, const char* where) {
    if (x.cols() != cols)
        throw Error(Errc::ShapeMismatch, std::string(where) + ": expected " + std::to_string(cols) +
                                             " columns, got " + std::to_string(x.cols()));
}

void add_bias(DenseMatrix& y, const std::vector<double>& b) {
    if (b.empty()) return;
    for (std::size_t i = 0; i < y.rows(); ++i) {
        auto r = y.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
    }
}

void accumulate(DenseMatrix& into, const DenseMatrix& delta) {
    auto a = into.data();
    auto d = delta.data();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += d[i];
}

void accumulate_column_sums(std::vector<double>& into, const DenseMatrix& g) {
    for (std::size_t i = 0; i < g.rows(); ++i) {
        auto r = g.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) into[j] += r[j];
    }
}

}  // namespace

DenseMatrix Linear::forward(const DenseMatrix& x, TapeEntry& rec) const {
    require_cols(x, p_.in_dim(), "Linear");
    DenseMatrix y = matmul(x, p_.weight);
    add_bias(y, p_.bias);
    rec.input = x;
    return y;
}

DenseMatrix Linear::backward(const DenseMatrix& g, const TapeEntry& rec) {
    accumulate(p_.grad_weight, matmul_at_b(rec.input, g));
    if (!p_.bias.empty()) accumulate_column_sums(p_.grad_bias, g);
    return matmul_a_bt(g, p_.weight);
}

DenseMatrix Relu::forward(const DenseMatrix& x, TapeEntry& rec) const {
    DenseMatrix y = x;
    rec.mask.assign(x.size(), 0);
    auto d = y.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0) {
            rec.mask[i] = 1;
        } else {
            d[i] = 0.0;
        }
    }
    return y;
}

DenseMatrix Relu::backward(const DenseMatrix& g, const TapeEntry& rec) {
    DenseMatrix dx = g;
    auto d = dx.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!rec.mask[i]) d[i] = 0.0;
    return dx;
}

BatchNorm::BatchNorm(std::size_t dim, double eps)
    : p_(DenseMatrix::filled(1, dim, 1.0), std::vector<double>(dim, 0.0)), eps_(eps) {}

DenseMatrix BatchNorm::forward(const DenseMatrix& x, TapeEntry& rec) const {
    const std::size_t d = p_.weight.cols();
    require_cols(x, d, "BatchNorm");
    const std::size_t n = x.rows();
    if (n < 2) throw Error(Errc::BatchTooSmall, "batch norm needs at least two rows");
    const double inv_n = 1.0 / static_cast<double>(n);

    DenseMatrix xhat(n, d);
    rec.stats.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
        mean *= inv_n;
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
        var *= inv_n;
        const double inv_std = 1.0 / std::sqrt(var + eps_);
        rec.stats[j] = inv_std;
        for (std::size_t i = 0; i < n; ++i) xhat(i, j) = (x(i, j) - mean) * inv_std;
    }
    DenseMatrix y(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) y(i, j) = p_.weight(0, j) * xhat(i, j) + p_.bias[j];
    rec.aux = std::move(xhat);
    return y;
}

DenseMatrix BatchNorm::backward(const DenseMatrix& g, const TapeEntry& rec) {
    const DenseMatrix& xhat = rec.aux;
    const std::size_t n = g.rows();
    const std::size_t d = g.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    DenseMatrix dx(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum_g += g(i, j);
            sum_gx += g(i, j) * xhat(i, j);
        }
        p_.grad_weight(0, j) += sum_gx;
        p_.grad_bias[j] += sum_g;
        const double scale = p_.weight(0, j) * rec.stats[j];
        for (std::size_t i = 0; i < n; ++i)
            dx(i, j) = scale * (g(i, j) - inv_n * sum_g - xhat(i, j) * inv_n * sum_gx);
    }
    return dx;
}

double fsq_value(double z, int levels) {
    const double half = std::floor(static_cast<double>(levels) / 2.0);
    return std::floor(half * std::tanh(z) + 0.5);
}

double fsq_grad(double z, int levels) {
    const double half = std::floor(static_cast<double>(levels) / 2.0);
    const double t = std::tanh(z);
    return half * (1.0 - t * t);
}

DenseMatrix fsq_project(const DenseMatrix& v, int levels) {
    if (levels < 2) throw Error(Errc::BadParams, "FSQ needs at least 2 levels");
    DenseMatrix out = v;
    for (double& x : out.data()) x = fsq_value(x, levels);
    return out;
}

FsqQuantizer::FsqQuantizer(int levels) : levels_(levels) {
    if (levels < 1) throw Error(Errc::BadParams, "FSQ levels must be positive");
}

DenseMatrix FsqQuantizer::forward(const DenseMatrix& x, TapeEntry& rec) const {
    DenseMatrix y = x;
    for (double& v : y.data()) v = fsq_value(v, levels_);
    rec.input = x;
    rec.output = y;
    return y;
}

DenseMatrix FsqQuantizer::backward(const DenseMatrix& g, const TapeEntry& rec) {
    DenseMatrix dx = g;
    auto d = dx.data();
    auto in = rec.input.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= fsq_grad(in[i], levels_);
    return dx;
}

TopKResult topk_activate(std::span<const double> v, std::size_t k) {
    if (k < 1 || k > v.size())
        throw Error(Errc::KOutOfRange, "k=" + std::to_string(k) + " outside [1, " +
                                           std::to_string(v.size()) + "]");
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (v[a] != v[b]) return v[a] > v[b];
                          return a < b;
                      });
    TopKResult r{std::vector<double>(v.size(), 0.0), std::vector<std::uint8_t>(v.size(), 0)};
    for (std::size_t i = 0; i < k; ++i) {
        r.values[order[i]] = v[order[i]];
        r.kept[order[i]] = 1;
    }
    return r;
}

SparseAutoencoder::SparseAutoencoder(LayerParams enc, LayerParams dec, std::size_t k)
    : enc_(std::move(enc)), dec_(std::move(dec)), k_(k) {
    if (!enc_.bias.empty()) throw Error(Errc::ShapeMismatch, "SAE encoder has no bias");
    if (enc_.out_dim() != dec_.in_dim() || enc_.in_dim() != dec_.out_dim() ||
        dec_.bias.size() != dec_.out_dim())
        throw Error(Errc::ShapeMismatch, "SAE encoder/decoder shapes do not chain");
    set_k(k);
}

void SparseAutoencoder::set_k(std::size_t k) {
    if (k < 1 || k > enc_.out_dim())
        throw Error(Errc::KOutOfRange, "SAE k must lie in [1, hidden]");
    k_ = k;
}

DenseMatrix SparseAutoencoder::forward(const DenseMatrix& x, TapeEntry& rec) const {
    require_cols(x, enc_.in_dim(), "SparseAutoencoder");
    const std::vector<double>& b_pre = dec_.bias;
    DenseMatrix centered = x;
    for (std::size_t i = 0; i < centered.rows(); ++i) {
        auto r = centered.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] -= b_pre[j];
    }
    const DenseMatrix pre = matmul(centered, enc_.weight);
    DenseMatrix h(pre.rows(), pre.cols());
    rec.mask.assign(pre.size(), 0);
    for (std::size_t i = 0; i < pre.rows(); ++i) {
        auto top = topk_activate(pre.row(i), k_);
        auto hr = h.row(i);
        std::copy(top.values.begin(), top.values.end(), hr.begin());
        std::copy(top.kept.begin(), top.kept.end(), rec.mask.begin() + i * pre.cols());
    }
    DenseMatrix z = matmul(h, dec_.weight);
    add_bias(z, b_pre);
    rec.input = std::move(centered);
    rec.aux = std::move(h);
    return z;
}

DenseMatrix SparseAutoencoder::backward(const DenseMatrix& g, const TapeEntry& rec) {
    const DenseMatrix& centered = rec.input;
    const DenseMatrix& h = rec.aux;
    accumulate(dec_.grad_weight, matmul_at_b(h, g));
    accumulate_column_sums(dec_.grad_bias, g);

    DenseMatrix dpre = matmul_a_bt(g, dec_.weight);
    auto d = dpre.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!rec.mask[i]) d[i] = 0.0;
    accumulate(enc_.grad_weight, matmul_at_b(centered, dpre));
    DenseMatrix dx = matmul_a_bt(dpre, enc_.weight);
    // b_pre enters once through the centering (negated) and once in the output.
    for (std::size_t i = 0; i < dx.rows(); ++i) {
        auto r = dx.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) dec_.grad_bias[j] -= r[j];
    }
    return dx;
}

Sequential::Sequential(const Sequential& other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
    if (this != &other) {
        Sequential tmp(other);
        layers_ = std::move(tmp.layers_);
    }
    return *this;
}

DenseMatrix Sequential::forward(const DenseMatrix& x, Tape& tape) const {
    tape.clear();
    DenseMatrix cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        TapeEntry rec;
        rec.layer_index = i;
        cur = layers_[i]->forward(cur, rec);
        if (rec.output.empty() && layers_[i]->kind() == LayerKind::SparseAutoencoder)
            rec.output = cur;
        tape.push(std::move(rec));
    }
    return cur;
}

DenseMatrix Sequential::infer(const DenseMatrix& x) const {
    Tape scratch;
    return forward(x, scratch);
}

DenseMatrix Sequential::backward(const DenseMatrix& grad_out, const Tape& tape) {
    DenseMatrix g = grad_out;
    const auto entries = tape.entries();
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
        g = layers_.at(it->layer_index)->backward(g, *it);
    return g;
}

std::vector<LayerParams*> Sequential::params() {
    std::vector<LayerParams*> out;
    for (auto& l : layers_)
        for (LayerParams* p : l->params()) out.push_back(p);
    return out;
}

void Sequential::zero_grad() {
    for (LayerParams* p : params()) p->zero_grad();
}

Sequential make_mlp(std::vector<LayerParams> layers, const std::vector<Activation>& activations) {
    if (activations.size() != layers.size())
        throw Error(Errc::ShapeMismatch, "one activation per layer required");
    Sequential net;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i > 0 && layers[i].in_dim() != layers[i - 1].out_dim())
            throw Error(Errc::ShapeMismatch, "layer " + std::to_string(i) + " input width mismatch");
        net.add(std::make_unique<Linear>(std::move(layers[i])));
        if (activations[i] == Activation::Relu) net.add(std::make_unique<Relu>());
    }
    return net;
}

DenseMatrix mlp_forward(const DenseMatrix& x, const Sequential& net, Tape& tape) {
    return net.forward(x, tape);
}

}  // namespace infoproj::nn
