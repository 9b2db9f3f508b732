#pragma once

// Finite-difference checks for whole layer stacks.

#include <memory>
#include <random>
#include <vector>

#include "infoproj/nn/layers.hpp"
#include "support.hpp"

namespace testsupport {

using infoproj::nn::LayerParams;
using infoproj::nn::Sequential;
using infoproj::nn::SparseAutoencoder;
using infoproj::nn::Tape;

inline double weighted_sum(const DenseMatrix& out, const DenseMatrix& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * w.data()[i];
    return s;
}

inline std::vector<std::vector<std::uint8_t>> masks_of(const Tape& tape) {
    std::vector<std::vector<std::uint8_t>> m;
    for (const auto& e : tape.entries()) m.push_back(e.mask);
    return m;
}

struct GradCheck {
    double rel_error = 0.0;
    std::size_t compared = 0;
    std::size_t skipped = 0;
};

// Compares accumulated parameter and input gradients of L = <net(x), w> with
// central differences. Perturbations that flip a ReLU or top-k mask are skipped.
inline GradCheck check_network(Sequential& net, const DenseMatrix& x, const DenseMatrix& w, double h = 1e-6) {
    Tape tape;
    net.zero_grad();
    net.forward(x, tape);
    const DenseMatrix grad_x = net.backward(w, tape);
    const auto base_masks = masks_of(tape);

    std::vector<double> analytic, numeric;
    GradCheck r;
    auto probe = [&](double& slot, double grad) {
        const double keep = slot;
        Tape t;
        slot = keep + h;
        const double up = weighted_sum(net.forward(x, t), w);
        const bool stable_up = masks_of(t) == base_masks;
        slot = keep - h;
        const double down = weighted_sum(net.forward(x, t), w);
        const bool stable_down = masks_of(t) == base_masks;
        slot = keep;
        if (!stable_up || !stable_down) {
            ++r.skipped;
            return;
        }
        analytic.push_back(grad);
        numeric.push_back((up - down) / (2 * h));
    };
    for (LayerParams* p : net.params()) {
        for (std::size_t i = 0; i < p->weight.size(); ++i) probe(p->weight.data()[i], p->grad_weight.data()[i]);
        for (std::size_t i = 0; i < p->bias.size(); ++i) probe(p->bias[i], p->grad_bias[i]);
    }
    DenseMatrix xv = x;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double keep = xv.data()[i];
        Tape t;
        xv.data()[i] = keep + h;
        const double up = weighted_sum(net.forward(xv, t), w);
        const bool s1 = masks_of(t) == base_masks;
        xv.data()[i] = keep - h;
        const double down = weighted_sum(net.forward(xv, t), w);
        const bool s2 = masks_of(t) == base_masks;
        xv.data()[i] = keep;
        if (!s1 || !s2) {
            ++r.skipped;
            continue;
        }
        analytic.push_back(grad_x.data()[i]);
        numeric.push_back((up - down) / (2 * h));
    }
    r.compared = analytic.size();
    r.rel_error = relative_error(analytic, numeric);
    return r;
}

inline Sequential random_sae(std::size_t dim, std::size_t hidden, std::size_t k, std::mt19937_64& rng) {
    LayerParams enc = infoproj::nn::init_linear(dim, hidden, rng, false);
    LayerParams dec = infoproj::nn::init_linear(hidden, dim, rng, true);
    Sequential s;
    s.add(std::make_unique<SparseAutoencoder>(std::move(enc), std::move(dec), k));
    return s;
}

}  // namespace testsupport
