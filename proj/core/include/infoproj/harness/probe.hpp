#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "infoproj/nn/layers.hpp"
#include "infoproj/tensor_core.hpp"

namespace infoproj::harness {

struct ProbeResult {
    double train_accuracy = 0.0;
    double heldout_accuracy = 0.0;
    double heldout_cross_entropy = 0.0;
};

/// Multinomial logistic regression on standardized features, trained by
/// full-batch gradient descent. Weights persist across `fit` calls so an online
/// probe can be warm-started every epoch; the features are only read.
class LinearProbe {
public:
    LinearProbe(std::size_t dim, std::size_t classes);

    /// Runs `steps` gradient steps on (train_x, train_y), then scores both splits.
    ProbeResult fit(const DenseMatrix& train_x, std::span<const int> train_y,
                    const DenseMatrix& test_x, std::span<const int> test_y, int steps, double lr);

    const nn::LayerParams& params() const noexcept { return head_; }

private:
    nn::LayerParams head_;
};

/// Held-out rows are those with index % 4 == 3; the rest train the probe from
/// zero initialization. Throws SingleClass if fewer than two classes appear,
/// LabelOutOfRange for negative labels, ShapeMismatch.
ProbeResult linear_probe(const DenseMatrix& features, std::span<const int> labels, int steps,
                         double lr);

/// Fraction of rows whose argmax logit (lowest index on ties) matches the label.
double accuracy(const DenseMatrix& logits, std::span<const int> labels);

}  // namespace infoproj::harness
