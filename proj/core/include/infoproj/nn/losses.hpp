#pragma once

// Contrastive objectives, the supervised head loss and the matrix-MI
// bottleneck regularizer, each returning its value together with gradients
// with respect to its feature inputs.

#include <cstddef>
#include <span>
#include <vector>

#include "infoproj/nn/layers.hpp"
#include "infoproj/tensor_core.hpp"

namespace infoproj::nn {

struct PairLoss {
    double value = 0.0;
    DenseMatrix grad_a;
    DenseMatrix grad_b;
};

inline constexpr double kDefaultTemperature = 0.2;

/// Symmetrized InfoNCE with in-batch negatives. Row i of `a` is positive with
/// row i of `b`; every other row of the opposite view is a negative. Rows are
/// L2-normalized (with `min_norm` as in row_normalize) and similarities are
/// divided by `temperature`. Throws ShapeMismatch, BatchTooSmall.
PairLoss infonce_loss(const DenseMatrix& a, const DenseMatrix& b,
                      double temperature = kDefaultTemperature, double min_norm = 0.0);

inline constexpr double kDefaultBarlowGamma = 5e-3;

/// sum_i (1 - C_ii)^2 + gamma * sum_{i != j} C_ij^2 where C is the
/// cross-correlation of the per-dimension centered features, each column
/// divided by its norm. eps is added under the square root of each column norm;
/// with eps = 0 a constant column throws ZeroVariance. Throws BatchTooSmall.
PairLoss barlow_loss(const DenseMatrix& a, const DenseMatrix& b,
                     double gamma = kDefaultBarlowGamma, double eps = 0.0);

struct HeadLoss {
    double value = 0.0;
    DenseMatrix grad_features;
};

/// Mean cross-entropy of a linear head over `features`. Accumulates head
/// gradients into `head`. Throws LabelOutOfRange, ShapeMismatch.
HeadLoss supervised_head_loss(const DenseMatrix& features, std::span<const int> labels,
                              LayerParams& head);

/// Row-wise logits = features W + b.
DenseMatrix linear_logits(const DenseMatrix& features, const LayerParams& head);

struct LossBundle {
    double objective = 0.0;
    double regularizer = 0.0;
    double total = 0.0;
    double encoder_feature_objective = 0.0;
};

/// Encoder/projector features of one augmented view.
struct ViewFeatures {
    const DenseMatrix* z1 = nullptr;
    const DenseMatrix* z2 = nullptr;
};

struct RegularizedLoss {
    LossBundle bundle;
    std::vector<DenseMatrix> grad_z1;  // one per view
    std::vector<DenseMatrix> grad_z2;  // one per view
};

/// total = objective + lambda * mean_v I_2(Z1_v; Z2_v). The objective's value
/// and its gradients with respect to each view's Z2 are passed in. With
/// lambda == 0 the total and gradients are the objective's, bit for bit.
/// Throws BadParams (lambda < 0), ShapeMismatch.
RegularizedLoss bottleneck_regularized_loss(std::span<const ViewFeatures> views,
                                            double objective,
                                            std::span<const DenseMatrix> objective_grad_z2,
                                            double lambda, double z2_min_norm = 0.0);

}  // namespace infoproj::nn
