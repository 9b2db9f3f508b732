#pragma once

// Encoder + projector assembly for the three projector variants.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "infoproj/nn/layers.hpp"

namespace infoproj::nn {

/// Linear-ReLU-Linear.
struct MlpProjector {
    std::size_t hidden = 32;
    std::size_t out = 8;
};

/// Linear-ReLU-Linear followed by the FSQ quantizer.
struct FsqProjector {
    int levels = 30;
    std::size_t out = 8;
    std::size_t hidden = 32;
};

/// Top-k sparse autoencoder; output width equals its input width.
struct TopKSaeProjector {
    std::size_t hidden = 64;
    std::size_t k = 4;
};

struct ProjectorSpec {
    std::variant<MlpProjector, FsqProjector, TopKSaeProjector> variant = MlpProjector{};
    double bottleneck_lambda = 0.0;
    /// Quantizes the output of an MLP or SAE projector as well (combined methods).
    std::optional<int> extra_fsq_levels;
    /// Admits FSQ with a single level, which collapses every feature to 0.
    bool allow_collapse = false;

    /// Throws BadParams / KOutOfRange.
    void validate() const;
    /// Levels of the final quantizer, if the projector ends in one.
    std::optional<int> output_levels() const;
    std::string variant_name() const;
};

/// Number of distinct values FSQ can emit per dimension: 2*floor(L/2) + 1.
int fsq_effective_levels(int levels);

enum class Objective { InfoNce, Barlow, Supervised };

std::string objective_name(Objective o);
/// Throws BadParams for unknown names.
Objective parse_objective(const std::string& name);

struct ModelSpec {
    std::size_t input_dim = 20;
    std::vector<std::size_t> encoder_hidden = {64};
    std::size_t feature_dim = 16;
    ProjectorSpec projector;
    Objective objective = Objective::InfoNce;
    std::size_t classes = 4;  // supervised head width
};

struct ContrastiveModel {
    Sequential encoder;
    Sequential projector;
    LayerParams head;  // used by the supervised objective only

    std::vector<LayerParams*> params(bool include_head);
    void zero_grad();
    std::size_t projector_dim() const;
};

/// Deterministic initialization from `seed`.
ContrastiveModel build_model(const ModelSpec& spec, std::uint64_t seed);

}  // namespace infoproj::nn
