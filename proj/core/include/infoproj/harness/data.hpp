#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "infoproj/tensor_core.hpp"

namespace infoproj::harness {

struct SyntheticDataset {
    DenseMatrix points;
    std::vector<int> labels;
    std::size_t class_count = 0;
    double spread = 0.0;
    std::uint64_t seed = 0;
};

/// Gaussian blobs around the vertices of a regular simplex embedded in a random
/// orthonormal frame of R^dim. Vertices are max(6 * spread, 1) apart. Labels
/// cycle through the classes and are shuffled, so counts differ by at most 1.
/// Throws BadParams unless 2 <= classes <= dim, n >= classes, spread >= 0.
SyntheticDataset gen_synthetic(std::size_t classes, std::size_t dim, std::size_t n, double spread,
                               std::uint64_t seed);

/// Parameters of gen_synthetic; the defaults describe the standard toy task.
struct DataSpec {
    std::size_t classes = 4;
    std::size_t dim = 20;
    std::size_t n = 2048;
    double spread = 3.0;
    std::uint64_t seed = 7;
};

SyntheticDataset gen_synthetic(const DataSpec& spec);

/// Additive Gaussian noise followed by independent coordinate masking.
class AugmentPolicy {
public:
    /// Throws BadParams unless noise_sigma >= 0 and 0 <= mask_prob < 1.
    AugmentPolicy(double noise_sigma, double mask_prob, std::uint64_t seed);

    double noise_sigma() const noexcept { return noise_sigma_; }
    double mask_prob() const noexcept { return mask_prob_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    double noise_sigma_;
    double mask_prob_;
    std::uint64_t seed_;
};

/// Deterministic in (policy seed, sample_id, draw_index).
std::vector<double> augment(std::span<const double> x, const AugmentPolicy& policy,
                            std::uint64_t sample_id, std::uint64_t draw_index);

/// Stacks augmented copies of the given rows into a batch.
DenseMatrix augment_batch(const DenseMatrix& points, std::span<const std::size_t> rows,
                          const AugmentPolicy& policy, std::uint64_t draw_index);

/// splitmix64-based mixing used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace infoproj::harness
