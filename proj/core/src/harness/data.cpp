#include "infoproj/harness/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace infoproj::harness {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SyntheticDataset gen_synthetic(std::size_t classes, std::size_t dim, std::size_t n, double spread,
                               std::uint64_t seed) {
    if (classes < 2 || classes > dim || n < classes || !(spread >= 0.0) || !std::isfinite(spread))
        throw Error(Errc::BadParams, "need 2 <= classes <= dim, n >= classes, spread >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Random orthonormal frame via Gram-Schmidt on Gaussian vectors.
    std::vector<std::vector<double>> basis;
    while (basis.size() < classes) {
        std::vector<double> v(dim);
        for (double& x : v) x = gauss(rng);
        for (const auto& b : basis) {
            const double d = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
            for (std::size_t k = 0; k < dim; ++k) v[k] -= d * b[k];
        }
        const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm < 1e-8) continue;
        for (double& x : v) x /= norm;
        basis.push_back(std::move(v));
    }

    // Centered one-hot vertices e_c - 1/C are sqrt(2) apart.
    const double separation = std::max(6.0 * spread, 1.0);
    const double scale = separation / std::sqrt(2.0);
    const double inv_c = 1.0 / static_cast<double>(classes);
    std::vector<std::vector<double>> means(classes, std::vector<double>(dim, 0.0));
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t b = 0; b < classes; ++b) {
            const double coef = scale * ((b == c ? 1.0 : 0.0) - inv_c);
            for (std::size_t k = 0; k < dim; ++k) means[c][k] += coef * basis[b][k];
        }

    SyntheticDataset ds;
    ds.class_count = classes;
    ds.spread = spread;
    ds.seed = seed;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % classes);
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);
    ds.points = DenseMatrix(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& mu = means[static_cast<std::size_t>(ds.labels[i])];
        auto row = ds.points.row(i);
        for (std::size_t k = 0; k < dim; ++k) row[k] = mu[k] + spread * gauss(rng);
    }
    return ds;
}

SyntheticDataset gen_synthetic(const DataSpec& spec) {
    return gen_synthetic(spec.classes, spec.dim, spec.n, spec.spread, spec.seed);
}

AugmentPolicy::AugmentPolicy(double noise_sigma, double mask_prob, std::uint64_t seed)
    : noise_sigma_(noise_sigma), mask_prob_(mask_prob), seed_(seed) {
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw Error(Errc::BadParams, "noise_sigma must be >= 0");
    if (!(mask_prob >= 0.0) || !(mask_prob < 1.0))
        throw Error(Errc::BadParams, "mask_prob must lie in [0, 1)");
}

std::vector<double> augment(std::span<const double> x, const AugmentPolicy& policy,
                            std::uint64_t sample_id, std::uint64_t draw_index) {
    std::vector<double> out(x.begin(), x.end());
    if (policy.noise_sigma() == 0.0 && policy.mask_prob() == 0.0) return out;
    std::mt19937_64 rng(mix_seed(mix_seed(policy.seed(), sample_id), draw_index));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (double& v : out) {
        v += policy.noise_sigma() * gauss(rng);
        if (unif(rng) < policy.mask_prob()) v = 0.0;
    }
    return out;
}

DenseMatrix augment_batch(const DenseMatrix& points, std::span<const std::size_t> rows,
                          const AugmentPolicy& policy, std::uint64_t draw_index) {
    DenseMatrix out(rows.size(), points.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto v = augment(points.row(rows[i]), policy, rows[i], draw_index);
        std::copy(v.begin(), v.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace infoproj::harness
