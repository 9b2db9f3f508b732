#include "infoproj/harness/probe.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "infoproj/nn/losses.hpp"

namespace infoproj::harness {

namespace {

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_std;

    explicit Standardizer(const DenseMatrix& x) : mean(x.cols(), 0.0), inv_std(x.cols(), 1.0) {
        const double n = static_cast<double>(x.rows());
        for (std::size_t j = 0; j < x.cols(); ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < x.rows(); ++i) m += x(i, j);
            m /= n;
            double var = 0.0;
            for (std::size_t i = 0; i < x.rows(); ++i) var += (x(i, j) - m) * (x(i, j) - m);
            var /= n;
            mean[j] = m;
            // Constant columns are centered only.
            inv_std[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
        }
    }

    DenseMatrix apply(const DenseMatrix& x) const {
        DenseMatrix out = x;
        for (std::size_t i = 0; i < out.rows(); ++i) {
            auto r = out.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) * inv_std[j];
        }
        return out;
    }
};

double mean_cross_entropy(const DenseMatrix& logits, std::span<const int> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto l = logits.row(i);
        const double m = *std::max_element(l.begin(), l.end());
        double z = 0.0;
        for (double v : l) z += std::exp(v - m);
        total += m + std::log(z) - l[static_cast<std::size_t>(labels[i])];
    }
    return logits.rows() == 0 ? 0.0 : total / static_cast<double>(logits.rows());
}

}  // namespace

double accuracy(const DenseMatrix& logits, std::span<const int> labels) {
    if (logits.rows() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto l = logits.row(i);
        const auto pred = static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
        if (pred == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

LinearProbe::LinearProbe(std::size_t dim, std::size_t classes)
    : head_(DenseMatrix(dim, classes), std::vector<double>(classes, 0.0)) {}

ProbeResult LinearProbe::fit(const DenseMatrix& train_x, std::span<const int> train_y,
                             const DenseMatrix& test_x, std::span<const int> test_y, int steps,
                             double lr) {
    const Standardizer st(train_x);
    const DenseMatrix xs = st.apply(train_x);
    for (int s = 0; s < steps; ++s) {
        head_.zero_grad();
        nn::supervised_head_loss(xs, train_y, head_);
        auto w = head_.weight.data();
        auto gw = head_.grad_weight.data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
        for (std::size_t c = 0; c < head_.bias.size(); ++c) head_.bias[c] -= lr * head_.grad_bias[c];
    }
    head_.zero_grad();

    ProbeResult r;
    const DenseMatrix train_logits = nn::linear_logits(xs, head_);
    r.train_accuracy = accuracy(train_logits, train_y);
    const DenseMatrix test_logits = nn::linear_logits(st.apply(test_x), head_);
    r.heldout_accuracy = accuracy(test_logits, test_y);
    r.heldout_cross_entropy = mean_cross_entropy(test_logits, test_y);
    return r;
}

ProbeResult linear_probe(const DenseMatrix& features, std::span<const int> labels, int steps,
                         double lr) {
    if (labels.size() != features.rows())
        throw Error(Errc::ShapeMismatch, "one label per feature row required");
    std::set<int> present;
    for (int y : labels) {
        if (y < 0) throw Error(Errc::LabelOutOfRange, "labels must be non-negative");
        present.insert(y);
    }
    if (present.size() < 2) throw Error(Errc::SingleClass, "probe needs at least two classes");
    const auto classes = static_cast<std::size_t>(*present.rbegin()) + 1;

    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < features.rows(); ++i) (i % 4 == 3 ? test_rows : train_rows).push_back(i);
    auto take = [&](const std::vector<std::size_t>& rows, DenseMatrix& x, std::vector<int>& y) {
        x = DenseMatrix(rows.size(), features.cols());
        y.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy(features.row(rows[i]).begin(), features.row(rows[i]).end(), x.row(i).begin());
            y[i] = labels[rows[i]];
        }
    };
    DenseMatrix train_x, test_x;
    std::vector<int> train_y, test_y;
    take(train_rows, train_x, train_y);
    take(test_rows, test_x, test_y);

    LinearProbe probe(features.cols(), classes);
    return probe.fit(train_x, train_y, test_x, test_y, steps, lr);
}

}  // namespace infoproj::harness
