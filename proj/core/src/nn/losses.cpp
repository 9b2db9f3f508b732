#include "infoproj/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "infoproj/matrix_info.hpp"

namespace infoproj::nn {

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* where) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(Errc::ShapeMismatch, std::string(where) + ": view shapes differ");
}

}  // namespace

PairLoss infonce_loss(const DenseMatrix& a, const DenseMatrix& b, double temperature,
                      double min_norm) {
    require_same_shape(a, b, "infonce_loss");
    const std::size_t n = a.rows();
    if (n < 2) throw Error(Errc::BatchTooSmall, "InfoNCE needs at least two pairs");
    if (!(temperature > 0.0)) throw Error(Errc::BadParams, "temperature must be positive");

    const DenseMatrix u = row_normalize(a, min_norm);
    const DenseMatrix v = row_normalize(b, min_norm);
    DenseMatrix s = matmul_a_bt(u, v);
    for (double& x : s.data()) x /= temperature;

    // Row softmax P (anchors from view a) and column softmax Q (anchors from view b).
    DenseMatrix p(n, n), q(n, n);
    double row_loss = 0.0, col_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = s(i, 0);
        for (std::size_t j = 1; j < n; ++j) m = std::max(m, s(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(s(i, j) - m);
        const double lse = m + std::log(z);
        row_loss += lse - s(i, i);
        for (std::size_t j = 0; j < n; ++j) p(i, j) = std::exp(s(i, j) - lse);
    }
    for (std::size_t j = 0; j < n; ++j) {
        double m = s(0, j);
        for (std::size_t i = 1; i < n; ++i) m = std::max(m, s(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) z += std::exp(s(i, j) - m);
        const double lse = m + std::log(z);
        col_loss += lse - s(j, j);
        for (std::size_t i = 0; i < n; ++i) q(i, j) = std::exp(s(i, j) - lse);
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    PairLoss out;
    out.value = 0.5 * (row_loss + col_loss) * inv_n;

    DenseMatrix ds(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double delta = i == j ? 1.0 : 0.0;
            ds(i, j) = 0.5 * inv_n * ((p(i, j) - delta) + (q(i, j) - delta)) / temperature;
        }
    const DenseMatrix du = matmul(ds, v);
    const DenseMatrix dv = matmul_at_b(ds, u);
    out.grad_a = row_normalize_backward(a, u, du, min_norm);
    out.grad_b = row_normalize_backward(b, v, dv, min_norm);
    return out;
}

namespace {

struct ColumnNormalized {
    DenseMatrix values;        // centered / norm
    std::vector<double> norm;  // sqrt(sum centered^2 + eps)
};

ColumnNormalized center_and_scale_columns(const DenseMatrix& x, double eps) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    ColumnNormalized out{DenseMatrix(n, d), std::vector<double>(d)};
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
        mean /= static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = x(i, j) - mean;
            out.values(i, j) = c;
            sq += c * c;
        }
        const double norm = std::sqrt(sq + eps);
        if (!(norm > 1e-12 * std::sqrt(static_cast<double>(n))))
            throw Error(Errc::ZeroVariance, "feature dimension " + std::to_string(j) +
                                                " is constant across the batch");
        out.norm[j] = norm;
        for (std::size_t i = 0; i < n; ++i) out.values(i, j) /= norm;
    }
    return out;
}

// Inverse of center_and_scale_columns for a gradient with respect to its output.
DenseMatrix center_and_scale_backward(const ColumnNormalized& fwd, const DenseMatrix& g) {
    const std::size_t n = g.rows();
    const std::size_t d = g.cols();
    DenseMatrix dx(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        const double r = fwd.norm[j];
        // u = c / r with r = sqrt(|c|^2 + eps): du/dc = (I - c c^T / r^2) / r.
        double radial = 0.0;
        for (std::size_t i = 0; i < n; ++i) radial += g(i, j) * fwd.values(i, j);
        std::vector<double> dc(n);
        double mean_dc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dc[i] = (g(i, j) - radial * fwd.values(i, j)) / r;
            mean_dc += dc[i];
        }
        mean_dc /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) dx(i, j) = dc[i] - mean_dc;
    }
    return dx;
}

}  // namespace

PairLoss barlow_loss(const DenseMatrix& a, const DenseMatrix& b, double gamma, double eps) {
    require_same_shape(a, b, "barlow_loss");
    if (a.rows() < 2) throw Error(Errc::BatchTooSmall, "Barlow Twins needs at least two rows");
    const ColumnNormalized na = center_and_scale_columns(a, eps);
    const ColumnNormalized nb = center_and_scale_columns(b, eps);
    const DenseMatrix c = matmul_at_b(na.values, nb.values);  // d×d
    const std::size_t d = c.rows();

    PairLoss out;
    DenseMatrix dc(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            if (i == j) {
                const double r = 1.0 - c(i, i);
                out.value += r * r;
                dc(i, j) = -2.0 * r;
            } else {
                out.value += gamma * c(i, j) * c(i, j);
                dc(i, j) = 2.0 * gamma * c(i, j);
            }
        }
    const DenseMatrix dua = matmul_a_bt(nb.values, dc);  // n×d: sum_j dC_ij ub_j
    const DenseMatrix dub = matmul(na.values, dc);       // n×d: sum_i ua_i dC_ij
    out.grad_a = center_and_scale_backward(na, dua);
    out.grad_b = center_and_scale_backward(nb, dub);
    return out;
}

DenseMatrix linear_logits(const DenseMatrix& features, const LayerParams& head) {
    if (features.cols() != head.in_dim())
        throw Error(Errc::ShapeMismatch, "head input width mismatch");
    DenseMatrix logits = matmul(features, head.weight);
    if (!head.bias.empty())
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            auto r = logits.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] += head.bias[j];
        }
    return logits;
}

HeadLoss supervised_head_loss(const DenseMatrix& features, std::span<const int> labels,
                              LayerParams& head) {
    if (labels.size() != features.rows())
        throw Error(Errc::ShapeMismatch, "one label per feature row required");
    const std::size_t classes = head.out_dim();
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " out of range");

    const DenseMatrix logits = linear_logits(features, head);
    const std::size_t n = features.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    DenseMatrix dlogits(n, classes);
    HeadLoss out;
    for (std::size_t i = 0; i < n; ++i) {
        auto l = logits.row(i);
        const double m = *std::max_element(l.begin(), l.end());
        double z = 0.0;
        for (double v : l) z += std::exp(v - m);
        const double lse = m + std::log(z);
        const auto y = static_cast<std::size_t>(labels[i]);
        out.value += (lse - l[y]) * inv_n;
        for (std::size_t c = 0; c < classes; ++c)
            dlogits(i, c) = (std::exp(l[c] - lse) - (c == y ? 1.0 : 0.0)) * inv_n;
    }
    const DenseMatrix gw = matmul_at_b(features, dlogits);
    auto hw = head.grad_weight.data();
    auto gd = gw.data();
    for (std::size_t i = 0; i < hw.size(); ++i) hw[i] += gd[i];
    if (!head.bias.empty())
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < classes; ++c) head.grad_bias[c] += dlogits(i, c);
    out.grad_features = matmul_a_bt(dlogits, head.weight);
    return out;
}

RegularizedLoss bottleneck_regularized_loss(std::span<const ViewFeatures> views, double objective,
                                            std::span<const DenseMatrix> objective_grad_z2,
                                            double lambda, double z2_min_norm) {
    if (!(lambda >= 0.0)) throw Error(Errc::BadParams, "lambda must be non-negative");
    if (views.empty() || objective_grad_z2.size() != views.size())
        throw Error(Errc::ShapeMismatch, "one objective gradient per view required");

    RegularizedLoss out;
    out.bundle.objective = objective;
    const double inv_views = 1.0 / static_cast<double>(views.size());
    for (std::size_t v = 0; v < views.size(); ++v) {
        const DenseMatrix& z1 = *views[v].z1;
        const DenseMatrix& z2 = *views[v].z2;
        if (z1.rows() != z2.rows()) throw Error(Errc::ShapeMismatch, "batch sizes differ");
        if (objective_grad_z2[v].rows() != z2.rows() || objective_grad_z2[v].cols() != z2.cols())
            throw Error(Errc::ShapeMismatch, "objective gradient shape differs from Z2");
        out.grad_z2.push_back(objective_grad_z2[v]);
        if (lambda == 0.0) {
            out.bundle.regularizer += matrix_mi_alpha2(z1, z2, {0.0, z2_min_norm}) * inv_views;
            out.grad_z1.emplace_back(z1.rows(), z1.cols());
            continue;
        }
        const MiGradient mi = matrix_mi_grad_alpha2(z1, z2, {0.0, z2_min_norm});
        out.bundle.regularizer += mi.value * inv_views;
        const double scale = lambda * inv_views;
        DenseMatrix g1 = mi.grad_z1;
        for (double& x : g1.data()) x *= scale;
        out.grad_z1.push_back(std::move(g1));
        auto g2 = out.grad_z2.back().data();
        auto m2 = mi.grad_z2.data();
        for (std::size_t i = 0; i < g2.size(); ++i) g2[i] += scale * m2[i];
    }
    out.bundle.total =
        lambda == 0.0 ? objective : objective + lambda * out.bundle.regularizer;
    return out;
}

}  // namespace infoproj::nn
