#include "infoproj/matrix_info.hpp"

#include <cmath>
#include <string>

namespace infoproj {

EntropyOrder::EntropyOrder(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw Error(Errc::BadParams, "entropy order must be a positive finite real");
}

namespace {

// Off-diagonal Frobenius sum; the diagonal of a valid kernel is exactly 1.
double kernel_sq_sum(const DenseMatrix& g) {
    const std::size_t n = g.rows();
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) off += g(i, j) * g(i, j);
    return static_cast<double>(n) + 2.0 * off;
}

double entropy_frobenius(const GramKernel& g) {
    const double n = static_cast<double>(g.n());
    return -std::log(kernel_sq_sum(g.entries()) / (n * n));
}

}  // namespace

double matrix_entropy_spectral(const GramKernel& g, EntropyOrder order) {
    if (g.n() == 0) throw Error(Errc::InvalidKernel, "empty kernel");
    std::vector<double> eig;
    try {
        eig = sym_eigvals(g.entries());
    } catch (const Error& e) {
        throw Error(Errc::EigFailure, e.what());
    }
    const double n = static_cast<double>(g.n());
    const double alpha = order.alpha();
    // Eigenvalues at rounding level are zeros of the exact kernel; for alpha < 1
    // a spurious 1e-16 would otherwise contribute 1e-8 to the power sum.
    const double floor = kSpectralNoiseFloor * n;
    for (double& v : eig)
        if (v <= floor) v = 0.0;
    if (order.is_von_neumann()) {
        double h = 0.0;
        for (double v : eig) {
            const double lam = v / n;
            if (lam > 0.0) h -= lam * std::log(lam);
        }
        return h;
    }
    double power_sum = 0.0;
    for (double v : eig) {
        const double lam = v / n;
        if (lam > 0.0) power_sum += std::pow(lam, alpha);
    }
    return std::log(power_sum) / (1.0 - alpha);
}

double matrix_entropy(const GramKernel& g, EntropyOrder order) {
    if (g.n() == 0) throw Error(Errc::InvalidKernel, "empty kernel");
    if (order.alpha() == 2.0) return entropy_frobenius(g);
    return matrix_entropy_spectral(g, order);
}

double matrix_mi(const GramKernel& a, const GramKernel& b, EntropyOrder order) {
    if (a.n() != b.n()) throw Error(Errc::DimMismatch, "matrix_mi kernel sizes differ");
    return matrix_entropy(a, order) + matrix_entropy(b, order) -
           matrix_entropy(hadamard(a, b), order);
}

GramKernel feature_kernel(const DenseMatrix& z, double min_norm) {
    return gram(row_normalize(z, min_norm), min_norm > 0.0);
}

double matrix_entropy_alpha2(const DenseMatrix& z, double min_norm) {
    return matrix_entropy(feature_kernel(z, min_norm));
}

double matrix_mi_alpha2(const DenseMatrix& z1, const DenseMatrix& z2, NormFloors floors) {
    if (z1.rows() != z2.rows()) throw Error(Errc::DimMismatch, "row counts differ");
    return matrix_mi(feature_kernel(z1, floors.z1), feature_kernel(z2, floors.z2));
}

namespace {

// d f / d Zhat = 2 M Zhat for a symmetric dL/dG whose diagonal is ignored
// (the diagonal of a normalized Gram is constant).
DenseMatrix kernel_grad_to_features(const DenseMatrix& dg, const DenseMatrix& zhat) {
    const std::size_t n = zhat.rows();
    const std::size_t d = zhat.cols();
    DenseMatrix out(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto o = out.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double w = 2.0 * dg(i, j);
            if (w == 0.0) continue;
            auto zj = zhat.row(j);
            for (std::size_t k = 0; k < d; ++k) o[k] += w * zj[k];
        }
    }
    return out;
}

}  // namespace

DenseMatrix matrix_entropy_grad_alpha2(const DenseMatrix& z) {
    const DenseMatrix zhat = row_normalize(z);
    const GramKernel g = gram(zhat);
    const double s = kernel_sq_sum(g.entries());
    DenseMatrix dg(g.n(), g.n());
    for (std::size_t i = 0; i < g.n(); ++i)
        for (std::size_t j = 0; j < g.n(); ++j) dg(i, j) = -2.0 * g(i, j) / s;
    return row_normalize_backward(z, zhat, kernel_grad_to_features(dg, zhat));
}

MiGradient matrix_mi_grad_alpha2(const DenseMatrix& z1, const DenseMatrix& z2,
                                 NormFloors floors) {
    if (z1.rows() != z2.rows()) throw Error(Errc::DimMismatch, "row counts differ");
    const DenseMatrix u1 = row_normalize(z1, floors.z1);
    const DenseMatrix u2 = row_normalize(z2, floors.z2);
    const GramKernel a = gram(u1, floors.z1 > 0.0);
    const GramKernel b = gram(u2, floors.z2 > 0.0);
    const GramKernel c = hadamard(a, b);
    const double sa = kernel_sq_sum(a.entries());
    const double sb = kernel_sq_sum(b.entries());
    const double sc = kernel_sq_sum(c.entries());
    const double n2 = static_cast<double>(a.n()) * static_cast<double>(a.n());

    MiGradient out;
    out.value = -std::log(sa / n2) - std::log(sb / n2) + std::log(sc / n2);

    const std::size_t n = a.n();
    DenseMatrix da(n, n), db(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double cij = c(i, j);
            da(i, j) = -2.0 * a(i, j) / sa + 2.0 * cij * b(i, j) / sc;
            db(i, j) = -2.0 * b(i, j) / sb + 2.0 * cij * a(i, j) / sc;
        }
    out.grad_z1 = row_normalize_backward(z1, u1, kernel_grad_to_features(da, u1), floors.z1);
    out.grad_z2 = row_normalize_backward(z2, u2, kernel_grad_to_features(db, u2), floors.z2);
    return out;
}

BoundEstimate estimate_lower_bound(double encoder_feature_loss, double i_z1_z2) {
    BoundEstimate e;
    e.kind = BoundKind::Lower;
    e.terms = {{"i_z1_r_surrogate", -encoder_feature_loss}, {"i_z1_z2", i_z1_z2}};
    e.value = -encoder_feature_loss - i_z1_z2;
    return e;
}

BoundEstimate estimate_upper_bound(double z2_probe_cross_entropy, double i_z1_z2, double h_z1) {
    BoundEstimate e;
    e.kind = BoundKind::Upper;
    e.terms = {{"i_y_z2_surrogate", -z2_probe_cross_entropy},
               {"i_z1_z2", i_z1_z2},
               {"h_z1", h_z1}};
    e.value = -z2_probe_cross_entropy - i_z1_z2 + h_z1;
    return e;
}

}  // namespace infoproj
