#pragma once

// Shared helpers for the test binaries: seeded random inputs, scalar-loop
// oracles that avoid the library's own code paths, and finite differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "infoproj/tensor_core.hpp"

namespace testsupport {

using infoproj::DenseMatrix;
using infoproj::GramKernel;

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                 double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) v = g(rng);
    return m;
}

inline DenseMatrix random_symmetric(std::size_t n, std::mt19937_64& rng) {
    DenseMatrix m = random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) m(j, i) = m(i, j);
    return m;
}

// Unit rows computed here, not through row_normalize.
inline DenseMatrix random_unit_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    DenseMatrix m = random_matrix(rows, cols, rng);
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (double v : m.row(i)) s += v * v;
        const double inv = 1.0 / std::sqrt(s);
        for (double& v : m.row(i)) v *= inv;
    }
    return m;
}

// Z Zᵀ by explicit loops with the diagonal set to 1.
inline DenseMatrix gram_oracle(const DenseMatrix& z) {
    DenseMatrix g(z.rows(), z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < z.cols(); ++k) s += z(i, k) * z(j, k);
            g(i, j) = i == j ? 1.0 : s;
        }
    return g;
}

// A random kernel of random rank (1..min(n, 8)) built from unit rows.
inline GramKernel random_kernel(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(1, std::min<std::size_t>(n, 8));
    return GramKernel::from_psd_matrix(gram_oracle(random_unit_rows(n, pick(rng), rng)));
}

inline double trace(const DenseMatrix& a) {
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
    return t;
}

// Central difference of f with respect to every entry of x.
inline DenseMatrix numeric_grad(const std::function<double(const DenseMatrix&)>& f, DenseMatrix x,
                                double h = 1e-6) {
    DenseMatrix g(x.rows(), x.cols());
    auto d = x.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double keep = d[i];
        d[i] = keep + h;
        const double up = f(x);
        d[i] = keep - h;
        const double down = f(x);
        d[i] = keep;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// ‖a − b‖ / max(‖a‖, ‖b‖, floor): relative error of a whole gradient.
inline double relative_error(const DenseMatrix& a, const DenseMatrix& b, double floor = 1e-8) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                             double floor = 1e-8) {
    return relative_error(DenseMatrix(1, a.size(), a), DenseMatrix(1, b.size(), b), floor);
}

}  // namespace testsupport
