#include <cmath>
#include <random>

#include "doctest.h"
#include "errc_check.hpp"
#include "infoproj/matrix_info.hpp"
#include "support.hpp"

using namespace infoproj;
using testsupport::numeric_grad;
using testsupport::random_kernel;
using testsupport::random_matrix;
using testsupport::relative_error;

namespace {

const double kLn4 = std::log(4.0);

// H_2 by explicit double loop over the kernel entries.
double h2_oracle(const DenseMatrix& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * g(i, j);
    const double n = static_cast<double>(g.rows());
    return -std::log(s / (n * n));
}

DenseMatrix constant_rows(std::size_t n, std::vector<double> v) {
    DenseMatrix m(n, v.size());
    for (std::size_t i = 0; i < n; ++i) std::copy(v.begin(), v.end(), m.row(i).begin());
    return m;
}

}  // namespace

TEST_CASE("EntropyOrder rejects non-positive orders") {
    CHECK_ERRC(EntropyOrder(0.0), Errc::BadParams);
    CHECK_ERRC(EntropyOrder(-1.0), Errc::BadParams);
    CHECK_ERRC(EntropyOrder(NAN), Errc::BadParams);
    CHECK(EntropyOrder().alpha() == 2.0);
    CHECK(EntropyOrder(1.0).is_von_neumann());
}

TEST_CASE("matrix_entropy examples") {
    for (double a : {0.5, 1.0, 2.0, 3.0}) {
        CHECK(matrix_entropy(GramKernel::identity(4), EntropyOrder(a)) == doctest::Approx(kLn4).epsilon(1e-12));
        CHECK(std::abs(matrix_entropy(GramKernel::all_ones(4), EntropyOrder(a))) <= 1e-12);
    }
    CHECK(std::abs(matrix_entropy(GramKernel::identity(7)) - std::log(7.0)) <= 1e-12);
    CHECK(matrix_entropy(GramKernel::identity(1)) == 0.0);
}

TEST_CASE("alpha 2 Frobenius path equals the eigenvalue path") {
    std::mt19937_64 rng(61);
    for (int t = 0; t < 100; ++t) {
        const GramKernel g = random_kernel(8, rng);
        const double frob = matrix_entropy(g, EntropyOrder(2.0));
        CHECK(std::abs(frob - matrix_entropy_spectral(g, EntropyOrder(2.0))) <= 1e-9);
        CHECK(std::abs(frob - h2_oracle(g.entries())) <= 1e-12);
    }
}

TEST_CASE("matrix entropy range and order monotonicity") {
    std::mt19937_64 rng(67);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + static_cast<std::size_t>(t % 15);
        const GramKernel g = random_kernel(n, rng);
        double h[4];
        int k = 0;
        for (double a : {0.5, 1.0, 2.0, 3.0}) {
            h[k] = matrix_entropy(g, EntropyOrder(a));
            CHECK(h[k] >= -1e-10);
            CHECK(h[k] <= std::log(static_cast<double>(n)) + 1e-10);
            ++k;
        }
        CHECK(h[1] <= h[0] + 1e-10);
        CHECK(h[2] <= h[1] + 1e-10);
        CHECK(h[3] <= h[2] + 1e-10);
    }
}

TEST_CASE("matrix_mi examples") {
    std::mt19937_64 rng(71);
    for (double a : {1.0, 2.0, 3.0}) {
        CHECK(matrix_mi(GramKernel::identity(5), GramKernel::identity(5), EntropyOrder(a)) ==
              doctest::Approx(std::log(5.0)).epsilon(1e-12));
        const GramKernel g = random_kernel(6, rng);
        CHECK(std::abs(matrix_mi(GramKernel::all_ones(6), g, EntropyOrder(a))) <= 1e-12);
    }
    for (int t = 0; t < 30; ++t) {
        const GramKernel a = random_kernel(6, rng), b = random_kernel(6, rng);
        DenseMatrix ab(6, 6);
        for (std::size_t i = 0; i < 36; ++i) ab.data()[i] = a.entries().data()[i] * b.entries().data()[i];
        const double oracle = h2_oracle(a.entries()) + h2_oracle(b.entries()) - h2_oracle(ab);
        CHECK(std::abs(matrix_mi(a, b) - oracle) <= 1e-10);
    }
    CHECK_ERRC(matrix_mi(GramKernel::identity(2), GramKernel::identity(3)), Errc::DimMismatch);
}

TEST_CASE("raw-feature helpers agree with kernels built by hand") {
    std::mt19937_64 rng(73);
    const DenseMatrix z1 = random_matrix(10, 4, rng), z2 = random_matrix(10, 3, rng);
    const GramKernel g1 = gram(row_normalize(z1)), g2 = gram(row_normalize(z2));
    CHECK(matrix_mi_alpha2(z1, z2) == doctest::Approx(matrix_mi(g1, g2)).epsilon(1e-14));
    CHECK(matrix_entropy_alpha2(z1) == doctest::Approx(matrix_entropy(g1)).epsilon(1e-14));
    CHECK(feature_kernel(z2).entries() == g2.entries());
    CHECK(matrix_mi_grad_alpha2(z1, z2).value == doctest::Approx(matrix_mi(g1, g2)).epsilon(1e-14));
}

TEST_CASE("matrix_entropy_grad_alpha2 matches central differences") {
    std::mt19937_64 rng(79);
    auto f = [](const DenseMatrix& z) { return matrix_entropy_alpha2(z); };
    for (int t = 0; t < 50; ++t) {
        const DenseMatrix z = random_matrix(3 + t % 10, 2 + t % 5, rng, 1.5);
        CHECK(relative_error(matrix_entropy_grad_alpha2(z), numeric_grad(f, z)) <= 1e-4);
    }
    // Orthonormal rows: H_2 is at its maximum, so the gradient vanishes.
    const DenseMatrix eye = DenseMatrix::identity(4);
    const DenseMatrix g = matrix_entropy_grad_alpha2(eye);
    const DenseMatrix fd = numeric_grad(f, eye);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs(g.data()[i]) <= 1e-12);
        CHECK(std::abs(fd.data()[i]) <= 1e-6);
    }
}

TEST_CASE("matrix_entropy_grad_alpha2 directional derivative and scaling") {
    std::mt19937_64 rng(83);
    for (int t = 0; t < 20; ++t) {
        const DenseMatrix z = random_matrix(8, 4, rng);
        const DenseMatrix u = random_matrix(8, 4, rng);
        const DenseMatrix g = matrix_entropy_grad_alpha2(z);
        const double h = 1e-6;
        DenseMatrix up = z, down = z;
        double analytic = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            up.data()[i] += h * u.data()[i];
            down.data()[i] -= h * u.data()[i];
            analytic += g.data()[i] * u.data()[i];
        }
        const double numeric = (matrix_entropy_alpha2(up) - matrix_entropy_alpha2(down)) / (2 * h);
        CHECK(std::abs(analytic - numeric) <= 1e-4 * std::max(std::abs(analytic), 1e-6));

        const double c = 3.5;
        DenseMatrix scaled = z;
        for (double& v : scaled.data()) v *= c;
        const DenseMatrix gs = matrix_entropy_grad_alpha2(scaled);
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(gs.data()[i] == doctest::Approx(g.data()[i] / c).epsilon(1e-10).scale(1e-12));
    }
}

TEST_CASE("matrix_mi_grad_alpha2 examples") {
    std::mt19937_64 rng(89);
    const DenseMatrix z1 = random_matrix(12, 5, rng);
    const MiGradient j = matrix_mi_grad_alpha2(z1, constant_rows(12, {0.6, 0.8}));
    CHECK(std::abs(j.value) <= 1e-12);
    for (double v : j.grad_z1.data()) CHECK(std::abs(v) <= 1e-10);

    const MiGradient same = matrix_mi_grad_alpha2(z1, z1);
    for (std::size_t i = 0; i < z1.size(); ++i)
        CHECK(std::abs(same.grad_z1.data()[i] - same.grad_z2.data()[i]) <= 1e-12);

    CHECK_ERRC(matrix_mi_grad_alpha2(z1, random_matrix(11, 5, rng)), Errc::DimMismatch);
    DenseMatrix zero_row = z1;
    for (double& v : zero_row.row(3)) v = 0.0;
    CHECK_ERRC(matrix_mi_grad_alpha2(zero_row, z1), Errc::ZeroRow);
}

TEST_CASE("matrix_mi_grad_alpha2 matches central differences") {
    std::mt19937_64 rng(97);
    for (int t = 0; t < 50; ++t) {
        const DenseMatrix z1 = random_matrix(16, 8, rng), z2 = random_matrix(16, 4, rng);
        const MiGradient g = matrix_mi_grad_alpha2(z1, z2);
        const DenseMatrix fd1 = numeric_grad([&](const DenseMatrix& x) { return matrix_mi_alpha2(x, z2); }, z1);
        const DenseMatrix fd2 = numeric_grad([&](const DenseMatrix& x) { return matrix_mi_alpha2(z1, x); }, z2);
        CHECK(relative_error(g.grad_z1, fd1) <= 1e-4);
        CHECK(relative_error(g.grad_z2, fd2) <= 1e-4);
    }
}

TEST_CASE("matrix_mi_grad_alpha2 with a normalization floor") {
    std::mt19937_64 rng(101);
    const DenseMatrix z1 = random_matrix(8, 3, rng);
    // Lattice-valued z2 with a zero row and sub-unit norms never occur for FSQ,
    // but the floor must still give consistent values and gradients.
    DenseMatrix z2 = DenseMatrix::from_rows(
        {{1, 0}, {0, 0}, {2, -1}, {1, 1}, {0, 3}, {-1, 0}, {0, 0}, {1, 2}});
    const NormFloors floors{0.0, 1.0};
    const MiGradient g = matrix_mi_grad_alpha2(z1, z2, floors);
    CHECK(g.value == doctest::Approx(matrix_mi_alpha2(z1, z2, floors)).epsilon(1e-14));
    const DenseMatrix fd1 =
        numeric_grad([&](const DenseMatrix& x) { return matrix_mi_alpha2(x, z2, floors); }, z1);
    CHECK(relative_error(g.grad_z1, fd1) <= 1e-4);
}

TEST_CASE("bound estimate examples") {
    const DenseMatrix eye = DenseMatrix::identity(4);
    const DenseMatrix constant = constant_rows(4, {0.0, 1.0, 0.0});
    const double loss = 1.25;

    const BoundEstimate same = estimate_lower_bound(loss, matrix_mi_alpha2(eye, eye));
    CHECK(same.kind == BoundKind::Lower);
    CHECK(same.value == doctest::Approx(-loss - kLn4).epsilon(1e-14));
    const BoundEstimate flat = estimate_lower_bound(loss, matrix_mi_alpha2(eye, constant));
    CHECK(flat.value == doctest::Approx(-loss).epsilon(1e-14));
    CHECK(flat.value == doctest::Approx(-flat.terms.at("i_z1_z2") + flat.terms.at("i_z1_r_surrogate")));

    const BoundEstimate up = estimate_upper_bound(0.0, matrix_mi_alpha2(eye, constant), matrix_entropy_alpha2(eye));
    CHECK(up.kind == BoundKind::Upper);
    CHECK(up.value == doctest::Approx(kLn4).epsilon(1e-14));
    const double s = 0.7;  // surrogate = -cross-entropy
    const BoundEstimate up2 = estimate_upper_bound(-s, matrix_mi_alpha2(eye, eye), matrix_entropy_alpha2(eye));
    CHECK(up2.value == doctest::Approx(s).epsilon(1e-14));
    CHECK(up2.value == doctest::Approx(up2.terms.at("i_y_z2_surrogate") - up2.terms.at("i_z1_z2") +
                                       up2.terms.at("h_z1")));
}
