#pragma once

// Matrix-based Renyi entropy and mutual information over Gram kernels of
// normalized features, closed-form gradients for the alpha = 2 case, and the
// bound estimates assembled from them.

#include <map>
#include <string>
#include <utility>

#include "infoproj/tensor_core.hpp"

namespace infoproj {

class EntropyOrder {
public:
    /// Throws BadParams unless alpha > 0 and finite.
    explicit EntropyOrder(double alpha = 2.0);
    double alpha() const noexcept { return alpha_; }
    bool is_von_neumann() const noexcept { return alpha_ == 1.0; }

private:
    double alpha_;
};

/// H_alpha(G) = log(tr((G/n)^alpha)) / (1 - alpha); the alpha = 1 limit is
/// -tr((G/n) log(G/n)). Alpha = 2 uses the Frobenius identity and never
/// decomposes G. Throws InvalidKernel (n == 0), EigFailure.
double matrix_entropy(const GramKernel& g, EntropyOrder order = EntropyOrder{});

/// Eigenvalues of G at or below this multiple of n are treated as exact zeros.
inline constexpr double kSpectralNoiseFloor = 1e-12;

/// Eigenvalue route for every alpha, including 2. Negative eigenvalues and
/// those under the noise floor are clamped to 0.
double matrix_entropy_spectral(const GramKernel& g, EntropyOrder order);

/// I_alpha(A;B) = H(A) + H(B) - H(A o B), reported without clamping.
double matrix_mi(const GramKernel& a, const GramKernel& b, EntropyOrder order = EntropyOrder{});

/// Gradient of H_2(gram(row_normalize(z))) with respect to the raw rows of z.
DenseMatrix matrix_entropy_grad_alpha2(const DenseMatrix& z);

/// Normalization floor per feature matrix; see row_normalize. Zero means strict.
struct NormFloors {
    double z1 = 0.0;
    double z2 = 0.0;
};

struct MiGradient {
    double value = 0.0;
    DenseMatrix grad_z1;
    DenseMatrix grad_z2;
};

/// I_2 between the Gram kernels of the row-normalized z1 and z2, and its
/// gradients with respect to the raw matrices. Throws DimMismatch, ZeroRow.
MiGradient matrix_mi_grad_alpha2(const DenseMatrix& z1, const DenseMatrix& z2,
                                 NormFloors floors = {});

/// I_2 of raw (unnormalized) feature matrices, no gradient.
double matrix_mi_alpha2(const DenseMatrix& z1, const DenseMatrix& z2, NormFloors floors = {});
/// H_2 of raw (unnormalized) feature matrix.
double matrix_entropy_alpha2(const DenseMatrix& z, double min_norm = 0.0);

/// Kernel of raw features: gram(row_normalize(z, min_norm)), admitting zero rows
/// when a floor is in effect.
GramKernel feature_kernel(const DenseMatrix& z, double min_norm = 0.0);

enum class BoundKind { Lower, Upper };

/// Bound estimate, up to the additive I(R;Y) constant which is not estimated.
struct BoundEstimate {
    BoundKind kind = BoundKind::Lower;
    double value = 0.0;
    std::map<std::string, double> terms;
};

/// Lower estimate: I(Z1;R) surrogate (negated encoder-feature loss) minus I_2(Z1;Z2).
BoundEstimate estimate_lower_bound(double encoder_feature_loss, double i_z1_z2);
/// Upper estimate: I(Y;Z2) surrogate (negated probe cross-entropy on Z2) - I_2(Z1;Z2) + H_2(Z1).
BoundEstimate estimate_upper_bound(double z2_probe_cross_entropy, double i_z1_z2, double h_z1);

}  // namespace infoproj
