#pragma once

// Dense real linear algebra used by every other module: a row-major matrix,
// Gram kernels of normalized features, Hadamard products and a cyclic Jacobi
// symmetric eigensolver.

#include <cstddef>
#include <span>
#include <vector>

#include "infoproj/error.hpp"

namespace infoproj {

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    /// Throws ShapeMismatch if data.size() != rows*cols, NonFinite on NaN/Inf.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);
    static DenseMatrix identity(std::size_t n);
    static DenseMatrix filled(std::size_t rows, std::size_t cols, double value);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept;
    /// Throws NonFinite naming `where` if any entry is NaN/Inf.
    void require_finite(const char* where) const;

    double frobenius_sq() const noexcept;
    DenseMatrix transposed() const;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Products used by the network layers. All throw DimMismatch.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);  // aᵀ b
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b);  // a bᵀ

/// Symmetric n×n matrix with unit diagonal, positive semidefinite.
class GramKernel {
public:
    /// Validates unit diagonal (1e-12), symmetry (1e-12) and PSD (min eig >= -1e-9).
    static GramKernel from_matrix(DenseMatrix m);
    /// Skips the eigenvalue check; caller guarantees PSD by construction.
    static GramKernel from_psd_matrix(DenseMatrix m);

    std::size_t n() const noexcept { return entries_.rows(); }
    const DenseMatrix& entries() const noexcept { return entries_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return entries_(i, j); }

    static GramKernel identity(std::size_t n);
    static GramKernel all_ones(std::size_t n);

private:
    explicit GramKernel(DenseMatrix m) : entries_(std::move(m)) {}
    DenseMatrix entries_;
};

inline constexpr double kZeroRowThreshold = 1e-30;
inline constexpr double kUnitRowTolerance = 1e-9;
inline constexpr double kKernelTolerance = 1e-12;
inline constexpr double kPsdSlack = 1e-9;

/// Scales each row to unit L2 norm. Throws ZeroRow.
///
/// With min_norm > 0 each row is divided by max(norm, min_norm) instead and
/// no row is rejected. Quantized features use min_norm = 1: every nonzero
/// lattice point has norm >= 1, so only the all-zero row is affected.
DenseMatrix row_normalize(const DenseMatrix& m, double min_norm = 0.0);

/// Back-propagates through row_normalize: given raw rows, their normalized
/// versions and dL/d(normalized), returns dL/d(raw).
DenseMatrix row_normalize_backward(const DenseMatrix& raw, const DenseMatrix& normalized,
                                   const DenseMatrix& grad_normalized, double min_norm = 0.0);

/// Z Zᵀ for unit-row Z with the diagonal pinned to exactly 1. Throws NotNormalized.
/// allow_zero_rows admits exact zero rows (their diagonal is pinned as well).
GramKernel gram(const DenseMatrix& z_normalized, bool allow_zero_rows = false);

/// Entrywise product. Throws DimMismatch; with verify_psd, also InvalidKernel
/// if the smallest eigenvalue drops below -1e-9.
GramKernel hadamard(const GramKernel& a, const GramKernel& b, bool verify_psd = false);

struct JacobiOptions {
    int max_sweeps = 50;
    double relative_tolerance = 1e-11;
    double symmetry_tolerance = 1e-9;
};

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations. Throws NotSymmetric, NoConvergence, SizeOutOfRange (n > 4096).
std::vector<double> sym_eigvals(const DenseMatrix& a, const JacobiOptions& opts = {});

}  // namespace infoproj
