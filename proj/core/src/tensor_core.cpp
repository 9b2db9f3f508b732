#include "infoproj/tensor_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace infoproj {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::ZeroRow: return "ZeroRow";
        case Errc::NotNormalized: return "NotNormalized";
        case Errc::DimMismatch: return "DimMismatch";
        case Errc::NotSymmetric: return "NotSymmetric";
        case Errc::NoConvergence: return "NoConvergence";
        case Errc::NonFinite: return "NonFinite";
        case Errc::InvalidKernel: return "InvalidKernel";
        case Errc::EigFailure: return "EigFailure";
        case Errc::InvalidPmf: return "InvalidPmf";
        case Errc::SizeOutOfRange: return "SizeOutOfRange";
        case Errc::InvalidChain: return "InvalidChain";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::BatchTooSmall: return "BatchTooSmall";
        case Errc::ZeroVariance: return "ZeroVariance";
        case Errc::KOutOfRange: return "KOutOfRange";
        case Errc::LabelOutOfRange: return "LabelOutOfRange";
        case Errc::BadParams: return "BadParams";
        case Errc::SingleClass: return "SingleClass";
        case Errc::DivergedLoss: return "DivergedLoss";
        case Errc::TooFewRuns: return "TooFewRuns";
    }
    return "Unknown";
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw Error(Errc::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                             " != " + std::to_string(rows_) + "x" +
                                             std::to_string(cols_));
    }
    require_finite("DenseMatrix");
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    const std::size_t cols = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) throw Error(Errc::ShapeMismatch, "ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return {rows.size(), cols, std::move(data)};
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::filled(std::size_t rows, std::size_t cols, double value) {
    DenseMatrix m(rows, cols);
    std::fill(m.data_.begin(), m.data_.end(), value);
    m.require_finite("DenseMatrix::filled");
    return m;
}

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void DenseMatrix::require_finite(const char* where) const {
    if (!all_finite()) throw Error(Errc::NonFinite, std::string(where) + " produced NaN/Inf");
}

double DenseMatrix::frobenius_sq() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw Error(Errc::DimMismatch, "matmul inner dimensions");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw Error(Errc::DimMismatch, "matmul_at_b row counts");
    DenseMatrix out(a.cols(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto a_row = a.row(r);
        auto b_row = b.row(r);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ai = a_row[i];
            if (ai == 0.0) continue;
            auto out_row = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += ai * b_row[j];
        }
    }
    return out;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) throw Error(Errc::DimMismatch, "matmul_a_bt column counts");
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto a_row = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto b_row = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a_row[k] * b_row[k];
            out(i, j) = s;
        }
    }
    return out;
}

namespace {

void require_kernel_shape(const DenseMatrix& m) {
    if (m.rows() != m.cols()) throw Error(Errc::InvalidKernel, "kernel must be square");
    m.require_finite("GramKernel");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (std::abs(m(i, i) - 1.0) > kKernelTolerance)
            throw Error(Errc::InvalidKernel, "diagonal entry " + std::to_string(i) + " != 1");
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > kKernelTolerance)
                throw Error(Errc::InvalidKernel, "kernel is not symmetric");
    }
}

void require_psd(const DenseMatrix& m) {
    if (m.rows() == 0) return;
    const auto eig = sym_eigvals(m);
    if (eig.front() < -kPsdSlack)
        throw Error(Errc::InvalidKernel,
                    "smallest eigenvalue " + std::to_string(eig.front()) + " below -1e-9");
}

}  // namespace

GramKernel GramKernel::from_matrix(DenseMatrix m) {
    require_kernel_shape(m);
    require_psd(m);
    return GramKernel(std::move(m));
}

GramKernel GramKernel::from_psd_matrix(DenseMatrix m) {
    require_kernel_shape(m);
    return GramKernel(std::move(m));
}

GramKernel GramKernel::identity(std::size_t n) { return GramKernel(DenseMatrix::identity(n)); }

GramKernel GramKernel::all_ones(std::size_t n) {
    return GramKernel(DenseMatrix::filled(n, n, 1.0));
}

DenseMatrix row_normalize(const DenseMatrix& m, double min_norm) {
    DenseMatrix out = m;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        double sq = 0.0;
        for (double v : r) sq += v * v;
        double norm = std::sqrt(sq);
        if (min_norm > 0.0) {
            norm = std::max(norm, min_norm);
        } else if (!(norm >= kZeroRowThreshold)) {
            throw Error(Errc::ZeroRow, "row " + std::to_string(i) + " has norm below 1e-30");
        }
        for (double& v : r) v /= norm;
    }
    out.require_finite("row_normalize");
    return out;
}

DenseMatrix row_normalize_backward(const DenseMatrix& raw, const DenseMatrix& normalized,
                                   const DenseMatrix& grad_normalized, double min_norm) {
    if (raw.rows() != normalized.rows() || raw.cols() != normalized.cols() ||
        raw.rows() != grad_normalized.rows() || raw.cols() != grad_normalized.cols())
        throw Error(Errc::DimMismatch, "row_normalize_backward shapes differ");
    DenseMatrix out(raw.rows(), raw.cols());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        auto x = raw.row(i);
        auto u = normalized.row(i);
        auto g = grad_normalized.row(i);
        auto o = out.row(i);
        double sq = 0.0, radial = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            sq += x[k] * x[k];
            radial += g[k] * u[k];
        }
        const double norm = std::sqrt(sq);
        if (min_norm > 0.0 && norm < min_norm) {
            // Inside the floor the map is linear: u = x / min_norm.
            for (std::size_t k = 0; k < x.size(); ++k) o[k] = g[k] / min_norm;
            continue;
        }
        const double inv_norm = 1.0 / norm;
        for (std::size_t k = 0; k < x.size(); ++k) o[k] = (g[k] - radial * u[k]) * inv_norm;
    }
    return out;
}

GramKernel gram(const DenseMatrix& z, bool allow_zero_rows) {
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double sq = 0.0;
        for (double v : z.row(i)) sq += v * v;
        if (allow_zero_rows && sq == 0.0) continue;
        if (std::abs(std::sqrt(sq) - 1.0) > kUnitRowTolerance)
            throw Error(Errc::NotNormalized, "row " + std::to_string(i) + " is not unit norm");
    }
    const std::size_t n = z.rows();
    DenseMatrix g(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        g(i, i) = 1.0;
        auto zi = z.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            auto zj = z.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < z.cols(); ++k) s += zi[k] * zj[k];
            g(i, j) = s;
            g(j, i) = s;
        }
    }
    return GramKernel::from_psd_matrix(std::move(g));
}

GramKernel hadamard(const GramKernel& a, const GramKernel& b, bool verify_psd) {
    if (a.n() != b.n()) throw Error(Errc::DimMismatch, "hadamard kernel sizes differ");
    DenseMatrix out = a.entries();
    auto od = out.data();
    auto bd = b.entries().data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
    if (verify_psd) return GramKernel::from_matrix(std::move(out));
    return GramKernel::from_psd_matrix(std::move(out));
}

std::vector<double> sym_eigvals(const DenseMatrix& input, const JacobiOptions& opts) {
    const std::size_t n = input.rows();
    if (input.cols() != n) throw Error(Errc::NotSymmetric, "matrix is not square");
    if (n > 4096) throw Error(Errc::SizeOutOfRange, "sym_eigvals supports n <= 4096");
    input.require_finite("sym_eigvals");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(input(i, j) - input(j, i)) > opts.symmetry_tolerance)
                throw Error(Errc::NotSymmetric, "asymmetry above tolerance");

    DenseMatrix a = input;
    // Symmetrize exactly so the rotations act on a truly symmetric matrix.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = m;
            a(j, i) = m;
        }

    auto off_sq = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return s;
    };
    const double threshold = opts.relative_tolerance * std::sqrt(a.frobenius_sq());

    bool converged = std::sqrt(off_sq()) <= threshold;
    for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                const double app = a(p, p);
                const double aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a(r, p);
                    const double arq = a(r, q);
                    const double new_rp = c * arp - s * arq;
                    const double new_rq = s * arp + c * arq;
                    a(r, p) = new_rp;
                    a(p, r) = new_rp;
                    a(r, q) = new_rq;
                    a(q, r) = new_rq;
                }
            }
        }
        converged = std::sqrt(off_sq()) <= threshold;
    }
    if (!converged) throw Error(Errc::NoConvergence, "Jacobi did not converge in sweep budget");

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace infoproj
