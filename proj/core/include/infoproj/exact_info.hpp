#pragma once

// Exact Shannon quantities (in nats) over small discrete distributions and the
// Markov chain Y -> X -> Z1 -> Z2 -> R used to check the projector bounds by
// full enumeration.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "infoproj/tensor_core.hpp"

namespace infoproj {

inline constexpr double kPmfTolerance = 1e-12;

class Pmf {
public:
    /// Throws InvalidPmf on negative/non-finite entries or a sum off by > 1e-12.
    explicit Pmf(std::vector<double> probs);

    static Pmf uniform(std::size_t n);
    static Pmf point_mass(std::size_t n, std::size_t at);

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const noexcept { return probs_[i]; }
    const std::vector<double>& probs() const noexcept { return probs_; }

private:
    std::vector<double> probs_;
};

/// Conditional law: one Pmf over outputs per input symbol.
class Channel {
public:
    explicit Channel(std::vector<Pmf> rows);

    static Channel identity(std::size_t n);
    /// Every input maps to the same uniform output distribution.
    static Channel uniform_noise(std::size_t in, std::size_t out);
    /// Every input maps to output 0 with certainty.
    static Channel constant(std::size_t in, std::size_t out);

    std::size_t in_size() const noexcept { return rows_.size(); }
    std::size_t out_size() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }
    double operator()(std::size_t in, std::size_t out) const noexcept { return rows_[in][out]; }

private:
    std::vector<Pmf> rows_;
};

enum class ChainVar : unsigned { Y = 0, X = 1, Z1 = 2, Z2 = 3, R = 4 };

/// Bit set of chain variables, e.g. vars(ChainVar::Y, ChainVar::Z1).
using VarSet = unsigned;
constexpr VarSet var_bit(ChainVar v) { return 1u << static_cast<unsigned>(v); }
template <typename... V>
constexpr VarSet vars(V... v) {
    return (var_bit(v) | ...);
}

using AlphabetSizes = std::array<std::size_t, 5>;

class JointChain {
public:
    /// Throws InvalidChain if channel dimensions do not compose or the joint
    /// does not sum to 1 within 1e-10.
    JointChain(Pmf p_y, Channel y_x, Channel x_z1, Channel z1_z2, Channel z2_r);

    /// Identity channels end to end with Y uniform over m symbols.
    static JointChain identity(std::size_t m);

    const AlphabetSizes& sizes() const noexcept { return sizes_; }
    const Pmf& p_y() const noexcept { return p_y_; }
    const Channel& y_x() const noexcept { return y_x_; }
    const Channel& x_z1() const noexcept { return x_z1_; }
    const Channel& z1_z2() const noexcept { return z1_z2_; }
    const Channel& z2_r() const noexcept { return z2_r_; }

    /// Full joint p(y,x,z1,z2,r), index = (((y*|X|+x)*|Z1|+z1)*|Z2|+z2)*|R|+r.
    const std::vector<double>& joint() const noexcept { return joint_; }

    /// Joint entropy of the marginal over `set` (0 for the empty set). Cached.
    double entropy(VarSet set) const;
    double mi(VarSet a, VarSet b) const;
    /// I(A;B|C) by direct summation of p log p(abc)p(c)/(p(ac)p(bc)).
    double cmi(ChainVar a, ChainVar b, ChainVar c) const;

private:
    std::vector<double> marginal(VarSet set, std::vector<std::size_t>& shape) const;

    Pmf p_y_;
    Channel y_x_, x_z1_, z1_z2_, z2_r_;
    AlphabetSizes sizes_{};
    std::vector<double> joint_;
    mutable std::array<double, 32> entropy_cache_{};
    mutable std::array<bool, 32> entropy_known_{};
};

/// Three-variable pmf p(a,b,c), index (a*nb + b)*nc + c.
struct Joint3 {
    std::size_t na = 0, nb = 0, nc = 0;
    std::vector<double> probs;

    double operator()(std::size_t a, std::size_t b, std::size_t c) const {
        return probs[(a * nb + b) * nc + c];
    }
};

/// -sum p ln p with 0 ln 0 = 0.
double entropy(const Pmf& p);
/// I of a two-variable joint pmf, clamped at 0. Throws InvalidPmf.
double mutual_information(const DenseMatrix& joint);
/// I(A;B|C). Throws InvalidPmf.
double conditional_mi(const Joint3& joint);

/// Random chain with every pmf drawn from a symmetric Dirichlet(1).
/// Throws SizeOutOfRange unless every size is in [1, 8].
JointChain sample_chain(const AlphabetSizes& sizes, std::uint64_t seed);

inline constexpr double kBoundSlackTolerance = 1e-9;

struct BoundReport {
    std::string theorem_id;
    double lhs = 0.0;
    double rhs = 0.0;
    /// lhs - rhs for lower bounds, rhs - lhs for upper bounds.
    double slack = 0.0;
    std::map<std::string, double> terms;

    bool passes(double tolerance = kBoundSlackTolerance) const { return slack >= -tolerance; }
};

/// I(Y;Z1) >= I(Z1;R) - I(Z1;Z2) + I(R;Y)
BoundReport check_theorem1(const JointChain& c);
/// I(Y;Z1) <= I(Y;Z2) - I(Z1;Z2) + H(Z1)
BoundReport check_theorem2(const JointChain& c);
/// I(Y;Z1) >= -H(Z2) + I(Z2;R) + I(R;Y)
BoundReport check_theorem3(const JointChain& c);

struct LemmaReport {
    double i_y_r_given_z1 = 0.0;
    double i_y_z2_given_z1 = 0.0;
    double z1z2_minus_z1r = 0.0;  // I(Z1;Z2) - I(Z1;R)
    double z2r_minus_z1r = 0.0;   // I(Z2;R) - I(Z1;R)

    static constexpr double kConditionalTolerance = 1e-12;
    static constexpr double kProcessingTolerance = 1e-10;

    bool passes() const;
};

LemmaReport check_lemmas(const JointChain& c);

}  // namespace infoproj
