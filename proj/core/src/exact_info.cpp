#include "infoproj/exact_info.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace infoproj {

namespace {

void validate_probs(const std::vector<double>& p, const char* what) {
    if (p.empty()) throw Error(Errc::InvalidPmf, std::string(what) + " is empty");
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0)
            throw Error(Errc::InvalidPmf, std::string(what) + " has a negative or non-finite entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kPmfTolerance)
        throw Error(Errc::InvalidPmf, std::string(what) + " sums to " + std::to_string(sum));
}

double plogp_sum(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

template <typename F>
void for_each_cell(const AlphabetSizes& s, const std::vector<double>& joint, F&& f) {
    std::size_t idx = 0;
    std::array<std::size_t, 5> c{};
    for (c[0] = 0; c[0] < s[0]; ++c[0])
        for (c[1] = 0; c[1] < s[1]; ++c[1])
            for (c[2] = 0; c[2] < s[2]; ++c[2])
                for (c[3] = 0; c[3] < s[3]; ++c[3])
                    for (c[4] = 0; c[4] < s[4]; ++c[4]) f(c, joint[idx++]);
}

std::vector<double> dirichlet_one(std::size_t n, std::mt19937_64& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> w(n);
    for (double& v : w) v = expo(rng);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
    return w;
}

Channel random_channel(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    std::vector<Pmf> rows;
    rows.reserve(in);
    for (std::size_t i = 0; i < in; ++i) rows.emplace_back(dirichlet_one(out, rng));
    return Channel(std::move(rows));
}

}  // namespace

Pmf::Pmf(std::vector<double> probs) : probs_(std::move(probs)) { validate_probs(probs_, "pmf"); }

Pmf Pmf::uniform(std::size_t n) { return Pmf(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

Pmf Pmf::point_mass(std::size_t n, std::size_t at) {
    std::vector<double> p(n, 0.0);
    p.at(at) = 1.0;
    return Pmf(std::move(p));
}

Channel::Channel(std::vector<Pmf> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw Error(Errc::InvalidChain, "channel has no inputs");
    for (const auto& r : rows_)
        if (r.size() != rows_.front().size())
            throw Error(Errc::InvalidChain, "channel rows have different output sizes");
}

Channel Channel::identity(std::size_t n) {
    std::vector<Pmf> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(Pmf::point_mass(n, i));
    return Channel(std::move(rows));
}

Channel Channel::uniform_noise(std::size_t in, std::size_t out) {
    return Channel(std::vector<Pmf>(in, Pmf::uniform(out)));
}

Channel Channel::constant(std::size_t in, std::size_t out) {
    return Channel(std::vector<Pmf>(in, Pmf::point_mass(out, 0)));
}

JointChain::JointChain(Pmf p_y, Channel y_x, Channel x_z1, Channel z1_z2, Channel z2_r)
    : p_y_(std::move(p_y)),
      y_x_(std::move(y_x)),
      x_z1_(std::move(x_z1)),
      z1_z2_(std::move(z1_z2)),
      z2_r_(std::move(z2_r)) {
    if (y_x_.in_size() != p_y_.size() || x_z1_.in_size() != y_x_.out_size() ||
        z1_z2_.in_size() != x_z1_.out_size() || z2_r_.in_size() != z1_z2_.out_size())
        throw Error(Errc::InvalidChain, "channel dimensions do not compose");
    sizes_ = {p_y_.size(), y_x_.out_size(), x_z1_.out_size(), z1_z2_.out_size(),
              z2_r_.out_size()};

    const std::size_t cells =
        std::accumulate(sizes_.begin(), sizes_.end(), std::size_t{1}, std::multiplies<>());
    joint_.resize(cells);
    std::size_t idx = 0;
    double total = 0.0;
    for (std::size_t y = 0; y < sizes_[0]; ++y)
        for (std::size_t x = 0; x < sizes_[1]; ++x) {
            const double pyx = p_y_[y] * y_x_(y, x);
            for (std::size_t z1 = 0; z1 < sizes_[2]; ++z1) {
                const double pz1 = pyx * x_z1_(x, z1);
                for (std::size_t z2 = 0; z2 < sizes_[3]; ++z2) {
                    const double pz2 = pz1 * z1_z2_(z1, z2);
                    for (std::size_t r = 0; r < sizes_[4]; ++r) {
                        joint_[idx] = pz2 * z2_r_(z2, r);
                        total += joint_[idx++];
                    }
                }
            }
        }
    if (std::abs(total - 1.0) > 1e-10) throw Error(Errc::InvalidChain, "joint does not sum to 1");
}

JointChain JointChain::identity(std::size_t m) {
    return JointChain(Pmf::uniform(m), Channel::identity(m), Channel::identity(m),
                      Channel::identity(m), Channel::identity(m));
}

std::vector<double> JointChain::marginal(VarSet set, std::vector<std::size_t>& shape) const {
    shape.clear();
    for (unsigned v = 0; v < 5; ++v)
        if (set & (1u << v)) shape.push_back(sizes_[v]);
    const std::size_t cells =
        std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    std::vector<double> m(cells, 0.0);
    for_each_cell(sizes_, joint_, [&](const std::array<std::size_t, 5>& c, double p) {
        std::size_t idx = 0;
        for (unsigned v = 0; v < 5; ++v)
            if (set & (1u << v)) idx = idx * sizes_[v] + c[v];
        m[idx] += p;
    });
    return m;
}

double JointChain::entropy(VarSet set) const {
    set &= 31u;
    if (!entropy_known_[set]) {
        std::vector<std::size_t> shape;
        entropy_cache_[set] = set == 0 ? 0.0 : plogp_sum(marginal(set, shape));
        entropy_known_[set] = true;
    }
    return entropy_cache_[set];
}

double JointChain::mi(VarSet a, VarSet b) const {
    return entropy(a) + entropy(b) - entropy(a | b);
}

double JointChain::cmi(ChainVar a, ChainVar b, ChainVar c) const {
    const auto ia = static_cast<unsigned>(a);
    const auto ib = static_cast<unsigned>(b);
    const auto ic = static_cast<unsigned>(c);
    Joint3 t{sizes_[ia], sizes_[ib], sizes_[ic], {}};
    t.probs.assign(t.na * t.nb * t.nc, 0.0);
    for_each_cell(sizes_, joint_, [&](const std::array<std::size_t, 5>& x, double p) {
        t.probs[(x[ia] * t.nb + x[ib]) * t.nc + x[ic]] += p;
    });
    return conditional_mi(t);
}

double entropy(const Pmf& p) { return plogp_sum(p.probs()); }

double mutual_information(const DenseMatrix& joint) {
    validate_probs({joint.data().begin(), joint.data().end()}, "joint pmf");
    std::vector<double> pa(joint.rows(), 0.0), pb(joint.cols(), 0.0);
    for (std::size_t i = 0; i < joint.rows(); ++i)
        for (std::size_t j = 0; j < joint.cols(); ++j) {
            pa[i] += joint(i, j);
            pb[j] += joint(i, j);
        }
    const double joint_h = plogp_sum({joint.data().begin(), joint.data().end()});
    return std::max(0.0, plogp_sum(pa) + plogp_sum(pb) - joint_h);
}

double conditional_mi(const Joint3& t) {
    if (t.probs.size() != t.na * t.nb * t.nc)
        throw Error(Errc::InvalidPmf, "Joint3 size does not match its shape");
    validate_probs(t.probs, "three-variable pmf");
    std::vector<double> pc(t.nc, 0.0), pac(t.na * t.nc, 0.0), pbc(t.nb * t.nc, 0.0);
    for (std::size_t a = 0; a < t.na; ++a)
        for (std::size_t b = 0; b < t.nb; ++b)
            for (std::size_t c = 0; c < t.nc; ++c) {
                const double p = t(a, b, c);
                pc[c] += p;
                pac[a * t.nc + c] += p;
                pbc[b * t.nc + c] += p;
            }
    double acc = 0.0;
    for (std::size_t a = 0; a < t.na; ++a)
        for (std::size_t b = 0; b < t.nb; ++b)
            for (std::size_t c = 0; c < t.nc; ++c) {
                const double p = t(a, b, c);
                if (p <= 0.0) continue;
                acc += p * std::log((p * pc[c]) / (pac[a * t.nc + c] * pbc[b * t.nc + c]));
            }
    return acc;
}

JointChain sample_chain(const AlphabetSizes& sizes, std::uint64_t seed) {
    for (std::size_t s : sizes)
        if (s < 1 || s > 8)
            throw Error(Errc::SizeOutOfRange, "alphabet sizes must lie in [1, 8]");
    std::mt19937_64 rng(seed);
    Pmf p_y(dirichlet_one(sizes[0], rng));
    Channel yx = random_channel(sizes[0], sizes[1], rng);
    Channel xz1 = random_channel(sizes[1], sizes[2], rng);
    Channel z1z2 = random_channel(sizes[2], sizes[3], rng);
    Channel z2r = random_channel(sizes[3], sizes[4], rng);
    return JointChain(std::move(p_y), std::move(yx), std::move(xz1), std::move(z1z2),
                      std::move(z2r));
}

namespace {
constexpr VarSet kY = var_bit(ChainVar::Y);
constexpr VarSet kZ1 = var_bit(ChainVar::Z1);
constexpr VarSet kZ2 = var_bit(ChainVar::Z2);
constexpr VarSet kR = var_bit(ChainVar::R);
}  // namespace

BoundReport check_theorem1(const JointChain& c) {
    BoundReport r{"theorem1", 0, 0, 0, {}};
    r.terms = {{"I(Y;Z1)", c.mi(kY, kZ1)},
               {"I(Z1;R)", c.mi(kZ1, kR)},
               {"I(Z1;Z2)", c.mi(kZ1, kZ2)},
               {"I(R;Y)", c.mi(kR, kY)}};
    r.lhs = r.terms["I(Y;Z1)"];
    r.rhs = r.terms["I(Z1;R)"] - r.terms["I(Z1;Z2)"] + r.terms["I(R;Y)"];
    r.slack = r.lhs - r.rhs;
    return r;
}

BoundReport check_theorem2(const JointChain& c) {
    BoundReport r{"theorem2", 0, 0, 0, {}};
    r.terms = {{"I(Y;Z1)", c.mi(kY, kZ1)},
               {"I(Y;Z2)", c.mi(kY, kZ2)},
               {"I(Z1;Z2)", c.mi(kZ1, kZ2)},
               {"H(Z1)", c.entropy(kZ1)}};
    r.lhs = r.terms["I(Y;Z1)"];
    r.rhs = r.terms["I(Y;Z2)"] - r.terms["I(Z1;Z2)"] + r.terms["H(Z1)"];
    r.slack = r.rhs - r.lhs;
    return r;
}

BoundReport check_theorem3(const JointChain& c) {
    BoundReport r{"theorem3", 0, 0, 0, {}};
    r.terms = {{"I(Y;Z1)", c.mi(kY, kZ1)},
               {"H(Z2)", c.entropy(kZ2)},
               {"I(Z2;R)", c.mi(kZ2, kR)},
               {"I(R;Y)", c.mi(kR, kY)}};
    r.lhs = r.terms["I(Y;Z1)"];
    r.rhs = -r.terms["H(Z2)"] + r.terms["I(Z2;R)"] + r.terms["I(R;Y)"];
    r.slack = r.lhs - r.rhs;
    return r;
}

bool LemmaReport::passes() const {
    return std::abs(i_y_r_given_z1) <= kConditionalTolerance &&
           std::abs(i_y_z2_given_z1) <= kConditionalTolerance &&
           z1z2_minus_z1r >= -kProcessingTolerance && z2r_minus_z1r >= -kProcessingTolerance;
}

LemmaReport check_lemmas(const JointChain& c) {
    LemmaReport r;
    r.i_y_r_given_z1 = c.cmi(ChainVar::Y, ChainVar::R, ChainVar::Z1);
    r.i_y_z2_given_z1 = c.cmi(ChainVar::Y, ChainVar::Z2, ChainVar::Z1);
    const double z1r = c.mi(kZ1, kR);
    r.z1z2_minus_z1r = c.mi(kZ1, kZ2) - z1r;
    r.z2r_minus_z1r = c.mi(kZ2, kR) - z1r;
    return r;
}

}  // namespace infoproj
