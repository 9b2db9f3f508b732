#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "doctest.h"
#include "errc_check.hpp"
#include "infoproj/harness/data.hpp"
#include "infoproj/harness/probe.hpp"
#include "infoproj/harness/sweep.hpp"
#include "infoproj/harness/train.hpp"
#include "support.hpp"

using namespace infoproj;
using namespace infoproj::harness;

namespace {

// Small enough that a full run takes a fraction of a second.
TrainConfig small_config() {
    TrainConfig c;
    c.epochs = 3;
    c.steps_per_epoch = 4;
    c.batch_size = 64;
    c.metric_batch = 64;
    c.encoder_hidden = {32};
    c.feature_dim = 8;
    c.probe_steps = 10;
    return c;
}

const SyntheticDataset& small_data() {
    static const SyntheticDataset d = gen_synthetic(4, 12, 512, 1.0, 3);
    return d;
}

// FNV-1a over the bit patterns of every parameter.
std::uint64_t fingerprint(const nn::ContrastiveModel& model) {
    nn::ContrastiveModel copy = model;
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (nn::LayerParams* p : copy.params(true)) {
        for (double v : p->weight.data()) mix(v);
        for (double v : p->bias) mix(v);
    }
    return h;
}

std::vector<int> shuffled(std::vector<int> v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::shuffle(v.begin(), v.end(), rng);
    return v;
}

}  // namespace

TEST_CASE("gen_synthetic is deterministic and balanced") {
    const SyntheticDataset a = gen_synthetic(4, 20, 1001, 1.0, 7);
    const SyntheticDataset b = gen_synthetic(4, 20, 1001, 1.0, 7);
    CHECK(a.points.data()[0] == b.points.data()[0]);
    CHECK(std::equal(a.points.data().begin(), a.points.data().end(), b.points.data().begin()));
    CHECK(a.labels == b.labels);
    CHECK(a.class_count == 4);
    const SyntheticDataset c = gen_synthetic(4, 20, 1001, 1.0, 8);
    CHECK_FALSE(std::equal(a.points.data().begin(), a.points.data().end(), c.points.data().begin()));

    std::vector<int> counts(4, 0);
    for (int y : a.labels) ++counts.at(static_cast<std::size_t>(y));
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);

    const SyntheticDataset d = gen_synthetic(DataSpec{});
    CHECK(d.points.rows() == 2048);
    CHECK(d.points.cols() == 20);
    CHECK(d.spread == 3.0);
}

TEST_CASE("gen_synthetic rejects bad parameters") {
    CHECK_ERRC(gen_synthetic(1, 20, 100, 1.0, 0), Errc::BadParams);
    CHECK_ERRC(gen_synthetic(21, 20, 100, 1.0, 0), Errc::BadParams);
    CHECK_ERRC(gen_synthetic(4, 20, 3, 1.0, 0), Errc::BadParams);
    CHECK_ERRC(gen_synthetic(4, 20, 100, -0.1, 0), Errc::BadParams);
}

TEST_CASE("raw features are linearly separable") {
    const SyntheticDataset tight = gen_synthetic(2, 20, 400, 1e-6, 1);
    CHECK(linear_probe(tight.points, tight.labels, 100, 0.5).heldout_accuracy == 1.0);

    const SyntheticDataset toy = gen_synthetic(4, 20, 2048, 1.0, 7);
    CHECK(linear_probe(toy.points, toy.labels, 100, 0.5).heldout_accuracy >= 0.95);
}

TEST_CASE("augment") {
    const std::vector<double> x = {1.0, -2.0, 0.5, 3.0};
    const AugmentPolicy none(0.0, 0.0, 11);
    CHECK(augment(x, none, 5, 0) == x);

    CHECK_ERRC(AugmentPolicy(0.1, 1.0, 0), Errc::BadParams);
    CHECK_ERRC(AugmentPolicy(-0.1, 0.0, 0), Errc::BadParams);
    CHECK_ERRC(AugmentPolicy(0.1, -0.1, 0), Errc::BadParams);

    const AugmentPolicy p(0.3, 0.5, 11);
    CHECK(augment(x, p, 5, 2) == augment(x, p, 5, 2));
    CHECK(augment(x, p, 5, 2) != augment(x, p, 5, 3));
    CHECK(augment(x, p, 5, 2) != augment(x, p, 6, 2));

    // Two independent noisy views differ by N(0, 2 sigma^2) per coordinate.
    const std::size_t dim = 16;
    const double sigma = 0.1;
    const std::vector<double> base(dim, 0.7);
    const AugmentPolicy noisy(sigma, 0.0, 99);
    double sum = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const auto a = augment(base, noisy, static_cast<std::uint64_t>(i), 0);
        const auto b = augment(base, noisy, static_cast<std::uint64_t>(i), 1);
        for (std::size_t k = 0; k < dim; ++k) sum += (a[k] - b[k]) * (a[k] - b[k]);
    }
    const double expected = 2.0 * sigma * sigma * static_cast<double>(dim);
    CHECK(std::abs(sum / draws - expected) <= 0.2 * expected);

    // Masking zeroes coordinates at roughly the requested rate.
    const AugmentPolicy masked(0.0, 0.25, 3);
    std::size_t zeros = 0;
    for (int i = 0; i < 2000; ++i)
        for (double v : augment(base, masked, static_cast<std::uint64_t>(i), 0)) zeros += v == 0.0;
    CHECK(static_cast<double>(zeros) / (2000.0 * dim) == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("sgd_step") {
    std::mt19937_64 rng(5);
    nn::LayerParams p(testsupport::random_matrix(3, 4, rng), {0.1, -0.2, 0.3, 0.4});
    p.grad_weight = testsupport::random_matrix(3, 4, rng);
    p.grad_bias = {1.0, 2.0, -1.0, 0.5};
    nn::LayerParams expected = p;
    for (std::size_t i = 0; i < 12; ++i)
        expected.weight.data()[i] = p.weight.data()[i] - 0.05 * p.grad_weight.data()[i];
    for (std::size_t i = 0; i < 4; ++i) expected.bias[i] = p.bias[i] - 0.05 * p.grad_bias[i];
    sgd_step({&p}, 0.05, 0.0);
    CHECK(std::equal(p.weight.data().begin(), p.weight.data().end(), expected.weight.data().begin()));
    CHECK(p.bias == expected.bias);

    nn::LayerParams q(DenseMatrix(1, 1, {1.0}), {2.0});
    q.grad_weight = DenseMatrix(1, 1, {0.0});
    q.grad_bias = {0.0};
    sgd_step({&q}, 0.1, 0.5);
    CHECK(q.weight(0, 0) == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(q.bias[0] == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("train with zero epochs leaves the initial model") {
    TrainConfig c = small_config();
    c.epochs = 0;
    nn::ContrastiveModel m1, m2;
    CHECK(train(c, small_data(), m1).rows.empty());
    c.seed = 1;
    train(c, small_data(), m2);
    CHECK(fingerprint(m1) != fingerprint(m2));
    c.seed = 0;
    train(c, small_data(), m2);
    CHECK(fingerprint(m1) == fingerprint(m2));
}

TEST_CASE("train is deterministic and logs consistent rows") {
    const TrainConfig c = small_config();
    const RunLog a = train(c, small_data());
    const RunLog b = train(c, small_data());
    CHECK(runlog_csv(a) == runlog_csv(b));
    REQUIRE(a.rows.size() == c.epochs);
    for (std::size_t e = 0; e < a.rows.size(); ++e) {
        const RunLogRow& r = a.rows[e];
        CHECK(r.epoch == e + 1);
        for (double v : {r.objective_loss, r.regularizer_value, r.encoder_feature_loss, r.i2_z1_z2,
                         r.h2_z1, r.lower_bound_est, r.upper_bound_est})
            CHECK(std::isfinite(v));
        CHECK(r.probe_acc_z1 >= 0.0);
        CHECK(r.probe_acc_z1 <= 1.0);
        CHECK(r.probe_acc_z2 >= 0.0);
        CHECK(r.probe_acc_z2 <= 1.0);
        CHECK(std::abs(r.lower_bound_est - (-r.encoder_feature_loss - r.i2_z1_z2)) <= 1e-10);
        CHECK(r.regularizer_value >= 0.0);  // unscaled batch I_2, logged even when λ = 0
    }

    TrainConfig other = c;
    other.seed = 9;
    CHECK(runlog_csv(train(other, small_data())) != runlog_csv(a));

    const std::string csv = runlog_csv(a);
    CHECK(csv.rfind(std::string(kRunLogHeader) + "\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(c.epochs + 1));
}

TEST_CASE("probes never touch the model") {
    TrainConfig c = small_config();
    std::vector<std::uint64_t> before, after;
    TrainHooks hooks;
    hooks.before_probes = [&](std::size_t, const nn::ContrastiveModel& m) { before.push_back(fingerprint(m)); };
    hooks.after_probes = [&](std::size_t, const nn::ContrastiveModel& m) { after.push_back(fingerprint(m)); };
    train(c, small_data(), hooks);
    REQUIRE(before.size() == c.epochs);
    CHECK(before == after);
    CHECK(before.front() != before.back());
}

TEST_CASE("bottleneck regularizer is logged when enabled") {
    TrainConfig c = small_config();
    c.projector.bottleneck_lambda = 0.1;
    const RunLog log = train(c, small_data());
    for (const RunLogRow& r : log.rows) CHECK(r.regularizer_value > 0.0);
}

TEST_CASE("training objectives and projectors run end to end") {
    for (nn::Objective o : {nn::Objective::InfoNce, nn::Objective::Barlow, nn::Objective::Supervised}) {
        TrainConfig c = small_config();
        c.objective = o;
        c.projector.variant = nn::TopKSaeProjector{16, 3};
        c.projector.extra_fsq_levels = 7;
        c.projector.bottleneck_lambda = 0.05;
        const RunLog log = train(c, small_data());
        CHECK(log.rows.size() == c.epochs);
    }
    TrainConfig c = small_config();
    c.projector.variant = nn::FsqProjector{5, 4, 16};
    CHECK(train(c, small_data()).rows.size() == c.epochs);
}

TEST_CASE("train rejects unusable settings") {
    TrainConfig c = small_config();
    c.batch_size = 1000;
    CHECK_ERRC(train(c, small_data()), Errc::BadParams);
    c = small_config();
    c.learning_rate = 0.0;
    CHECK_ERRC(train(c, small_data()), Errc::BadParams);
    c = small_config();
    c.mask_prob = 1.0;
    CHECK_ERRC(train(c, small_data()), Errc::BadParams);
}

TEST_CASE("divergence is reported with the partial log") {
    TrainConfig c = small_config();
    c.learning_rate = 1e200;
    try {
        train(c, small_data());
        FAIL("expected divergence");
    } catch (const DivergedLossError& e) {
        CHECK(e.code() == Errc::DivergedLoss);
        CHECK(e.partial().rows.size() < c.epochs);
    }
}

TEST_CASE("linear_probe examples") {
    const SyntheticDataset blobs = gen_synthetic(4, 10, 800, 0.05, 2);
    const ProbeResult sep = linear_probe(blobs.points, blobs.labels, 100, 0.5);
    CHECK(sep.heldout_accuracy == 1.0);
    CHECK(sep.train_accuracy == 1.0);

    const SyntheticDataset big = gen_synthetic(4, 10, 8000, 1.0, 4);
    const ProbeResult noise = linear_probe(big.points, shuffled(big.labels, 17), 100, 0.5);
    CHECK(std::abs(noise.heldout_accuracy - 0.25) <= 0.05);

    // Identical features: only the class prior is learnable.
    DenseMatrix same(400, 3);
    for (double& v : same.data()) v = 1.5;
    std::vector<int> labels(400);
    for (std::size_t i = 0; i < 400; ++i) labels[i] = i % 10 < 6 ? 2 : static_cast<int>(i % 2);
    const ProbeResult prior = linear_probe(same, labels, 200, 0.5);
    std::size_t held = 0, majority = 0;
    for (std::size_t i = 3; i < 400; i += 4) {
        ++held;
        majority += labels[i] == 2;
    }
    CHECK(prior.heldout_accuracy == doctest::Approx(static_cast<double>(majority) / held));

    CHECK_ERRC(linear_probe(same, std::vector<int>(400, 1), 10, 0.5), Errc::SingleClass);
    CHECK_ERRC(linear_probe(same, std::vector<int>(399, 1), 10, 0.5), Errc::ShapeMismatch);
    labels[0] = -1;
    CHECK_ERRC(linear_probe(same, labels, 10, 0.5), Errc::LabelOutOfRange);
}

TEST_CASE("accuracy breaks ties toward the lowest index") {
    const DenseMatrix logits = DenseMatrix::from_rows({{1, 1, 0}, {0, 2, 2}, {3, 0, 1}});
    CHECK(accuracy(logits, std::vector<int>{0, 1, 0}) == 1.0);
    CHECK(accuracy(logits, std::vector<int>{1, 2, 0}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("spearman") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> up = {2, 4, 8, 16, 32}, down = {5, 4, 3, 2, 1};
    CHECK(spearman(x, up) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(spearman(x, down) == doctest::Approx(-1.0).epsilon(1e-15));
    // Midranks {1, 2.5, 2.5, 4} against {1, 2, 3, 4}: 4.5 / sqrt(4.5 * 5).
    CHECK(spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 2, 3, 4}) ==
          doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-14));
    CHECK(std::isnan(spearman(x, std::vector<double>(5, 1.0))));
    CHECK_ERRC(spearman(x, std::vector<double>{1, 2}), Errc::DimMismatch);
}

TEST_CASE("correlation_report") {
    std::vector<RunLogRow> rows(4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double t = static_cast<double>(i);
        rows[i].probe_acc_z1 = 0.5 + 0.1 * t;
        rows[i].lower_bound_est = -3.0 + t;
        rows[i].upper_bound_est = 2.0 - t;
        rows[i].i2_z1_z2 = t * t;
    }
    const CorrelationReport r = correlation_report(rows);
    CHECK(r.runs == 4);
    CHECK(r.lower_bound_vs_acc == doctest::Approx(1.0));
    CHECK(r.upper_bound_vs_acc == doctest::Approx(-1.0));
    CHECK(r.i2_vs_acc == doctest::Approx(1.0));
    CHECK_ERRC(correlation_report(std::span<const RunLogRow>(rows).first(2)), Errc::TooFewRuns);
}

TEST_CASE("sweep axes") {
    CHECK(parse_axis("lambda") == SweepAxis::Lambda);
    CHECK(parse_axis("fsq_levels") == SweepAxis::FsqLevels);
    CHECK(parse_axis("topk_k") == SweepAxis::TopkK);
    CHECK_ERRC(parse_axis("depth"), Errc::BadParams);
    for (SweepAxis a : {SweepAxis::Lambda, SweepAxis::FsqLevels, SweepAxis::TopkK})
        CHECK(parse_axis(axis_name(a)) == a);

    const TrainConfig base = small_config();
    CHECK(apply_axis(base, SweepAxis::Lambda, 0.3).projector.bottleneck_lambda == 0.3);
    CHECK(apply_axis(base, SweepAxis::FsqLevels, 5).projector.extra_fsq_levels == 5);
    CHECK_ERRC(apply_axis(base, SweepAxis::FsqLevels, 2.5), Errc::BadParams);
    CHECK_ERRC(apply_axis(base, SweepAxis::TopkK, 4), Errc::BadParams);

    TrainConfig fsq = base;
    fsq.projector.variant = nn::FsqProjector{30, 8, 32};
    const TrainConfig f3 = apply_axis(fsq, SweepAxis::FsqLevels, 3);
    CHECK(std::get<nn::FsqProjector>(f3.projector.variant).levels == 3);
    CHECK_FALSE(f3.projector.extra_fsq_levels.has_value());

    TrainConfig sae = base;
    sae.projector.variant = nn::TopKSaeProjector{16, 4};
    CHECK(std::get<nn::TopKSaeProjector>(apply_axis(sae, SweepAxis::TopkK, 2).projector.variant).k == 2);

    CHECK(replicate_seed(42, 0) == 42);
    CHECK(replicate_seed(42, 1) != replicate_seed(42, 2));
}

TEST_CASE("sweep with one value reproduces train") {
    const TrainConfig c = small_config();
    const std::vector<double> values = {0.0};
    const auto rows = sweep(c, small_data(), SweepAxis::Lambda, values, {1, 1, false});
    REQUIRE(rows.size() == 1);
    const RunLog log = train(c, small_data());
    CHECK(format_runlog_row(rows[0].final_row) == format_runlog_row(log.rows.back()));
    CHECK(rows[0].seed == c.seed);

    CHECK_ERRC(sweep(c, small_data(), SweepAxis::Lambda, std::vector<double>{}), Errc::BadParams);
    TrainConfig none = c;
    none.epochs = 0;
    CHECK_ERRC(sweep(none, small_data(), SweepAxis::Lambda, values), Errc::BadParams);
}

TEST_CASE("sweep order and threading do not change the table") {
    TrainConfig c = small_config();
    c.epochs = 1;
    c.projector.variant = nn::TopKSaeProjector{16, 4};
    c.projector.bottleneck_lambda = 0.05;
    c.projector.extra_fsq_levels = 9;
    const std::vector<double> values = {4, 1, 2};
    const auto serial = sweep(c, small_data(), SweepAxis::TopkK, values, {2, 1, false});
    const auto threaded = sweep(c, small_data(), SweepAxis::TopkK, values, {2, 3, true});
    CHECK(sweep_csv(serial) == sweep_csv(threaded));
    REQUIRE(serial.size() == 6);
    CHECK(serial[0].axis_value == 1);
    CHECK(serial[5].axis_value == 4);
    CHECK(serial[0].replicate == 0);
    CHECK(serial[1].replicate == 1);
    // Replicate seeds are shared across values.
    CHECK(serial[1].seed == serial[3].seed);
}

TEST_CASE("lower bound estimate tracks accuracy across projectors") {
    // Eight fixed projector variants on the unit-spread toy dataset.
    const SyntheticDataset data = gen_synthetic(4, 20, 2048, 1.0, 7);
    std::vector<nn::ProjectorSpec> specs(8);
    specs[1].variant = nn::FsqProjector{3, 8, 32};
    specs[2].variant = nn::FsqProjector{30, 8, 32};
    specs[3].variant = nn::TopKSaeProjector{64, 1};
    specs[4].variant = nn::TopKSaeProjector{64, 16};
    specs[5].bottleneck_lambda = 0.1;
    specs[6].bottleneck_lambda = 1.0;
    specs[7].variant = nn::MlpProjector{32, 2};
    std::vector<RunLogRow> finals;
    for (const nn::ProjectorSpec& s : specs) {
        TrainConfig c;
        c.projector = s;
        finals.push_back(train(c, data).rows.back());
    }
    const CorrelationReport r = correlation_report(finals);
    MESSAGE("spearman(lower_bound, acc) = " << r.lower_bound_vs_acc);
    CHECK(r.lower_bound_vs_acc > 0.0);
}
