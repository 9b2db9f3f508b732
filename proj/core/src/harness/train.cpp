#include "infoproj/harness/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "infoproj/harness/probe.hpp"
#include "infoproj/matrix_info.hpp"
#include "infoproj/nn/losses.hpp"

namespace infoproj::harness {

namespace {

constexpr double kBarlowEps = 1e-8;

// Sub-stream tags for mix_seed.
constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kAugmentStream = 3;
constexpr std::uint64_t kMetricStream = 4;

void append_g(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out += buf;
}

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
    DenseMatrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
    return out;
}

std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = labels[rows[i]];
    return out;
}

void add_into(DenseMatrix& a, const DenseMatrix& b) {
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

bool row_finite(const RunLogRow& r) {
    for (double v : {r.objective_loss, r.regularizer_value, r.encoder_feature_loss, r.i2_z1_z2,
                     r.h2_z1, r.lower_bound_est, r.upper_bound_est, r.probe_acc_z1, r.probe_acc_z2})
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

void TrainConfig::validate() const {
    projector.validate();
    if (batch_size < 4) throw Error(Errc::BadParams, "batch size must be >= 4");
    if (steps_per_epoch == 0) throw Error(Errc::BadParams, "steps_per_epoch must be positive");
    if (feature_dim == 0) throw Error(Errc::BadParams, "feature_dim must be positive");
    for (std::size_t h : encoder_hidden)
        if (h == 0) throw Error(Errc::BadParams, "encoder widths must be positive");
    if (!(learning_rate > 0.0)) throw Error(Errc::BadParams, "learning rate must be positive");
    if (!(weight_decay >= 0.0)) throw Error(Errc::BadParams, "weight decay must be >= 0");
    if (!(temperature > 0.0)) throw Error(Errc::BadParams, "temperature must be positive");
    if (!(barlow_gamma >= 0.0)) throw Error(Errc::BadParams, "barlow gamma must be >= 0");
    if (metric_batch < 2) throw Error(Errc::BadParams, "metric batch must be >= 2");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw Error(Errc::BadParams, "holdout fraction must lie in (0, 1)");
    if (probe_steps < 0 || !(probe_lr > 0.0)) throw Error(Errc::BadParams, "bad probe settings");
    AugmentPolicy(noise_sigma, mask_prob, 0);
}

std::string format_runlog_row(const RunLogRow& r) {
    std::string out = std::to_string(r.epoch);
    for (double v : {r.objective_loss, r.regularizer_value, r.encoder_feature_loss, r.i2_z1_z2,
                     r.h2_z1, r.lower_bound_est, r.upper_bound_est, r.probe_acc_z1,
                     r.probe_acc_z2}) {
        out += ',';
        append_g(out, v);
    }
    return out;
}

void write_runlog_csv(std::ostream& os, const RunLog& log) {
    os << kRunLogHeader << '\n';
    for (const auto& r : log.rows) os << format_runlog_row(r) << '\n';
}

std::string runlog_csv(const RunLog& log) {
    std::ostringstream os;
    write_runlog_csv(os, log);
    return os.str();
}

void sgd_step(std::vector<nn::LayerParams*> params, double lr, double weight_decay) {
    for (nn::LayerParams* p : params) {
        auto w = p->weight.data();
        auto g = p->grad_weight.data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
        for (std::size_t i = 0; i < p->bias.size(); ++i) p->bias[i] -= lr * p->grad_bias[i];
        if (weight_decay != 0.0) {
            const double shrink = lr * weight_decay;
            for (double& x : w) x -= shrink * x;
            for (double& x : p->bias) x -= shrink * x;
        }
    }
}

RunLog train(const TrainConfig& config, const SyntheticDataset& data, const TrainHooks& hooks) {
    nn::ContrastiveModel model;
    return train(config, data, model, hooks);
}

RunLog train(const TrainConfig& config, const SyntheticDataset& data, nn::ContrastiveModel& model,
             const TrainHooks& hooks) {
    config.validate();
    const std::size_t n = data.points.rows();
    const auto n_test = static_cast<std::size_t>(std::llround(config.holdout_fraction * static_cast<double>(n)));
    if (n_test < 1 || n - n_test < config.batch_size)
        throw Error(Errc::BadParams, "dataset too small for the batch size and holdout split");
    const std::size_t n_train = n - n_test;

    nn::ModelSpec spec;
    spec.input_dim = data.points.cols();
    spec.encoder_hidden = config.encoder_hidden;
    spec.feature_dim = config.feature_dim;
    spec.projector = config.projector;
    spec.objective = config.objective;
    spec.classes = data.class_count;
    model = nn::build_model(spec, mix_seed(config.seed, kInitStream));

    const bool supervised = config.objective == nn::Objective::Supervised;
    const double lambda = config.projector.bottleneck_lambda;
    const double z2_floor = config.projector.output_levels() ? 1.0 : 0.0;

    std::vector<std::size_t> train_rows(n_train), test_rows(n_test);
    std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
    std::iota(test_rows.begin(), test_rows.end(), n_train);
    const std::vector<std::size_t> metric_rows(
        train_rows.begin(),
        train_rows.begin() + static_cast<std::ptrdiff_t>(std::min(config.metric_batch, n_train)));

    const DenseMatrix train_x = gather_rows(data.points, train_rows);
    const DenseMatrix test_x = gather_rows(data.points, test_rows);
    const DenseMatrix metric_x = gather_rows(data.points, metric_rows);
    const std::vector<int> train_y = gather_labels(data.labels, train_rows);
    const std::vector<int> test_y = gather_labels(data.labels, test_rows);

    const AugmentPolicy policy(config.noise_sigma, config.mask_prob,
                               mix_seed(config.seed, kAugmentStream));
    const AugmentPolicy metric_policy(config.noise_sigma, config.mask_prob,
                                      mix_seed(config.seed, kMetricStream));
    const DenseMatrix metric_view_a = augment_batch(data.points, metric_rows, metric_policy, 0);
    const DenseMatrix metric_view_b = augment_batch(data.points, metric_rows, metric_policy, 1);

    auto pair_loss = [&](const DenseMatrix& a, const DenseMatrix& b, double floor) {
        if (config.objective == nn::Objective::Barlow)
            return nn::barlow_loss(a, b, config.barlow_gamma, kBarlowEps);
        return nn::infonce_loss(a, b, config.temperature, floor);
    };

    std::mt19937_64 batch_rng(mix_seed(config.seed, kBatchStream));
    std::vector<std::size_t> order = train_rows;
    std::size_t cursor = order.size();
    std::vector<std::size_t> batch(config.batch_size);

    LinearProbe probe_z1(config.feature_dim, data.class_count);
    LinearProbe probe_z2(model.projector_dim(), data.class_count);

    RunLog log;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        double objective_sum = 0.0, regularizer_sum = 0.0;
        for (std::size_t s = 0; s < config.steps_per_epoch; ++s, ++step) {
            for (std::size_t& b : batch) {
                if (cursor == order.size()) {
                    std::shuffle(order.begin(), order.end(), batch_rng);
                    cursor = 0;
                }
                b = order[cursor++];
            }
            model.zero_grad();
            const DenseMatrix xa = augment_batch(data.points, batch, policy, 2 * step);
            const DenseMatrix xb = augment_batch(data.points, batch, policy, 2 * step + 1);

            nn::Tape enc_a, enc_b, proj_a, proj_b;
            double objective = 0.0;
            nn::RegularizedLoss reg;
            try {
                const DenseMatrix z1a = model.encoder.forward(xa, enc_a);
                const DenseMatrix z1b = model.encoder.forward(xb, enc_b);
                const DenseMatrix z2a = model.projector.forward(z1a, proj_a);
                const DenseMatrix z2b = model.projector.forward(z1b, proj_b);
                if (hooks.on_step) hooks.on_step({step, &proj_a, &proj_b});

                std::vector<DenseMatrix> obj_grads;
                if (supervised) {
                    const auto labels = gather_labels(data.labels, batch);
                    auto head = nn::supervised_head_loss(z2a, labels, model.head);
                    objective = head.value;
                    obj_grads.push_back(std::move(head.grad_features));
                    obj_grads.emplace_back(z2b.rows(), z2b.cols());
                } else {
                    auto pl = pair_loss(z2a, z2b, z2_floor);
                    objective = pl.value;
                    obj_grads.push_back(std::move(pl.grad_a));
                    obj_grads.push_back(std::move(pl.grad_b));
                }
                const nn::ViewFeatures views[2] = {{&z1a, &z2a}, {&z1b, &z2b}};
                reg = nn::bottleneck_regularized_loss(views, objective, obj_grads, lambda, z2_floor);
            } catch (const Error& e) {
                if (e.code() == Errc::NonFinite || e.code() == Errc::ZeroRow)
                    throw DivergedLossError(e.what(), log);
                throw;
            }
            if (!std::isfinite(reg.bundle.total) || !std::isfinite(reg.bundle.regularizer))
                throw DivergedLossError("non-finite loss at step " + std::to_string(step), log);

            DenseMatrix g1a = model.projector.backward(reg.grad_z2[0], proj_a);
            add_into(g1a, reg.grad_z1[0]);
            model.encoder.backward(g1a, enc_a);
            DenseMatrix g1b = model.projector.backward(reg.grad_z2[1], proj_b);
            add_into(g1b, reg.grad_z1[1]);
            model.encoder.backward(g1b, enc_b);

            sgd_step(model.params(supervised), config.learning_rate, config.weight_decay);
            objective_sum += reg.bundle.objective;
            regularizer_sum += reg.bundle.regularizer;
        }

        RunLogRow row;
        row.epoch = epoch;
        const double inv_steps = 1.0 / static_cast<double>(config.steps_per_epoch);
        row.objective_loss = objective_sum * inv_steps;
        row.regularizer_value = regularizer_sum * inv_steps;
        try {
            const DenseMatrix mz1 = model.encoder.infer(metric_x);
            const DenseMatrix mz2 = model.projector.infer(mz1);
            row.i2_z1_z2 = matrix_mi_alpha2(mz1, mz2, {0.0, z2_floor});
            row.h2_z1 = matrix_entropy_alpha2(mz1);
            const DenseMatrix ez1a = model.encoder.infer(metric_view_a);
            const DenseMatrix ez1b = model.encoder.infer(metric_view_b);
            row.encoder_feature_loss = pair_loss(ez1a, ez1b, 0.0).value;

            if (hooks.before_probes) hooks.before_probes(epoch, model);
            const DenseMatrix tz1 = model.encoder.infer(train_x);
            const DenseMatrix vz1 = model.encoder.infer(test_x);
            const ProbeResult p1 = probe_z1.fit(tz1, train_y, vz1, test_y, config.probe_steps,
                                                config.probe_lr);
            const ProbeResult p2 = probe_z2.fit(model.projector.infer(tz1), train_y,
                                                model.projector.infer(vz1), test_y,
                                                config.probe_steps, config.probe_lr);
            if (hooks.after_probes) hooks.after_probes(epoch, model);

            row.probe_acc_z1 = p1.heldout_accuracy;
            row.probe_acc_z2 = p2.heldout_accuracy;
            row.lower_bound_est = estimate_lower_bound(row.encoder_feature_loss, row.i2_z1_z2).value;
            row.upper_bound_est =
                estimate_upper_bound(p2.heldout_cross_entropy, row.i2_z1_z2, row.h2_z1).value;
        } catch (const Error& e) {
            if (e.code() == Errc::NonFinite || e.code() == Errc::ZeroRow)
                throw DivergedLossError(e.what(), log);
            throw;
        }
        if (!row_finite(row))
            throw DivergedLossError("non-finite metric at epoch " + std::to_string(epoch), log);
        log.rows.push_back(row);
    }
    return log;
}

}  // namespace infoproj::harness
