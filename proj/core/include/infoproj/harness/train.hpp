#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "infoproj/harness/data.hpp"
#include "infoproj/nn/layers.hpp"
#include "infoproj/nn/model.hpp"

namespace infoproj::harness {

struct TrainConfig {
    nn::Objective objective = nn::Objective::InfoNce;
    nn::ProjectorSpec projector;
    std::vector<std::size_t> encoder_hidden = {64};
    std::size_t feature_dim = 16;
    std::size_t epochs = 20;
    std::size_t steps_per_epoch = 10;
    std::size_t batch_size = 128;
    double learning_rate = 0.5;
    double weight_decay = 1e-4;
    double temperature = 0.2;
    double barlow_gamma = 5e-3;
    double noise_sigma = 0.5;
    double mask_prob = 0.2;
    std::size_t metric_batch = 256;
    double holdout_fraction = 0.25;
    int probe_steps = 25;
    double probe_lr = 0.5;
    std::uint64_t seed = 0;

    /// Throws BadParams / KOutOfRange.
    void validate() const;
};

struct RunLogRow {
    std::size_t epoch = 0;
    double objective_loss = 0.0;
    double regularizer_value = 0.0;
    double encoder_feature_loss = 0.0;
    double i2_z1_z2 = 0.0;
    double h2_z1 = 0.0;
    double lower_bound_est = 0.0;
    double upper_bound_est = 0.0;
    double probe_acc_z1 = 0.0;
    double probe_acc_z2 = 0.0;
};

struct RunLog {
    std::vector<RunLogRow> rows;
};

inline constexpr const char* kRunLogHeader =
    "epoch,objective_loss,regularizer_value,encoder_feature_loss,i2_z1_z2,h2_z1,"
    "lower_bound_est,upper_bound_est,probe_acc_z1,probe_acc_z2";

/// Values as %.9g, '\n' line endings.
std::string format_runlog_row(const RunLogRow& row);
void write_runlog_csv(std::ostream& os, const RunLog& log);
std::string runlog_csv(const RunLog& log);

/// Projector internals of one optimization step, for structural checks.
struct StepObservation {
    std::size_t step = 0;
    const nn::Tape* projector_tape_a = nullptr;
    const nn::Tape* projector_tape_b = nullptr;
};

using StepObserver = std::function<void(const StepObservation&)>;
/// Called after each epoch's probe updates; hashes or inspects the model.
using EpochObserver = std::function<void(std::size_t epoch, const nn::ContrastiveModel&)>;

struct TrainHooks {
    StepObserver on_step;
    EpochObserver before_probes;
    EpochObserver after_probes;
};

/// Thrown when a loss becomes non-finite; carries the rows logged so far.
class DivergedLossError : public Error {
public:
    DivergedLossError(const std::string& what, RunLog partial)
        : Error(Errc::DivergedLoss, what), partial_(std::move(partial)) {}
    const RunLog& partial() const noexcept { return partial_; }

private:
    RunLog partial_;
};

/// Plain SGD step with decoupled weight decay: w -= lr * g, then w -= lr * wd * w.
void sgd_step(std::vector<nn::LayerParams*> params, double lr, double weight_decay);

/// Trains one model and logs one row per epoch. Deterministic in config.seed.
/// Throws BadParams, DivergedLossError.
RunLog train(const TrainConfig& config, const SyntheticDataset& data, const TrainHooks& hooks = {});

/// Same, also returning the trained model.
RunLog train(const TrainConfig& config, const SyntheticDataset& data, nn::ContrastiveModel& model,
             const TrainHooks& hooks = {});

}  // namespace infoproj::harness
