#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infoproj/harness/train.hpp"

namespace infoproj::harness {

enum class SweepAxis { Lambda, FsqLevels, TopkK };

std::string axis_name(SweepAxis axis);
/// Throws BadParams for names other than lambda, fsq_levels, topk_k.
SweepAxis parse_axis(const std::string& name);

/// Copy of `base` with the axis set to `value`. fsq_levels on a non-FSQ
/// projector sets the extra output quantizer. Throws BadParams when the value
/// does not fit the axis (non-integer levels, topk_k without an SAE projector).
TrainConfig apply_axis(const TrainConfig& base, SweepAxis axis, double value);

/// Seed of replicate r: the master seed itself for r = 0, a mixed sub-seed otherwise.
/// Independent of the axis value so every value sees the same initializations.
std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t replicate);

struct SweepRow {
    double axis_value = 0.0;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    RunLogRow final_row;
};

struct SweepOptions {
    std::size_t replicates = 1;
    /// 0 selects std::thread::hardware_concurrency().
    std::size_t threads = 0;
    /// Reverses the job dispatch order; the table is unaffected.
    bool reverse_dispatch = false;
};

/// One full train per (value, replicate); rows ordered by ascending value, then
/// replicate, regardless of completion order. Throws BadParams (empty values or
/// zero epochs) and propagates training errors.
std::vector<SweepRow> sweep(const TrainConfig& base, const SyntheticDataset& data, SweepAxis axis,
                            std::span<const double> values, const SweepOptions& options = {});

inline constexpr const char* kSweepHeader =
    "axis_value,replicate,seed,epoch,objective_loss,regularizer_value,encoder_feature_loss,"
    "i2_z1_z2,h2_z1,lower_bound_est,upper_bound_est,probe_acc_z1,probe_acc_z2";

std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Spearman rank correlation with midranks for ties. NaN if either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
    std::size_t runs = 0;
    double lower_bound_vs_acc = 0.0;
    double upper_bound_vs_acc = 0.0;
    double i2_vs_acc = 0.0;
};

/// Correlations against probe_acc_z1. Throws TooFewRuns for fewer than 3 rows.
CorrelationReport correlation_report(std::span<const RunLogRow> runs);

}  // namespace infoproj::harness
