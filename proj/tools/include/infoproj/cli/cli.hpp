#pragma once

// Command-line front end: configuration files, the experiment subcommands and
// their artifacts. Everything here is callable in-process for tests.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "infoproj/exact_info.hpp"
#include "infoproj/harness/sweep.hpp"
#include "infoproj/harness/train.hpp"
#include "json.hpp"

namespace infoproj::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitIoOrConfig = 1,
    kExitViolation = 2,
    kExitDiverged = 3,
    kExitUsage = 64,
};

/// Malformed or inconsistent configuration, unreadable inputs, refused overwrites.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a train or sweep run depends on.
struct ExperimentConfig {
    harness::TrainConfig train;
    harness::DataSpec data;
    std::size_t replicates = 1;
    /// 0 selects the hardware concurrency.
    std::size_t threads = 0;
};

/// Fully resolved form; every field is written, defaults included.
nlohmann::json config_to_json(const ExperimentConfig& config);
/// Missing fields take their defaults; unknown keys and ill-typed values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct VerifyOptions {
    std::size_t chains = 1;
    std::size_t max_alphabet = 6;
    std::uint64_t seed = 0;
};

struct VerifySummary {
    std::size_t chains = 0;
    /// Per theorem 1..3.
    std::array<double, 3> min_slack{};
    std::size_t bound_violations = 0;
    std::size_t lemma_failures = 0;
    double max_conditional_mi = 0.0;  // max |I(Y;R|Z1)|, |I(Y;Z2|Z1)|
    std::string report_csv;

    bool passed() const { return bound_violations == 0 && lemma_failures == 0; }
};

/// Alphabet sizes of chain `chain_id`: each drawn uniformly from [min(2, max_alphabet), max_alphabet].
AlphabetSizes draw_sizes(std::size_t max_alphabet, std::uint64_t seed, std::size_t chain_id);
/// Throws ConfigError when max_alphabet is outside [1, 8] or chains is 0.
VerifySummary verify_bounds(const VerifyOptions& options);

inline constexpr const char* kBoundsHeader = "chain_id,theorem,lhs,rhs,slack";

/// Header-less CSV, one sample per line. Throws ConfigError on parse or shape errors.
DenseMatrix read_feature_csv(const std::filesystem::path& path);
DenseMatrix parse_feature_csv(const std::string& text);

struct EstimateResult {
    double h_z1 = 0.0;
    double h_z2 = 0.0;
    double mi = 0.0;
};

EstimateResult estimate(const DenseMatrix& z1, const DenseMatrix& z2, double alpha);

/// Correlation summary; null entries when fewer than 3 runs or a constant column.
nlohmann::json correlations_json(const std::vector<harness::SweepRow>& rows);

/// Parses arguments and runs one subcommand. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace infoproj::cli
