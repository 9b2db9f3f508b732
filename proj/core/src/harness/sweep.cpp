#include "infoproj/harness/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace infoproj::harness {

std::string axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Lambda: return "lambda";
        case SweepAxis::FsqLevels: return "fsq_levels";
        case SweepAxis::TopkK: return "topk_k";
    }
    return "lambda";
}

SweepAxis parse_axis(const std::string& name) {
    if (name == "lambda") return SweepAxis::Lambda;
    if (name == "fsq_levels") return SweepAxis::FsqLevels;
    if (name == "topk_k") return SweepAxis::TopkK;
    throw Error(Errc::BadParams, "unknown sweep axis '" + name + "'");
}

namespace {

int as_count(double value, const char* what) {
    if (!(value >= 1.0) || value != std::floor(value) || value > 1e9)
        throw Error(Errc::BadParams, std::string(what) + " must be a positive integer");
    return static_cast<int>(value);
}

}  // namespace

TrainConfig apply_axis(const TrainConfig& base, SweepAxis axis, double value) {
    TrainConfig cfg = base;
    switch (axis) {
        case SweepAxis::Lambda:
            cfg.projector.bottleneck_lambda = value;
            break;
        case SweepAxis::FsqLevels: {
            const int levels = as_count(value, "fsq_levels");
            if (auto* f = std::get_if<nn::FsqProjector>(&cfg.projector.variant))
                f->levels = levels;
            else
                cfg.projector.extra_fsq_levels = levels;
            break;
        }
        case SweepAxis::TopkK: {
            auto* sae = std::get_if<nn::TopKSaeProjector>(&cfg.projector.variant);
            if (!sae) throw Error(Errc::BadParams, "topk_k sweep needs a topk_sae projector");
            sae->k = static_cast<std::size_t>(as_count(value, "topk_k"));
            break;
        }
    }
    cfg.validate();
    return cfg;
}

std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t replicate) {
    return replicate == 0 ? master_seed : mix_seed(master_seed, 1000 + replicate);
}

std::vector<SweepRow> sweep(const TrainConfig& base, const SyntheticDataset& data, SweepAxis axis,
                            std::span<const double> values, const SweepOptions& options) {
    if (values.empty()) throw Error(Errc::BadParams, "sweep needs at least one value");
    if (base.epochs == 0) throw Error(Errc::BadParams, "sweep needs at least one epoch");
    const std::size_t replicates = std::max<std::size_t>(options.replicates, 1);

    std::vector<double> sorted(values.begin(), values.end());
    std::stable_sort(sorted.begin(), sorted.end());

    std::vector<SweepRow> table(sorted.size() * replicates);
    std::vector<TrainConfig> configs(table.size());
    for (std::size_t v = 0; v < sorted.size(); ++v)
        for (std::size_t r = 0; r < replicates; ++r) {
            const std::size_t slot = v * replicates + r;
            table[slot].axis_value = sorted[v];
            table[slot].replicate = r;
            table[slot].seed = replicate_seed(base.seed, r);
            configs[slot] = apply_axis(base, axis, sorted[v]);
            configs[slot].seed = table[slot].seed;
        }

    std::size_t threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = std::clamp<std::size_t>(threads, 1, table.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= table.size()) return;
            const std::size_t slot = options.reverse_dispatch ? table.size() - 1 - k : k;
            try {
                const RunLog log = train(configs[slot], data);
                table[slot].final_row = log.rows.back();
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return table;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = std::string(kSweepHeader) + '\n';
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.9g", r.axis_value);
        out += buf;
        out += ',' + std::to_string(r.replicate) + ',' + std::to_string(r.seed) + ',';
        out += format_runlog_row(r.final_row);
        out += '\n';
    }
    return out;
}

namespace {

std::vector<double> midranks(std::span<const double> x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(Errc::DimMismatch, "spearman inputs differ in length");
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

CorrelationReport correlation_report(std::span<const RunLogRow> runs) {
    if (runs.size() < 3) throw Error(Errc::TooFewRuns, "correlation needs at least 3 runs");
    std::vector<double> acc, lower, upper, i2;
    for (const auto& r : runs) {
        acc.push_back(r.probe_acc_z1);
        lower.push_back(r.lower_bound_est);
        upper.push_back(r.upper_bound_est);
        i2.push_back(r.i2_z1_z2);
    }
    return {runs.size(), spearman(lower, acc), spearman(upper, acc), spearman(i2, acc)};
}

}  // namespace infoproj::harness
