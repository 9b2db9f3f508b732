#include "infoproj/cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <type_traits>

#include "CLI11.hpp"
#include "infoproj/harness/data.hpp"
#include "infoproj/matrix_info.hpp"

namespace infoproj::cli {

using nlohmann::json;

namespace {

// Strict object reader: absent keys keep their defaults, unknown keys are errors.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail("expected an object");
    }

    template <class T>
        requires(std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
    void read(const char* key, T& dst) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) fail(std::string(key) + " must be a non-negative integer");
            dst = v->get<T>();
        }
    }

    void read(const char* key, int& dst) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) fail(std::string(key) + " must be an integer");
            const auto x = v->get<std::int64_t>();
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
                fail(std::string(key) + " is out of range");
            dst = static_cast<int>(x);
        }
    }

    void read(const char* key, double& dst) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(std::string(key) + " must be a number");
            dst = v->get<double>();
        }
    }

    void read(const char* key, bool& dst) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) fail(std::string(key) + " must be a boolean");
            dst = v->get<bool>();
        }
    }

    void read(const char* key, std::string& dst) {
        if (const json* v = take(key)) {
            if (!v->is_string()) fail(std::string(key) + " must be a string");
            dst = v->get<std::string>();
        }
    }

    void read(const char* key, std::vector<std::size_t>& dst) {
        if (const json* v = take(key)) {
            if (!v->is_array()) fail(std::string(key) + " must be an array");
            dst.clear();
            for (const auto& e : *v) {
                if (!e.is_number_unsigned()) fail(std::string(key) + " entries must be non-negative integers");
                dst.push_back(e.get<std::size_t>());
            }
        }
    }

    const json* take(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail("unknown key '" + it.key() + "'");
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(where_ + ": " + what);
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

json projector_to_json(const nn::ProjectorSpec& p) {
    json j;
    j["type"] = p.variant_name();
    if (const auto* m = std::get_if<nn::MlpProjector>(&p.variant)) {
        j["hidden"] = m->hidden;
        j["out"] = m->out;
    } else if (const auto* f = std::get_if<nn::FsqProjector>(&p.variant)) {
        j["levels"] = f->levels;
        j["hidden"] = f->hidden;
        j["out"] = f->out;
    } else if (const auto* s = std::get_if<nn::TopKSaeProjector>(&p.variant)) {
        j["hidden"] = s->hidden;
        j["k"] = s->k;
    }
    j["bottleneck_lambda"] = p.bottleneck_lambda;
    j["extra_fsq_levels"] = p.extra_fsq_levels ? json(*p.extra_fsq_levels) : json(nullptr);
    j["allow_collapse"] = p.allow_collapse;
    return j;
}

nn::ProjectorSpec projector_from_json(const json& j) {
    ObjectReader r(j, "projector");
    std::string type = "mlp";
    r.read("type", type);
    nn::ProjectorSpec p;
    if (type == "mlp") {
        nn::MlpProjector m;
        r.read("hidden", m.hidden);
        r.read("out", m.out);
        p.variant = m;
    } else if (type == "fsq") {
        nn::FsqProjector f;
        r.read("levels", f.levels);
        r.read("hidden", f.hidden);
        r.read("out", f.out);
        p.variant = f;
    } else if (type == "topk_sae") {
        nn::TopKSaeProjector s;
        r.read("hidden", s.hidden);
        r.read("k", s.k);
        p.variant = s;
    } else {
        r.fail("unknown projector type '" + type + "'");
    }
    r.read("bottleneck_lambda", p.bottleneck_lambda);
    if (const json* v = r.take("extra_fsq_levels"); v && !v->is_null()) {
        if (!v->is_number_integer()) r.fail("extra_fsq_levels must be an integer or null");
        p.extra_fsq_levels = v->get<int>();
    }
    r.read("allow_collapse", p.allow_collapse);
    r.finish();
    return p;
}

std::string format_g(double v, int digits = 9) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Creates the output directory and checks that no artifact would be clobbered.
void prepare_outputs(const std::filesystem::path& dir, std::initializer_list<const char*> files,
                     bool force) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
    if (force) return;
    for (const char* f : files)
        if (std::filesystem::exists(dir / f))
            throw ConfigError((dir / f).string() + " exists; pass --force to overwrite");
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw ConfigError("write failed for " + path.string());
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw CLI::ValidationError("--values", "empty entry");
        const std::string tok = item.substr(b, e - b + 1);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(v))
            throw CLI::ValidationError("--values", "not a number: " + tok);
        values.push_back(v);
    }
    if (values.empty()) throw CLI::ValidationError("--values", "needs at least one value");
    return values;
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
    const auto& t = c.train;
    json j;
    j["objective"] = nn::objective_name(t.objective);
    j["projector"] = projector_to_json(t.projector);
    j["encoder_hidden"] = t.encoder_hidden;
    j["feature_dim"] = t.feature_dim;
    j["epochs"] = t.epochs;
    j["steps_per_epoch"] = t.steps_per_epoch;
    j["batch_size"] = t.batch_size;
    j["learning_rate"] = t.learning_rate;
    j["weight_decay"] = t.weight_decay;
    j["temperature"] = t.temperature;
    j["barlow_gamma"] = t.barlow_gamma;
    j["noise_sigma"] = t.noise_sigma;
    j["mask_prob"] = t.mask_prob;
    j["metric_batch"] = t.metric_batch;
    j["holdout_fraction"] = t.holdout_fraction;
    j["probe_steps"] = t.probe_steps;
    j["probe_lr"] = t.probe_lr;
    j["seed"] = t.seed;
    j["data"] = {{"classes", c.data.classes},
                 {"dim", c.data.dim},
                 {"n", c.data.n},
                 {"spread", c.data.spread},
                 {"seed", c.data.seed}};
    j["sweep"] = {{"replicates", c.replicates}, {"threads", c.threads}};
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    auto& t = c.train;
    ObjectReader r(j, "config");
    std::string objective = nn::objective_name(t.objective);
    r.read("objective", objective);
    try {
        t.objective = nn::parse_objective(objective);
    } catch (const Error& e) {
        r.fail(e.what());
    }
    if (const json* p = r.take("projector")) t.projector = projector_from_json(*p);
    r.read("encoder_hidden", t.encoder_hidden);
    r.read("feature_dim", t.feature_dim);
    r.read("epochs", t.epochs);
    r.read("steps_per_epoch", t.steps_per_epoch);
    r.read("batch_size", t.batch_size);
    r.read("learning_rate", t.learning_rate);
    r.read("weight_decay", t.weight_decay);
    r.read("temperature", t.temperature);
    r.read("barlow_gamma", t.barlow_gamma);
    r.read("noise_sigma", t.noise_sigma);
    r.read("mask_prob", t.mask_prob);
    r.read("metric_batch", t.metric_batch);
    r.read("holdout_fraction", t.holdout_fraction);
    r.read("probe_steps", t.probe_steps);
    r.read("probe_lr", t.probe_lr);
    r.read("seed", t.seed);
    if (const json* d = r.take("data")) {
        ObjectReader dr(*d, "data");
        dr.read("classes", c.data.classes);
        dr.read("dim", c.data.dim);
        dr.read("n", c.data.n);
        dr.read("spread", c.data.spread);
        dr.read("seed", c.data.seed);
        dr.finish();
    }
    if (const json* s = r.take("sweep")) {
        ObjectReader sr(*s, "sweep");
        sr.read("replicates", c.replicates);
        sr.read("threads", c.threads);
        sr.finish();
    }
    r.finish();
    if (c.replicates == 0) throw ConfigError("sweep.replicates must be >= 1");
    try {
        t.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    const std::string text = slurp(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

AlphabetSizes draw_sizes(std::size_t max_alphabet, std::uint64_t seed, std::size_t chain_id) {
    std::mt19937_64 rng(harness::mix_seed(seed, chain_id));
    std::uniform_int_distribution<std::size_t> pick(std::min<std::size_t>(2, max_alphabet), max_alphabet);
    AlphabetSizes sizes{};
    for (auto& s : sizes) s = pick(rng);
    return sizes;
}

VerifySummary verify_bounds(const VerifyOptions& o) {
    if (o.chains == 0) throw ConfigError("--chains must be >= 1");
    if (o.max_alphabet < 1 || o.max_alphabet > 8) throw ConfigError("--max-alphabet must lie in [1, 8]");
    VerifySummary s;
    s.chains = o.chains;
    s.min_slack.fill(std::numeric_limits<double>::infinity());
    s.report_csv = std::string(kBoundsHeader) + '\n';
    for (std::size_t id = 0; id < o.chains; ++id) {
        const AlphabetSizes sizes = draw_sizes(o.max_alphabet, o.seed, id);
        const JointChain chain = sample_chain(sizes, harness::mix_seed(harness::mix_seed(o.seed, id), 1));
        const BoundReport reports[3] = {check_theorem1(chain), check_theorem2(chain), check_theorem3(chain)};
        for (std::size_t t = 0; t < 3; ++t) {
            const auto& r = reports[t];
            s.min_slack[t] = std::min(s.min_slack[t], r.slack);
            if (!r.passes()) ++s.bound_violations;
            s.report_csv += std::to_string(id) + ',' + r.theorem_id + ',' + format_g(r.lhs, 17) + ',' +
                            format_g(r.rhs, 17) + ',' + format_g(r.slack, 17) + '\n';
        }
        const LemmaReport lemma = check_lemmas(chain);
        s.max_conditional_mi = std::max({s.max_conditional_mi, std::abs(lemma.i_y_r_given_z1),
                                         std::abs(lemma.i_y_z2_given_z1)});
        if (!lemma.passes()) ++s.lemma_failures;
    }
    return s;
}

DenseMatrix parse_feature_csv(const std::string& text) {
    std::vector<double> values;
    std::size_t rows = 0, cols = 0;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t count = 0;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            while (end && (*end == ' ' || *end == '\t')) ++end;
            if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
                throw ConfigError("line " + std::to_string(line_no) + ": bad value '" + cell + "'");
            values.push_back(v);
            ++count;
        }
        if (line.back() == ',') throw ConfigError("line " + std::to_string(line_no) + ": trailing comma");
        if (rows == 0) cols = count;
        else if (count != cols)
            throw ConfigError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                              " columns, got " + std::to_string(count));
        ++rows;
    }
    if (rows == 0) throw ConfigError("feature file has no rows");
    return DenseMatrix(rows, cols, std::move(values));
}

DenseMatrix read_feature_csv(const std::filesystem::path& path) {
    try {
        return parse_feature_csv(slurp(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

EstimateResult estimate(const DenseMatrix& z1, const DenseMatrix& z2, double alpha) {
    if (z1.rows() != z2.rows())
        throw Error(Errc::DimMismatch, "feature files have different row counts");
    const EntropyOrder order(alpha);
    const GramKernel a = feature_kernel(z1);
    const GramKernel b = feature_kernel(z2);
    return {matrix_entropy(a, order), matrix_entropy(b, order), matrix_mi(a, b, order)};
}

json correlations_json(const std::vector<harness::SweepRow>& rows) {
    json j;
    j["runs"] = rows.size();
    if (rows.size() < 3) {
        j["lower_bound_vs_acc"] = nullptr;
        j["upper_bound_vs_acc"] = nullptr;
        j["i2_vs_acc"] = nullptr;
        return j;
    }
    std::vector<harness::RunLogRow> finals;
    for (const auto& r : rows) finals.push_back(r.final_row);
    const auto rep = harness::correlation_report(finals);
    j["lower_bound_vs_acc"] = nullable(rep.lower_bound_vs_acc);
    j["upper_bound_vs_acc"] = nullable(rep.upper_bound_vs_acc);
    j["i2_vs_acc"] = nullable(rep.i2_vs_acc);
    return j;
}

namespace {

int cmd_verify(const VerifyOptions& o, const std::filesystem::path& out_dir, bool force,
               std::ostream& out, std::ostream& err) {
    const VerifySummary s = verify_bounds(o);
    prepare_outputs(out_dir, {"bounds_report.csv"}, force);
    write_file(out_dir / "bounds_report.csv", s.report_csv);
    for (std::size_t t = 0; t < 3; ++t)
        out << "theorem" << t + 1 << " min_slack=" << format_g(s.min_slack[t], 6) << '\n';
    out << "lemmas max_conditional_mi=" << format_g(s.max_conditional_mi, 6) << '\n';
    out << "chains=" << s.chains << " violations=" << s.bound_violations
        << " lemma_failures=" << s.lemma_failures << '\n';
    if (!s.passed()) {
        err << "bound check failed\n";
        return kExitViolation;
    }
    return kExitOk;
}

int cmd_estimate(const std::filesystem::path& f1, const std::filesystem::path& f2, double alpha,
                 std::ostream& out) {
    const DenseMatrix z1 = read_feature_csv(f1);
    const DenseMatrix z2 = read_feature_csv(f2);
    if (z1.rows() != z2.rows()) throw ConfigError("feature files have different row counts");
    const EstimateResult r = estimate(z1, z2, alpha);
    out << "H_alpha(Z1) = " << format_g(r.h_z1, 17) << '\n';
    out << "H_alpha(Z2) = " << format_g(r.h_z2, 17) << '\n';
    out << "I_alpha(Z1;Z2) = " << format_g(r.mi, 17) << '\n';
    return kExitOk;
}

int cmd_train(ExperimentConfig cfg, const std::filesystem::path& out_dir, bool force, bool verbose,
              std::ostream& out, std::ostream& err) {
    prepare_outputs(out_dir, {"runlog.csv", "run_meta.json"}, force);
    const auto data = harness::gen_synthetic(cfg.data);
    write_file(out_dir / "run_meta.json", config_to_json(cfg).dump(2) + '\n');
    harness::RunLog log;
    int code = kExitOk;
    try {
        log = harness::train(cfg.train, data);
    } catch (const harness::DivergedLossError& e) {
        log = e.partial();
        err << e.what() << '\n';
        code = kExitDiverged;
    }
    write_file(out_dir / "runlog.csv", harness::runlog_csv(log));
    if (verbose)
        for (const auto& row : log.rows) out << harness::format_runlog_row(row) << '\n';
    if (!log.rows.empty()) {
        const auto& last = log.rows.back();
        out << "epochs=" << log.rows.size() << " probe_acc_z1=" << format_g(last.probe_acc_z1, 6)
            << " i2_z1_z2=" << format_g(last.i2_z1_z2, 6) << '\n';
    }
    return code;
}

int cmd_sweep(const ExperimentConfig& cfg, harness::SweepAxis axis, const std::vector<double>& values,
              const std::filesystem::path& out_dir, bool force, std::ostream& out) {
    prepare_outputs(out_dir, {"sweep.csv", "correlations.json", "run_meta.json"}, force);
    const auto data = harness::gen_synthetic(cfg.data);
    // Validate every value up front so a bad one fails before any training.
    for (double v : values) harness::apply_axis(cfg.train, axis, v);
    write_file(out_dir / "run_meta.json", config_to_json(cfg).dump(2) + '\n');
    harness::SweepOptions opts;
    opts.replicates = cfg.replicates;
    opts.threads = cfg.threads;
    const auto rows = harness::sweep(cfg.train, data, axis, values, opts);
    write_file(out_dir / "sweep.csv", harness::sweep_csv(rows));
    json corr = correlations_json(rows);
    corr["axis"] = harness::axis_name(axis);
    write_file(out_dir / "correlations.json", corr.dump(2) + '\n');
    out << "runs=" << rows.size() << " axis=" << harness::axis_name(axis) << '\n';
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Information-theoretic analysis of contrastive projection heads"};
    app.require_subcommand(1);

    std::string out_dir = ".";
    bool force = false;
    std::optional<std::uint64_t> seed;
    bool verbose = false;

    VerifyOptions vo;
    auto* verify = app.add_subcommand("verify-bounds", "Check the bounds exactly on random discrete chains");
    verify->add_option("--chains", vo.chains, "Number of random chains")->check(CLI::PositiveNumber);
    verify->add_option("--max-alphabet", vo.max_alphabet, "Largest alphabet size")->check(CLI::Range(1, 8));

    std::string z1_file, z2_file;
    double alpha = 2.0;
    auto* est = app.add_subcommand("estimate", "Matrix-based entropy and MI of two feature files");
    est->add_option("z1", z1_file, "Z1 features (CSV, no header)")->required();
    est->add_option("z2", z2_file, "Z2 features (CSV, no header)")->required();
    est->add_option("--alpha", alpha, "Entropy order")->check(CLI::PositiveNumber);

    std::string config_file;
    auto* tr = app.add_subcommand("train", "Train one model and log per-epoch metrics");
    tr->add_option("config", config_file, "JSON config")->required();

    std::string sweep_config, axis_text, values_text;
    std::optional<std::size_t> replicates, threads;
    auto* sw = app.add_subcommand("sweep", "Train over a list of values of one axis");
    sw->add_option("config", sweep_config, "JSON config")->required();
    sw->add_option("--axis", axis_text, "lambda | fsq_levels | topk_k")
        ->required()
        ->check(CLI::IsMember({"lambda", "fsq_levels", "topk_k"}));
    sw->add_option("--values", values_text, "Comma-separated values")->required();
    sw->add_option("--replicates", replicates, "Seeds per value")->check(CLI::PositiveNumber);
    sw->add_option("--threads", threads, "Worker threads (0 = all cores)");

    for (auto* sub : {verify, tr, sw}) {
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_flag("--force", force, "Overwrite existing artifacts");
        sub->add_option("--seed", seed, "Master seed");
    }
    tr->add_flag("-v,--verbose", verbose, "Print every log row");

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    std::vector<double> values;
    try {
        app.parse(args);
        if (*sw) values = parse_values(values_text);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*verify) {
            if (seed) vo.seed = *seed;
            return cmd_verify(vo, out_dir, force, out, err);
        }
        if (*est) return cmd_estimate(z1_file, z2_file, alpha, out);
        if (*tr) {
            ExperimentConfig cfg = load_config(config_file);
            if (seed) cfg.train.seed = *seed;
            return cmd_train(cfg, out_dir, force, verbose, out, err);
        }
        ExperimentConfig cfg = load_config(sweep_config);
        if (seed) cfg.train.seed = *seed;
        if (replicates) cfg.replicates = *replicates;
        if (threads) cfg.threads = *threads;
        return cmd_sweep(cfg, harness::parse_axis(axis_text), values, out_dir, force, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIoOrConfig;
    } catch (const harness::DivergedLossError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIoOrConfig;
    }
}

}  // namespace infoproj::cli
