#include "infoproj/nn/model.hpp"

#include <cmath>
#include <random>

namespace infoproj::nn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_levels(int levels, bool allow_collapse) {
    if (levels < 1 || (levels == 1 && !allow_collapse))
        throw Error(Errc::BadParams, "FSQ levels must be >= 2 (1 requires allow_collapse)");
}

}  // namespace

int fsq_effective_levels(int levels) { return 2 * (levels / 2) + 1; }

void ProjectorSpec::validate() const {
    if (!(bottleneck_lambda >= 0.0) || !std::isfinite(bottleneck_lambda))
        throw Error(Errc::BadParams, "bottleneck lambda must be finite and >= 0");
    std::visit(overloaded{
                   [](const MlpProjector& p) {
                       if (p.hidden == 0 || p.out == 0)
                           throw Error(Errc::BadParams, "MLP projector widths must be positive");
                   },
                   [&](const FsqProjector& p) {
                       if (p.hidden == 0 || p.out == 0)
                           throw Error(Errc::BadParams, "FSQ projector widths must be positive");
                       check_levels(p.levels, allow_collapse);
                   },
                   [](const TopKSaeProjector& p) {
                       if (p.hidden == 0) throw Error(Errc::BadParams, "SAE hidden must be positive");
                       if (p.k < 1 || p.k > p.hidden)
                           throw Error(Errc::KOutOfRange, "SAE k must lie in [1, hidden]");
                   },
               },
               variant);
    if (extra_fsq_levels) {
        if (std::holds_alternative<FsqProjector>(variant))
            throw Error(Errc::BadParams, "FSQ projector already quantizes its output");
        check_levels(*extra_fsq_levels, allow_collapse);
    }
}

std::optional<int> ProjectorSpec::output_levels() const {
    if (const auto* f = std::get_if<FsqProjector>(&variant)) return f->levels;
    return extra_fsq_levels;
}

std::string ProjectorSpec::variant_name() const {
    return std::visit(overloaded{[](const MlpProjector&) { return std::string("mlp"); },
                                 [](const FsqProjector&) { return std::string("fsq"); },
                                 [](const TopKSaeProjector&) { return std::string("topk_sae"); }},
                      variant);
}

std::string objective_name(Objective o) {
    switch (o) {
        case Objective::InfoNce: return "infonce";
        case Objective::Barlow: return "barlow";
        case Objective::Supervised: return "supervised";
    }
    return "infonce";
}

Objective parse_objective(const std::string& name) {
    if (name == "infonce") return Objective::InfoNce;
    if (name == "barlow") return Objective::Barlow;
    if (name == "supervised") return Objective::Supervised;
    throw Error(Errc::BadParams, "unknown objective '" + name + "'");
}

std::vector<LayerParams*> ContrastiveModel::params(bool include_head) {
    std::vector<LayerParams*> out = encoder.params();
    for (LayerParams* p : projector.params()) out.push_back(p);
    if (include_head && !head.weight.empty()) out.push_back(&head);
    return out;
}

void ContrastiveModel::zero_grad() {
    for (LayerParams* p : params(true)) p->zero_grad();
}

std::size_t ContrastiveModel::projector_dim() const {
    for (std::size_t i = projector.size(); i-- > 0;) {
        const Layer& l = projector.layer(i);
        if (l.kind() == LayerKind::Linear)
            return static_cast<const Linear&>(l).layer_params().out_dim();
        if (l.kind() == LayerKind::SparseAutoencoder)
            return static_cast<const SparseAutoencoder&>(l).decoder().out_dim();
    }
    return 0;
}

ContrastiveModel build_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.projector.validate();
    if (spec.input_dim == 0 || spec.feature_dim == 0)
        throw Error(Errc::BadParams, "model widths must be positive");
    std::mt19937_64 rng(seed);
    ContrastiveModel m;

    std::size_t width = spec.input_dim;
    for (std::size_t h : spec.encoder_hidden) {
        if (h == 0) throw Error(Errc::BadParams, "encoder widths must be positive");
        m.encoder.add(std::make_unique<Linear>(init_linear(width, h, rng)));
        m.encoder.add(std::make_unique<Relu>());
        width = h;
    }
    m.encoder.add(std::make_unique<Linear>(init_linear(width, spec.feature_dim, rng)));

    const std::size_t f = spec.feature_dim;
    std::visit(overloaded{
                   [&](const MlpProjector& p) {
                       m.projector.add(std::make_unique<Linear>(init_linear(f, p.hidden, rng)));
                       m.projector.add(std::make_unique<Relu>());
                       m.projector.add(std::make_unique<Linear>(init_linear(p.hidden, p.out, rng)));
                   },
                   [&](const FsqProjector& p) {
                       m.projector.add(std::make_unique<Linear>(init_linear(f, p.hidden, rng)));
                       m.projector.add(std::make_unique<Relu>());
                       m.projector.add(std::make_unique<Linear>(init_linear(p.hidden, p.out, rng)));
                       m.projector.add(std::make_unique<FsqQuantizer>(p.levels));
                   },
                   [&](const TopKSaeProjector& p) {
                       std::size_t sae_in = f;
                       if (spec.objective == Objective::Barlow) {
                           // Linear-BN-ReLU half projector ahead of the autoencoder.
                           m.projector.add(std::make_unique<Linear>(init_linear(f, f, rng)));
                           m.projector.add(std::make_unique<BatchNorm>(f));
                           m.projector.add(std::make_unique<Relu>());
                       }
                       LayerParams enc = init_linear(sae_in, p.hidden, rng, false);
                       LayerParams dec(enc.weight.transposed(), std::vector<double>(sae_in, 0.0));
                       m.projector.add(
                           std::make_unique<SparseAutoencoder>(std::move(enc), std::move(dec), p.k));
                   },
               },
               spec.projector.variant);
    if (spec.projector.extra_fsq_levels)
        m.projector.add(std::make_unique<FsqQuantizer>(*spec.projector.extra_fsq_levels));

    if (spec.objective == Objective::Supervised) {
        if (spec.classes < 2) throw Error(Errc::BadParams, "supervised head needs >= 2 classes");
        m.head = init_linear(m.projector_dim(), spec.classes, rng);
    }
    return m;
}

}  // namespace infoproj::nn
