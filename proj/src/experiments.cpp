#include "rcml/experiments.hpp"

#include <sstream>

#include "rcml/errors.hpp"

namespace rcml {

const std::vector<AblationSetting>& all_ablation_settings() {
    static const std::vector<AblationSetting> settings{AblationSetting::full, AblationSetting::no_inter_edge,
                                                       AblationSetting::no_intra_loss,
                                                       AblationSetting::no_edge_description,
                                                       AblationSetting::frozen_encoders};
    return settings;
}

std::string to_string(AblationSetting setting) {
    switch (setting) {
        case AblationSetting::full: return "full";
        case AblationSetting::no_inter_edge: return "no_inter_edge";
        case AblationSetting::no_intra_loss: return "no_intra_loss";
        case AblationSetting::no_edge_description: return "no_edge_description";
        case AblationSetting::frozen_encoders: return "frozen_encoders";
    }
    return "?";
}

AblationSetting parse_ablation_setting(const std::string& text) {
    for (AblationSetting s : all_ablation_settings()) {
        if (to_string(s) == text) return s;
    }
    throw ConfigError("unknown ablation setting '" + text + "'");
}

TrainConfig apply_ablation(TrainConfig base, AblationSetting setting) {
    switch (setting) {
        case AblationSetting::full: break;
        case AblationSetting::no_inter_edge: base.ablation.no_inter_edges = true; break;
        case AblationSetting::no_intra_loss: base.ablation.no_intra_loss = true; break;
        case AblationSetting::no_edge_description: base.ablation.no_edge_description = true; break;
        case AblationSetting::frozen_encoders: base.ablation.freeze_encoders = true; break;
    }
    return base;
}

TrainConfig clip_baseline(TrainConfig base) {
    base.beta = 1.0;
    base.beta_one_mode = BetaOneMode::hard;
    base.cross_modal_only = true;
    base.ablation.no_inter_edges = true;
    return base;
}

RunResult train_and_evaluate(const Dataset& dataset, const DatasetSplit& split, const TrainConfig& config,
                             EvalOptions options, const std::string& tag) {
    RunResult out{fit(dataset, split.train, config), {}};
    if (out.fit.report.aborted) throw NumericError("training aborted: " + out.fit.report.abort_reason);
    options.generic_relation_text = config.ablation.no_edge_description;
    out.metrics = evaluate(out.fit.params, dataset, split.test, options);
    out.metrics.tag = tag;
    out.metrics.config_hash = config.hash();
    out.metrics.inter_pair_count = out.fit.report.inter_pair_count;
    return out;
}

RunResult ablation_run(const Dataset& dataset, const DatasetSplit& split, const TrainConfig& base,
                       AblationSetting setting, const EvalOptions& options) {
    return train_and_evaluate(dataset, split, apply_ablation(base, setting), options, to_string(setting));
}

std::vector<BetaRow> beta_sweep(const Dataset& dataset, const DatasetSplit& split, const TrainConfig& config,
                                std::span<const double> betas, const EvalOptions& options) {
    std::vector<BetaRow> rows;
    for (double beta : betas) {
        if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta values must lie in [0, 1]");
        TrainConfig c = config;
        c.beta = beta;
        std::ostringstream tag;
        tag << "beta=" << beta;
        if (beta == 1.0) tag << '-' << to_string(c.beta_one_mode);
        rows.push_back(BetaRow{beta, c.beta_one_mode, train_and_evaluate(dataset, split, c, options, tag.str())});
    }
    return rows;
}

}  // namespace rcml
