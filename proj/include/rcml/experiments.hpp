#pragma once

#include <span>
#include <string>
#include <vector>

#include "rcml/dataio.hpp"
#include "rcml/evalsuite.hpp"
#include "rcml/trainer.hpp"

namespace rcml {

enum class AblationSetting { full, no_inter_edge, no_intra_loss, no_edge_description, frozen_encoders };

const std::vector<AblationSetting>& all_ablation_settings();
std::string to_string(AblationSetting setting);
AblationSetting parse_ablation_setting(const std::string& text);

/// `base` with exactly one component switched off.
TrainConfig apply_ablation(TrainConfig base, AblationSetting setting);

/// beta = 1 hard pooling, self pairs only, cross-modal terms only.
TrainConfig clip_baseline(TrainConfig base);

struct RunResult {
    FitResult fit;
    MetricsReport metrics;
};

/// fit on the split's training edges, then evaluate on its test edges.
RunResult train_and_evaluate(const Dataset& dataset, const DatasetSplit& split, const TrainConfig& config,
                             EvalOptions options, const std::string& tag);

RunResult ablation_run(const Dataset& dataset, const DatasetSplit& split, const TrainConfig& base,
                       AblationSetting setting, const EvalOptions& options);

struct BetaRow {
    double beta = 0.0;
    BetaOneMode beta_one_mode = BetaOneMode::soft;
    RunResult run;
};

/// One train and eval per beta, everything else fixed.
std::vector<BetaRow> beta_sweep(const Dataset& dataset, const DatasetSplit& split, const TrainConfig& config,
                                std::span<const double> betas, const EvalOptions& options);

}  // namespace rcml
