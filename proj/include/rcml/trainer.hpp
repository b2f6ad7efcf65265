#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rcml/dataio.hpp"
#include "rcml/model.hpp"
#include "rcml/objective.hpp"
#include "rcml/optimizer.hpp"

namespace rcml {

enum class Schedule { cosine, constant };

std::string to_string(Schedule schedule);
Schedule parse_schedule(const std::string& text);

struct AblationFlags {
    bool no_inter_edges = false;
    bool no_intra_loss = false;
    bool no_edge_description = false;
    bool freeze_encoders = false;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    double learning_rate = 2e-3;
    double weight_decay = 0.01;
    double tau = 0.1;
    double lambda_intra = 0.5;
    double beta = 0.6;
    BetaOneMode beta_one_mode = BetaOneMode::soft;
    bool cross_modal_only = false;
    bool literal_denominator = false;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    std::uint64_t seed = 42;
    Schedule schedule = Schedule::cosine;
    double grad_clip = 1.0;               // global norm; 0 disables
    double validation_fraction = 0.1;     // carved from the training edges
    std::size_t negative_cap = 0;         // 0 keeps every eligible batch member
    AblationFlags ablation;
    EncoderDims dims;
    double init_std = 0.05;
    std::size_t workers = 1;

    void validate() const;
    LossConfig loss() const;
    ModelConfig model() const;
    /// One `key = value` line per field, in a fixed order.
    std::string canonical() const;
    std::string hash() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_hit5 = 0.0;
    double learning_rate = 0.0;  // at the last step of the epoch
    std::size_t steps = 0;
};

struct TrainReport {
    double initial_loss = 0.0;  // monitor batches, initial parameters
    double final_loss = 0.0;    // monitor batches, returned parameters
    std::vector<EpochRecord> epochs;
    std::vector<double> lr_trace;
    std::size_t best_epoch = 0;
    std::size_t stopping_epoch = 0;
    double best_validation_hit5 = 0.0;
    std::size_t total_steps = 0;
    std::size_t inter_pair_count = 0;
    std::size_t train_edges = 0;
    std::size_t validation_edges = 0;
    bool aborted = false;
    std::string abort_reason;
    double wall_seconds = 0.0;

    /// Field-by-field equality of everything except wall time.
    bool same_run(const TrainReport& other) const;
    std::string to_json() const;  // omits wall_seconds so reruns serialize identically
};

struct FitResult {
    ModelParams params;
    TrainReport report;
};

/// Trains on `train_edges` (after carving a validation slice from them),
/// early-stopping on validation Hit@5 (AVG). Returns the best-validation
/// parameters. On a non-finite loss training stops, the report is marked
/// aborted and the last good parameters are returned.
FitResult fit(const Dataset& dataset, std::span<const RelationEdge> train_edges, const TrainConfig& config);

/// Copies of `edges` with every relation text replaced by the generic one.
std::vector<RelationEdge> strip_descriptions(std::span<const RelationEdge> edges);

}  // namespace rcml
