#include "rcml/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "rcml/errors.hpp"
#include "rcml/evalsuite.hpp"
#include "rcml/hashing.hpp"

namespace rcml {

namespace {

constexpr std::size_t kMonitorBatches = 16;

double batch_loss(const ModelParams& params, const PairBatch& batch, const SampleIndex& index, const LossConfig& loss) {
    Tape::Scope none(nullptr);
    return total_loss(batch_features(params, batch, index), loss).total.item();
}

double mean_loss(const ModelParams& params, std::span<const PairBatch> batches, const SampleIndex& index,
                 const LossConfig& loss) {
    double s = 0.0;
    for (const auto& b : batches) s += batch_loss(params, b, index, loss);
    return s / static_cast<double>(batches.size());
}

}  // namespace

std::string to_string(Schedule schedule) { return schedule == Schedule::cosine ? "cosine" : "constant"; }

Schedule parse_schedule(const std::string& text) {
    if (text == "cosine") return Schedule::cosine;
    if (text == "constant") return Schedule::constant;
    throw ConfigError("unknown schedule '" + text + "' (expected cosine or constant)");
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be non-negative");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation_fraction must be in (0, 1)");
    }
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must be in [0, 1]");
    if (dims.width == 0 || dims.depth == 0) throw ConfigError("width and depth must be positive");
    loss().validate();
}

LossConfig TrainConfig::loss() const {
    LossConfig l;
    l.tau = tau;
    l.lambda_intra = lambda_intra;
    l.include_intra_terms = !ablation.no_intra_loss;
    l.cross_modal_only = cross_modal_only;
    l.literal_denominator = literal_denominator;
    return l;
}

ModelConfig TrainConfig::model() const { return ModelConfig{dims, init_std, beta, beta_one_mode}; }

std::string TrainConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "batch_size = " << batch_size << '\n'
       << "learning_rate = " << learning_rate << '\n'
       << "weight_decay = " << weight_decay << '\n'
       << "tau = " << tau << '\n'
       << "lambda_intra = " << lambda_intra << '\n'
       << "beta = " << beta << '\n'
       << "beta_one_mode = " << to_string(beta_one_mode) << '\n'
       << "cross_modal_only = " << cross_modal_only << '\n'
       << "literal_denominator = " << literal_denominator << '\n'
       << "max_epochs = " << max_epochs << '\n'
       << "patience = " << patience << '\n'
       << "seed = " << seed << '\n'
       << "schedule = " << to_string(schedule) << '\n'
       << "grad_clip = " << grad_clip << '\n'
       << "validation_fraction = " << validation_fraction << '\n'
       << "negative_cap = " << negative_cap << '\n'
       << "no_inter_edges = " << ablation.no_inter_edges << '\n'
       << "no_intra_loss = " << ablation.no_intra_loss << '\n'
       << "no_edge_description = " << ablation.no_edge_description << '\n'
       << "freeze_encoders = " << ablation.freeze_encoders << '\n'
       << "vocab_size = " << dims.vocab_size << '\n'
       << "width = " << dims.width << '\n'
       << "max_text_len = " << dims.max_text_len << '\n'
       << "max_image_len = " << dims.max_image_len << '\n'
       << "patch_width = " << dims.patch_width << '\n'
       << "depth = " << dims.depth << '\n'
       << "init_std = " << init_std << '\n';
    return os.str();
}

std::string TrainConfig::hash() const { return sha1_hex(canonical()); }

bool TrainReport::same_run(const TrainReport& o) const {
    if (epochs.size() != o.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& a = epochs[i];
        const auto& b = o.epochs[i];
        if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.validation_hit5 != b.validation_hit5 ||
            a.learning_rate != b.learning_rate || a.steps != b.steps) {
            return false;
        }
    }
    return initial_loss == o.initial_loss && final_loss == o.final_loss && lr_trace == o.lr_trace &&
           best_epoch == o.best_epoch && stopping_epoch == o.stopping_epoch &&
           best_validation_hit5 == o.best_validation_hit5 && total_steps == o.total_steps &&
           inter_pair_count == o.inter_pair_count && train_edges == o.train_edges &&
           validation_edges == o.validation_edges && aborted == o.aborted && abort_reason == o.abort_reason;
}

std::string TrainReport::to_json() const {
    nlohmann::ordered_json j;
    j["initial_loss"] = initial_loss;
    j["final_loss"] = final_loss;
    j["best_epoch"] = best_epoch;
    j["stopping_epoch"] = stopping_epoch;
    j["best_validation_hit5"] = best_validation_hit5;
    j["total_steps"] = total_steps;
    j["inter_pair_count"] = inter_pair_count;
    j["train_edges"] = train_edges;
    j["validation_edges"] = validation_edges;
    j["aborted"] = aborted;
    j["abort_reason"] = abort_reason;
    j["epochs"] = nlohmann::ordered_json::array();
    for (const auto& e : epochs) {
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"validation_hit5", e.validation_hit5},
                               {"learning_rate", e.learning_rate},
                               {"steps", e.steps}});
    }
    j["lr_trace"] = lr_trace;
    return j.dump(2);
}

std::vector<RelationEdge> strip_descriptions(std::span<const RelationEdge> edges) {
    std::vector<RelationEdge> out(edges.begin(), edges.end());
    for (auto& e : out) e.relation_text = generic_intra_relation();
    return out;
}

FitResult fit(const Dataset& dataset, std::span<const RelationEdge> train_edges, const TrainConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const LossConfig loss = config.loss();
    const bool generic = config.ablation.no_edge_description;

    FitResult result{ModelParams::init(config.model(), mix_seed(config.seed, 1)), {}};
    ModelParams& params = result.params;
    TrainReport& report = result.report;
    if (config.ablation.freeze_encoders) params.set_encoders_trainable(false);
    const std::vector<NamedTensor> trainable =
        config.ablation.freeze_encoders ? params.attention_tensors() : params.named();
    if (config.max_epochs == 0) return result;

    const DatasetSplit carve = split(train_edges, config.validation_fraction, mix_seed(config.seed, 2));
    const std::vector<RelationEdge> fit_edges = generic ? strip_descriptions(carve.train) : carve.train;
    report.train_edges = carve.train.size();
    report.validation_edges = carve.test.size();

    PairingConfig pairing;
    pairing.batch_size = config.batch_size;
    if (config.negative_cap > 0) pairing.negative_cap = config.negative_cap;
    if (config.ablation.no_inter_edges) {
        // Match the number of updates of an edge-driven epoch.
        const BatchPlanner reference(dataset.samples, fit_edges, pairing);
        Rng probe(mix_seed(config.seed, 3));
        pairing.batches_per_epoch = reference.epoch(probe).size();
        pairing.include_inter = false;
    }
    const BatchPlanner planner(dataset.samples, config.ablation.no_inter_edges ? std::span<const RelationEdge>()
                                                                                 : std::span<const RelationEdge>(fit_edges),
                               pairing);
    const SampleIndex index(dataset.samples);

    const auto val_queries = build_retrieval_queries(dataset.samples, carve.test, train_edges, kRetrievalNegatives,
                                                     mix_seed(config.seed, 4));
    std::vector<RelationContext> val_contexts;
    for (const auto& q : val_queries) {
        RelationContext c = query_context(q, generic);
        if (std::none_of(val_contexts.begin(), val_contexts.end(),
                         [&](const RelationContext& v) { return v.relation_text == c.relation_text; })) {
            val_contexts.push_back(std::move(c));
        }
    }
    auto validate = [&](const ModelParams& p) {
        const EmbeddingTable table = embed(p, dataset.samples, val_contexts, config.workers);
        return retrieval_eval(val_queries, table_scorer(table, SimilarityMode::AVG, generic), 5);
    };

    std::vector<PairBatch> batches;
    {
        Rng rng(mix_seed(config.seed, 100));
        batches = planner.epoch(rng);
    }
    const std::vector<PairBatch> monitor(batches.begin(),
                                         batches.begin() + static_cast<std::ptrdiff_t>(std::min(kMonitorBatches, batches.size())));
    report.initial_loss = mean_loss(params, monitor, index, loss);
    const std::size_t planned_steps = batches.size() * config.max_epochs;

    AdamWState state = AdamWState::zeros(trainable);
    ModelParams best = params.deep_copy();
    report.best_validation_hit5 = -1.0;
    std::size_t stale = 0;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        if (epoch > 1) {
            Rng rng(mix_seed(config.seed, 100 + epoch));
            batches = planner.epoch(rng);
        }
        EpochRecord record;
        record.epoch = epoch;
        double loss_sum = 0.0;
        for (const auto& batch : batches) {
            Tape tape;
            Tape::Scope scope(&tape);
            for (const auto& p : trainable) {
                Tensor t = p.tensor;
                t.zero_grad();
            }
            const LossBreakdown breakdown = total_loss(batch_features(params, batch, index), loss);
            const double value = breakdown.total.item();
            if (!std::isfinite(value)) {
                report.aborted = true;
                report.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(step);
                break;
            }
            backward(breakdown.total);
            auto grads = collect_grads(trainable);
            clip_global_norm(grads, config.grad_clip);
            const double lr = config.schedule == Schedule::cosine
                                  ? lr_schedule(std::min(step, planned_steps), planned_steps, config.learning_rate)
                                  : config.learning_rate;
            try {
                optimizer_step(trainable, grads, state, lr, config.weight_decay);
            } catch (const NumericError& e) {
                report.aborted = true;
                report.abort_reason = e.what();
                break;
            }
            report.lr_trace.push_back(lr);
            record.learning_rate = lr;
            report.inter_pair_count += batch.inter_pair_count();
            loss_sum += value;
            ++record.steps;
            ++step;
        }
        if (report.aborted) {
            std::clog << "train: " << report.abort_reason << "; keeping the last good parameters\n";
            break;
        }
        record.train_loss = loss_sum / static_cast<double>(record.steps);
        record.validation_hit5 = validate(params);
        report.epochs.push_back(record);
        report.stopping_epoch = epoch;
        if (record.validation_hit5 > report.best_validation_hit5) {
            report.best_validation_hit5 = record.validation_hit5;
            report.best_epoch = epoch;
            best = params.deep_copy();
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    report.total_steps = step;
    if (report.best_epoch == 0) report.best_validation_hit5 = 0.0;
    params = std::move(best);
    report.final_loss = mean_loss(params, monitor, index, loss);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace rcml
