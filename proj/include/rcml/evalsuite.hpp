#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcml/dataio.hpp"
#include "rcml/model.hpp"

namespace rcml {

enum class SimilarityMode { TT, II, TI, IT, AVG };

const std::vector<SimilarityMode>& all_similarity_modes();
std::string to_string(SimilarityMode mode);
SimilarityMode parse_similarity_mode(const std::string& text);

struct EmbeddingPair {
    std::span<const double> text;
    std::span<const double> image;
};

/// Cosine between the embeddings the mode selects: TI is A's text against
/// B's image, AVG compares normalized text/image means.
double mode_similarity(EmbeddingPair a, EmbeddingPair b, SimilarityMode mode);

/// Both samples conditioned on the same relation context.
double similarity(const ModelParams& params, const Sample& a, const Sample& b, const RelationContext& context,
                  SimilarityMode mode);

// ---------------------------------------------------------------------------
// Relation-guided retrieval

inline constexpr std::size_t kRetrievalNegatives = 20;
inline constexpr std::size_t kShuffledControlRepeats = 5;

struct RetrievalQuery {
    SampleId anchor = 0;
    SampleId target = 0;
    int relation_type = 0;
    TokenList relation_text;
    std::vector<SampleId> candidates;  // target plus negatives, sorted by id
};

/// One query per edge direction. Negatives are drawn uniformly from samples
/// that are neither the anchor nor linked to it under the same relation type
/// in `known_edges`.
std::vector<RetrievalQuery> build_retrieval_queries(std::span<const Sample> samples,
                                                    std::span<const RelationEdge> query_edges,
                                                    std::span<const RelationEdge> known_edges,
                                                    std::size_t num_negatives, std::uint64_t seed);

/// Rank of `target` when candidates are sorted by descending score with
/// ties broken by ascending id (0 = first).
std::size_t target_rank(std::span<const SampleId> candidates, std::span<const double> scores, SampleId target);

using QueryScorer = std::function<std::vector<double>(const RetrievalQuery&)>;

/// Fraction of queries whose target ranks within the top k.
double retrieval_eval(std::span<const RetrievalQuery> queries, const QueryScorer& scorer, std::size_t k = 5);

RelationContext query_context(const RetrievalQuery& query, bool generic_relation_text);

QueryScorer table_scorer(const EmbeddingTable& table, SimilarityMode mode, bool generic_relation_text);

// ---------------------------------------------------------------------------
// Relation type prediction

struct TypeQuery {
    SampleId a = 0;
    SampleId b = 0;
    int true_type = 0;
};

std::vector<TypeQuery> build_type_queries(std::span<const RelationEdge> edges);

/// True when the true type is among the top_k scores (ties by lower type id).
bool relation_type_predict(std::span<const double> type_scores, int true_type, std::size_t top_k = 3);

using TypeScorer = std::function<std::vector<double>(const TypeQuery&)>;

double type_prediction_eval(std::span<const TypeQuery> queries, const TypeScorer& scorer, std::size_t num_types,
                            std::size_t top_k = 3);

/// Contexts holding the canonical text of every relation type.
std::vector<RelationContext> type_contexts(const Dataset& dataset, bool generic_relation_text);

// ---------------------------------------------------------------------------
// Relation validity

struct ValidityExample {
    SampleId a = 0;
    SampleId b = 0;
    int relation_type = 0;
    int label = 0;
    std::size_t group = 0;  // a positive and its negative share a group
};

/// Positives are the given edges; negatives are half corrupted-type copies
/// and half unrelated pairs, one negative per positive.
std::vector<ValidityExample> build_validity_examples(std::span<const Sample> samples,
                                                     std::span<const RelationEdge> positive_edges,
                                                     std::span<const RelationEdge> known_edges,
                                                     std::size_t num_relation_types, std::uint64_t seed);

/// [z_T^A, z_I^A, z_T^B, z_I^B, h_E] from a table built over type_contexts.
std::vector<std::vector<double>> validity_features(const EmbeddingTable& table,
                                                   std::span<const ValidityExample> examples,
                                                   std::span<const RelationContext> contexts);

struct ProbeConfig {
    std::size_t epochs = 300;
    double learning_rate = 0.05;
    double weight_decay = 0.0;
    double train_fraction = 0.5;
    std::uint64_t seed = 42;
};

struct ProbeResult {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

/// Logistic-regression probe on standardized features, trained with AdamW.
/// Rows sharing a group id land on the same side of the train/test split;
/// empty `groups` puts every row in its own group.
ProbeResult validity_eval(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                          const ProbeConfig& config, std::span<const std::size_t> groups = {});

// ---------------------------------------------------------------------------

struct ModeMetric {
    SimilarityMode mode;
    double value;
};

struct MetricsReport {
    std::string tag = "full";
    std::string config_hash;
    std::vector<ModeMetric> hit_at_5;
    std::optional<double> type_top3;
    std::optional<double> validity_accuracy;
    std::optional<double> validity_shuffled_accuracy;
    std::size_t retrieval_queries = 0;
    std::size_t type_queries = 0;
    std::size_t validity_examples = 0;
    std::size_t inter_pair_count = 0;

    std::optional<double> hit(SimilarityMode mode) const;
    void validate() const;
    std::string to_json() const;
    std::string to_text() const;
};

struct EvalOptions {
    bool retrieval = true;
    bool type_prediction = true;
    bool validity = true;
    std::vector<SimilarityMode> modes = all_similarity_modes();
    bool generic_relation_text = false;
    std::size_t num_negatives = kRetrievalNegatives;
    std::size_t top_k = 5;
    std::size_t type_top_k = 3;
    std::uint64_t seed = 42;
    std::size_t workers = 1;
    ProbeConfig probe;
};

/// Runs the selected tasks on `eval_edges`. Every dataset edge counts as
/// known when drawing negatives. Leaves the parameters untouched.
MetricsReport evaluate(const ModelParams& params, const Dataset& dataset, std::span<const RelationEdge> eval_edges,
                       const EvalOptions& options);

/// One JSON line per (sample, relation type) with both unit embeddings.
void dump_embeddings(const ModelParams& params, const Dataset& dataset, std::ostream& out, std::size_t workers = 1);

}  // namespace rcml
