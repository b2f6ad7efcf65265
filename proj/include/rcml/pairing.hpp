#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "rcml/encoders.hpp"
#include "rcml/errors.hpp"
#include "rcml/relation_attention.hpp"
#include "rcml/rng.hpp"
#include "rcml/vocab.hpp"

namespace rcml {

using SampleId = std::int64_t;

inline constexpr int kIntraRelationType = -1;

struct Sample {
    SampleId id = 0;
    TokenList text_tokens;
    PatchList image_patches;
    int category = 0;
};

struct RelationEdge {
    SampleId src = 0;
    SampleId dst = 0;
    TokenList relation_text;
    int relation_type = 0;  // kIntraRelationType for the generic self relation
};

struct PositivePair {
    SampleId anchor = 0;
    SampleId partner = 0;
    RelationEdge edge;
    PairKind kind = PairKind::intra;
};

struct PairBatch {
    std::vector<SampleId> roster;
    std::vector<PositivePair> positives;
    std::map<SampleId, std::vector<SampleId>> negatives;
    std::uint64_t rng_seed = 0;

    std::size_t inter_pair_count() const;
};

class InsufficientNegatives : public Error {
public:
    explicit InsufficientNegatives(const std::string& what) : Error(what, ExitCode::data) {}
};

RelationEdge generic_intra_edge(SampleId id);

/// Self pairs under the generic relation and/or every edge in both directions.
std::vector<PositivePair> build_positive_set(std::span<const Sample> samples, std::span<const RelationEdge> edges,
                                             bool include_intra, bool include_inter);

/// Uniform draw without replacement from roster \ ({anchor} U excluded).
/// `count` unset means every eligible member.
std::vector<SampleId> sample_negatives(std::span<const SampleId> roster, SampleId anchor,
                                       const std::set<SampleId>& excluded, std::optional<std::size_t> count, Rng& rng);

struct PairingConfig {
    std::size_t batch_size = 32;
    bool include_intra = true;
    bool include_inter = true;
    std::optional<std::size_t> negative_cap;
    // Intra-only epochs: number of random rosters per epoch (default: one
    // partition of the samples).
    std::optional<std::size_t> batches_per_epoch;
};

/// Throws ContractError when a negative of an anchor is one of its partners
/// or when an id is not on the roster.
void check_batch(const PairBatch& batch);

/// Builds rosters from the training edges and fills each with positives
/// and in-batch negatives.
class BatchPlanner {
public:
    BatchPlanner(std::span<const Sample> samples, std::span<const RelationEdge> train_edges, PairingConfig config);

    /// One pass over the shuffled edges.
    std::vector<PairBatch> epoch(Rng& rng) const;

    /// Positives and negatives for an explicit roster; re-draws members
    /// when an anchor has no eligible negative.
    PairBatch make_batch(std::vector<SampleId> roster, Rng& rng) const;

    const PairingConfig& config() const { return config_; }
    std::size_t redraw_count() const { return redraws_; }

private:
    std::vector<SampleId> ids_;
    std::vector<RelationEdge> edges_;
    std::unordered_map<SampleId, std::vector<std::size_t>> edges_by_sample_;
    std::unordered_map<SampleId, std::set<SampleId>> partners_;
    PairingConfig config_;
    mutable std::size_t redraws_ = 0;

    void fill_roster(std::vector<SampleId>& roster, Rng& rng) const;
};

}  // namespace rcml
