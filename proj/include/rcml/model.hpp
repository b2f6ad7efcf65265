#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include "rcml/encoders.hpp"
#include "rcml/objective.hpp"
#include "rcml/pairing.hpp"
#include "rcml/relation_attention.hpp"

namespace rcml {

struct ModelConfig {
    EncoderDims dims;
    double init_std = 0.02;
    double beta = 0.6;
    BetaOneMode beta_one_mode = BetaOneMode::soft;
};

/// Every learnable tensor of the two towers and the relation attention.
struct ModelParams {
    ModelConfig config;
    TextEncoderParams text;
    ImageEncoderParams image;
    AttentionParams attention;

    static ModelParams init(const ModelConfig& config, std::uint64_t seed);

    std::vector<NamedTensor> named() const;
    std::vector<NamedTensor> encoder_tensors() const;
    std::vector<NamedTensor> attention_tensors() const;

    /// Independent copy; the result shares no storage with `*this`.
    ModelParams deep_copy() const;
    void set_encoders_trainable(bool trainable);
};

/// Looks samples up by id without copying them.
class SampleIndex {
public:
    explicit SampleIndex(std::span<const Sample> samples);
    const Sample& at(SampleId id) const;
    bool contains(SampleId id) const { return by_id_.contains(id); }

private:
    std::unordered_map<SampleId, const Sample*> by_id_;
};

/// Relation description plus the pair kind it is used with; together they
/// fix the attention conditioning.
struct RelationContext {
    TokenList relation_text;
    PairKind kind = PairKind::inter;
    int relation_type = 0;

    bool operator==(const RelationContext&) const = default;
};

struct EncodedSample {
    TokenMatrix text;
    TokenMatrix image;
};

EncodedSample encode_sample(const ModelParams& params, const Sample& sample);

/// Summary masks for each context (C x L). Hard pooling always selects the
/// summary position.
Tensor context_masks(const ModelParams& params, std::span<const PairKind> kinds, const TokenMatrix& tokens);

struct PooledSample {
    Tensor text;   // C x d
    Tensor image;  // C x d
};

PooledSample pool_sample(const ModelParams& params, const EncodedSample& encoded, const Tensor& relation_embeddings,
                         std::span<const PairKind> kinds);

/// Relation-conditioned features of a whole batch, ready for total_loss.
BatchFeatures batch_features(const ModelParams& params, const PairBatch& batch, const SampleIndex& samples);

/// Unit features of many samples under many contexts, values only.
class EmbeddingTable {
public:
    EmbeddingTable(std::vector<SampleId> ids, std::vector<RelationContext> contexts, std::size_t width);

    std::size_t context_index(const RelationContext& ctx) const;
    bool has_context(const RelationContext& ctx) const;
    std::span<const double> text(std::size_t context, SampleId id) const;
    std::span<const double> image(std::size_t context, SampleId id) const;
    std::span<const double> relation(std::size_t context) const;
    const std::vector<RelationContext>& contexts() const { return contexts_; }
    const std::vector<SampleId>& ids() const { return ids_; }
    std::size_t width() const { return width_; }

    std::span<double> mutable_text(std::size_t context, std::size_t slot);
    std::span<double> mutable_image(std::size_t context, std::size_t slot);
    std::span<double> mutable_relation(std::size_t context);

private:
    std::vector<SampleId> ids_;
    std::unordered_map<SampleId, std::size_t> slot_;
    std::vector<RelationContext> contexts_;
    std::size_t width_;
    std::vector<std::vector<double>> text_, image_, relation_;

    std::size_t slot(SampleId id) const;
};

/// Encodes every sample once and pools it under every context. Samples are
/// split across `workers` threads; results do not depend on the split.
EmbeddingTable embed(const ModelParams& params, std::span<const Sample> samples,
                     std::span<const RelationContext> contexts, std::size_t workers = 1);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace rcml
