#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rcml/encoders.hpp"
#include "rcml/grad_check.hpp"
#include "rcml/rng.hpp"
#include "rcml/tensor.hpp"

namespace rcml {

/// How beta == 1 is evaluated. `soft` applies the softmax blend literally;
/// `hard` replaces it with an exact one-hot on the summary token.
enum class BetaOneMode { soft, hard };

enum class PairKind { intra, inter };
enum class Modality { text, image };

std::string to_string(BetaOneMode mode);
BetaOneMode parse_beta_one_mode(const std::string& text);

struct AttentionParams {
    // Row-vector convention: with token rows X (L x d) the column-layout
    // products W_K H and W_V H become X W_K^T and X W_V^T.
    Tensor w_query, w_key, w_value, w_out;  // d x d each
    double beta = 0.6;
    BetaOneMode beta_one_mode = BetaOneMode::soft;

    static AttentionParams init(std::size_t width, Rng& rng, double stddev, double beta, BetaOneMode mode);
    void collect(std::vector<NamedTensor>& out) const;
    void validate() const;

    /// True when attention collapses to the summary token.
    bool hard_pooling() const { return beta == 1.0 && beta_one_mode == BetaOneMode::hard; }
};

struct ContextualFeature {
    Tensor z;  // 1 x d, unit norm
    std::size_t relation_id = 0;
    Modality modality = Modality::text;
};

/// Relation-driven attention logits, one row per relation embedding
/// (C x d in, C x L out). Padded positions are -inf.
Tensor relation_query(const Tensor& relation_embeddings, const TokenMatrix& tokens, const AttentionParams& params);

/// 1 x L indicator of the summary token for intra-sample pairs, zeros otherwise.
Tensor summary_mask(PairKind kind, std::size_t length, std::size_t summary_index);

/// softmax((1 - beta) q + beta B) row-wise. `mask` is either 1 x L (shared)
/// or one row per row of `q`.
Tensor relation_attention(const Tensor& q, const Tensor& mask, const AttentionParams& params);

/// Unit-norm pooled features, one row per attention row (C x L in, C x d out).
Tensor contextual_features(const Tensor& attention, const TokenMatrix& tokens, const AttentionParams& params);

ContextualFeature contextual_feature(const Tensor& attention, const TokenMatrix& tokens, const AttentionParams& params,
                                     std::size_t relation_id = 0, Modality modality = Modality::text);

}  // namespace rcml
