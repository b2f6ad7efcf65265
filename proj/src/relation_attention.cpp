#include "rcml/relation_attention.hpp"

#include <cmath>
#include <limits>

#include "rcml/errors.hpp"

namespace rcml {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Tensor random_matrix(std::size_t width, Rng& rng, double stddev) {
    std::vector<double> v(width * width);
    for (double& x : v) x = rng.normal(0.0, stddev);
    return Tensor({width, width}, std::move(v), true);
}

// (1 - beta) q + beta B with -inf entries of q kept at -inf.
Tensor blend_logits(const Tensor& q, const Tensor& mask, double beta) {
    const std::size_t n = q.rows(), m = q.cols();
    const bool shared = mask.rows() == 1;
    std::vector<double> out(q.numel());
    for (std::size_t r = 0; r < n; ++r) {
        const double* b = mask.values().data() + (shared ? 0 : r * m);
        for (std::size_t c = 0; c < m; ++c) {
            const double x = q.values()[r * m + c];
            out[r * m + c] = x == kNegInf ? kNegInf : (1.0 - beta) * x + beta * b[c];
        }
    }
    Tape* tape = recording_tape({&q});
    return make_result(q.shape(), std::move(out), tape, [q, beta](std::span<const double> g) mutable {
        auto gq = q.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (q.values()[i] != kNegInf) gq[i] += (1.0 - beta) * g[i];
        }
    });
}

}  // namespace

std::string to_string(BetaOneMode mode) { return mode == BetaOneMode::hard ? "hard" : "soft"; }

BetaOneMode parse_beta_one_mode(const std::string& text) {
    if (text == "soft") return BetaOneMode::soft;
    if (text == "hard") return BetaOneMode::hard;
    throw ConfigError("beta one mode must be 'soft' or 'hard', got '" + text + "'");
}

AttentionParams AttentionParams::init(std::size_t width, Rng& rng, double stddev, double beta, BetaOneMode mode) {
    AttentionParams p;
    p.w_query = random_matrix(width, rng, stddev);
    p.w_key = random_matrix(width, rng, stddev);
    p.w_value = random_matrix(width, rng, stddev);
    p.w_out = random_matrix(width, rng, stddev);
    p.beta = beta;
    p.beta_one_mode = mode;
    p.validate();
    return p;
}

void AttentionParams::collect(std::vector<NamedTensor>& out) const {
    out.push_back({"attention.w_query", w_query});
    out.push_back({"attention.w_key", w_key});
    out.push_back({"attention.w_value", w_value});
    out.push_back({"attention.w_out", w_out});
}

void AttentionParams::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1], got " + std::to_string(beta));
}

Tensor relation_query(const Tensor& relation_embeddings, const TokenMatrix& tokens, const AttentionParams& params) {
    const std::size_t d = params.w_query.rows();
    if (relation_embeddings.cols() != d || tokens.features.cols() != d) {
        throw DimensionError("relation_query: relation " + relation_embeddings.shape().str() + " and tokens " +
                             tokens.features.shape().str() + " must both have width " + std::to_string(d));
    }
    const Tensor projected_query = matmul_transposed(relation_embeddings, params.w_query);  // (W_Q h)^T
    const Tensor projected_keys = matmul_transposed(tokens.features, params.w_key);         // (W_K H)^T
    const Tensor logits = scale(matmul_transposed(projected_query, projected_keys), 1.0 / std::sqrt(static_cast<double>(d)));
    return mask_columns(logits, tokens.pad_mask);
}

Tensor summary_mask(PairKind kind, std::size_t length, std::size_t summary_index) {
    if (summary_index >= length) {
        throw BoundsError("summary index " + std::to_string(summary_index) + " outside sequence of length " +
                          std::to_string(length));
    }
    std::vector<double> v(length, 0.0);
    if (kind == PairKind::intra) v[summary_index] = 1.0;
    return Tensor::row(std::move(v));
}

Tensor relation_attention(const Tensor& q, const Tensor& mask, const AttentionParams& params) {
    params.validate();
    if (mask.cols() != q.cols() || (mask.rows() != 1 && mask.rows() != q.rows())) {
        throw DimensionError("relation_attention: logits " + q.shape().str() + " vs mask " + mask.shape().str());
    }
    const std::size_t n = q.rows(), m = q.cols();
    const bool shared = mask.rows() == 1;
    for (std::size_t r = 0; r < n; ++r) {
        bool any_open = false;
        for (std::size_t c = 0; c < m; ++c) any_open = any_open || q.values()[r * m + c] != kNegInf;
        if (!any_open) throw NumericError("relation_attention: every position is padded (empty attention)");
    }

    if (params.hard_pooling()) {
        std::vector<double> out(q.numel(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* b = mask.values().data() + (shared ? 0 : r * m);
            std::size_t active = m;
            for (std::size_t c = 0; c < m; ++c) {
                if (b[c] == 1.0 && active == m) active = c;
            }
            if (active == m) throw ContractError("hard pooling needs an active summary position in the mask");
            if (q.values()[r * m + active] == kNegInf) throw ContractError("hard pooling selects a padded position");
            out[r * m + active] = 1.0;
        }
        return Tensor(q.shape(), std::move(out));
    }
    return softmax_rows(blend_logits(q, mask, params.beta));
}

Tensor contextual_features(const Tensor& attention, const TokenMatrix& tokens, const AttentionParams& params) {
    if (attention.cols() != tokens.length()) {
        throw DimensionError("contextual_features: attention " + attention.shape().str() + " over " +
                             std::to_string(tokens.length()) + " tokens");
    }
    const Tensor values = matmul_transposed(tokens.features, params.w_value);  // (W_V H)^T, L x d
    return l2_normalize_rows(matmul(matmul(attention, values), params.w_out));
}

ContextualFeature contextual_feature(const Tensor& attention, const TokenMatrix& tokens, const AttentionParams& params,
                                     std::size_t relation_id, Modality modality) {
    if (attention.rows() != 1) throw DimensionError("contextual_feature: expected one attention row");
    return ContextualFeature{contextual_features(attention, tokens, params), relation_id, modality};
}

}  // namespace rcml
