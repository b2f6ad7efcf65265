#include "rcml/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rcml/errors.hpp"

namespace rcml {

namespace {

void require_unit_rows(const Tensor& z, const char* what) {
    const std::size_t m = z.cols();
    for (std::size_t r = 0; r < z.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += z.values()[r * m + c] * z.values()[r * m + c];
        if (std::abs(std::sqrt(s) - 1.0) > 1e-6) {
            std::ostringstream os;
            os << what << ": row " << r << " has norm " << std::sqrt(s) << ", expected unit vectors";
            throw ContractError(os.str());
        }
    }
}

enum class Side { text, image };

const Tensor& side(const FeatureContext& ctx, Side s) { return s == Side::text ? ctx.text : ctx.image; }

// Sum over pairs of one direction x -> y, and the number of pairs.
Tensor direction_sum(const BatchFeatures& features, Side x, Side y, double tau, bool literal) {
    std::vector<Tensor> parts;
    for (std::size_t c = 0; c < features.contexts.size(); ++c) {
        std::vector<ContrastiveIndex> terms;
        for (const auto& p : features.pairs) {
            if (p.context == c) terms.push_back({p.anchor, p.partner, p.negatives});
        }
        if (terms.empty()) continue;
        const FeatureContext& ctx = features.contexts[c];
        const Tensor sims = matmul_transposed(side(ctx, x), side(ctx, y));
        parts.push_back(sum(contrastive_losses(sims, terms, tau, literal)));
    }
    return sum(concat_rows(parts));
}

}  // namespace

void LossConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(lambda_intra >= 0.0)) throw ConfigError("lambda_intra must be non-negative");
}

Tensor contrastive_losses(const Tensor& similarities, std::span<const ContrastiveIndex> terms, double tau,
                          bool literal_denominator) {
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    const std::size_t cols = similarities.cols();
    const auto s = similarities.values();
    std::vector<double> out(terms.size());
    // Softmax weights over the denominator set, kept for the backward pass.
    std::vector<std::vector<double>> weights(terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto& term = terms[t];
        if (term.negatives.empty()) throw ContractError("contrastive term needs at least one negative");
        if (term.row >= similarities.rows() || term.positive >= cols) throw BoundsError("contrastive index out of range");
        const double* row = s.data() + term.row * cols;
        std::vector<double> logits;
        logits.reserve(term.negatives.size() + 1);
        if (!literal_denominator) logits.push_back(row[term.positive] / tau);
        for (std::size_t k : term.negatives) {
            if (k >= cols) throw BoundsError("contrastive negative index out of range");
            logits.push_back(row[k] / tau);
        }
        const double hi = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double& l : logits) {
            l = std::exp(l - hi);
            z += l;
        }
        for (double& l : logits) l /= z;
        out[t] = hi + std::log(z) - row[term.positive] / tau;
        weights[t] = std::move(logits);
    }

    Tape* tape = recording_tape({&similarities});
    if (tape == nullptr) return Tensor({1, terms.size()}, std::move(out));
    std::vector<ContrastiveIndex> idx(terms.begin(), terms.end());
    return make_result({1, terms.size()}, std::move(out), tape,
                       [similarities, idx = std::move(idx), weights = std::move(weights), tau, literal_denominator,
                        cols](std::span<const double> g) mutable {
                           auto gs = similarities.grad_buffer();
                           for (std::size_t t = 0; t < idx.size(); ++t) {
                               const auto& term = idx[t];
                               double* row = gs.data() + term.row * cols;
                               const double scale = g[t] / tau;
                               std::size_t w = 0;
                               if (!literal_denominator) row[term.positive] += scale * weights[t][w++];
                               for (std::size_t k : term.negatives) row[k] += scale * weights[t][w++];
                               row[term.positive] -= scale;
                           }
                       });
}

Tensor contrastive_term(const Tensor& anchor, const Tensor& positive, std::span<const Tensor> negatives, double tau,
                        bool literal_denominator) {
    if (negatives.empty()) throw ContractError("contrastive term needs at least one negative");
    require_unit_rows(anchor, "contrastive_term anchor");
    require_unit_rows(positive, "contrastive_term positive");
    std::vector<Tensor> candidates{positive};
    for (const Tensor& n : negatives) {
        require_unit_rows(n, "contrastive_term negative");
        candidates.push_back(n);
    }
    if (anchor.rows() != 1) throw DimensionError("contrastive_term: anchor must be a single row");
    const Tensor sims = matmul_transposed(anchor, concat_rows(candidates));
    ContrastiveIndex term{0, 0, {}};
    for (std::size_t k = 1; k < candidates.size(); ++k) term.negatives.push_back(k);
    return sum(contrastive_losses(sims, std::span<const ContrastiveIndex>(&term, 1), tau, literal_denominator));
}

LossBreakdown total_loss(const BatchFeatures& features, const LossConfig& config) {
    config.validate();
    if (features.pairs.empty()) throw ConfigError("total_loss: empty positive set");
    for (const auto& ctx : features.contexts) {
        require_unit_rows(ctx.text, "total_loss text features");
        require_unit_rows(ctx.image, "total_loss image features");
    }
    for (const auto& p : features.pairs) {
        if (p.context >= features.contexts.size()) throw BoundsError("pair refers to a missing context");
    }
    const double inv_pairs = 1.0 / static_cast<double>(features.pairs.size());
    const bool literal = config.literal_denominator;

    LossBreakdown out;
    const Tensor ti = scale(direction_sum(features, Side::text, Side::image, config.tau, literal), inv_pairs);
    const Tensor it = scale(direction_sum(features, Side::image, Side::text, config.tau, literal), inv_pairs);
    out.text_image = ti.item();
    out.image_text = it.item();
    Tensor total = scale(add(ti, it), 0.5);
    if (config.uses_intra_terms()) {
        const Tensor tt = scale(direction_sum(features, Side::text, Side::text, config.tau, literal), inv_pairs);
        const Tensor ii = scale(direction_sum(features, Side::image, Side::image, config.tau, literal), inv_pairs);
        out.text_text = tt.item();
        out.image_image = ii.item();
        total = add(total, scale(add(tt, ii), config.lambda_intra));
    }
    out.total = total;
    return out;
}

Tensor clip_reduction_loss(const BatchFeatures& features, double tau) {
    if (features.pairs.empty()) throw ConfigError("clip_reduction_loss: empty positive set");
    for (const auto& p : features.pairs) {
        if (p.kind != PairKind::intra || p.anchor != p.partner) {
            throw ContractError("clip_reduction_loss accepts self pairs only");
        }
    }
    // In-batch logits matrix per context, diagonal positives.
    std::vector<Tensor> row_losses;
    for (std::size_t c = 0; c < features.contexts.size(); ++c) {
        const FeatureContext& ctx = features.contexts[c];
        require_unit_rows(ctx.text, "clip_reduction_loss text features");
        require_unit_rows(ctx.image, "clip_reduction_loss image features");
        std::vector<ContrastiveIndex> rows;
        for (const auto& p : features.pairs) {
            if (p.context == c) rows.push_back({p.anchor, p.anchor, p.negatives});
        }
        if (rows.empty()) continue;
        const Tensor logits = matmul_transposed(ctx.text, ctx.image);
        row_losses.push_back(sum(contrastive_losses(logits, rows, tau)));
        row_losses.push_back(sum(contrastive_losses(transpose(logits), rows, tau)));
    }
    // Each pair appears once per direction: mean per direction, then halve.
    const double n = static_cast<double>(features.pairs.size());
    return scale(sum(concat_rows(row_losses)), 0.5 / n);
}

}  // namespace rcml
