#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rcml/relation_attention.hpp"
#include "rcml/tensor.hpp"
#include "rcml/vocab.hpp"

namespace rcml {

struct LossConfig {
    double tau = 0.1;
    double lambda_intra = 0.5;
    bool include_intra_terms = true;
    bool cross_modal_only = false;
    // Denominator over negatives only instead of positive + negatives.
    bool literal_denominator = false;

    void validate() const;
    bool uses_intra_terms() const { return include_intra_terms && !cross_modal_only; }
};

/// Row/column indices of one InfoNCE term inside a similarity matrix.
struct ContrastiveIndex {
    std::size_t row = 0;
    std::size_t positive = 0;
    std::vector<std::size_t> negatives;
};

/// -log(exp(s+/tau) / sum_{den} exp(s/tau)) for every index, as a 1 x n row.
Tensor contrastive_losses(const Tensor& similarities, std::span<const ContrastiveIndex> terms, double tau,
                          bool literal_denominator = false);

/// Single InfoNCE term over unit vectors (each 1 x d).
Tensor contrastive_term(const Tensor& anchor, const Tensor& positive, std::span<const Tensor> negatives, double tau,
                        bool literal_denominator = false);

/// Features of every roster member under one relation context. Row r
/// belongs to roster slot r.
struct FeatureContext {
    Tensor text;   // N x d, unit rows
    Tensor image;  // N x d, unit rows
    TokenList relation_text;
    PairKind kind = PairKind::intra;
    int relation_type = 0;
};

struct PairTerm {
    std::size_t context = 0;
    std::size_t anchor = 0;   // roster slot
    std::size_t partner = 0;  // roster slot
    std::vector<std::size_t> negatives;
    PairKind kind = PairKind::intra;
};

struct BatchFeatures {
    std::vector<FeatureContext> contexts;
    std::vector<PairTerm> pairs;
};

struct LossBreakdown {
    Tensor total;
    double text_image = 0.0;
    double image_text = 0.0;
    double text_text = 0.0;
    double image_image = 0.0;
};

/// (L_ti + L_it) / 2 + lambda (L_tt + L_ii), each term averaged over pairs.
LossBreakdown total_loss(const BatchFeatures& features, const LossConfig& config);

/// (L_ti + L_it) / 2 over self pairs only; rejects inter-sample pairs.
Tensor clip_reduction_loss(const BatchFeatures& features, double tau);

}  // namespace rcml
