#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rcml/grad_check.hpp"
#include "rcml/rng.hpp"
#include "rcml/tensor.hpp"
#include "rcml/vocab.hpp"

namespace rcml {

using Patch = std::vector<double>;
using PatchList = std::vector<Patch>;

struct EncoderDims {
    std::size_t vocab_size = 1000;
    std::size_t width = 32;
    std::size_t max_text_len = 19;
    std::size_t max_image_len = 17;  // including the summary slot
    std::size_t patch_width = 16;
    std::size_t depth = 1;           // mixer blocks per tower
};

/// Residual self-attention block followed by a residual d -> 4d -> d
/// feed-forward. Token rows in, token rows out.
struct MixerParams {
    Tensor query, key, value, output;
    Tensor ff_hidden, ff_hidden_bias, ff_out, ff_out_bias;

    static MixerParams init(std::size_t width, Rng& rng, double stddev);
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct TextEncoderParams {
    Tensor token_embedding;       // V x d
    Tensor positional_embedding;  // n_max x d
    std::vector<MixerParams> mixers;

    static TextEncoderParams init(const EncoderDims& dims, Rng& rng, double stddev);
    void collect(std::vector<NamedTensor>& out) const;
};

struct ImageEncoderParams {
    Tensor patch_projection;      // p x d
    Tensor summary_embedding;     // 1 x d, prepended as position 0
    Tensor positional_embedding;  // m_max x d
    std::vector<MixerParams> mixers;
    Tensor projector_hidden, projector_hidden_bias, projector_out, projector_out_bias;

    static ImageEncoderParams init(const EncoderDims& dims, Rng& rng, double stddev);
    void collect(std::vector<NamedTensor>& out) const;
};

/// Token-level features of one sequence. Row t of `features` is token t,
/// so `features` is the transpose of the d x L column layout.
struct TokenMatrix {
    Tensor features;  // L x d
    std::size_t summary_index = 0;
    std::vector<bool> pad_mask;

    std::size_t length() const { return pad_mask.size(); }
};

Tensor mixer_forward(const MixerParams& mixer, const Tensor& tokens, const std::vector<bool>& pad_mask);

TokenMatrix encode_text(const TextEncoderParams& params, std::span<const TokenId> tokens);
TokenMatrix encode_image(const ImageEncoderParams& params, const PatchList& patches);

/// EOT row of the text encoder applied to a relation description (1 x d).
Tensor encode_relation(const TextEncoderParams& params, std::span<const TokenId> relation_tokens);

}  // namespace rcml
