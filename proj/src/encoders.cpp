#include "rcml/encoders.hpp"

#include <cmath>

#include "rcml/errors.hpp"

namespace rcml {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double stddev) {
    std::vector<double> v(shape.numel());
    for (double& x : v) x = rng.normal(0.0, stddev);
    return Tensor(shape, std::move(v), true);
}

Tensor leading_rows(const Tensor& table, std::size_t count) {
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    return gather_rows(table, idx);
}

}  // namespace

MixerParams MixerParams::init(std::size_t width, Rng& rng, double stddev) {
    const std::size_t hidden = 4 * width;
    MixerParams m;
    m.query = random_tensor({width, width}, rng, stddev);
    m.key = random_tensor({width, width}, rng, stddev);
    m.value = random_tensor({width, width}, rng, stddev);
    m.output = random_tensor({width, width}, rng, stddev);
    m.ff_hidden = random_tensor({width, hidden}, rng, stddev);
    m.ff_hidden_bias = random_tensor({1, hidden}, rng, stddev);
    m.ff_out = random_tensor({hidden, width}, rng, stddev);
    m.ff_out_bias = random_tensor({1, width}, rng, stddev);
    return m;
}

void MixerParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    out.push_back({prefix + ".query", query});
    out.push_back({prefix + ".key", key});
    out.push_back({prefix + ".value", value});
    out.push_back({prefix + ".output", output});
    out.push_back({prefix + ".ff_hidden", ff_hidden});
    out.push_back({prefix + ".ff_hidden_bias", ff_hidden_bias});
    out.push_back({prefix + ".ff_out", ff_out});
    out.push_back({prefix + ".ff_out_bias", ff_out_bias});
}

TextEncoderParams TextEncoderParams::init(const EncoderDims& dims, Rng& rng, double stddev) {
    TextEncoderParams p;
    p.token_embedding = random_tensor({dims.vocab_size, dims.width}, rng, stddev);
    p.positional_embedding = random_tensor({dims.max_text_len, dims.width}, rng, stddev);
    for (std::size_t i = 0; i < dims.depth; ++i) p.mixers.push_back(MixerParams::init(dims.width, rng, stddev));
    return p;
}

void TextEncoderParams::collect(std::vector<NamedTensor>& out) const {
    out.push_back({"text.token_embedding", token_embedding});
    out.push_back({"text.positional_embedding", positional_embedding});
    for (std::size_t i = 0; i < mixers.size(); ++i) mixers[i].collect("text.mixer" + std::to_string(i), out);
}

ImageEncoderParams ImageEncoderParams::init(const EncoderDims& dims, Rng& rng, double stddev) {
    ImageEncoderParams p;
    p.patch_projection = random_tensor({dims.patch_width, dims.width}, rng, stddev);
    p.summary_embedding = random_tensor({1, dims.width}, rng, stddev);
    p.positional_embedding = random_tensor({dims.max_image_len, dims.width}, rng, stddev);
    for (std::size_t i = 0; i < dims.depth; ++i) p.mixers.push_back(MixerParams::init(dims.width, rng, stddev));
    p.projector_hidden = random_tensor({dims.width, dims.width}, rng, stddev);
    p.projector_hidden_bias = random_tensor({1, dims.width}, rng, stddev);
    p.projector_out = random_tensor({dims.width, dims.width}, rng, stddev);
    p.projector_out_bias = random_tensor({1, dims.width}, rng, stddev);
    return p;
}

void ImageEncoderParams::collect(std::vector<NamedTensor>& out) const {
    out.push_back({"image.patch_projection", patch_projection});
    out.push_back({"image.summary_embedding", summary_embedding});
    out.push_back({"image.positional_embedding", positional_embedding});
    for (std::size_t i = 0; i < mixers.size(); ++i) mixers[i].collect("image.mixer" + std::to_string(i), out);
    out.push_back({"image.projector_hidden", projector_hidden});
    out.push_back({"image.projector_hidden_bias", projector_hidden_bias});
    out.push_back({"image.projector_out", projector_out});
    out.push_back({"image.projector_out_bias", projector_out_bias});
}

Tensor mixer_forward(const MixerParams& m, const Tensor& x, const std::vector<bool>& pad_mask) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.cols()));
    const Tensor q = matmul(x, m.query);
    const Tensor k = matmul(x, m.key);
    const Tensor v = matmul(x, m.value);
    const Tensor scores = mask_columns(scale(matmul_transposed(q, k), inv_sqrt_d), pad_mask);
    const Tensor attended = matmul(matmul(softmax_rows(scores), v), m.output);
    const Tensor y = add(x, attended);
    const Tensor hidden = gelu(add_row_broadcast(matmul(y, m.ff_hidden), m.ff_hidden_bias));
    return add(y, add_row_broadcast(matmul(hidden, m.ff_out), m.ff_out_bias));
}

TokenMatrix encode_text(const TextEncoderParams& params, std::span<const TokenId> tokens) {
    const std::size_t vocab = params.token_embedding.rows();
    const std::size_t n_max = params.positional_embedding.rows();
    if (tokens.empty() || tokens.size() > n_max) {
        throw FormatError("text length " + std::to_string(tokens.size()) + " outside [1, " +
                          std::to_string(n_max) + "]");
    }
    std::vector<std::size_t> ids(tokens.size());
    std::vector<bool> pad(tokens.size(), false);
    std::size_t eot_count = 0, eot_pos = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= vocab) {
            throw VocabularyError("token id " + std::to_string(tokens[t]) + " outside vocabulary of size " +
                                  std::to_string(vocab));
        }
        ids[t] = static_cast<std::size_t>(tokens[t]);
        pad[t] = tokens[t] == kPadToken;
        if (tokens[t] == kEotToken) {
            ++eot_count;
            eot_pos = t;
        }
    }
    if (eot_count != 1) {
        throw FormatError("text must contain exactly one EOT token, found " + std::to_string(eot_count));
    }

    Tensor x = add(gather_rows(params.token_embedding, ids), leading_rows(params.positional_embedding, ids.size()));
    for (const auto& mixer : params.mixers) x = mixer_forward(mixer, x, pad);
    return TokenMatrix{layer_norm_rows(x), eot_pos, std::move(pad)};
}

TokenMatrix encode_image(const ImageEncoderParams& params, const PatchList& patches) {
    const std::size_t p = params.patch_projection.rows();
    const std::size_t m_max = params.positional_embedding.rows();
    if (patches.empty() || patches.size() + 1 > m_max) {
        throw DimensionError("patch count " + std::to_string(patches.size()) + " outside [1, " +
                             std::to_string(m_max - 1) + "]");
    }
    std::vector<double> raw;
    raw.reserve(patches.size() * p);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (patches[i].size() != p) {
            throw DimensionError("patch " + std::to_string(i) + " has width " + std::to_string(patches[i].size()) +
                                 ", expected " + std::to_string(p));
        }
        raw.insert(raw.end(), patches[i].begin(), patches[i].end());
    }
    const Tensor patch_rows(Shape{patches.size(), p}, std::move(raw));
    const std::size_t length = patches.size() + 1;
    const Tensor parts[] = {params.summary_embedding, matmul(patch_rows, params.patch_projection)};
    Tensor x = add(concat_rows(parts), leading_rows(params.positional_embedding, length));
    const std::vector<bool> pad(length, false);
    for (const auto& mixer : params.mixers) x = mixer_forward(mixer, x, pad);
    x = layer_norm_rows(x);
    const Tensor hidden = gelu(add_row_broadcast(matmul(x, params.projector_hidden), params.projector_hidden_bias));
    const Tensor projected = add_row_broadcast(matmul(hidden, params.projector_out), params.projector_out_bias);
    return TokenMatrix{layer_norm_rows(projected), 0, pad};
}

Tensor encode_relation(const TextEncoderParams& params, std::span<const TokenId> relation_tokens) {
    const TokenMatrix encoded = encode_text(params, relation_tokens);
    const std::size_t row[] = {encoded.summary_index};
    return gather_rows(encoded.features, row);
}

}  // namespace rcml
