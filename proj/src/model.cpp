#include "rcml/model.hpp"

#include <algorithm>
#include <map>
#include <thread>

#include "rcml/errors.hpp"

namespace rcml {

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    ModelParams p;
    p.config = config;
    p.text = TextEncoderParams::init(config.dims, rng, config.init_std);
    p.image = ImageEncoderParams::init(config.dims, rng, config.init_std);
    p.attention = AttentionParams::init(config.dims.width, rng, config.init_std, config.beta, config.beta_one_mode);
    return p;
}

std::vector<NamedTensor> ModelParams::encoder_tensors() const {
    std::vector<NamedTensor> out;
    text.collect(out);
    image.collect(out);
    return out;
}

std::vector<NamedTensor> ModelParams::attention_tensors() const {
    std::vector<NamedTensor> out;
    attention.collect(out);
    return out;
}

std::vector<NamedTensor> ModelParams::named() const {
    std::vector<NamedTensor> out = encoder_tensors();
    attention.collect(out);
    return out;
}

ModelParams ModelParams::deep_copy() const {
    ModelParams copy = *this;
    auto clone_mixers = [](std::vector<MixerParams>& mixers) {
        for (auto& m : mixers) {
            for (Tensor* t : {&m.query, &m.key, &m.value, &m.output, &m.ff_hidden, &m.ff_hidden_bias, &m.ff_out,
                              &m.ff_out_bias}) {
                *t = t->clone();
            }
        }
    };
    for (Tensor* t : {&copy.text.token_embedding, &copy.text.positional_embedding, &copy.image.patch_projection,
                      &copy.image.summary_embedding, &copy.image.positional_embedding, &copy.image.projector_hidden,
                      &copy.image.projector_hidden_bias, &copy.image.projector_out, &copy.image.projector_out_bias,
                      &copy.attention.w_query, &copy.attention.w_key, &copy.attention.w_value,
                      &copy.attention.w_out}) {
        *t = t->clone();
    }
    clone_mixers(copy.text.mixers);
    clone_mixers(copy.image.mixers);
    return copy;
}

void ModelParams::set_encoders_trainable(bool trainable) {
    for (auto& nt : encoder_tensors()) {
        Tensor t = nt.tensor;
        t.set_requires_grad(trainable);
    }
}

SampleIndex::SampleIndex(std::span<const Sample> samples) {
    for (const auto& s : samples) {
        if (!by_id_.emplace(s.id, &s).second) throw IntegrityError("duplicate sample id " + std::to_string(s.id));
    }
}

const Sample& SampleIndex::at(SampleId id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw IntegrityError("unknown sample id " + std::to_string(id));
    return *it->second;
}

EncodedSample encode_sample(const ModelParams& params, const Sample& sample) {
    return EncodedSample{encode_text(params.text, sample.text_tokens), encode_image(params.image, sample.image_patches)};
}

Tensor context_masks(const ModelParams& params, std::span<const PairKind> kinds, const TokenMatrix& tokens) {
    const std::size_t length = tokens.length();
    std::vector<double> v(kinds.size() * length, 0.0);
    for (std::size_t c = 0; c < kinds.size(); ++c) {
        if (kinds[c] == PairKind::intra || params.attention.hard_pooling()) v[c * length + tokens.summary_index] = 1.0;
    }
    return Tensor({kinds.size(), length}, std::move(v));
}

PooledSample pool_sample(const ModelParams& params, const EncodedSample& encoded, const Tensor& relation_embeddings,
                         std::span<const PairKind> kinds) {
    if (relation_embeddings.rows() != kinds.size()) {
        throw DimensionError("pool_sample: " + std::to_string(relation_embeddings.rows()) + " relation rows for " +
                             std::to_string(kinds.size()) + " contexts");
    }
    auto pool = [&](const TokenMatrix& tokens) {
        const Tensor q = relation_query(relation_embeddings, tokens, params.attention);
        const Tensor a = relation_attention(q, context_masks(params, kinds, tokens), params.attention);
        return contextual_features(a, tokens, params.attention);
    };
    return PooledSample{pool(encoded.text), pool(encoded.image)};
}

BatchFeatures batch_features(const ModelParams& params, const PairBatch& batch, const SampleIndex& samples) {
    // Contexts in order of first appearance among the positives.
    std::vector<RelationContext> contexts;
    std::vector<std::size_t> pair_context(batch.positives.size());
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        const auto& p = batch.positives[i];
        RelationContext ctx{p.edge.relation_text, p.kind, p.edge.relation_type};
        auto it = std::find_if(contexts.begin(), contexts.end(), [&](const RelationContext& c) {
            return c.relation_text == ctx.relation_text && c.kind == ctx.kind;
        });
        if (it == contexts.end()) {
            contexts.push_back(ctx);
            pair_context[i] = contexts.size() - 1;
        } else {
            pair_context[i] = static_cast<std::size_t>(it - contexts.begin());
        }
    }

    // One encoder pass per distinct relation text.
    std::map<TokenList, Tensor> relation_cache;
    std::vector<Tensor> relation_rows;
    std::vector<PairKind> kinds;
    for (const auto& ctx : contexts) {
        auto it = relation_cache.find(ctx.relation_text);
        if (it == relation_cache.end()) {
            it = relation_cache.emplace(ctx.relation_text, encode_relation(params.text, ctx.relation_text)).first;
        }
        relation_rows.push_back(it->second);
        kinds.push_back(ctx.kind);
    }
    const Tensor relation_embeddings = concat_rows(relation_rows);

    std::unordered_map<SampleId, std::size_t> slot;
    std::vector<Tensor> pooled_text, pooled_image;
    for (std::size_t s = 0; s < batch.roster.size(); ++s) {
        slot[batch.roster[s]] = s;
        const EncodedSample encoded = encode_sample(params, samples.at(batch.roster[s]));
        PooledSample pooled = pool_sample(params, encoded, relation_embeddings, kinds);
        pooled_text.push_back(std::move(pooled.text));
        pooled_image.push_back(std::move(pooled.image));
    }

    BatchFeatures out;
    for (std::size_t c = 0; c < contexts.size(); ++c) {
        const std::vector<std::size_t> rows(batch.roster.size(), c);
        out.contexts.push_back(FeatureContext{select_rows(pooled_text, rows), select_rows(pooled_image, rows),
                                              contexts[c].relation_text, contexts[c].kind, contexts[c].relation_type});
    }
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        const auto& p = batch.positives[i];
        PairTerm term{pair_context[i], slot.at(p.anchor), slot.at(p.partner), {}, p.kind};
        auto negs = batch.negatives.find(p.anchor);
        if (negs == batch.negatives.end()) throw ContractError("batch has no negatives for anchor " + std::to_string(p.anchor));
        for (SampleId k : negs->second) term.negatives.push_back(slot.at(k));
        out.pairs.push_back(std::move(term));
    }
    return out;
}

// ---------------------------------------------------------------------------

EmbeddingTable::EmbeddingTable(std::vector<SampleId> ids, std::vector<RelationContext> contexts, std::size_t width)
    : ids_(std::move(ids)), contexts_(std::move(contexts)), width_(width) {
    for (std::size_t i = 0; i < ids_.size(); ++i) slot_[ids_[i]] = i;
    text_.assign(contexts_.size(), std::vector<double>(ids_.size() * width_, 0.0));
    image_.assign(contexts_.size(), std::vector<double>(ids_.size() * width_, 0.0));
    relation_.assign(contexts_.size(), std::vector<double>(width_, 0.0));
}

std::size_t EmbeddingTable::context_index(const RelationContext& ctx) const {
    for (std::size_t c = 0; c < contexts_.size(); ++c) {
        if (contexts_[c].relation_text == ctx.relation_text && contexts_[c].kind == ctx.kind) return c;
    }
    throw ContractError("embedding table has no such relation context");
}

bool EmbeddingTable::has_context(const RelationContext& ctx) const {
    return std::any_of(contexts_.begin(), contexts_.end(), [&](const RelationContext& c) {
        return c.relation_text == ctx.relation_text && c.kind == ctx.kind;
    });
}

std::size_t EmbeddingTable::slot(SampleId id) const {
    auto it = slot_.find(id);
    if (it == slot_.end()) throw IntegrityError("embedding table has no sample " + std::to_string(id));
    return it->second;
}

std::span<const double> EmbeddingTable::text(std::size_t context, SampleId id) const {
    return std::span<const double>(text_.at(context)).subspan(slot(id) * width_, width_);
}

std::span<const double> EmbeddingTable::image(std::size_t context, SampleId id) const {
    return std::span<const double>(image_.at(context)).subspan(slot(id) * width_, width_);
}

std::span<const double> EmbeddingTable::relation(std::size_t context) const { return relation_.at(context); }

std::span<double> EmbeddingTable::mutable_text(std::size_t context, std::size_t s) {
    return std::span<double>(text_.at(context)).subspan(s * width_, width_);
}

std::span<double> EmbeddingTable::mutable_image(std::size_t context, std::size_t s) {
    return std::span<double>(image_.at(context)).subspan(s * width_, width_);
}

std::span<double> EmbeddingTable::mutable_relation(std::size_t context) { return relation_.at(context); }

EmbeddingTable embed(const ModelParams& params, std::span<const Sample> samples,
                     std::span<const RelationContext> contexts, std::size_t workers) {
    Tape::Scope no_recording(nullptr);
    const std::size_t d = params.config.dims.width;
    std::vector<SampleId> ids;
    for (const auto& s : samples) ids.push_back(s.id);
    EmbeddingTable table(ids, std::vector<RelationContext>(contexts.begin(), contexts.end()), d);
    if (contexts.empty()) return table;

    std::vector<Tensor> relation_rows;
    std::vector<PairKind> kinds;
    for (std::size_t c = 0; c < contexts.size(); ++c) {
        relation_rows.push_back(encode_relation(params.text, contexts[c].relation_text));
        kinds.push_back(contexts[c].kind);
        std::copy_n(relation_rows.back().values().begin(), d, table.mutable_relation(c).begin());
    }
    const Tensor relation_embeddings = concat_rows(relation_rows);

    auto run = [&](std::size_t begin, std::size_t end) {
        Tape::Scope worker_no_recording(nullptr);
        for (std::size_t s = begin; s < end; ++s) {
            const PooledSample pooled = pool_sample(params, encode_sample(params, samples[s]), relation_embeddings, kinds);
            for (std::size_t c = 0; c < contexts.size(); ++c) {
                std::copy_n(pooled.text.values().begin() + c * d, d, table.mutable_text(c, s).begin());
                std::copy_n(pooled.image.values().begin() + c * d, d, table.mutable_image(c, s).begin());
            }
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, samples.size()));
    if (workers == 1) {
        run(0, samples.size());
        return table;
    }
    std::vector<std::thread> threads;
    const std::size_t chunk = (samples.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk, end = std::min(samples.size(), begin + chunk);
        if (begin < end) threads.emplace_back(run, begin, end);
    }
    for (auto& t : threads) t.join();
    return table;
}

}  // namespace rcml
