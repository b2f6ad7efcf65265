#include "rcml/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rcml/errors.hpp"
#include "rcml/optimizer.hpp"

namespace rcml {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

std::vector<double> normalized_mean(EmbeddingPair p) {
    std::vector<double> m(p.text.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (p.text[i] + p.image[i]);
    const double n = std::sqrt(dot(m, m));
    if (n <= kNormEpsilon) throw DegenerateVectorError("AVG embedding is degenerate (text and image cancel)");
    for (double& x : m) x /= n;
    return m;
}

// Neighbors of each sample under each relation type.
std::map<std::pair<SampleId, int>, std::set<SampleId>> typed_neighbors(std::span<const RelationEdge> edges) {
    std::map<std::pair<SampleId, int>, std::set<SampleId>> out;
    for (const auto& e : edges) {
        out[{e.src, e.relation_type}].insert(e.dst);
        out[{e.dst, e.relation_type}].insert(e.src);
    }
    return out;
}

std::vector<RelationContext> retrieval_contexts(std::span<const RetrievalQuery> queries, bool generic) {
    std::vector<RelationContext> out;
    for (const auto& q : queries) {
        RelationContext ctx = query_context(q, generic);
        if (std::none_of(out.begin(), out.end(), [&](const RelationContext& c) {
                return c.relation_text == ctx.relation_text && c.kind == ctx.kind;
            })) {
            out.push_back(std::move(ctx));
        }
    }
    return out;
}

}  // namespace

const std::vector<SimilarityMode>& all_similarity_modes() {
    static const std::vector<SimilarityMode> modes{SimilarityMode::TT, SimilarityMode::II, SimilarityMode::TI,
                                                   SimilarityMode::IT, SimilarityMode::AVG};
    return modes;
}

std::string to_string(SimilarityMode mode) {
    switch (mode) {
        case SimilarityMode::TT: return "TT";
        case SimilarityMode::II: return "II";
        case SimilarityMode::TI: return "TI";
        case SimilarityMode::IT: return "IT";
        case SimilarityMode::AVG: return "AVG";
    }
    return "?";
}

SimilarityMode parse_similarity_mode(const std::string& text) {
    for (SimilarityMode m : all_similarity_modes()) {
        if (to_string(m) == text) return m;
    }
    throw ConfigError("unknown similarity mode '" + text + "' (expected TT, II, TI, IT, AVG or all)");
}

double mode_similarity(EmbeddingPair a, EmbeddingPair b, SimilarityMode mode) {
    switch (mode) {
        case SimilarityMode::TT: return cosine(a.text, b.text);
        case SimilarityMode::II: return cosine(a.image, b.image);
        case SimilarityMode::TI: return cosine(a.text, b.image);
        case SimilarityMode::IT: return cosine(a.image, b.text);
        case SimilarityMode::AVG: return cosine(normalized_mean(a), normalized_mean(b));
    }
    throw ContractError("unhandled similarity mode");
}

double similarity(const ModelParams& params, const Sample& a, const Sample& b, const RelationContext& context,
                  SimilarityMode mode) {
    const Sample pair[] = {a, b};
    const EmbeddingTable table = embed(params, std::span<const Sample>(pair, a.id == b.id ? 1 : 2),
                                       std::span<const RelationContext>(&context, 1));
    return mode_similarity({table.text(0, a.id), table.image(0, a.id)}, {table.text(0, b.id), table.image(0, b.id)},
                           mode);
}

std::vector<RetrievalQuery> build_retrieval_queries(std::span<const Sample> samples,
                                                    std::span<const RelationEdge> query_edges,
                                                    std::span<const RelationEdge> known_edges,
                                                    std::size_t num_negatives, std::uint64_t seed) {
    const auto neighbors = typed_neighbors(known_edges);
    std::vector<SampleId> ids;
    for (const auto& s : samples) ids.push_back(s.id);
    Rng rng(mix_seed(seed, 0x9e7a1));
    std::vector<RetrievalQuery> out;
    for (const auto& e : query_edges) {
        for (const auto& [anchor, target] : {std::pair{e.src, e.dst}, std::pair{e.dst, e.src}}) {
            auto it = neighbors.find({anchor, e.relation_type});
            const std::set<SampleId> empty;
            const std::set<SampleId>& linked = it == neighbors.end() ? empty : it->second;
            std::vector<SampleId> pool;
            for (SampleId id : ids) {
                if (id != anchor && id != target && !linked.contains(id)) pool.push_back(id);
            }
            if (pool.size() < num_negatives) {
                throw InsufficientNegatives("anchor " + std::to_string(anchor) + " has only " +
                                            std::to_string(pool.size()) + " eligible negatives");
            }
            RetrievalQuery q{anchor, target, e.relation_type, e.relation_text,
                             rng.sample(std::span<const SampleId>(pool), num_negatives)};
            q.candidates.push_back(target);
            std::sort(q.candidates.begin(), q.candidates.end());
            out.push_back(std::move(q));
        }
    }
    return out;
}

std::size_t target_rank(std::span<const SampleId> candidates, std::span<const double> scores, SampleId target) {
    if (candidates.size() != scores.size()) throw DimensionError("one score per candidate required");
    auto it = std::find(candidates.begin(), candidates.end(), target);
    if (it == candidates.end()) throw ContractError("target is not among the candidates");
    const double t = scores[static_cast<std::size_t>(it - candidates.begin())];
    if (std::isnan(t)) throw NumericError("NaN retrieval score");
    std::size_t rank = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i] == target) continue;
        if (std::isnan(scores[i])) throw NumericError("NaN retrieval score");
        if (scores[i] > t || (scores[i] == t && candidates[i] < target)) ++rank;
    }
    return rank;
}

double retrieval_eval(std::span<const RetrievalQuery> queries, const QueryScorer& scorer, std::size_t k) {
    if (queries.empty()) throw ConfigError("retrieval_eval: no queries");
    std::size_t hits = 0;
    for (const auto& q : queries) {
        const auto scores = scorer(q);
        if (target_rank(q.candidates, scores, q.target) < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

RelationContext query_context(const RetrievalQuery& query, bool generic_relation_text) {
    return RelationContext{generic_relation_text ? generic_intra_relation() : query.relation_text, PairKind::inter,
                           query.relation_type};
}

QueryScorer table_scorer(const EmbeddingTable& table, SimilarityMode mode, bool generic_relation_text) {
    return [&table, mode, generic_relation_text](const RetrievalQuery& q) {
        const std::size_t c = table.context_index(query_context(q, generic_relation_text));
        const EmbeddingPair a{table.text(c, q.anchor), table.image(c, q.anchor)};
        std::vector<double> scores;
        for (SampleId id : q.candidates) scores.push_back(mode_similarity(a, {table.text(c, id), table.image(c, id)}, mode));
        return scores;
    };
}

std::vector<TypeQuery> build_type_queries(std::span<const RelationEdge> edges) {
    std::vector<TypeQuery> out;
    for (const auto& e : edges) out.push_back({e.src, e.dst, e.relation_type});
    return out;
}

bool relation_type_predict(std::span<const double> type_scores, int true_type, std::size_t top_k) {
    if (type_scores.size() < top_k) {
        throw ConfigError("type prediction needs at least top_k = " + std::to_string(top_k) + " candidate types");
    }
    if (true_type < 0 || static_cast<std::size_t>(true_type) >= type_scores.size()) {
        throw BoundsError("true relation type out of range");
    }
    const double t = type_scores[static_cast<std::size_t>(true_type)];
    std::size_t better = 0;
    for (std::size_t r = 0; r < type_scores.size(); ++r) {
        if (static_cast<int>(r) == true_type) continue;
        if (type_scores[r] > t || (type_scores[r] == t && static_cast<int>(r) < true_type)) ++better;
    }
    return better < top_k;
}

double type_prediction_eval(std::span<const TypeQuery> queries, const TypeScorer& scorer, std::size_t num_types,
                            std::size_t top_k) {
    if (num_types < top_k) throw ConfigError("fewer relation types than top_k");
    if (queries.empty()) throw ConfigError("type_prediction_eval: no queries");
    std::size_t hits = 0;
    for (const auto& q : queries) {
        const auto scores = scorer(q);
        if (scores.size() != num_types) throw DimensionError("one score per relation type required");
        if (relation_type_predict(scores, q.true_type, top_k)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

std::vector<RelationContext> type_contexts(const Dataset& dataset, bool generic_relation_text) {
    std::vector<RelationContext> out;
    for (std::size_t r = 0; r < dataset.num_relation_types; ++r) {
        const int type = static_cast<int>(r);
        out.push_back(RelationContext{generic_relation_text ? generic_intra_relation() : dataset.relation_text(type),
                                      PairKind::inter, type});
    }
    return out;
}

std::vector<ValidityExample> build_validity_examples(std::span<const Sample> samples,
                                                     std::span<const RelationEdge> positive_edges,
                                                     std::span<const RelationEdge> known_edges,
                                                     std::size_t num_relation_types, std::uint64_t seed) {
    if (num_relation_types < 2) throw ConfigError("validity needs at least two relation types");
    std::set<std::tuple<SampleId, SampleId, int>> known;
    std::map<SampleId, std::set<SampleId>> linked;
    for (const auto& e : known_edges) {
        known.insert({std::min(e.src, e.dst), std::max(e.src, e.dst), e.relation_type});
        linked[e.src].insert(e.dst);
        linked[e.dst].insert(e.src);
    }
    Rng rng(mix_seed(seed, 0xa11d));
    std::vector<ValidityExample> out;
    for (std::size_t i = 0; i < positive_edges.size(); ++i) {
        const auto& e = positive_edges[i];
        out.push_back({e.src, e.dst, e.relation_type, 1, i});
        const bool corrupt = i % 2 == 0;
        bool placed = false;
        for (int tries = 0; tries < 64 && !placed; ++tries) {
            if (corrupt) {
                const int r = static_cast<int>(rng.below(num_relation_types));
                if (r == e.relation_type || known.contains({std::min(e.src, e.dst), std::max(e.src, e.dst), r})) continue;
                out.push_back({e.src, e.dst, r, 0, i});
                placed = true;
            } else {
                const SampleId other = samples[rng.below(samples.size())].id;
                if (other == e.src || linked[e.src].contains(other)) continue;
                out.push_back({e.src, other, e.relation_type, 0, i});
                placed = true;
            }
        }
        if (!placed) throw InsufficientNegatives("no validity negative found for edge " + std::to_string(e.src) + "-" +
                                                 std::to_string(e.dst));
    }
    return out;
}

std::vector<std::vector<double>> validity_features(const EmbeddingTable& table,
                                                   std::span<const ValidityExample> examples,
                                                   std::span<const RelationContext> contexts) {
    std::vector<std::vector<double>> out;
    for (const auto& ex : examples) {
        const std::size_t c = table.context_index(contexts[static_cast<std::size_t>(ex.relation_type)]);
        std::vector<double> f;
        for (auto part : {table.text(c, ex.a), table.image(c, ex.a), table.text(c, ex.b), table.image(c, ex.b),
                          table.relation(c)}) {
            f.insert(f.end(), part.begin(), part.end());
        }
        out.push_back(std::move(f));
    }
    return out;
}

ProbeResult validity_eval(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                          const ProbeConfig& config, std::span<const std::size_t> groups) {
    if (features.size() != labels.size() || features.empty()) throw DimensionError("one label per feature row required");
    const double positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double share = positives / static_cast<double>(labels.size());
    if (share < 0.4 || share > 0.6) {
        throw ConfigError("validity labels are imbalanced beyond 60/40 (positive share " + std::to_string(share) + ")");
    }
    if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
    const std::size_t dim = features.front().size();

    if (!groups.empty() && groups.size() != features.size()) throw DimensionError("one group per feature row required");
    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < features.size(); ++i) members[groups.empty() ? i : groups[i]].push_back(i);
    std::vector<const std::vector<std::size_t>*> shuffled;
    for (const auto& [id, rows] : members) shuffled.push_back(&rows);
    Rng rng(mix_seed(config.seed, 0x960be));
    rng.shuffle(shuffled);
    const std::size_t train_groups =
        static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(shuffled.size())));
    std::vector<std::size_t> order;
    std::size_t n_train = 0;
    for (std::size_t g = 0; g < shuffled.size(); ++g) {
        order.insert(order.end(), shuffled[g]->begin(), shuffled[g]->end());
        if (g + 1 == train_groups) n_train = order.size();
    }
    if (n_train == 0 || n_train == order.size()) throw ConfigError("probe split leaves an empty side");

    // Standardize with training statistics.
    std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
    for (std::size_t i = 0; i < n_train; ++i) {
        for (std::size_t j = 0; j < dim; ++j) mu[j] += features[order[i]][j];
    }
    for (double& m : mu) m /= static_cast<double>(n_train);
    for (std::size_t i = 0; i < n_train; ++i) {
        for (std::size_t j = 0; j < dim; ++j) sd[j] += std::pow(features[order[i]][j] - mu[j], 2);
    }
    for (double& s : sd) s = std::sqrt(s / static_cast<double>(n_train)) + 1e-8;
    auto design = [&](std::size_t begin, std::size_t end) {
        std::vector<double> v;
        v.reserve((end - begin) * dim);
        for (std::size_t i = begin; i < end; ++i) {
            if (features[order[i]].size() != dim) throw DimensionError("ragged validity features");
            for (std::size_t j = 0; j < dim; ++j) v.push_back((features[order[i]][j] - mu[j]) / sd[j]);
        }
        return Tensor({end - begin, dim}, std::move(v));
    };
    const Tensor x_train = design(0, n_train);
    const Tensor x_test = design(n_train, order.size());
    std::vector<double> y_train;
    for (std::size_t i = 0; i < n_train; ++i) y_train.push_back(labels[order[i]]);

    Tensor w = Tensor::zeros({dim, 1}, true);
    Tensor b = Tensor::zeros({1, 1}, true);
    const std::vector<NamedTensor> params{{"probe.weight", w}, {"probe.bias", b}};
    AdamWState state = AdamWState::zeros(params);
    const Tensor ones = Tensor::full({n_train, 1}, 1.0);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Tape tape;
        Tape::Scope scope(&tape);
        w.zero_grad();
        b.zero_grad();
        const Tensor logits = add(matmul(x_train, w), matmul(ones, b));
        backward(bce_with_logits_mean(logits, y_train));
        optimizer_step(params, collect_grads(params), state, config.learning_rate, config.weight_decay);
    }

    auto accuracy = [&](const Tensor& x, std::size_t begin) {
        Tape::Scope none(nullptr);
        const Tensor logits = matmul(x, w);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const int predicted = logits.values()[i] + b.item() > 0.0 ? 1 : 0;
            if (predicted == labels[order[begin + i]]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(x.rows());
    };
    return ProbeResult{accuracy(x_train, 0), accuracy(x_test, n_train), n_train, order.size() - n_train};
}

// ---------------------------------------------------------------------------

std::optional<double> MetricsReport::hit(SimilarityMode mode) const {
    for (const auto& m : hit_at_5) {
        if (m.mode == mode) return m.value;
    }
    return std::nullopt;
}

void MetricsReport::validate() const {
    auto check = [](double v, const std::string& what) {
        if (!(v >= 0.0 && v <= 1.0)) throw NumericError(what + " = " + std::to_string(v) + " is outside [0, 1]");
    };
    for (const auto& m : hit_at_5) check(m.value, "Hit@5 " + to_string(m.mode));
    if (type_top3) check(*type_top3, "type Top-3 accuracy");
    if (validity_accuracy) check(*validity_accuracy, "validity accuracy");
    if (validity_shuffled_accuracy) check(*validity_shuffled_accuracy, "shuffled validity accuracy");
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["tag"] = tag;
    j["config_hash"] = config_hash;
    nlohmann::ordered_json hits = nlohmann::ordered_json::object();
    for (const auto& m : hit_at_5) hits[to_string(m.mode)] = m.value;
    j["hit_at_5"] = hits;
    j["type_top3_accuracy"] = type_top3 ? nlohmann::ordered_json(*type_top3) : nlohmann::ordered_json(nullptr);
    j["validity_accuracy"] =
        validity_accuracy ? nlohmann::ordered_json(*validity_accuracy) : nlohmann::ordered_json(nullptr);
    j["validity_shuffled_accuracy"] = validity_shuffled_accuracy ? nlohmann::ordered_json(*validity_shuffled_accuracy)
                                                                 : nlohmann::ordered_json(nullptr);
    j["counts"] = {{"retrieval_queries", retrieval_queries},
                   {"type_queries", type_queries},
                   {"validity_examples", validity_examples},
                   {"inter_pair_count", inter_pair_count}};
    return j.dump(2);
}

std::string MetricsReport::to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << std::left << std::setw(28) << "tag" << tag << '\n';
    os << std::setw(28) << "config_hash" << config_hash << '\n';
    for (const auto& m : hit_at_5) os << std::setw(28) << ("hit@5 " + to_string(m.mode)) << m.value << '\n';
    if (type_top3) os << std::setw(28) << "type top-3 accuracy" << *type_top3 << '\n';
    if (validity_accuracy) os << std::setw(28) << "validity accuracy" << *validity_accuracy << '\n';
    if (validity_shuffled_accuracy) os << std::setw(28) << "validity (shuffled labels)" << *validity_shuffled_accuracy << '\n';
    os << std::setw(28) << "retrieval queries" << retrieval_queries << '\n';
    os << std::setw(28) << "inter pairs in training" << inter_pair_count << '\n';
    return os.str();
}

MetricsReport evaluate(const ModelParams& params, const Dataset& dataset, std::span<const RelationEdge> eval_edges,
                       const EvalOptions& options) {
    MetricsReport report;
    const bool generic = options.generic_relation_text;
    if (options.retrieval) {
        const auto queries =
            build_retrieval_queries(dataset.samples, eval_edges, dataset.edges, options.num_negatives, options.seed);
        const auto contexts = retrieval_contexts(queries, generic);
        const EmbeddingTable table = embed(params, dataset.samples, contexts, options.workers);
        for (SimilarityMode mode : options.modes) {
            report.hit_at_5.push_back({mode, retrieval_eval(queries, table_scorer(table, mode, generic), options.top_k)});
        }
        report.retrieval_queries = queries.size();
    }
    if (options.type_prediction || options.validity) {
        const auto contexts = type_contexts(dataset, generic);
        const EmbeddingTable table = embed(params, dataset.samples, contexts, options.workers);
        if (options.type_prediction) {
            const auto queries = build_type_queries(eval_edges);
            const TypeScorer scorer = [&](const TypeQuery& q) {
                std::vector<double> scores;
                for (std::size_t c = 0; c < contexts.size(); ++c) {
                    scores.push_back(mode_similarity({table.text(c, q.a), table.image(c, q.a)},
                                                     {table.text(c, q.b), table.image(c, q.b)}, SimilarityMode::AVG));
                }
                return scores;
            };
            report.type_top3 = type_prediction_eval(queries, scorer, dataset.num_relation_types, options.type_top_k);
            report.type_queries = queries.size();
        }
        if (options.validity) {
            const auto examples = build_validity_examples(dataset.samples, eval_edges, dataset.edges,
                                                          dataset.num_relation_types, options.seed);
            const auto features = validity_features(table, examples, contexts);
            std::vector<int> labels;
            std::vector<std::size_t> groups;
            for (const auto& ex : examples) {
                labels.push_back(ex.label);
                groups.push_back(ex.group);
            }
            report.validity_accuracy = validity_eval(features, labels, options.probe, groups).test_accuracy;
            // Chance-level control, averaged over several label permutations.
            Rng rng(mix_seed(options.seed, 0x5bff1e));
            double control = 0.0;
            for (std::size_t k = 0; k < kShuffledControlRepeats; ++k) {
                std::vector<int> shuffled = labels;
                rng.shuffle(shuffled);
                control += validity_eval(features, shuffled, options.probe, groups).test_accuracy;
            }
            report.validity_shuffled_accuracy = control / static_cast<double>(kShuffledControlRepeats);
            report.validity_examples = examples.size();
        }
    }
    report.validate();
    return report;
}

void dump_embeddings(const ModelParams& params, const Dataset& dataset, std::ostream& out, std::size_t workers) {
    const auto contexts = type_contexts(dataset, false);
    const EmbeddingTable table = embed(params, dataset.samples, contexts, workers);
    for (const auto& s : dataset.samples) {
        for (std::size_t c = 0; c < contexts.size(); ++c) {
            const auto zt = table.text(c, s.id);
            const auto zi = table.image(c, s.id);
            nlohmann::ordered_json j{{"id", s.id},
                                     {"relation_type", contexts[c].relation_type},
                                     {"z_text", std::vector<double>(zt.begin(), zt.end())},
                                     {"z_image", std::vector<double>(zi.begin(), zi.end())}};
            out << j.dump() << '\n';
        }
    }
}

}  // namespace rcml
