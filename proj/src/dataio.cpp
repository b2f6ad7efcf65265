#include "rcml/dataio.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "rcml/errors.hpp"
#include "rcml/hashing.hpp"

namespace rcml {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

std::vector<std::vector<std::size_t>> combinations(std::size_t first, std::size_t last, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    auto rec = [&](auto&& self, std::size_t start) -> void {
        if (cur.size() == k) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = start; i < last; ++i) {
            cur.push_back(i);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    rec(rec, first);
    return out;
}

// Every way to pick relation_rank agreeing and anti_rank disagreeing
// coordinates outside the category block, as (dim, sign) lists.
std::vector<std::vector<std::pair<std::size_t, double>>> sign_patterns(const GeneratorConfig& c) {
    std::vector<std::vector<std::pair<std::size_t, double>>> out;
    const std::size_t k = c.relation_rank + c.anti_rank;
    if (c.category_dims + k > c.latent_dim) return out;
    for (const auto& dims : combinations(c.category_dims, c.latent_dim, k)) {
        for (const auto& positive : combinations(0, k, c.relation_rank)) {
            std::vector<std::pair<std::size_t, double>> p;
            for (std::size_t i = 0; i < k; ++i) {
                const bool pos = std::find(positive.begin(), positive.end(), i) != positive.end();
                p.emplace_back(dims[i], pos ? 1.0 : -1.0);
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::size_t filler_begin(const GeneratorConfig& c) {
    return static_cast<std::size_t>(vocab::kFirstTopicToken) + c.latent_dim * c.value_bins;
}

ordered_json config_json(const GeneratorConfig& c) {
    return ordered_json{{"num_samples", c.num_samples},
                        {"num_relation_types", c.num_relation_types},
                        {"vocab_size", c.vocab_size},
                        {"latent_dim", c.latent_dim},
                        {"edge_threshold", c.edge_threshold},
                        {"patches_per_item", c.patches_per_item},
                        {"patch_width", c.patch_width},
                        {"tokens_per_item", c.tokens_per_item},
                        {"noise_std", c.noise_std},
                        {"seed", c.seed},
                        {"category_dims", c.category_dims},
                        {"category_scale", c.category_scale},
                        {"sign_jitter", c.sign_jitter},
                        {"relation_rank", c.relation_rank},
                        {"anti_rank", c.anti_rank},
                        {"domain_size", c.domain_size},
                        {"edge_keep_rate", c.edge_keep_rate},
                        {"value_bins", c.value_bins},
                        {"filler_rate", c.filler_rate},
                        {"max_attempts", c.max_attempts},
                        {"test_fraction", c.test_fraction}};
}

struct Attempt {
    GeneratedDataset data;
    std::vector<std::size_t> edges_per_type;
};

Attempt generate_once(const GeneratorConfig& c, std::uint64_t seed) {
    Rng root(seed);
    Rng latent_rng = root.fork(1), form_rng = root.fork(2), map_rng = root.fork(3), text_rng = root.fork(4),
        noise_rng = root.fork(5), keep_rng = root.fork(6), domain_rng = root.fork(7);
    const std::size_t h = c.latent_dim;

    Attempt out;
    GeneratedDataset& g = out.data;
    g.config = c;

    std::vector<double> spread(h, 1.0);
    for (std::size_t k = 0; k < c.category_dims; ++k) spread[k] = c.category_scale;
    g.latents.assign(c.num_samples, std::vector<double>(h));
    for (auto& u : g.latents) {
        for (std::size_t k = 0; k < h; ++k) {
            if (k < c.category_dims) {
                u[k] = spread[k] * latent_rng.normal();
            } else {
                const double sign = latent_rng.uniform() < 0.5 ? -1.0 : 1.0;
                u[k] = sign * (1.0 + c.sign_jitter * latent_rng.normal());
            }
        }
    }

    auto patterns = sign_patterns(c);
    std::vector<std::size_t> order(patterns.size());
    std::iota(order.begin(), order.end(), 0);
    form_rng.shuffle(order);
    for (std::size_t r = 0; r < c.num_relation_types; ++r) {
        RelationForm f;
        for (const auto& [dim, sign] : patterns[order[r]]) {
            f.dims.push_back(dim);
            f.weights.push_back(sign * form_rng.uniform(0.9, 1.1));
        }
        if (c.domain_size > 0) {
            std::vector<int> cats(std::size_t{1} << c.category_dims);
            std::iota(cats.begin(), cats.end(), 0);
            domain_rng.shuffle(cats);
            f.domain.assign(cats.begin(), cats.begin() + static_cast<std::ptrdiff_t>(c.domain_size));
            std::sort(f.domain.begin(), f.domain.end());
        }
        g.forms.push_back(std::move(f));
    }

    for (std::size_t t = 0; t < c.patches_per_item; ++t) {
        g.patch_map.dim.push_back(t % h);
        std::vector<double> gain(c.patch_width);
        for (double& x : gain) x = map_rng.normal();
        g.patch_map.gain.push_back(std::move(gain));
    }

    Dataset& d = g.dataset;
    d.num_relation_types = c.num_relation_types;
    d.vocab_size = c.vocab_size;
    d.patch_width = c.patch_width;
    d.test_fraction = c.test_fraction;
    d.split_seed = c.seed;

    const std::size_t filler = filler_begin(c);
    for (std::size_t i = 0; i < c.num_samples; ++i) {
        const auto& u = g.latents[i];
        Sample s;
        s.id = static_cast<SampleId>(i);

        std::vector<double> weight(h);
        std::vector<std::size_t> bin(h);
        for (std::size_t k = 0; k < h; ++k) {
            const double z = u[k] / spread[k];
            weight[k] = std::exp(std::abs(z));
            const double pos = std::floor((z + 3.0) / 6.0 * static_cast<double>(c.value_bins));
            bin[k] = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(c.value_bins - 1)));
        }
        const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
        std::vector<std::size_t> cover(h);
        std::iota(cover.begin(), cover.end(), 0);
        text_rng.shuffle(cover);
        for (std::size_t t = 0; t < c.tokens_per_item; ++t) {
            if (text_rng.uniform() < c.filler_rate) {
                s.text_tokens.push_back(static_cast<TokenId>(filler + text_rng.below(c.vocab_size - filler)));
                continue;
            }
            std::size_t k = 0;
            if (t < h) {
                k = cover[t];
            } else {
                double pick = text_rng.uniform() * total;
                while (k + 1 < h && pick >= weight[k]) pick -= weight[k++];
            }
            s.text_tokens.push_back(
                static_cast<TokenId>(vocab::kFirstTopicToken + static_cast<TokenId>(k * c.value_bins + bin[k])));
        }
        s.text_tokens.push_back(kEotToken);

        for (std::size_t t = 0; t < c.patches_per_item; ++t) {
            Patch p(c.patch_width);
            const double coord = u[g.patch_map.dim[t]];
            for (std::size_t j = 0; j < c.patch_width; ++j) {
                p[j] = g.patch_map.gain[t][j] * coord;
                if (c.noise_std > 0.0) p[j] += c.noise_std * noise_rng.normal();
            }
            s.image_patches.push_back(std::move(p));
        }

        int category = 0;
        for (std::size_t k = 0; k < c.category_dims; ++k) {
            if (u[k] > 0.0) category |= 1 << k;
        }
        s.category = category;
        d.samples.push_back(std::move(s));
    }

    out.edges_per_type.assign(c.num_relation_types, 0);
    for (std::size_t r = 0; r < c.num_relation_types; ++r) {
        const RelationForm& f = g.forms[r];
        const TokenList text = vocab::relation_tokens(r);
        for (std::size_t i = 0; i < c.num_samples; ++i) {
            if (!f.admits(d.samples[i].category)) continue;
            for (std::size_t j = i + 1; j < c.num_samples; ++j) {
                if (!f.admits(d.samples[j].category)) continue;
                if (f.score(g.latents[i], g.latents[j]) > c.edge_threshold && keep_rng.uniform() < c.edge_keep_rate) {
                    d.edges.push_back(RelationEdge{static_cast<SampleId>(i), static_cast<SampleId>(j), text,
                                                   static_cast<int>(r)});
                    ++out.edges_per_type[r];
                }
            }
        }
    }
    return out;
}

[[noreturn]] void line_error(const std::filesystem::path& file, std::size_t line, const std::string& what) {
    throw ParseError(file.filename().string() + ":" + std::to_string(line) + ": " + what);
}

template <typename T>
T field(const nlohmann::json& obj, const char* key, const std::filesystem::path& file, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) line_error(file, line, std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        line_error(file, line, std::string("field '") + key + "' has the wrong type");
    }
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path.string());
    std::string text;
    std::size_t line = 0;
    while (std::getline(is, text)) {
        ++line;
        if (text.empty()) line_error(path, line, "empty line");
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            line_error(path, line, std::string("malformed JSON (") + e.what() + ")");
        }
        if (!obj.is_object()) line_error(path, line, "expected a JSON object");
        fn(obj, line);
    }
}

}  // namespace

void GeneratorConfig::validate() const {
    if (num_samples < 2) throw ConfigError("num_samples must be at least 2");
    if (num_relation_types < 2) throw ConfigError("num_relation_types must be at least 2");
    if (num_relation_types > vocab::num_type_names()) {
        throw ConfigError("num_relation_types exceeds the " + std::to_string(vocab::num_type_names()) +
                          " available type names");
    }
    if (latent_dim < 1 || category_dims >= latent_dim) throw ConfigError("category_dims must be below latent_dim");
    if (relation_rank < 1 || relation_rank + anti_rank > latent_dim - category_dims) {
        throw ConfigError("relation_rank must be positive and relation_rank + anti_rank at most latent_dim - category_dims");
    }
    if (sign_patterns(*this).size() < num_relation_types) {
        throw ConfigError("not enough distinct relation subspaces for num_relation_types");
    }
    if (domain_size > (std::size_t{1} << category_dims)) {
        throw ConfigError("domain_size exceeds the " + std::to_string(std::size_t{1} << category_dims) + " categories");
    }
    if (value_bins < 1) throw ConfigError("value_bins must be positive");
    if (vocab_size <= filler_begin(*this)) {
        throw ConfigError("vocab_size must exceed " + std::to_string(filler_begin(*this)));
    }
    if (patches_per_item < 1 || patch_width < 1) throw ConfigError("patch sizes must be positive");
    if (tokens_per_item < 1) throw ConfigError("tokens_per_item must be positive");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
    if (!(filler_rate >= 0.0 && filler_rate < 1.0)) throw ConfigError("filler_rate must be in [0, 1)");
    if (!std::isfinite(edge_threshold)) throw ConfigError("edge_threshold must be finite");
    if (!(edge_keep_rate > 0.0 && edge_keep_rate <= 1.0)) throw ConfigError("edge_keep_rate must be in (0, 1]");
    if (!(sign_jitter >= 0.0)) throw ConfigError("sign_jitter must be non-negative");
    if (max_attempts < 1) throw ConfigError("max_attempts must be positive");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
}

double RelationForm::score(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dims.size(); ++i) s += weights[i] * a[dims[i]] * b[dims[i]];
    return s;
}

bool RelationForm::admits(int category) const {
    return domain.empty() || std::binary_search(domain.begin(), domain.end(), category);
}

double RelationForm::cosine(std::span<const double> a, std::span<const double> b) const {
    double na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        na += std::abs(weights[i]) * a[dims[i]] * a[dims[i]];
        nb += std::abs(weights[i]) * b[dims[i]] * b[dims[i]];
    }
    return score(a, b) / std::max(std::sqrt(na * nb), 1e-300);
}

TokenList Dataset::relation_text(int relation_type) const {
    if (relation_type < 0 || static_cast<std::size_t>(relation_type) >= num_relation_types) {
        throw BoundsError("relation type " + std::to_string(relation_type) + " out of range");
    }
    return vocab::relation_tokens(static_cast<std::size_t>(relation_type));
}

DatasetFiles DatasetFiles::in(const std::filesystem::path& dir) {
    return DatasetFiles{dir / "samples.jsonl", dir / "edges.jsonl", dir / "manifest.json"};
}

std::string generator_config_hash(const GeneratorConfig& config) { return sha1_hex(config_json(config).dump()); }

GeneratedDataset generate(const GeneratorConfig& config) {
    config.validate();
    for (std::size_t attempt = 0; attempt < config.max_attempts; ++attempt) {
        const std::uint64_t seed = attempt == 0 ? config.seed : mix_seed(config.seed, attempt);
        Attempt a = generate_once(config, seed);
        std::vector<std::size_t> empty;
        for (std::size_t r = 0; r < a.edges_per_type.size(); ++r) {
            if (a.edges_per_type[r] == 0) empty.push_back(r);
        }
        if (empty.empty()) {
            a.data.attempts = attempt + 1;
            return std::move(a.data);
        }
        std::clog << "gen-data: attempt " << attempt + 1 << " (seed " << seed << ") produced no edges for relation type";
        for (std::size_t r : empty) std::clog << ' ' << r << " (" << vocab::type_name(r) << ")";
        std::clog << " at threshold " << config.edge_threshold << "; regenerating\n";
    }
    throw IntegrityError("every relation type needs at least one edge; gave up after " +
                         std::to_string(config.max_attempts) + " attempts (lower edge_threshold)");
}

std::size_t split_test_count(std::size_t num_edges, double test_fraction) {
    return static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(num_edges)));
}

DatasetSplit split(std::span<const RelationEdge> edges, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
    std::map<std::pair<SampleId, SampleId>, std::vector<std::size_t>> groups;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto key = std::minmax(edges[e].src, edges[e].dst);
        groups[{key.first, key.second}].push_back(e);
    }
    std::vector<const std::vector<std::size_t>*> order;
    for (const auto& [key, members] : groups) order.push_back(&members);
    Rng rng(mix_seed(seed, 0x5b117));
    rng.shuffle(order);

    const std::size_t target = split_test_count(edges.size(), test_fraction);
    std::vector<bool> in_test(edges.size(), false);
    std::size_t taken = 0;
    for (const auto* members : order) {
        if (taken + members->size() > target) continue;
        for (std::size_t e : *members) in_test[e] = true;
        taken += members->size();
        if (taken == target) break;
    }
    DatasetSplit out;
    for (std::size_t e = 0; e < edges.size(); ++e) (in_test[e] ? out.test : out.train).push_back(edges[e]);
    if (out.test.empty() || out.train.empty()) {
        throw ConfigError("split leaves an empty partition (" + std::to_string(out.train.size()) + " train, " +
                          std::to_string(out.test.size()) + " test)");
    }
    return out;
}

DatasetFiles write_dataset(const GeneratedDataset& generated, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const DatasetFiles files = DatasetFiles::in(dir);
    const Dataset& d = generated.dataset;

    {
        std::ofstream os(files.samples, std::ios::binary | std::ios::trunc);
        if (!os) throw FormatError("cannot write " + files.samples.string());
        for (const auto& s : d.samples) {
            ordered_json j{{"id", s.id}, {"text_tokens", s.text_tokens}, {"image_patches", s.image_patches},
                           {"category", s.category}};
            os << j.dump() << '\n';
        }
    }
    std::vector<std::size_t> per_type(d.num_relation_types, 0);
    {
        std::ofstream os(files.edges, std::ios::binary | std::ios::trunc);
        if (!os) throw FormatError("cannot write " + files.edges.string());
        for (const auto& e : d.edges) {
            ordered_json j{{"src", e.src}, {"dst", e.dst}, {"relation_type", e.relation_type},
                           {"relation_text_tokens", e.relation_text}};
            os << j.dump() << '\n';
            ++per_type[static_cast<std::size_t>(e.relation_type)];
        }
    }

    const GeneratorConfig& c = generated.config;
    // Tiny corpora may not support a split; that surfaces when training.
    ordered_json split_counts{{"train_edges", nullptr}, {"test_edges", nullptr}};
    try {
        const DatasetSplit parts = split(d.edges, c.test_fraction, c.seed);
        split_counts = {{"train_edges", parts.train.size()}, {"test_edges", parts.test.size()}};
    } catch (const ConfigError&) {
    }
    ordered_json types = ordered_json::array();
    for (std::size_t r = 0; r < d.num_relation_types; ++r) {
        types.push_back({{"id", r}, {"name", vocab::type_name(r)}, {"text", vocab::relation_sentence(r)},
                         {"text_tokens", vocab::relation_tokens(r)}, {"edges", per_type[r]}});
    }
    ordered_json manifest{
        {"format_version", kFormatVersion},
        {"seed", c.seed},
        {"config_hash", generator_config_hash(c)},
        {"config", config_json(c)},
        {"attempts", generated.attempts},
        {"counts", {{"samples", d.samples.size()}, {"edges", d.edges.size()}, {"edges_per_type", per_type}}},
        {"relation_types", types},
        {"split",
         {{"test_fraction", c.test_fraction},
          {"seed", c.seed},
          {"rule", "edges grouped by unordered sample pair, groups shuffled, test takes floor(test_fraction * edges)"},
          {"train_edges", split_counts["train_edges"]},
          {"test_edges", split_counts["test_edges"]}}},
        {"files", {{"samples", files.samples.filename().string()}, {"edges", files.edges.filename().string()}}},
        {"hashes",
         {{"samples", git_blob_hash_file(files.samples)}, {"edges", git_blob_hash_file(files.edges)}}}};
    std::ofstream os(files.manifest, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write " + files.manifest.string());
    os << manifest.dump(2) << '\n';
    return files;
}

Dataset load(const DatasetFiles& files) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(files.manifest));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(files.manifest.filename().string() + ": malformed JSON (" + e.what() + ")");
    }
    Dataset d;
    try {
        const auto& cfg = manifest.at("config");
        d.num_relation_types = cfg.at("num_relation_types").get<std::size_t>();
        d.vocab_size = cfg.at("vocab_size").get<std::size_t>();
        d.patch_width = cfg.at("patch_width").get<std::size_t>();
        d.test_fraction = manifest.at("split").at("test_fraction").get<double>();
        d.split_seed = manifest.at("split").at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(files.manifest.filename().string() + ": " + e.what());
    }

    std::set<SampleId> ids;
    for_each_line(files.samples, [&](const nlohmann::json& obj, std::size_t line) {
        Sample s;
        s.id = field<SampleId>(obj, "id", files.samples, line);
        s.text_tokens = field<TokenList>(obj, "text_tokens", files.samples, line);
        s.image_patches = field<PatchList>(obj, "image_patches", files.samples, line);
        s.category = field<int>(obj, "category", files.samples, line);
        if (!ids.insert(s.id).second) line_error(files.samples, line, "duplicate id " + std::to_string(s.id));
        for (TokenId t : s.text_tokens) {
            if (t < 0 || static_cast<std::size_t>(t) >= d.vocab_size) {
                line_error(files.samples, line, "token id " + std::to_string(t) + " outside the vocabulary");
            }
        }
        if (s.image_patches.empty()) line_error(files.samples, line, "no image patches");
        for (const auto& p : s.image_patches) {
            if (p.size() != d.patch_width) {
                line_error(files.samples, line, "patch width " + std::to_string(p.size()) + " != " +
                                                    std::to_string(d.patch_width));
            }
        }
        d.samples.push_back(std::move(s));
    });
    for_each_line(files.edges, [&](const nlohmann::json& obj, std::size_t line) {
        RelationEdge e;
        e.src = field<SampleId>(obj, "src", files.edges, line);
        e.dst = field<SampleId>(obj, "dst", files.edges, line);
        e.relation_type = field<int>(obj, "relation_type", files.edges, line);
        e.relation_text = field<TokenList>(obj, "relation_text_tokens", files.edges, line);
        for (SampleId id : {e.src, e.dst}) {
            if (!ids.contains(id)) {
                throw IntegrityError(files.edges.filename().string() + ":" + std::to_string(line) +
                                     ": edge references unknown sample id " + std::to_string(id));
            }
        }
        if (e.relation_type < 0 || static_cast<std::size_t>(e.relation_type) >= d.num_relation_types) {
            line_error(files.edges, line, "relation_type " + std::to_string(e.relation_type) + " out of range");
        }
        if (e.relation_text.empty()) line_error(files.edges, line, "empty relation text");
        d.edges.push_back(std::move(e));
    });

    const auto& counts = manifest.at("counts");
    if (counts.at("samples").get<std::size_t>() != d.samples.size() ||
        counts.at("edges").get<std::size_t>() != d.edges.size()) {
        throw IntegrityError("manifest counts (" + counts.at("samples").dump() + " samples, " +
                             counts.at("edges").dump() + " edges) disagree with files (" +
                             std::to_string(d.samples.size()) + ", " + std::to_string(d.edges.size()) + ")");
    }
    return d;
}

std::vector<std::vector<double>> recover_latents(std::span<const Sample> samples, const PatchMap& map,
                                                 std::size_t latent_dim) {
    const std::size_t m = map.dim.size();
    if (m == 0) throw ConfigError("empty patch map");
    const std::size_t p = map.gain.front().size();
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m * p), static_cast<Eigen::Index>(latent_dim));
    for (std::size_t t = 0; t < m; ++t) {
        for (std::size_t j = 0; j < p; ++j) {
            design(static_cast<Eigen::Index>(t * p + j), static_cast<Eigen::Index>(map.dim[t])) = map.gain[t][j];
        }
    }
    const auto qr = design.colPivHouseholderQr();
    if (qr.rank() < static_cast<Eigen::Index>(latent_dim)) throw DimensionError("patch map does not determine all latents");
    std::vector<std::vector<double>> out;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m * p));
    for (const auto& s : samples) {
        if (s.image_patches.size() != m) throw DimensionError("sample patch count disagrees with the patch map");
        for (std::size_t t = 0; t < m; ++t) {
            for (std::size_t j = 0; j < p; ++j) rhs(static_cast<Eigen::Index>(t * p + j)) = s.image_patches[t][j];
        }
        const Eigen::VectorXd u = qr.solve(rhs);
        out.emplace_back(u.data(), u.data() + u.size());
    }
    return out;
}

}  // namespace rcml
