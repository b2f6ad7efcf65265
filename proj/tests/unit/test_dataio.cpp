#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>

#include "doctest.h"
#include "json.hpp"
#include "rcml/dataio.hpp"
#include "rcml/errors.hpp"
#include "rcml/evalsuite.hpp"
#include "rcml/pairing.hpp"
#include "rcml/vocab.hpp"
#include "support.hpp"

using namespace rcml;

namespace {

GeneratorConfig small_config(std::uint64_t seed = 42) {
    GeneratorConfig c;
    c.num_samples = 300;
    c.edge_keep_rate = 0.2;
    c.seed = seed;
    return c;
}

// Fraction of queries whose target ranks in the top 5 under a latent-space score.
template <typename Score>
double latent_oracle_hit5(const GeneratedDataset& g, const std::vector<std::vector<double>>& latents,
                          std::span<const RelationEdge> query_edges, Score score) {
    const auto queries =
        build_retrieval_queries(g.dataset.samples, query_edges, g.dataset.edges, kRetrievalNegatives, 7);
    return retrieval_eval(queries, [&](const RetrievalQuery& q) {
        std::vector<double> s;
        const auto& form = g.forms[static_cast<std::size_t>(q.relation_type)];
        for (SampleId c : q.candidates) {
            s.push_back(score(form, latents[static_cast<std::size_t>(q.anchor)], latents[static_cast<std::size_t>(c)]));
        }
        return s;
    });
}

double raw_score(const RelationForm& f, std::span<const double> a, std::span<const double> b) { return f.score(a, b); }
double cosine_score(const RelationForm& f, std::span<const double> a, std::span<const double> b) {
    return f.cosine(a, b);
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("generation is deterministic and byte-identical") {
    const GeneratorConfig c = small_config();
    const auto d1 = testing::scratch_dir("gen_a"), d2 = testing::scratch_dir("gen_b"), d3 = testing::scratch_dir("gen_c");
    const DatasetFiles f1 = write_dataset(generate(c), d1);
    const DatasetFiles f2 = write_dataset(generate(c), d2);
    CHECK(testing::read_bytes(f1.samples) == testing::read_bytes(f2.samples));
    CHECK(testing::read_bytes(f1.edges) == testing::read_bytes(f2.edges));
    CHECK(testing::read_bytes(f1.manifest) == testing::read_bytes(f2.manifest));
    CHECK(generator_config_hash(c) == generator_config_hash(small_config()));

    const DatasetFiles f3 = write_dataset(generate(small_config(43)), d3);
    CHECK(testing::read_bytes(f1.samples) != testing::read_bytes(f3.samples));
    CHECK(generator_config_hash(c) != generator_config_hash(small_config(43)));

    const auto manifest = nlohmann::json::parse(testing::read_bytes(f1.manifest));
    CHECK(manifest.at("seed").get<std::uint64_t>() == 42);
    CHECK(manifest.at("config_hash").get<std::string>() == generator_config_hash(c));
    CHECK(manifest.at("counts").at("samples").get<std::size_t>() == 300);
}

TEST_CASE("generated samples and edges follow the schema") {
    const GeneratorConfig c = small_config();
    const GeneratedDataset g = generate(c);
    const Dataset& d = g.dataset;
    REQUIRE(d.samples.size() == c.num_samples);
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        const Sample& s = d.samples[i];
        CHECK(s.id == static_cast<SampleId>(i));
        REQUIRE(s.text_tokens.size() == c.tokens_per_item + 1);
        CHECK(s.text_tokens.back() == kEotToken);
        CHECK(std::count(s.text_tokens.begin(), s.text_tokens.end(), kEotToken) == 1);
        for (TokenId t : s.text_tokens) CHECK(static_cast<std::size_t>(t) < c.vocab_size);
        REQUIRE(s.image_patches.size() == c.patches_per_item);
        for (const auto& p : s.image_patches) CHECK(p.size() == c.patch_width);
    }
    std::set<std::tuple<SampleId, SampleId, int>> seen;
    for (const auto& e : d.edges) {
        CHECK(e.src < e.dst);
        CHECK(seen.insert({e.src, e.dst, e.relation_type}).second);
        CHECK(e.relation_text == vocab::relation_tokens(static_cast<std::size_t>(e.relation_type)));
        const auto& f = g.forms[static_cast<std::size_t>(e.relation_type)];
        const auto& a = g.latents[static_cast<std::size_t>(e.src)];
        const auto& b = g.latents[static_cast<std::size_t>(e.dst)];
        CHECK(f.score(a, b) > c.edge_threshold);
        CHECK(f.admits(d.samples[static_cast<std::size_t>(e.src)].category));
        CHECK(f.admits(d.samples[static_cast<std::size_t>(e.dst)].category));
        CHECK(std::abs(f.score(a, b) - f.score(b, a)) < 1e-12);
    }
    CHECK(d.relation_text(3) == vocab::relation_tokens(3));
    for (const auto& f : g.forms) {
        CHECK(f.domain.size() == c.domain_size);
        CHECK(std::is_sorted(f.domain.begin(), f.domain.end()));
    }

    SUBCASE("an empty domain admits every category") {
        GeneratorConfig open = small_config();
        open.domain_size = 0;
        const GeneratedDataset og = generate(open);
        for (const auto& f : og.forms) {
            CHECK(f.domain.empty());
            for (int cat = 0; cat < 4; ++cat) CHECK(f.admits(cat));
        }
    }
}

TEST_CASE("noise-free patches are exact linear functions of the latents") {
    GeneratorConfig c = small_config();
    c.noise_std = 0.0;
    const GeneratedDataset g = generate(c);
    for (std::size_t i = 0; i < 5; ++i) {
        const Sample& s = g.dataset.samples[i];
        for (std::size_t t = 0; t < c.patches_per_item; ++t) {
            for (std::size_t j = 0; j < c.patch_width; ++j) {
                CHECK(s.image_patches[t][j] == g.patch_map.gain[t][j] * g.latents[i][g.patch_map.dim[t]]);
            }
        }
    }
    const auto recovered = recover_latents(g.dataset.samples, g.patch_map, c.latent_dim);
    double worst = 0.0;
    for (std::size_t i = 0; i < recovered.size(); ++i) {
        for (std::size_t k = 0; k < c.latent_dim; ++k) worst = std::max(worst, std::abs(recovered[i][k] - g.latents[i][k]));
    }
    CHECK(worst < 1e-12);

    SUBCASE("oracle retrieval from latents ranks every planted partner first when all qualifying pairs are edges") {
        GeneratorConfig full = c;
        full.edge_keep_rate = 1.0;
        const GeneratedDataset all = generate(full);
        const auto lat = recover_latents(all.dataset.samples, all.patch_map, full.latent_dim);
        CHECK(latent_oracle_hit5(all, lat, all.dataset.edges, raw_score) == 1.0);
    }
    SUBCASE("oracle retrieval on the default noise-free corpus") {
        GeneratorConfig def;
        def.noise_std = 0.0;
        const GeneratedDataset dg = generate(def);
        const auto lat = recover_latents(dg.dataset.samples, dg.patch_map, def.latent_dim);
        // Unkept qualifying pairs may appear as negatives; brute force misses 2 of 3844.
        REQUIRE(dg.dataset.edges.size() == 3844);
        CHECK(latent_oracle_hit5(dg, lat, dg.dataset.edges, raw_score) == doctest::Approx(3842.0 / 3844.0).epsilon(1e-12));
    }
}

TEST_CASE("the default corpus passes the learnability gate") {
    const GeneratorConfig c;
    const GeneratedDataset g = generate(c);
    const DatasetSplit parts = split(g.dataset.edges, c.test_fraction, c.seed);
    const double hit = latent_oracle_hit5(g, g.latents, parts.test, cosine_score);
    MESSAGE("cosine oracle Hit@5 on the default test split: " << hit);
    CHECK(hit >= 0.9);
    for (std::size_t r = 0; r < c.num_relation_types; ++r) {
        CHECK(std::any_of(g.dataset.edges.begin(), g.dataset.edges.end(),
                          [&](const RelationEdge& e) { return e.relation_type == static_cast<int>(r); }));
    }
}

TEST_CASE("small corpora still cover every relation type") {
    GeneratorConfig c;
    c.num_samples = 100;
    c.num_relation_types = 2;
    const GeneratedDataset g = generate(c);
    const auto dir = testing::scratch_dir("two_types");
    const DatasetFiles files = write_dataset(g, dir);
    const auto manifest = nlohmann::json::parse(testing::read_bytes(files.manifest));
    const auto per_type = manifest.at("counts").at("edges_per_type").get<std::vector<std::size_t>>();
    REQUIRE(per_type.size() == 2);
    CHECK(per_type[0] >= 1);
    CHECK(per_type[1] >= 1);
    CHECK(manifest.at("attempts").get<std::size_t>() == g.attempts);
}

TEST_CASE("the generic intra relation is absent from the corpus") {
    const GeneratedDataset g = generate(GeneratorConfig{});
    const TokenList generic = generic_intra_relation();
    for (const auto& e : g.dataset.edges) CHECK(e.relation_text != generic);
}

TEST_CASE("load round-trips the written files") {
    const GeneratedDataset g = generate(small_config());
    const auto dir = testing::scratch_dir("roundtrip");
    const DatasetFiles files = write_dataset(g, dir);
    const Dataset d = load(files);
    REQUIRE(d.samples.size() == g.dataset.samples.size());
    REQUIRE(d.edges.size() == g.dataset.edges.size());
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        CHECK(d.samples[i].id == g.dataset.samples[i].id);
        CHECK(d.samples[i].text_tokens == g.dataset.samples[i].text_tokens);
        CHECK(d.samples[i].image_patches == g.dataset.samples[i].image_patches);
        CHECK(d.samples[i].category == g.dataset.samples[i].category);
    }
    for (std::size_t e = 0; e < d.edges.size(); ++e) {
        CHECK(d.edges[e].src == g.dataset.edges[e].src);
        CHECK(d.edges[e].dst == g.dataset.edges[e].dst);
        CHECK(d.edges[e].relation_type == g.dataset.edges[e].relation_type);
        CHECK(d.edges[e].relation_text == g.dataset.edges[e].relation_text);
    }
    CHECK(d.num_relation_types == g.dataset.num_relation_types);
    CHECK(d.vocab_size == g.dataset.vocab_size);
    CHECK(d.patch_width == g.dataset.patch_width);
}

TEST_CASE("load rejects damaged files") {
    const GeneratedDataset g = generate(small_config());
    const auto dir = testing::scratch_dir("damaged");
    const DatasetFiles files = write_dataset(g, dir);
    const std::string samples = testing::read_bytes(files.samples);
    const std::string edges = testing::read_bytes(files.edges);

    SUBCASE("a truncated sample line names the file and line") {
        const std::size_t cut = samples.rfind('\n', samples.size() - 2);
        testing::write_bytes(files.samples, samples.substr(0, cut + 20) + "\n");
        const std::string expected = "samples.jsonl:" + std::to_string(count_lines(samples));
        try {
            load(files);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(expected) != std::string::npos);
        }
    }
    SUBCASE("an edge naming an unknown sample") {
        testing::write_bytes(files.edges, edges + R"({"src":0,"dst":99999,"relation_type":0,"relation_text_tokens":[1]})" + "\n");
        try {
            load(files);
            FAIL("expected an integrity error");
        } catch (const IntegrityError& e) {
            CHECK(std::string(e.what()).find("99999") != std::string::npos);
        }
    }
    SUBCASE("a missing line disagrees with the manifest counts") {
        testing::write_bytes(files.edges, edges.substr(0, edges.rfind('\n', edges.size() - 2) + 1));
        CHECK_THROWS_AS(load(files), IntegrityError);
    }
    SUBCASE("out-of-vocabulary tokens") {
        std::string bad = samples;
        bad.replace(bad.find("\"text_tokens\":[") + 15, 0, "5000,");
        testing::write_bytes(files.samples, bad);
        CHECK_THROWS_AS(load(files), ParseError);
    }
}

TEST_CASE("train/test split") {
    const GeneratedDataset g = generate(small_config());
    const auto& edges = g.dataset.edges;
    const DatasetSplit a = split(edges, 0.2, 42), b = split(edges, 0.2, 42);
    CHECK(a.test.size() == split_test_count(edges.size(), 0.2));
    CHECK(a.train.size() + a.test.size() == edges.size());
    std::set<std::pair<SampleId, SampleId>> test_pairs;
    for (const auto& e : a.test) test_pairs.insert(std::minmax(e.src, e.dst));
    for (const auto& e : a.train) CHECK_FALSE(test_pairs.contains(std::minmax(e.src, e.dst)));
    REQUIRE(a.test.size() == b.test.size());
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        CHECK(a.test[i].src == b.test[i].src);
        CHECK(a.test[i].dst == b.test[i].dst);
        CHECK(a.test[i].relation_type == b.test[i].relation_type);
    }
    const DatasetSplit other = split(edges, 0.2, 43);
    bool differs = false;
    for (std::size_t i = 0; i < other.test.size() && !differs; ++i) {
        differs = other.test[i].src != a.test[i].src || other.test[i].dst != a.test[i].dst;
    }
    CHECK(differs);

    CHECK(split_test_count(100, 0.2) == 20);
    CHECK(split_test_count(99, 0.2) == 19);
    CHECK(split_test_count(4, 0.2) == 0);
    const std::vector<RelationEdge> few(edges.begin(), edges.begin() + 4);
    CHECK_THROWS_AS(split(few, 0.2, 42), ConfigError);
    CHECK_THROWS_AS(split(edges, 0.0, 42), ConfigError);
    CHECK_THROWS_AS(split(edges, 1.0, 42), ConfigError);

    SUBCASE("parallel edges of one pair stay together") {
        std::vector<RelationEdge> both;
        for (SampleId i = 0; i < 20; ++i) {
            both.push_back({i, i + 100, vocab::relation_tokens(0), 0});
            both.push_back({i, i + 100, vocab::relation_tokens(1), 1});
        }
        const DatasetSplit s = split(both, 0.5, 1);
        CHECK(s.test.size() == 20);
        std::set<std::pair<SampleId, SampleId>> pairs;
        for (const auto& e : s.test) pairs.insert({e.src, e.dst});
        for (const auto& e : s.train) CHECK_FALSE(pairs.contains({e.src, e.dst}));
    }
}

TEST_CASE("generator configuration errors") {
    auto expect_error = [](auto mutate) {
        GeneratorConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    expect_error([](GeneratorConfig& c) { c.num_relation_types = 1; });
    expect_error([](GeneratorConfig& c) { c.num_samples = 1; });
    expect_error([](GeneratorConfig& c) { c.vocab_size = 10; });
    expect_error([](GeneratorConfig& c) { c.noise_std = -1.0; });
    expect_error([](GeneratorConfig& c) { c.edge_keep_rate = 0.0; });
    expect_error([](GeneratorConfig& c) { c.test_fraction = 1.0; });
    expect_error([](GeneratorConfig& c) { c.relation_rank = 0; });
    expect_error([](GeneratorConfig& c) { c.category_dims = c.latent_dim; });
    expect_error([](GeneratorConfig& c) { c.domain_size = 5; });
    CHECK_NOTHROW(GeneratorConfig{}.validate());

    GeneratorConfig hopeless = small_config();
    hopeless.edge_threshold = 1e9;
    hopeless.max_attempts = 2;
    CHECK_THROWS_AS(generate(hopeless), IntegrityError);
}
