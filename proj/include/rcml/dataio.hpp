#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rcml/pairing.hpp"

namespace rcml {

struct GeneratorConfig {
    std::size_t num_samples = 2000;
    std::size_t num_relation_types = 10;
    std::size_t vocab_size = 1000;
    std::size_t latent_dim = 16;
    double edge_threshold = 3.0;
    std::size_t patches_per_item = 16;
    std::size_t patch_width = 16;
    std::size_t tokens_per_item = 18;
    double noise_std = 0.8;
    std::uint64_t seed = 42;

    // Latent structure. The leading `category_dims` coordinates are
    // Gaussian with spread `category_scale`; the rest are random signs with
    // multiplicative jitter. Each relation type rewards agreement on
    // `relation_rank` of those coordinates and disagreement on `anti_rank`
    // others; a pair scoring above `edge_threshold` becomes an edge with
    // probability `edge_keep_rate`.
    std::size_t category_dims = 2;
    double category_scale = 2.5;
    double sign_jitter = 0.1;
    std::size_t relation_rank = 4;
    std::size_t anti_rank = 0;
    double edge_keep_rate = 0.012;
    // Each relation type links only items whose category (sign pattern of
    // the category block) falls in a random subset of this size; 0 allows all.
    std::size_t domain_size = 2;
    std::size_t value_bins = 16;
    double filler_rate = 0.4;
    std::size_t max_attempts = 16;
    double test_fraction = 0.2;

    void validate() const;
};

/// Diagonal form M_r = diag(weights) on `dims`; negative weights reward
/// disagreement.
struct RelationForm {
    std::vector<std::size_t> dims;
    std::vector<double> weights;
    std::vector<int> domain;  // eligible categories; empty allows all

    bool admits(int category) const;

    double score(std::span<const double> a, std::span<const double> b) const;
    /// score(a, b) normalized by the |weights|-norms of a and b.
    double cosine(std::span<const double> a, std::span<const double> b) const;
};

/// Patch t carries latent coordinate `dim[t]` through the direction `gain[t]`.
struct PatchMap {
    std::vector<std::size_t> dim;
    std::vector<std::vector<double>> gain;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<RelationEdge> edges;
    std::size_t num_relation_types = 0;
    std::size_t vocab_size = 0;
    std::size_t patch_width = 0;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 42;

    TokenList relation_text(int relation_type) const;
};

struct GeneratedDataset {
    Dataset dataset;
    GeneratorConfig config;
    std::vector<std::vector<double>> latents;
    std::vector<RelationForm> forms;
    PatchMap patch_map;
    std::size_t attempts = 1;
};

struct DatasetFiles {
    std::filesystem::path samples;
    std::filesystem::path edges;
    std::filesystem::path manifest;

    static DatasetFiles in(const std::filesystem::path& dir);
};

GeneratedDataset generate(const GeneratorConfig& config);

/// SHA-1 of the canonical JSON of the generator config.
std::string generator_config_hash(const GeneratorConfig& config);

/// Writes the two JSONL files and the manifest into `dir`.
DatasetFiles write_dataset(const GeneratedDataset& generated, const std::filesystem::path& dir);

Dataset load(const DatasetFiles& files);

struct DatasetSplit {
    std::vector<RelationEdge> train;
    std::vector<RelationEdge> test;
};

/// Random partition of the edges such that no unordered sample pair occurs
/// on both sides. The test side receives floor(test_fraction * |edges|) edges.
DatasetSplit split(std::span<const RelationEdge> edges, double test_fraction, std::uint64_t seed);
std::size_t split_test_count(std::size_t num_edges, double test_fraction);

/// Least-squares latents from image patches and the patch map.
std::vector<std::vector<double>> recover_latents(std::span<const Sample> samples, const PatchMap& map,
                                                 std::size_t latent_dim);

}  // namespace rcml
