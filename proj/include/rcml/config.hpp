#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rcml/dataio.hpp"
#include "rcml/evalsuite.hpp"
#include "rcml/trainer.hpp"

namespace rcml {

/// Flat `key = value` settings. Grammar: one assignment per line, `#`
/// starts a comment, values are numbers, true/false, or strings (quotes
/// optional). Sections and nested tables are rejected.
class ConfigTable {
public:
    struct Entry {
        std::string key;
        std::string value;
        std::string origin;  // "file:line" or "--flag"
    };

    static ConfigTable parse(std::string_view text, const std::string& source);
    static ConfigTable load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value, const std::string& origin);
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
};

/// Every tunable of generation, training and evaluation under one flat
/// namespace. `seed`, `vocab_size` and `patch_width` feed all stages.
struct RunConfig {
    GeneratorConfig generator;
    TrainConfig train;
    EvalOptions eval;

    /// Throws ConfigError naming the key for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void apply(const ConfigTable& table);

    static const std::vector<std::string>& keys();
    std::string get(const std::string& key) const;

    /// Every key with its resolved value, in registry order.
    std::string to_text() const;
};

}  // namespace rcml
