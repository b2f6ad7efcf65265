#include "rcml/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "rcml/errors.hpp"
#include "rcml/hashing.hpp"

namespace rcml {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<SimilarityMode> to_modes(const std::string& v) {
    if (v == "all") return all_similarity_modes();
    std::vector<SimilarityMode> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_similarity_mode(trim(item)));
    if (out.empty()) throw ConfigError("config key 'modes': empty mode list");
    return out;
}

std::string modes_text(const std::vector<SimilarityMode>& modes) {
    std::string out;
    for (auto m : modes) out += (out.empty() ? "" : ",") + to_string(m);
    return out;
}

struct Key {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Key size_key(const std::string& name, T RunConfig::*group, std::size_t T::*field) {
    return {name, [=](RunConfig& c, const std::string& v) { (c.*group).*field = to_uint(name, v); },
            [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

template <typename T>
Key double_key(const std::string& name, T RunConfig::*group, double T::*field) {
    return {name, [=](RunConfig& c, const std::string& v) { (c.*group).*field = to_double(name, v); },
            [=](const RunConfig& c) { return format_double((c.*group).*field); }};
}

template <typename T>
Key bool_key(const std::string& name, T RunConfig::*group, bool T::*field) {
    return {name, [=](RunConfig& c, const std::string& v) { (c.*group).*field = to_bool(name, v); },
            [=](const RunConfig& c) { return std::string((c.*group).*field ? "true" : "false"); }};
}

Key ablation_key(const std::string& name, bool AblationFlags::*field) {
    return {name, [=](RunConfig& c, const std::string& v) { c.train.ablation.*field = to_bool(name, v); },
            [=](const RunConfig& c) { return std::string(c.train.ablation.*field ? "true" : "false"); }};
}

Key dims_key(const std::string& name, std::size_t EncoderDims::*field) {
    return {name, [=](RunConfig& c, const std::string& v) { c.train.dims.*field = to_uint(name, v); },
            [=](const RunConfig& c) { return std::to_string(c.train.dims.*field); }};
}

const std::vector<Key>& registry() {
    using G = GeneratorConfig;
    using T = TrainConfig;
    using E = EvalOptions;
    static const std::vector<Key> keys{
        {"seed",
         [](RunConfig& c, const std::string& v) {
             c.generator.seed = c.train.seed = c.eval.seed = c.eval.probe.seed = to_uint("seed", v);
         },
         [](const RunConfig& c) { return std::to_string(c.train.seed); }},
        {"vocab_size",
         [](RunConfig& c, const std::string& v) {
             c.generator.vocab_size = c.train.dims.vocab_size = to_uint("vocab_size", v);
         },
         [](const RunConfig& c) { return std::to_string(c.train.dims.vocab_size); }},
        {"patch_width",
         [](RunConfig& c, const std::string& v) {
             c.generator.patch_width = c.train.dims.patch_width = to_uint("patch_width", v);
         },
         [](const RunConfig& c) { return std::to_string(c.train.dims.patch_width); }},
        {"workers",
         [](RunConfig& c, const std::string& v) { c.train.workers = c.eval.workers = to_uint("workers", v); },
         [](const RunConfig& c) { return std::to_string(c.eval.workers); }},
        // generation
        size_key<G>("num_samples", &RunConfig::generator, &G::num_samples),
        size_key<G>("num_relation_types", &RunConfig::generator, &G::num_relation_types),
        size_key<G>("latent_dim", &RunConfig::generator, &G::latent_dim),
        double_key<G>("edge_threshold", &RunConfig::generator, &G::edge_threshold),
        size_key<G>("patches_per_item", &RunConfig::generator, &G::patches_per_item),
        size_key<G>("tokens_per_item", &RunConfig::generator, &G::tokens_per_item),
        double_key<G>("noise_std", &RunConfig::generator, &G::noise_std),
        size_key<G>("category_dims", &RunConfig::generator, &G::category_dims),
        double_key<G>("category_scale", &RunConfig::generator, &G::category_scale),
        size_key<G>("relation_rank", &RunConfig::generator, &G::relation_rank),
        size_key<G>("anti_rank", &RunConfig::generator, &G::anti_rank),
        size_key<G>("domain_size", &RunConfig::generator, &G::domain_size),
        double_key<G>("sign_jitter", &RunConfig::generator, &G::sign_jitter),
        double_key<G>("edge_keep_rate", &RunConfig::generator, &G::edge_keep_rate),
        size_key<G>("value_bins", &RunConfig::generator, &G::value_bins),
        double_key<G>("filler_rate", &RunConfig::generator, &G::filler_rate),
        size_key<G>("max_attempts", &RunConfig::generator, &G::max_attempts),
        double_key<G>("test_fraction", &RunConfig::generator, &G::test_fraction),
        // model
        dims_key("width", &EncoderDims::width),
        dims_key("depth", &EncoderDims::depth),
        dims_key("max_text_len", &EncoderDims::max_text_len),
        dims_key("max_image_len", &EncoderDims::max_image_len),
        double_key<T>("init_std", &RunConfig::train, &T::init_std),
        double_key<T>("beta", &RunConfig::train, &T::beta),
        {"beta_one_mode",
         [](RunConfig& c, const std::string& v) { c.train.beta_one_mode = parse_beta_one_mode(v); },
         [](const RunConfig& c) { return to_string(c.train.beta_one_mode); }},
        // loss
        double_key<T>("tau", &RunConfig::train, &T::tau),
        double_key<T>("lambda_intra", &RunConfig::train, &T::lambda_intra),
        bool_key<T>("cross_modal_only", &RunConfig::train, &T::cross_modal_only),
        bool_key<T>("literal_denominator", &RunConfig::train, &T::literal_denominator),
        // training
        size_key<T>("batch_size", &RunConfig::train, &T::batch_size),
        double_key<T>("learning_rate", &RunConfig::train, &T::learning_rate),
        double_key<T>("weight_decay", &RunConfig::train, &T::weight_decay),
        size_key<T>("max_epochs", &RunConfig::train, &T::max_epochs),
        size_key<T>("patience", &RunConfig::train, &T::patience),
        {"schedule", [](RunConfig& c, const std::string& v) { c.train.schedule = parse_schedule(v); },
         [](const RunConfig& c) { return to_string(c.train.schedule); }},
        double_key<T>("grad_clip", &RunConfig::train, &T::grad_clip),
        double_key<T>("validation_fraction", &RunConfig::train, &T::validation_fraction),
        size_key<T>("negative_cap", &RunConfig::train, &T::negative_cap),
        ablation_key("no_inter_edges", &AblationFlags::no_inter_edges),
        ablation_key("no_intra_loss", &AblationFlags::no_intra_loss),
        ablation_key("no_edge_description", &AblationFlags::no_edge_description),
        ablation_key("freeze_encoders", &AblationFlags::freeze_encoders),
        // evaluation
        {"modes", [](RunConfig& c, const std::string& v) { c.eval.modes = to_modes(v); },
         [](const RunConfig& c) { return modes_text(c.eval.modes); }},
        size_key<E>("num_negatives", &RunConfig::eval, &E::num_negatives),
        size_key<E>("top_k", &RunConfig::eval, &E::top_k),
        size_key<E>("type_top_k", &RunConfig::eval, &E::type_top_k),
        {"probe_epochs", [](RunConfig& c, const std::string& v) { c.eval.probe.epochs = to_uint("probe_epochs", v); },
         [](const RunConfig& c) { return std::to_string(c.eval.probe.epochs); }},
        {"probe_learning_rate",
         [](RunConfig& c, const std::string& v) { c.eval.probe.learning_rate = to_double("probe_learning_rate", v); },
         [](const RunConfig& c) { return format_double(c.eval.probe.learning_rate); }},
    };
    return keys;
}

const Key& find_key(const std::string& name) {
    for (const auto& k : registry()) {
        if (k.name == name) return k;
    }
    throw ConfigError("unknown config key '" + name + "'");
}

}  // namespace

ConfigTable ConfigTable::parse(std::string_view text, const std::string& source) {
    ConfigTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        ++line_no;
        std::string line(text.substr(pos, end - pos));
        pos = end + 1;
        const std::string origin = source + ":" + std::to_string(line_no);
        // Comments end the line unless inside quotes.
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') throw ConfigError(origin + ": sections are not supported; use flat keys");
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(origin + ": expected 'key = value'");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ": missing key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        try {
            table.set(key, value, origin);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ": " + e.what());
        }
        if (end == text.size()) break;
    }
    return table;
}

ConfigTable ConfigTable::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    return parse(read_file(path), path.string());
}

void ConfigTable::set(const std::string& key, const std::string& value, const std::string& origin) {
    find_key(key);
    for (auto& e : entries_) {
        if (e.key == key) {
            e.value = value;
            e.origin = origin;
            return;
        }
    }
    entries_.push_back({key, value, origin});
}

void RunConfig::set(const std::string& key, const std::string& value) { find_key(key).set(*this, value); }

void RunConfig::apply(const ConfigTable& table) {
    for (const auto& e : table.entries()) {
        try {
            set(e.key, e.value);
        } catch (const ConfigError& err) {
            throw ConfigError(e.origin + ": " + err.what());
        } catch (const Error& err) {
            throw ConfigError(e.origin + ": config key '" + e.key + "': " + err.what());
        }
    }
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& k : registry()) out.push_back(k.name);
        return out;
    }();
    return names;
}

std::string RunConfig::get(const std::string& key) const { return find_key(key).get(*this); }

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& k : registry()) out += k.name + " = " + k.get(*this) + "\n";
    return out;
}

}  // namespace rcml
