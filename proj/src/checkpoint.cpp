#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "rcml/errors.hpp"
#include "rcml/model.hpp"

namespace rcml {

namespace {

constexpr char kMagic[8] = {'R', 'C', 'M', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

nlohmann::json config_json(const ModelConfig& c) {
    return {{"vocab_size", c.dims.vocab_size},     {"width", c.dims.width},
            {"max_text_len", c.dims.max_text_len}, {"max_image_len", c.dims.max_image_len},
            {"patch_width", c.dims.patch_width},   {"depth", c.dims.depth},
            {"init_std", c.init_std},              {"beta", c.beta},
            {"beta_one_mode", to_string(c.beta_one_mode)}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.dims.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.dims.width = j.at("width").get<std::size_t>();
    c.dims.max_text_len = j.at("max_text_len").get<std::size_t>();
    c.dims.max_image_len = j.at("max_image_len").get<std::size_t>();
    c.dims.patch_width = j.at("patch_width").get<std::size_t>();
    c.dims.depth = j.at("depth").get<std::size_t>();
    c.init_std = j.at("init_std").get<double>();
    c.beta = j.at("beta").get<double>();
    c.beta_one_mode = parse_beta_one_mode(j.at("beta_one_mode").get<std::string>());
    return c;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("checkpoint truncated while reading " + what);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    const auto tensors = params.named();
    nlohmann::json header;
    header["config"] = config_json(params.config);
    header["tensors"] = nlohmann::json::array();
    for (const auto& nt : tensors) {
        header["tensors"].push_back({{"name", nt.name}, {"rows", nt.tensor.rows()}, {"cols", nt.tensor.cols()}});
    }
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
    os.write(kMagic, sizeof kMagic);
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& nt : tensors) {
        const auto v = nt.tensor.values();
        os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!os) throw FormatError("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint " + path.string());
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw FormatError(path.string() + " is not a checkpoint file");
    }
    const auto version = read_pod<std::uint32_t>(is, "version");
    if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const auto length = read_pod<std::uint64_t>(is, "header length");
    std::string text(length, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(length))) throw FormatError("checkpoint header truncated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    ModelParams params = ModelParams::init(config_from_json(header.at("config")), 0);
    std::map<std::string, Tensor> by_name;
    for (const auto& nt : params.named()) by_name.emplace(nt.name, nt.tensor);

    const auto& entries = header.at("tensors");
    if (entries.size() != by_name.size()) {
        throw FormatError("checkpoint has " + std::to_string(entries.size()) + " tensors, model expects " +
                          std::to_string(by_name.size()));
    }
    for (const auto& entry : entries) {
        const auto name = entry.at("name").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("checkpoint tensor '" + name + "' is unknown");
        Tensor t = it->second;
        if (entry.at("rows").get<std::size_t>() != t.rows() || entry.at("cols").get<std::size_t>() != t.cols()) {
            throw FormatError("checkpoint tensor '" + name + "' has the wrong shape");
        }
        auto v = t.mutable_values();
        if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)))) {
            throw FormatError("checkpoint truncated in tensor '" + name + "'");
        }
    }
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint has trailing bytes");
    return params;
}

}  // namespace rcml
