#include "rcml/vocab.hpp"

#include <array>
#include <sstream>

#include "rcml/errors.hpp"

namespace rcml::vocab {

namespace {

constexpr std::array<std::string_view, 14> kTemplateWords = {
    "text", "and", "image", "describe", "the", "same", "item",
    "users", "interested", "in", "tend", "to", "buy", "together",
};

constexpr std::array<std::string_view, 40> kTypeNames = {
    "fishing",   "cycling",   "camping",    "baking",    "gardening", "hiking",    "painting",
    "running",   "skiing",    "swimming",   "knitting",  "climbing",  "surfing",   "brewing",
    "sewing",    "golfing",   "rowing",     "skating",   "woodwork",  "pottery",   "archery",
    "birding",   "boxing",    "dancing",    "diving",    "drawing",   "grilling",  "hunting",
    "juggling",  "kayaking",  "photography", "quilting", "reading",   "sailing",   "singing",
    "tennis",    "travel",    "weaving",    "yoga",      "chess",
};

static_assert(2 + kTemplateWords.size() + kTypeNames.size() <= static_cast<std::size_t>(kFirstTopicToken));

}  // namespace

std::size_t num_type_names() { return kTypeNames.size(); }

std::string type_name(std::size_t relation_type) {
    if (relation_type >= kTypeNames.size()) {
        throw ConfigError("relation type " + std::to_string(relation_type) + " has no name (at most " +
                          std::to_string(kTypeNames.size()) + " types)");
    }
    return std::string(kTypeNames[relation_type]);
}

TokenId word_id(std::string_view word) {
    TokenId id = 2;
    for (auto w : kTemplateWords) {
        if (w == word) return id;
        ++id;
    }
    for (auto w : kTypeNames) {
        if (w == word) return id;
        ++id;
    }
    throw VocabularyError("unknown word '" + std::string(word) + "'");
}

TokenList tokenize(std::string_view sentence) {
    TokenList out;
    std::istringstream is{std::string(sentence)};
    std::string word;
    while (is >> word) out.push_back(word_id(word));
    out.push_back(kEotToken);
    return out;
}

std::string relation_sentence(std::size_t relation_type) {
    return "users interested in " + type_name(relation_type) + " tend to buy together";
}

TokenList relation_tokens(std::size_t relation_type) { return tokenize(relation_sentence(relation_type)); }

}  // namespace rcml::vocab

namespace rcml {

TokenList generic_intra_relation() {
    static const TokenList tokens = vocab::tokenize("text and image describe the same item");
    return tokens;
}

}  // namespace rcml
