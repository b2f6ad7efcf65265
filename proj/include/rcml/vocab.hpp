#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rcml {

using TokenId = std::int32_t;
using TokenList = std::vector<TokenId>;

inline constexpr TokenId kPadToken = 0;
inline constexpr TokenId kEotToken = 1;

/// Fixed word table shared by the generator and the pair builder. Ids
/// [2, kFirstTopicToken) hold template words and relation type names;
/// attribute tokens start at kFirstTopicToken.
namespace vocab {

inline constexpr TokenId kFirstTopicToken = 64;

std::size_t num_type_names();
std::string type_name(std::size_t relation_type);
TokenId word_id(std::string_view word);

/// Space-separated words to ids, with EOT appended.
TokenList tokenize(std::string_view sentence);

std::string relation_sentence(std::size_t relation_type);
TokenList relation_tokens(std::size_t relation_type);

}  // namespace vocab

/// Tokens of "text and image describe the same item".
TokenList generic_intra_relation();

}  // namespace rcml
