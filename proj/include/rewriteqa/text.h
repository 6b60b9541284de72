#ifndef REWRITEQA_TEXT_H_
#define REWRITEQA_TEXT_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rewriteqa {

using Tokens = std::vector<std::string>;

// Lowercases (ASCII), drops trailing terminal punctuation ('?' and '.') and
// splits on whitespace. Interior punctuation is kept, so the " . " separators
// of a concatenated input survive as tokens.
Tokens tokenize(std::string_view text);

// Joins with single spaces.
std::string join_tokens(std::span<const std::string> tokens);

// Canonical answer form used for exact match and lookup keys: lowercase,
// punctuation removed, leading articles dropped, whitespace collapsed.
std::string normalize_answer(std::string_view text);

// Whitespace split with no other processing.
Tokens split_whitespace(std::string_view text);

std::string trim(std::string_view text);

}  // namespace rewriteqa

#endif  // REWRITEQA_TEXT_H_
