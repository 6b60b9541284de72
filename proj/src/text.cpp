#include "rewriteqa/text.h"

#include <algorithm>
#include <cctype>

namespace rewriteqa {
namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_article(std::string_view token) {
  return token == "a" || token == "an" || token == "the";
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

Tokens split_whitespace(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return std::string(text.substr(b, e - b));
}

Tokens tokenize(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(), ascii_lower);
  // A whole trailing run is stripped, not a single character: "eat??" and
  // "eat ." must tokenize the same as "eat" or re-tokenizing joined output
  // would not be a fixed point.
  std::size_t end = lowered.size();
  while (end > 0 && (lowered[end - 1] == '?' || lowered[end - 1] == '.' ||
                     is_space(lowered[end - 1]))) {
    --end;
  }
  lowered.resize(end);
  return split_whitespace(lowered);
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    if (std::ispunct(static_cast<unsigned char>(c))) continue;
    cleaned += ascii_lower(c);
  }
  Tokens tokens = split_whitespace(cleaned);
  auto first = std::find_if_not(tokens.begin(), tokens.end(),
                                [](const std::string& t) { return is_article(t); });
  const auto skip = static_cast<std::size_t>(first - tokens.begin());
  return join_tokens(std::span<const std::string>(tokens).subspan(skip));
}

}  // namespace rewriteqa
