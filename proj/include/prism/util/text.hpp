#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace prism::util {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

// Whitespace tokens. Used as the token-count proxy for prompt lengths.
std::vector<std::string> whitespace_tokens(std::string_view s);
std::size_t whitespace_token_count(std::string_view s);

// Lowercase, punctuation stripped (apostrophes and hyphens kept inside
// words), split on whitespace. Shared by the lexical metrics and featurizer.
std::vector<std::string> normalized_tokens(std::string_view s);

// Python repr of a str: 'plain', "it's".
std::string py_quote(std::string_view s);

}  // namespace prism::util
