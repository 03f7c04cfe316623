#include "prism/backends/scene.hpp"

#include <algorithm>

#include "prism/util/text.hpp"

namespace prism::backends {

namespace {

bool token_matches(const std::string& tok, const std::string& alias_tok, bool allow_plural) {
  if (tok == alias_tok) return true;
  if (!allow_plural) return false;
  if (tok.size() == alias_tok.size() + 1 && tok.back() == 's' && tok.compare(0, alias_tok.size(), alias_tok) == 0)
    return true;
  return tok.size() == alias_tok.size() + 2 && tok.ends_with("es") && tok.compare(0, alias_tok.size(), alias_tok) == 0;
}

}  // namespace

std::string longest_match(const Vocabulary& vocab, const std::string& text) {
  const auto toks = util::normalized_tokens(text);
  std::string best;
  std::size_t best_len = 0;
  std::size_t best_pos = toks.size();
  for (const auto& [alias, name] : vocab) {
    const auto atoks = util::normalized_tokens(alias);
    if (atoks.empty() || atoks.size() > toks.size()) continue;
    for (std::size_t i = 0; i + atoks.size() <= toks.size(); ++i) {
      bool ok = true;
      for (std::size_t k = 0; k < atoks.size() && ok; ++k)
        ok = token_matches(toks[i + k], atoks[k], k + 1 == atoks.size());
      if (!ok) continue;
      if (atoks.size() > best_len || (atoks.size() == best_len && i < best_pos)) {
        best = name;
        best_len = atoks.size();
        best_pos = i;
      }
      break;
    }
  }
  return best;
}

std::vector<std::string> all_matches(const Vocabulary& vocab, const std::string& text) {
  const auto toks = util::normalized_tokens(text);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < toks.size()) {
    std::size_t best_len = 0;
    std::string best;
    for (const auto& [alias, name] : vocab) {
      const auto atoks = util::normalized_tokens(alias);
      if (atoks.empty() || i + atoks.size() > toks.size() || atoks.size() <= best_len) continue;
      bool ok = true;
      for (std::size_t k = 0; k < atoks.size() && ok; ++k)
        ok = token_matches(toks[i + k], atoks[k], k + 1 == atoks.size());
      if (ok) {
        best_len = atoks.size();
        best = name;
      }
    }
    if (best_len == 0) {
      ++i;
      continue;
    }
    if (std::find(out.begin(), out.end(), best) == out.end()) out.push_back(best);
    i += best_len;
  }
  return out;
}

}  // namespace prism::backends
