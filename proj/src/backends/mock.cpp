#include "prism/backends/mock.hpp"

#include "prism/core/errors.hpp"
#include "prism/util/text.hpp"

namespace prism::backends {

ScriptCursor::ScriptCursor(std::vector<std::string> script) : script_(std::move(script)) {
  if (script_.empty()) throw PreconditionError("mock script must be non-empty");
}

std::string ScriptCursor::next() {
  std::lock_guard lock(mu_);
  if (pos_ >= script_.size())
    throw ScriptExhausted("mock script exhausted after " + std::to_string(script_.size()) + " responses");
  return script_[pos_++];
}

std::size_t ScriptCursor::remaining() const {
  std::lock_guard lock(mu_);
  return script_.size() - pos_;
}

MockScorer::MockScorer(double per_token_logprob) : per_token_(per_token_logprob) {
  if (per_token_ > 0.0) throw PreconditionError("log-probabilities must be <= 0");
}

void MockScorer::pin(const std::string& continuation, std::vector<double> logprobs) {
  std::lock_guard lock(mu_);
  pinned_[continuation] = std::move(logprobs);
}

std::vector<double> MockScorer::token_logprobs(const std::string&, const std::string& continuation) {
  {
    std::lock_guard lock(mu_);
    if (auto it = pinned_.find(continuation); it != pinned_.end()) return it->second;
  }
  return std::vector<double>(util::whitespace_token_count(continuation), per_token_);
}

}  // namespace prism::backends
