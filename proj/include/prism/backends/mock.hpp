#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "prism/backends/model.hpp"

namespace prism::backends {

// Replays a fixed list of responses in call order. Describe and answer calls
// share one cursor, matching the order in which the DQA loop issues them.
class ScriptCursor {
 public:
  explicit ScriptCursor(std::vector<std::string> script);
  std::string next();
  std::size_t remaining() const;

 private:
  std::vector<std::string> script_;
  std::size_t pos_ = 0;
  mutable std::mutex mu_;
};

class MockPerception : public PerceptionModel {
 public:
  explicit MockPerception(std::vector<std::string> script) : cursor_(std::move(script)) {}
  std::string describe(const std::string&, const Observation&) override { return cursor_.next(); }
  std::string answer(const Question&, const Observation&) override { return cursor_.next(); }
  std::string id() const override { return "mock-perception"; }
  std::size_t remaining() const { return cursor_.remaining(); }

 private:
  ScriptCursor cursor_;
};

class MockReasoning : public ReasoningModel {
 public:
  explicit MockReasoning(std::vector<std::string> script) : cursor_(std::move(script)) {}
  std::string complete(const std::string&) override { return cursor_.next(); }
  std::string id() const override { return "mock-reasoning"; }
  std::size_t remaining() const { return cursor_.remaining(); }

 private:
  ScriptCursor cursor_;
};

// Whitespace tokens, each scored with the same log-probability. Specific
// continuations can be pinned to an explicit per-token list.
class MockScorer : public ScoringModel {
 public:
  explicit MockScorer(double per_token_logprob);
  void pin(const std::string& continuation, std::vector<double> logprobs);
  std::vector<double> token_logprobs(const std::string& context,
                                     const std::string& continuation) override;
  std::string id() const override { return "mock-scorer"; }

 private:
  double per_token_;
  std::map<std::string, std::vector<double>> pinned_;
  mutable std::mutex mu_;
};

}  // namespace prism::backends
