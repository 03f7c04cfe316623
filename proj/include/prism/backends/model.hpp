#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "prism/core/types.hpp"

namespace prism::backends {

// VLM role: describes an observation and answers questions about it.
class PerceptionModel {
 public:
  virtual ~PerceptionModel() = default;
  virtual std::string describe(const std::string& prompt, const Observation& obs) = 0;
  virtual std::string answer(const Question& question, const Observation& obs) = 0;
  virtual std::string id() const = 0;
};

// LLM role: free-form completion (question generation, merging).
class ReasoningModel {
 public:
  virtual ~ReasoningModel() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string id() const = 0;
};

// Per-token log-probabilities of `continuation` following `context`, under
// the backend's own tokenization. Every value is <= 0.
class ScoringModel {
 public:
  virtual ~ScoringModel() = default;
  virtual std::vector<double> token_logprobs(const std::string& context,
                                             const std::string& continuation) = 0;
  virtual std::string id() const = 0;
};

// Counts calls on the way through; used by tests and the accounting checks.
class CountingPerception : public PerceptionModel {
 public:
  explicit CountingPerception(std::shared_ptr<PerceptionModel> inner) : inner_(std::move(inner)) {}
  std::string describe(const std::string& prompt, const Observation& obs) override {
    ++describes_;
    return inner_->describe(prompt, obs);
  }
  std::string answer(const Question& q, const Observation& obs) override {
    ++answers_;
    return inner_->answer(q, obs);
  }
  std::string id() const override { return inner_->id(); }
  int calls() const { return describes_ + answers_; }
  int describes() const { return describes_; }
  int answers() const { return answers_; }

 private:
  std::shared_ptr<PerceptionModel> inner_;
  std::atomic<int> describes_{0};
  std::atomic<int> answers_{0};
};

class CountingReasoning : public ReasoningModel {
 public:
  explicit CountingReasoning(std::shared_ptr<ReasoningModel> inner) : inner_(std::move(inner)) {}
  std::string complete(const std::string& prompt) override {
    ++calls_;
    return inner_->complete(prompt);
  }
  std::string id() const override { return inner_->id(); }
  int calls() const { return calls_; }

 private:
  std::shared_ptr<ReasoningModel> inner_;
  std::atomic<int> calls_{0};
};

// Describe with one backend, answer with another (oracle-QA arms).
class SplitPerception : public PerceptionModel {
 public:
  SplitPerception(std::shared_ptr<PerceptionModel> describer, std::shared_ptr<PerceptionModel> answerer)
      : describer_(std::move(describer)), answerer_(std::move(answerer)) {}
  std::string describe(const std::string& prompt, const Observation& obs) override {
    return describer_->describe(prompt, obs);
  }
  std::string answer(const Question& q, const Observation& obs) override {
    return answerer_->answer(q, obs);
  }
  std::string id() const override { return describer_->id() + "+" + answerer_->id(); }

 private:
  std::shared_ptr<PerceptionModel> describer_;
  std::shared_ptr<PerceptionModel> answerer_;
};

}  // namespace prism::backends
