#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prism/core/types.hpp"
#include "prism/policy/policy.hpp"

namespace prism::policy {

// "take apple 1 from countertop 1" -> "take {} from {}" with args
// {"apple 1", "countertop 1"}. An instance mention is a word followed by a
// number.
std::string action_template(const std::string& action, std::vector<std::string>* args = nullptr);

std::vector<std::string> household_action_vocab();
std::vector<std::string> nav_action_vocab();

// Linear-softmax policy over hashed features with a linear value head.
// theta holds W (row per action template, feature_dim wide) followed by the
// value weights.
struct CompactPolicyParams {
  std::uint32_t feature_dim = 4096;
  std::uint64_t feature_seed = 0;
  std::vector<std::string> action_vocab;
  std::vector<double> theta;
  std::string stage = "init";  // init | bc | ppo

  static CompactPolicyParams zeros(std::vector<std::string> vocab, std::uint32_t feature_dim = 4096,
                                   std::uint64_t feature_seed = 0);

  std::size_t vocab_size() const { return action_vocab.size(); }
  int template_index(const std::string& tmpl) const;
  double* row(std::size_t t) { return theta.data() + t * feature_dim; }
  const double* row(std::size_t t) const { return theta.data() + t * feature_dim; }
  double* value_row() { return theta.data() + action_vocab.size() * feature_dim; }
  const double* value_row() const { return theta.data() + action_vocab.size() * feature_dim; }
  bool finite() const;
};

using FeatureList = std::vector<std::uint32_t>;  // repeated index = count

// Prompt features: bias, goal/observation/history tokens.
FeatureList prompt_features(const PolicyPrompt& p, std::uint32_t dim, std::uint64_t seed);

// Everything the compact policy needs for one decision.
struct StepFeatures {
  FeatureList prompt;
  std::vector<int> templates;          // vocab index per candidate
  std::vector<FeatureList> candidate;  // candidate-specific features
};

// Throws PreconditionError when a candidate's template is not in the vocab.
StepFeatures featurize(const CompactPolicyParams& params, const PolicyPrompt& p, const std::vector<ActionText>& candidates);

std::vector<double> log_softmax(const std::vector<double>& logits);

// Logits over action_vocab from prompt features alone.
std::vector<double> compact_logits(const CompactPolicyParams& params, const PolicyPrompt& p);
std::vector<double> compact_logits(const CompactPolicyParams& params, const FeatureList& prompt);
double compact_value(const CompactPolicyParams& params, const PolicyPrompt& p);
double compact_value(const CompactPolicyParams& params, const FeatureList& prompt);

// Logits over the candidate set.
std::vector<double> candidate_logits(const CompactPolicyParams& params, const StepFeatures& f);

// Greedy choice over the candidates (ties to the lexicographically smaller
// action text).
std::size_t greedy_index(const std::vector<double>& logits, const std::vector<ActionText>& candidates);

// Binary checkpoint: "PRISMCK1", u32 header length, JSON header, raw
// little-endian doubles.
void save_checkpoint(const CompactPolicyParams& params, const std::string& path);
CompactPolicyParams load_checkpoint(const std::string& path);

}  // namespace prism::policy
