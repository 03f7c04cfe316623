#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prism/backends/model.hpp"
#include "prism/core/types.hpp"

namespace prism::policy {

struct PolicyPrompt {
  Goal goal{"?"};
  std::string history_render;
  std::string d_f;
};

// Canonical policy context; ends with "Next action of the agent:".
std::string render_policy_prompt(const PolicyPrompt& p);

struct ScoredAction {
  ActionText action;
  double logprob = 0.0;
};

// Sum of the per-token log-probabilities of `a` continuing the prompt.
ScoredAction score_action(backends::ScoringModel& lm, const PolicyPrompt& p, const ActionText& a);

// Highest score wins; equal scores go to the lexicographically smaller text.
ActionText argmax_action(const std::vector<ScoredAction>& scored);

ActionText select_action(backends::ScoringModel& lm, const PolicyPrompt& p, const std::vector<ActionText>& candidates);

}  // namespace prism::policy
