#include "prism/policy/policy.hpp"

#include "prism/core/errors.hpp"
#include "prism/util/text.hpp"

namespace prism::policy {

std::string render_policy_prompt(const PolicyPrompt& p) {
  std::string out = "You are an agent and you need to accomplish a task.\nYour task is to: " + p.goal.text() + "\n";
  if (!p.history_render.empty()) out += "Previous transitions:\n" + p.history_render + "\n";
  out += "Current Observation:\n" + p.d_f + "\nNext action of the agent:";
  return out;
}

ScoredAction score_action(backends::ScoringModel& lm, const PolicyPrompt& p, const ActionText& a) {
  if (util::trim(a.text).empty()) throw PreconditionError("cannot score an empty action");
  const auto lps = lm.token_logprobs(render_policy_prompt(p), a.text);
  if (lps.empty()) throw ProtocolError("scorer returned no tokens for '" + a.text + "'");
  double sum = 0.0;
  for (double v : lps) {
    if (!(v <= 0.0)) throw ProtocolError("scorer returned a log-probability above 0");
    sum += v;
  }
  return {a, sum};
}

ActionText argmax_action(const std::vector<ScoredAction>& scored) {
  if (scored.empty()) throw PreconditionError("empty candidate set");
  const ScoredAction* best = &scored.front();
  for (const auto& s : scored)
    if (s.logprob > best->logprob || (s.logprob == best->logprob && s.action.text < best->action.text)) best = &s;
  return best->action;
}

ActionText select_action(backends::ScoringModel& lm, const PolicyPrompt& p, const std::vector<ActionText>& candidates) {
  if (candidates.empty()) throw PreconditionError("empty candidate set");
  std::vector<ScoredAction> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) scored.push_back(score_action(lm, p, c));
  return argmax_action(scored);
}

}  // namespace prism::policy
