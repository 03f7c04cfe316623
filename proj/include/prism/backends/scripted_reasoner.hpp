#pragma once

#include <string>
#include <utility>
#include <vector>

#include "prism/backends/model.hpp"
#include "prism/backends/scene.hpp"

namespace prism::backends {

// Goal words that imply a tool or appliance ("heat" -> "microwave").
using VerbHints = std::vector<std::pair<std::string, std::string>>;

VerbHints household_verb_hints();

// Rule-based stand-in for the reasoning LLM. It reads only the prompt text
// and a list of nameable things; it never touches simulator state.
//
// Question generation: asks "Do you see a <x>?" for every goal-relevant name
// (hinted appliance first, then goal mentions in order) that the initial
// description does not mention. Merge: keeps the description and appends one
// declarative sentence per answer.
class ScriptedReasoner : public ReasoningModel {
 public:
  explicit ScriptedReasoner(Vocabulary vocab, VerbHints hints = {});

  std::string complete(const std::string& prompt) override;
  std::string id() const override { return "scripted-reasoner"; }

  std::vector<std::string> wanted_entities(const std::string& goal) const;
  std::string questions_for(const std::string& d_i, const std::string& goal) const;
  static std::string merge_text(const std::string& d_i, const std::vector<std::pair<std::string, std::string>>& qa);
  // One answer rewritten as a statement; "" when it carries nothing.
  static std::string answer_to_statement(const std::string& answer);

 private:
  Vocabulary vocab_;
  VerbHints hints_;
};

}  // namespace prism::backends
