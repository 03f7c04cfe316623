#include "prism/backends/scripted_reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <json.hpp>

#include "prism/core/errors.hpp"
#include "prism/util/text.hpp"

namespace prism::backends {

namespace {

std::string between(const std::string& s, const std::string& open, const std::string& close) {
  auto b = s.find(open);
  if (b == std::string::npos) return "";
  b += open.size();
  auto e = s.find(close, b);
  return s.substr(b, e == std::string::npos ? std::string::npos : e - b);
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

VerbHints household_verb_hints() {
  return {{"heat", "microwave"}, {"cool", "fridge"}, {"clean", "sinkbasin"}, {"look", "desklamp"}};
}

ScriptedReasoner::ScriptedReasoner(Vocabulary vocab, VerbHints hints)
    : vocab_(std::move(vocab)), hints_(std::move(hints)) {}

std::vector<std::string> ScriptedReasoner::wanted_entities(const std::string& goal) const {
  std::vector<std::string> out;
  const auto words = util::normalized_tokens(goal);
  for (const auto& [verb, thing] : hints_)
    if (std::find(words.begin(), words.end(), verb) != words.end()) out.push_back(thing);
  for (const auto& name : all_matches(vocab_, goal))
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  return out;
}

std::string ScriptedReasoner::questions_for(const std::string& d_i, const std::string& goal) const {
  const auto seen = all_matches(vocab_, d_i);
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  int k = 0;
  for (const auto& name : wanted_entities(goal)) {
    if (std::find(seen.begin(), seen.end(), name) != seen.end()) continue;
    j["question" + std::to_string(++k)] = "Do you see a " + name + "?";
  }
  if (k == 0) return "I have all the information.";
  return j.dump();
}

std::string ScriptedReasoner::answer_to_statement(const std::string& answer) {
  static const std::regex no_see("^no,? i do not see an? (.+?)\\.?$", std::regex::icase);
  static const std::regex yes_no("^(yes|no)\\b[,.!]*\\s*", std::regex::icase);
  const std::string a = util::trim(answer);
  std::smatch m;
  if (std::regex_match(a, m, no_see)) return "There is no " + m[1].str() + " here.";
  std::string rest = std::regex_replace(a, yes_no, "", std::regex_constants::format_first_only);
  rest = util::trim(rest);
  if (rest.empty()) return "";
  if (rest.back() != '.' && rest.back() != '!') rest += ".";
  return capitalize(rest);
}

std::string ScriptedReasoner::merge_text(const std::string& d_i,
                                         const std::vector<std::pair<std::string, std::string>>& qa) {
  std::string out = util::trim(d_i);
  for (const auto& [q, a] : qa) {
    const std::string s = answer_to_statement(a);
    if (s.empty() || util::contains(out, s)) continue;
    out += " " + s;
  }
  return out;
}

std::string ScriptedReasoner::complete(const std::string& prompt) {
  if (util::contains(prompt, "Your current observation is: ")) {
    const std::string d_i = between(prompt, "Your current observation is: ", "\n\nYour goal is: ");
    const std::string goal = util::trim(between(prompt, "Your goal is: ", "\n\nTask:"));
    return questions_for(d_i, goal);
  }
  if (util::contains(prompt, "Here is the initial description:\n")) {
    const std::string d_i = between(prompt, "Here is the initial description:\n", "\n\nHere are the question");
    const std::string block = between(prompt, "pairs:\n", "\n\nNow rewrite");
    std::vector<std::pair<std::string, std::string>> qa;
    for (const auto& line : util::split(block, '\n')) {
      if (line.starts_with("Question: ")) qa.emplace_back(line.substr(10), "");
      else if (line.starts_with("Answer: ") && !qa.empty()) qa.back().second = line.substr(8);
    }
    return merge_text(d_i, qa);
  }
  throw ProtocolError("scripted reasoner cannot handle this prompt: " + prompt.substr(0, 60));
}

}  // namespace prism::backends
