#include "prism/backends/oracle.hpp"

#include <regex>

#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/rng.hpp"
#include "prism/util/text.hpp"

namespace prism::backends {

namespace {

const OracleSceneSource& scene_of(const Observation& obs) {
  const auto* src = dynamic_cast<const OracleSceneSource*>(obs.raw_view.get());
  if (!src) throw PreconditionError("scripted oracle needs a simulator observation (episode " + obs.episode_id + ")");
  return *src;
}

util::Rng draw_rng(std::uint64_t seed, const Observation& obs, std::string_view salt) {
  std::uint64_t h = util::combine(seed, util::fnv1a(obs.episode_id));
  h = util::combine(h, static_cast<std::uint64_t>(obs.step));
  return util::Rng(util::combine(h, util::fnv1a(salt)));
}

constexpr std::string_view kPrefix = "Do you see";

}  // namespace

void ScriptedOracleConfig::validate() const {
  auto check = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError(std::string(name) + " must be in [0, 1], got " + std::to_string(p));
  };
  check(answer_error_rate, "answer_error_rate");
  check(raw_omission_rate, "raw_omission_rate");
  check(hallucination_rate, "hallucination_rate");
}

ScriptedOracle::ScriptedOracle(ScriptedOracleConfig cfg, std::string plain_prompt)
    : cfg_(cfg), plain_prompt_(std::move(plain_prompt)) {
  cfg_.validate();
}

std::string question_subject(const std::string& text) {
  std::string s = util::trim(std::string_view(text).substr(std::min(text.size(), kPrefix.size())));
  static const std::regex lead("^(?:a|an|any|the|some)\\s+", std::regex::icase);
  static const std::regex tail("\\s*(?:in the image)?\\s*[?.!]*\\s*$", std::regex::icase);
  s = std::regex_replace(s, lead, "");
  s = std::regex_replace(s, tail, "");
  return s.empty() ? std::string("thing") : s;
}

std::string ScriptedOracle::describe(const std::string& prompt, const Observation& obs) {
  const auto& src = scene_of(obs);
  const LocalScene scene = src.local_scene();
  auto rng = draw_rng(cfg_.rng_seed, obs, prompt);
  const bool goal_aware = util::trim(prompt) != util::trim(plain_prompt_);

  std::vector<std::string> items;
  for (const auto& e : scene.listed) {
    if (e.occluded) continue;
    // one draw per entity keeps the stream aligned whatever the outcome
    const bool drop = rng.bernoulli(cfg_.raw_omission_rate);
    if (drop && !e.focal) continue;
    items.push_back("a " + e.label);
  }

  std::string extra;
  if (goal_aware && rng.bernoulli(cfg_.hallucination_rate)) {
    std::string goal = prompt;
    if (auto pos = prompt.find("goal: "); pos != std::string::npos) {
      goal = prompt.substr(pos + 6);
      goal = goal.substr(0, goal.find('\n'));
    }
    const std::string wanted = longest_match(src.vocabulary(), goal);
    bool present = false;
    for (const auto& e : scene.answerable) present = present || e.name == wanted;
    if (!wanted.empty() && !present) {
      const std::string fake = src.fabricated_label(wanted);
      if (!scene.list_intro.empty())
        items.push_back("a " + fake);
      else
        extra = "There is a " + fake + " " + scene.here + ".";
    }
  }

  std::vector<std::string> parts;
  if (!scene.preamble.empty()) parts.push_back(scene.preamble);
  if (!scene.list_intro.empty())
    parts.push_back(scene.list_intro + " " + (items.empty() ? std::string("nothing") : util::join(items, ", ")) + ".");
  if (!extra.empty()) parts.push_back(extra);
  if (!scene.epilogue.empty()) parts.push_back(scene.epilogue);
  return util::join(parts, " ");
}

ScriptedOracle::Truth ScriptedOracle::ground_truth(const Question& q, const Observation& obs) {
  if (!util::starts_with_ci(util::trim(q.text), kPrefix))
    throw FormatError("question must begin with \"Do you see\": '" + q.text + "'");
  const auto& src = scene_of(obs);
  Truth t;
  t.entity = longest_match(src.vocabulary(), q.text);
  if (t.entity.empty()) return t;
  for (const auto& e : src.local_scene().answerable) t.present = t.present || e.name == t.entity;
  return t;
}

std::string ScriptedOracle::answer(const Question& q, const Observation& obs) {
  const Truth truth = ground_truth(q, obs);
  if (truth.entity.empty()) return "No, I do not see a " + question_subject(util::trim(q.text)) + ".";
  const auto& src = scene_of(obs);
  const LocalScene scene = src.local_scene();
  auto rng = draw_rng(cfg_.rng_seed, obs, "answer:" + q.text);
  const bool say_yes = rng.bernoulli(cfg_.answer_error_rate) ? !truth.present : truth.present;
  if (!say_yes) return "No, I do not see a " + truth.entity + ".";
  if (truth.present) {
    for (const auto& e : scene.answerable)
      if (e.name == truth.entity) return "Yes, there is a " + e.label + " " + e.where + ".";
  }
  return "Yes, there is a " + src.fabricated_label(truth.entity) + " " + scene.here + ".";
}

}  // namespace prism::backends
