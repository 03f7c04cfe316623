#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/agent/agent.hpp"
#include "prism/eval/metrics.hpp"
#include "prism/training/training.hpp"

namespace prism::eval {

// Family -> fixture questions. "{object}" and "{target}" are filled with the
// first and second vocabulary names mentioned in the goal.
using OracleQuestions = std::map<std::string, std::vector<std::string>>;

OracleQuestions load_oracle_questions(const std::string& path);

// Reasoning stand-in that answers every question-generation prompt with the
// fixture questions and hands merges to `inner`.
class FixtureQuestionReasoner : public backends::ReasoningModel {
 public:
  FixtureQuestionReasoner(std::vector<std::string> templates, backends::Vocabulary vocab,
                          std::shared_ptr<backends::ReasoningModel> inner);
  std::string complete(const std::string& prompt) override;
  std::string id() const override { return "fixture-questions+" + inner_->id(); }

 private:
  std::vector<std::string> templates_;
  backends::Vocabulary vocab_;
  std::shared_ptr<backends::ReasoningModel> inner_;
};

struct Arm {
  std::string name;
  dqa::DqaConfig dqa;
  std::string questions = "generated";  // generated | oracle_q | oracle_qa
};

// Arms of a suite, reference arm first. Throws ConfigError on an unknown
// suite name.
std::vector<Arm> suite_arms(const std::string& suite, const dqa::DqaConfig& base);
const std::vector<std::string>& suite_names();

struct AblationConfig {
  agent::EnvSuite suite;
  std::shared_ptr<const nav::NavWorld> nav_train_world;  // nav demos; defaults to suite.world
  std::vector<std::string> families;
  int demo_episodes = 40;  // per family (nav: repeats of the world's episodes)
  int eval_episodes = 40;  // per family (nav: repeats)
  std::uint64_t seed = 0;
  backends::ScriptedOracleConfig oracle;
  dqa::DqaConfig base;
  // bc_per_arm: each arm trains BC on expert demos collected under its own
  // perception; checkpoint: one shared policy; expert: rule-based control.
  std::string policy = "bc_per_arm";
  std::shared_ptr<const policy::CompactPolicyParams> checkpoint;
  training::BcConfig bc;
  std::uint32_t feature_dim = 4096;
  OracleQuestions oracle_questions;
  int jobs = 1;
  int bootstrap_resamples = 1000;

  void validate() const;
};

struct ArmFamilyRow {
  std::string arm;
  std::string family;  // "avg" for the across-family row
  int episodes = 0;
  int successes = 0;
  double sr = 0.0;
  Interval sr_ci;
  double mean_questions = 0.0;      // per perception pass
  double mean_prompt_tokens = 0.0;  // whitespace-token proxy, policy prompt
  double mean_df_tokens = 0.0;      // whitespace-token proxy, d_f
  int wins = 0;                     // arm succeeded, reference failed
  int losses = 0;                   // reference succeeded, arm failed
  double sign_p = 1.0;
  std::optional<NavMetrics> nav;
};

struct ArmRun {
  Arm arm;
  int demo_episodes_kept = 0;
  std::vector<agent::EpisodeResult> episodes;
};

struct AblationReport {
  std::string suite;
  std::vector<std::string> families;
  std::vector<ArmFamilyRow> rows;
  std::vector<ArmRun> runs;

  const ArmFamilyRow& row(const std::string& arm, const std::string& family) const;
  std::string csv() const;
  std::string markdown() const;
  nlohmann::json to_json() const;
};

AblationReport run_ablation(const std::string& suite, const AblationConfig& cfg);

// Per-family and average rows for one arm's episodes, paired against the
// reference episodes (same order, same specs).
std::vector<ArmFamilyRow> summarize_arm(const std::string& arm, const std::vector<agent::EpisodeResult>& eps,
                                        const std::vector<agent::EpisodeResult>* reference,
                                        const std::vector<std::string>& families, int resamples, std::uint64_t seed,
                                        const nav::NavWorld* world = nullptr);

}  // namespace prism::eval
