#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/backends/model.hpp"
#include "prism/backends/oracle.hpp"
#include "prism/core/types.hpp"
#include "prism/dqa/dqa.hpp"
#include "prism/env/household.hpp"
#include "prism/env/nav.hpp"
#include "prism/policy/compact.hpp"
#include "prism/policy/policy.hpp"
#include "prism/util/rng.hpp"

namespace prism::agent {

// One episode to run. Household: family + seed pick the task and layout.
// Nav: nav_episode indexes the world's episode list.
struct EpisodeSpec {
  std::string family;
  std::uint64_t seed = 0;
  int nav_episode = -1;
};

struct EnvSuite {
  std::string kind = "household";  // household | nav
  household::EnvConfig household;
  nav::NavEnvConfig nav;
  std::shared_ptr<const nav::NavWorld> world;

  std::unique_ptr<Environment> make(const EpisodeSpec& spec) const;
};

// Matched-seed episode list: families x seeds (household) or every world
// episode once per seed (nav).
std::vector<EpisodeSpec> household_specs(const std::vector<std::string>& families, std::uint64_t base_seed,
                                         int per_family);
std::vector<EpisodeSpec> nav_specs(const nav::NavWorld& world, std::uint64_t base_seed, int repeats = 1);

struct Backends {
  std::shared_ptr<backends::PerceptionModel> perception;
  std::shared_ptr<backends::ReasoningModel> reasoning;
  std::shared_ptr<backends::ScoringModel> scorer;  // only for the scorer policy
};

// Backends are built per episode so mock cursors and remote clients never
// leak state across concurrently running episodes.
using BackendFactory = std::function<Backends(const EpisodeSpec&)>;

// Scripted oracle perception plus scripted reasoner for the suite's
// vocabulary.
BackendFactory oracle_backends(const EnvSuite& suite, const backends::ScriptedOracleConfig& oracle);

struct Perceived {
  std::string d_f;
  CallRecord calls;
  std::vector<dqa::StepTranscript> transcripts;  // one per view
};

// Runs the configured perception for the current state. Multi-view
// environments get one DQA pass per view, joined as "Front: ...\nLeft: ...".
Perceived perceive_env(const Environment& env, const Observation& obs, const Backends& b, const dqa::DqaConfig& cfg,
                       const dqa::PromptTemplates& t);

struct Decision {
  std::size_t index = 0;
  double logprob = 0.0;
  double value = 0.0;
};

class ActionChooser {
 public:
  virtual ~ActionChooser() = default;
  // `features` is filled when the chooser featurizes (compact policy).
  virtual Decision choose(const Environment& env, const policy::PolicyPrompt& p,
                          const std::vector<ActionText>& candidates, policy::StepFeatures* features) = 0;
};

// Rule-based expert. Household abandonment follows failure_rate.
class ExpertChooser : public ActionChooser {
 public:
  ExpertChooser(double failure_rate, std::uint64_t seed) : failure_rate_(failure_rate), seed_(seed) {}
  Decision choose(const Environment& env, const policy::PolicyPrompt& p, const std::vector<ActionText>& candidates,
                  policy::StepFeatures* features) override;

 private:
  double failure_rate_;
  std::uint64_t seed_;
  std::unique_ptr<household::ExpertBot> bot_;
};

class CompactChooser : public ActionChooser {
 public:
  // sample=false: greedy. sample=true: draw from the softmax with `seed`.
  CompactChooser(std::shared_ptr<const policy::CompactPolicyParams> params, bool sample, std::uint64_t seed)
      : params_(std::move(params)), sample_(sample), rng_(seed) {}
  Decision choose(const Environment& env, const policy::PolicyPrompt& p, const std::vector<ActionText>& candidates,
                  policy::StepFeatures* features) override;

 private:
  std::shared_ptr<const policy::CompactPolicyParams> params_;
  bool sample_;
  util::Rng rng_;
};

// Token-factored scoring through a ScoringModel.
class ScorerChooser : public ActionChooser {
 public:
  explicit ScorerChooser(std::shared_ptr<backends::ScoringModel> lm) : lm_(std::move(lm)) {}
  Decision choose(const Environment& env, const policy::PolicyPrompt& p, const std::vector<ActionText>& candidates,
                  policy::StepFeatures* features) override;

 private:
  std::shared_ptr<backends::ScoringModel> lm_;
};

struct EpisodeOptions {
  dqa::DqaConfig dqa;
  dqa::PromptTemplates templates = dqa::PromptTemplates::defaults();
  std::size_t history_len = HistoryWindow::kDefaultMaxLen;
  bool record_features = false;
};

struct EpisodeResult {
  EpisodeSpec spec;
  Trajectory trajectory;
  std::vector<std::vector<dqa::StepTranscript>> transcripts;  // per step, per view
  std::vector<std::vector<std::string>> candidates;           // per step
  std::vector<Decision> decisions;
  std::vector<policy::StepFeatures> features;  // record_features only
  // Navigation bookkeeping for metrics.
  std::vector<int> nav_path;
  int nav_goal = -1;
};

// Algorithm 1 for one episode: perceive, choose, act, update the history.
EpisodeResult run_episode(const EnvSuite& suite, const EpisodeSpec& spec, const Backends& backends,
                          ActionChooser& chooser, const EpisodeOptions& opts);

using ChooserFactory = std::function<std::unique_ptr<ActionChooser>(const EpisodeSpec&)>;

// Runs every spec on up to `jobs` threads. Results come back in spec order
// regardless of scheduling. The first exception is rethrown after the
// workers finish.
std::vector<EpisodeResult> run_episodes(const EnvSuite& suite, const std::vector<EpisodeSpec>& specs,
                                        const BackendFactory& backends, const ChooserFactory& chooser,
                                        const EpisodeOptions& opts, int jobs);

// Generic ordered parallel map used by the runners above.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// One JSON object per transition.
std::vector<nlohmann::json> trajectory_lines(const EpisodeResult& r);
// One JSON object per step with the DQA transcripts.
std::vector<nlohmann::json> transcript_lines(const EpisodeResult& r);

double success_rate(const std::vector<EpisodeResult>& results);

}  // namespace prism::agent
