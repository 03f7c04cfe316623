#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/agent/agent.hpp"
#include "prism/policy/compact.hpp"

namespace prism::training {

struct DemoRecord {
  std::string episode_id;
  std::string family;
  int step = 0;
  std::string goal;
  std::string history_render;
  std::string d_f;
  std::string action;
  std::vector<std::string> candidates;
  double reward = 0.0;
};

struct DemoDataset {
  std::string split = "train";
  bool successful_only = true;
  int episodes_total = 0;
  int episodes_kept = 0;
  std::vector<DemoRecord> records;
};

// Rolls the expert with the configured perception active, keeping only
// successful episodes. The kept episode results are returned through `kept`
// when given (the descriptions are then reused, never recomputed).
DemoDataset collect_demos(const agent::EnvSuite& suite, const std::vector<agent::EpisodeSpec>& specs,
                          const agent::BackendFactory& backends, const agent::EpisodeOptions& opts,
                          double expert_failure_rate, int jobs, std::vector<agent::EpisodeResult>* kept = nullptr);

void save_demos(const DemoDataset& d, const std::string& path);
DemoDataset load_demos(const std::string& path);

struct Example {
  policy::StepFeatures features;
  int target = 0;  // index into the candidates
};

// Throws PreconditionError when a recorded action is not among its
// candidates or its template is outside the action vocab.
std::vector<Example> build_examples(const policy::CompactPolicyParams& params, const DemoDataset& d);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as params.theta
};

// Mean negative log-likelihood of the targets.
LossGrad bc_loss(const policy::CompactPolicyParams& params, const std::vector<Example>& batch);
LossGrad bc_loss(const policy::CompactPolicyParams& params, const std::vector<Example>& data,
                 const std::vector<std::size_t>& idx);

struct PpoConfig {
  double clip_eps = 0.1;
  double entropy_coef = 0.001;
  double gamma = 0.99;
  double value_coef = 0.5;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int epochs_per_batch = 4;
  int batch_size = 64;
  bool normalize_advantages = true;
  bool use_gae = false;
  double gae_lambda = 0.95;
  int episodes_per_iteration = 20;
  int total_episodes = 200;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct PpoSample {
  policy::StepFeatures features;
  int action = 0;
  double old_logprob = 0.0;
  double ret = 0.0;
  double advantage = 0.0;
};

// min(r*A, clip(r, 1-eps, 1+eps)*A)
double ppo_surrogate(double ratio, double advantage, double eps);

// -mean(surrogate) - entropy_coef*mean(H) + value_coef*mean((V - R)^2).
// Throws DivergenceError on a non-finite ratio.
LossGrad ppo_loss(const policy::CompactPolicyParams& params, const std::vector<PpoSample>& batch, const PpoConfig& cfg);
LossGrad ppo_loss(const policy::CompactPolicyParams& params, const std::vector<PpoSample>& data,
                  const std::vector<std::size_t>& idx, const PpoConfig& cfg);

struct ReturnsAdvantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

// Monte-Carlo returns; advantage = return - V. With gae_lambda set,
// advantages use GAE(lambda) over the same values (bootstrap 0 at the end).
ReturnsAdvantages compute_returns_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                             double gamma, std::optional<double> gae_lambda = std::nullopt);

// In place: mean 0, std 1 (population std; left centred if std is ~0).
void normalize_advantages(std::vector<double>& adv);

class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void step(std::vector<double>& theta, const std::vector<double>& grad);

 private:
  double lr_;
  double momentum_;
  std::vector<double> velocity_;
};

struct BcConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int probe_every = 5;  // epochs; 0 = only at the end
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct IterationMetric {
  int iteration = 0;
  double loss = 0.0;
  std::optional<double> probe_sr;
  int episodes = 0;
};

struct TrainResult {
  policy::CompactPolicyParams best;
  policy::CompactPolicyParams last;
  double best_sr = -1.0;
  int best_iteration = -1;
  std::vector<IterationMetric> log;
};

// Probe: success rate of the params on a held-out episode set.
using Probe = std::function<double(const policy::CompactPolicyParams&)>;

// Keeps the checkpoint with the highest probe SR (the last one when no
// probe is given). Throws DivergenceError when the loss goes non-finite.
TrainResult train_bc(policy::CompactPolicyParams init, const std::vector<Example>& data, const BcConfig& cfg,
                     const Probe& probe = {});

// Rollouts under the given params (sampling, DQA active) for one iteration.
using RolloutFn = std::function<std::vector<agent::EpisodeResult>(const policy::CompactPolicyParams&, int iteration)>;

// Rollouts must be recorded with features. Requires params.stage bc or ppo
// unless allow_uninitialized.
TrainResult train_ppo(policy::CompactPolicyParams init, const RolloutFn& rollout, const PpoConfig& cfg,
                      const Probe& probe = {}, bool allow_uninitialized = false);

// Turns rollouts into PPO samples with returns and advantages.
std::vector<PpoSample> build_ppo_samples(const std::vector<agent::EpisodeResult>& rollouts, const PpoConfig& cfg);

}  // namespace prism::training
