#include "prism/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/rng.hpp"

namespace prism::training {

using policy::CompactPolicyParams;
using policy::StepFeatures;

DemoDataset collect_demos(const agent::EnvSuite& suite, const std::vector<agent::EpisodeSpec>& specs,
                          const agent::BackendFactory& backends, const agent::EpisodeOptions& opts,
                          double expert_failure_rate, int jobs, std::vector<agent::EpisodeResult>* kept) {
  if (!(expert_failure_rate >= 0.0 && expert_failure_rate <= 1.0))
    throw ConfigError("expert failure_rate must lie in [0, 1]");
  auto chooser = [expert_failure_rate](const agent::EpisodeSpec& s) -> std::unique_ptr<agent::ActionChooser> {
    return std::make_unique<agent::ExpertChooser>(expert_failure_rate, util::derive_seed(s.seed, 0xe4e7));
  };
  auto results = agent::run_episodes(suite, specs, backends, chooser, opts, jobs);

  DemoDataset d;
  d.episodes_total = static_cast<int>(results.size());
  for (auto& r : results) {
    if (!r.trajectory.success) continue;
    ++d.episodes_kept;
    const auto& t = r.trajectory;
    for (std::size_t i = 0; i < t.transitions.size(); ++i) {
      const auto& tr = t.transitions[i];
      d.records.push_back({t.episode_id, t.family, static_cast<int>(i), t.goal.text(), tr.history_render, tr.d_final,
                           tr.action.text, r.candidates[i], tr.reward});
    }
    if (kept) kept->push_back(std::move(r));
  }
  if (d.episodes_kept == 0) std::cerr << "warning: no successful demonstrations collected\n";
  return d;
}

void save_demos(const DemoDataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << nlohmann::json{{"meta", true},
                        {"split", d.split},
                        {"successful_only", d.successful_only},
                        {"episodes_total", d.episodes_total},
                        {"episodes_kept", d.episodes_kept}}
             .dump()
      << "\n";
  for (const auto& r : d.records)
    out << nlohmann::json{{"episode_id", r.episode_id}, {"family", r.family},   {"step", r.step},
                          {"goal", r.goal},             {"history_render", r.history_render},
                          {"d_f", r.d_f},               {"action", r.action}, {"candidates", r.candidates},
                          {"reward", r.reward}}
               .dump()
        << "\n";
}

DemoDataset load_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("demo file not found: " + path);
  DemoDataset d;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError(path + ":" + std::to_string(lineno) + ": not JSON");
    if (j.value("meta", false)) {
      d.split = j.value("split", d.split);
      d.successful_only = j.value("successful_only", true);
      d.episodes_total = j.value("episodes_total", 0);
      d.episodes_kept = j.value("episodes_kept", 0);
      continue;
    }
    d.records.push_back({j.at("episode_id"), j.at("family"), j.at("step"), j.at("goal"), j.at("history_render"),
                         j.at("d_f"), j.at("action"), j.at("candidates").get<std::vector<std::string>>(),
                         j.at("reward")});
  }
  if (!d.successful_only) throw PreconditionError(path + " was not built from successful episodes only");
  return d;
}

std::vector<Example> build_examples(const CompactPolicyParams& params, const DemoDataset& d) {
  std::vector<Example> out;
  out.reserve(d.records.size());
  for (const auto& r : d.records) {
    std::vector<ActionText> cands;
    int target = -1;
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
      cands.push_back({r.candidates[i]});
      if (r.candidates[i] == r.action) target = static_cast<int>(i);
    }
    if (target < 0) throw PreconditionError("recorded action '" + r.action + "' is not among its candidates");
    policy::PolicyPrompt p{Goal(r.goal), r.history_render, r.d_f};
    out.push_back({policy::featurize(params, p, cands), target});
  }
  return out;
}

namespace {

void add_features(std::vector<double>& grad, std::size_t offset, const policy::FeatureList& f, double coef) {
  if (coef == 0.0) return;
  for (auto i : f) grad[offset + i] += coef;
}

// Pushes dL/dz_c back onto the template rows: z_c = W[t_c] . (prompt + cand_c).
void backprop_logits(const CompactPolicyParams& params, const StepFeatures& f, const std::vector<double>& dz,
                     std::vector<double>& grad) {
  std::vector<double> per_template(params.vocab_size(), 0.0);
  for (std::size_t c = 0; c < dz.size(); ++c) {
    const auto t = static_cast<std::size_t>(f.templates[c]);
    per_template[t] += dz[c];
    add_features(grad, t * params.feature_dim, f.candidate[c], dz[c]);
  }
  for (std::size_t t = 0; t < per_template.size(); ++t)
    add_features(grad, t * params.feature_dim, f.prompt, per_template[t]);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

LossGrad bc_loss(const CompactPolicyParams& params, const std::vector<Example>& data,
                 const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw PreconditionError("bc_loss needs a non-empty batch");
  LossGrad out;
  out.grad.assign(params.theta.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(idx.size());
  for (auto k : idx) {
    const Example& e = data.at(k);
    if (e.target < 0 || static_cast<std::size_t>(e.target) >= e.features.templates.size())
      throw PreconditionError("example target out of range");
    const auto lp = policy::log_softmax(policy::candidate_logits(params, e.features));
    out.loss -= lp[static_cast<std::size_t>(e.target)] * inv_n;
    std::vector<double> dz(lp.size());
    for (std::size_t c = 0; c < lp.size(); ++c)
      dz[c] = (std::exp(lp[c]) - (static_cast<int>(c) == e.target ? 1.0 : 0.0)) * inv_n;
    backprop_logits(params, e.features, dz, out.grad);
  }
  return out;
}

LossGrad bc_loss(const CompactPolicyParams& params, const std::vector<Example>& batch) {
  return bc_loss(params, batch, all_indices(batch.size()));
}

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0)) throw ConfigError("ppo.clip_eps must be > 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("ppo.gamma must lie in [0, 1)");
  if (!(entropy_coef >= 0.0)) throw ConfigError("ppo.entropy_coef must be >= 0");
  if (!(value_coef >= 0.0)) throw ConfigError("ppo.value_coef must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("ppo.momentum must lie in [0, 1)");
  if (epochs_per_batch < 1 || batch_size < 1) throw ConfigError("ppo.epochs_per_batch and ppo.batch_size must be >= 1");
  if (episodes_per_iteration < 1 || total_episodes < 1) throw ConfigError("ppo episode counts must be >= 1");
  if (use_gae && !(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda must lie in [0, 1]");
}

nlohmann::json PpoConfig::to_json() const {
  return {{"clip_eps", clip_eps},
          {"entropy_coef", entropy_coef},
          {"gamma", gamma},
          {"value_coef", value_coef},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"optimizer", "sgd_momentum"},
          {"epochs_per_batch", epochs_per_batch},
          {"batch_size", batch_size},
          {"normalize_advantages", normalize_advantages},
          {"advantage_estimator", use_gae ? "gae" : "mc_minus_value"},
          {"gae_lambda", gae_lambda},
          {"episodes_per_iteration", episodes_per_iteration},
          {"total_episodes", total_episodes},
          {"seed", seed}};
}

double ppo_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

LossGrad ppo_loss(const CompactPolicyParams& params, const std::vector<PpoSample>& data,
                  const std::vector<std::size_t>& idx, const PpoConfig& cfg) {
  if (idx.empty()) throw PreconditionError("ppo_loss needs a non-empty batch");
  LossGrad out;
  out.grad.assign(params.theta.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(idx.size());
  const std::size_t value_off = params.vocab_size() * params.feature_dim;
  for (auto k : idx) {
    const PpoSample& s = data.at(k);
    const auto lp = policy::log_softmax(policy::candidate_logits(params, s.features));
    const auto a = static_cast<std::size_t>(s.action);
    if (a >= lp.size()) throw PreconditionError("ppo sample action out of range");
    const double ratio = std::exp(lp[a] - s.old_logprob);
    if (!std::isfinite(ratio)) throw DivergenceError("non-finite importance ratio");

    const double A = s.advantage;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    const bool unclipped = ratio * A <= clipped * A;
    out.loss -= std::min(ratio * A, clipped * A) * inv_n;
    // d(surrogate)/d(logp_a): zero once the clipped branch is the minimum
    const double ds = unclipped ? ratio * A : 0.0;

    std::vector<double> p(lp.size());
    double H = 0.0;
    for (std::size_t c = 0; c < lp.size(); ++c) {
      p[c] = std::exp(lp[c]);
      H -= p[c] * lp[c];
    }
    out.loss -= cfg.entropy_coef * H * inv_n;

    std::vector<double> dz(lp.size());
    for (std::size_t c = 0; c < lp.size(); ++c) {
      const double dlogp = (c == a ? 1.0 : 0.0) - p[c];
      dz[c] = (-ds * dlogp + cfg.entropy_coef * p[c] * (lp[c] + H)) * inv_n;
    }
    backprop_logits(params, s.features, dz, out.grad);

    if (cfg.value_coef != 0.0) {
      const double v = policy::compact_value(params, s.features.prompt);
      const double err = v - s.ret;
      out.loss += cfg.value_coef * err * err * inv_n;
      add_features(out.grad, value_off, s.features.prompt, 2.0 * cfg.value_coef * err * inv_n);
    }
  }
  if (!std::isfinite(out.loss)) throw DivergenceError("non-finite PPO loss");
  return out;
}

LossGrad ppo_loss(const CompactPolicyParams& params, const std::vector<PpoSample>& batch, const PpoConfig& cfg) {
  return ppo_loss(params, batch, all_indices(batch.size()), cfg);
}

ReturnsAdvantages compute_returns_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                             double gamma, std::optional<double> gae_lambda) {
  if (rewards.size() != values.size()) throw PreconditionError("rewards and values differ in length");
  const std::size_t n = rewards.size();
  ReturnsAdvantages out;
  out.returns.assign(n, 0.0);
  out.advantages.assign(n, 0.0);
  double g = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    g = rewards[i] + gamma * g;
    out.returns[i] = g;
  }
  if (!gae_lambda) {
    for (std::size_t i = 0; i < n; ++i) out.advantages[i] = out.returns[i] - values[i];
    return out;
  }
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_v = i + 1 < n ? values[i + 1] : 0.0;
    const double delta = rewards[i] + gamma * next_v - values[i];
    acc = delta + gamma * *gae_lambda * acc;
    out.advantages[i] = acc;
  }
  return out;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd > 1e-8 ? (a - mean) / sd : a - mean;
}

void SgdMomentum::step(std::vector<double>& theta, const std::vector<double>& grad) {
  if (grad.size() != theta.size()) throw PreconditionError("gradient size mismatch");
  if (velocity_.size() != theta.size()) velocity_.assign(theta.size(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grad[i];
    theta[i] -= lr_ * velocity_[i];
  }
}

void BcConfig::validate() const {
  if (epochs < 1 || batch_size < 1) throw ConfigError("bc.epochs and bc.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("bc.learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("bc.momentum must lie in [0, 1)");
  if (probe_every < 0) throw ConfigError("bc.probe_every must be >= 0");
}

nlohmann::json BcConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"optimizer", "sgd_momentum"},
          {"probe_every", probe_every},
          {"seed", seed}};
}

namespace {

void consider(TrainResult& res, const CompactPolicyParams& params, int iteration, const Probe& probe,
              IterationMetric& m) {
  if (!probe) return;
  const double sr = probe(params);
  m.probe_sr = sr;
  if (sr > res.best_sr) {
    res.best_sr = sr;
    res.best_iteration = iteration;
    res.best = params;
  }
}

}  // namespace

TrainResult train_bc(CompactPolicyParams init, const std::vector<Example>& data, const BcConfig& cfg,
                     const Probe& probe) {
  cfg.validate();
  if (data.empty()) throw PreconditionError("no BC examples (did demo collection keep any episode?)");
  init.stage = "bc";
  TrainResult res;
  CompactPolicyParams& params = init;
  SgdMomentum opt(cfg.learning_rate, cfg.momentum);
  util::Rng rng(util::derive_seed(cfg.seed, 0xbc));
  auto order = all_indices(data.size());
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                   order.begin() + static_cast<long>(std::min(order.size(), start + bs)));
      auto lg = bc_loss(params, data, idx);
      if (!std::isfinite(lg.loss)) throw DivergenceError("BC loss became non-finite at epoch " + std::to_string(epoch));
      total += lg.loss * static_cast<double>(idx.size());
      opt.step(params.theta, lg.grad);
    }
    if (!params.finite()) throw DivergenceError("BC parameters became non-finite at epoch " + std::to_string(epoch));
    IterationMetric m{epoch, total / static_cast<double>(data.size()), std::nullopt, 0};
    const bool probe_now = epoch == cfg.epochs || (cfg.probe_every > 0 && epoch % cfg.probe_every == 0);
    if (probe_now) consider(res, params, epoch, probe, m);
    res.log.push_back(m);
  }
  res.last = params;
  if (!probe) {
    res.best = params;
    res.best_iteration = cfg.epochs;
  }
  return res;
}

std::vector<PpoSample> build_ppo_samples(const std::vector<agent::EpisodeResult>& rollouts, const PpoConfig& cfg) {
  std::vector<PpoSample> out;
  for (const auto& r : rollouts) {
    const auto& tr = r.trajectory.transitions;
    if (r.features.size() != tr.size()) throw PreconditionError("PPO rollouts must be recorded with features");
    std::vector<double> rewards, values;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      rewards.push_back(tr[i].reward);
      values.push_back(r.decisions[i].value);
    }
    auto ra = compute_returns_advantages(rewards, values, cfg.gamma,
                                         cfg.use_gae ? std::optional<double>(cfg.gae_lambda) : std::nullopt);
    for (std::size_t i = 0; i < tr.size(); ++i)
      out.push_back({r.features[i], static_cast<int>(r.decisions[i].index), r.decisions[i].logprob, ra.returns[i],
                     ra.advantages[i]});
  }
  if (cfg.normalize_advantages) {
    std::vector<double> adv;
    adv.reserve(out.size());
    for (const auto& s : out) adv.push_back(s.advantage);
    normalize_advantages(adv);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].advantage = adv[i];
  }
  for (const auto& s : out)
    if (!std::isfinite(s.advantage)) throw DivergenceError("non-finite advantage");
  return out;
}

TrainResult train_ppo(CompactPolicyParams init, const RolloutFn& rollout, const PpoConfig& cfg, const Probe& probe,
                      bool allow_uninitialized) {
  cfg.validate();
  if (!allow_uninitialized && init.stage != "bc" && init.stage != "ppo")
    throw PreconditionError("PPO expects a BC-initialised policy (stage is '" + init.stage +
                            "'); pass the override to start from scratch");
  TrainResult res;
  CompactPolicyParams params = std::move(init);
  {
    IterationMetric m{0, 0.0, std::nullopt, 0};
    consider(res, params, 0, probe, m);
    res.log.push_back(m);
  }
  params.stage = "ppo";
  SgdMomentum opt(cfg.learning_rate, cfg.momentum);
  util::Rng rng(util::derive_seed(cfg.seed, 0x990));
  const int iterations = (cfg.total_episodes + cfg.episodes_per_iteration - 1) / cfg.episodes_per_iteration;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int it = 1; it <= iterations; ++it) {
    const auto rolls = rollout(params, it);
    auto samples = build_ppo_samples(rolls, cfg);
    IterationMetric m{it, 0.0, std::nullopt, static_cast<int>(rolls.size())};
    if (!samples.empty()) {
      auto order = all_indices(samples.size());
      double total = 0.0;
      for (int e = 0; e < cfg.epochs_per_batch; ++e) {
        rng.shuffle(order);
        total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
          std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                       order.begin() + static_cast<long>(std::min(order.size(), start + bs)));
          auto lg = ppo_loss(params, samples, idx, cfg);
          total += lg.loss * static_cast<double>(idx.size());
          opt.step(params.theta, lg.grad);
        }
        if (!params.finite()) throw DivergenceError("PPO parameters became non-finite at iteration " + std::to_string(it));
      }
      m.loss = total / static_cast<double>(samples.size());
    }
    consider(res, params, it, probe, m);
    res.log.push_back(m);
  }
  res.last = params;
  if (!probe) {
    res.best = params;
    res.best_iteration = iterations;
  }
  return res;
}

}  // namespace prism::training
