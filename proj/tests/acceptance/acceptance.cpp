// One line per acceptance criterion. Exit status 1 when any criterion fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "prism/backends/mock.hpp"
#include "prism/backends/oracle.hpp"
#include "prism/backends/scripted_reasoner.hpp"
#include "prism/cli/commands.hpp"
#include "prism/core/errors.hpp"
#include "prism/dqa/dqa.hpp"
#include "prism/eval/ablation.hpp"
#include "prism/eval/metrics.hpp"
#include "prism/policy/policy.hpp"
#include "prism/training/training.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/rng.hpp"
#include "prism/util/text.hpp"

using namespace prism;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSource = PRISM_SOURCE_DIR;
const std::vector<std::string> kFamilies = {"pick", "look", "clean", "heat", "cool", "pick2"};

backends::ScriptedOracleConfig noisy_oracle() {
  backends::ScriptedOracleConfig c;
  c.answer_error_rate = 0.08;
  c.raw_omission_rate = 0.4;
  c.hallucination_rate = 0.5;
  return c;
}

// ------------------------------------------------------------------ 1

struct Graph {
  nav::NavGraph g;
  std::vector<std::vector<double>> fw;
};

double euclid(const nav::Vec3& a, const nav::Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Graph random_graph(std::uint64_t seed) {
  util::Rng rng(seed);
  Graph out;
  const int n = 25;
  for (int i = 0; i < n; ++i) out.g.add_node({rng.uniform() * 20.0, rng.uniform() * 20.0, rng.uniform() * 0.5});
  std::set<std::pair<int, int>> edges;
  auto link = [&](int a, int b) {
    if (a == b || edges.count({std::min(a, b), std::max(a, b)})) return;
    edges.insert({std::min(a, b), std::max(a, b)});
    out.g.add_edge(a, b);
  };
  for (int i = 1; i < n; ++i) link(i, static_cast<int>(rng.index(static_cast<std::size_t>(i))));
  for (int k = 0; k < n; ++k)
    link(static_cast<int>(rng.index(static_cast<std::size_t>(n))), static_cast<int>(rng.index(static_cast<std::size_t>(n))));
  const double inf = std::numeric_limits<double>::infinity();
  out.fw.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), inf));
  for (int i = 0; i < n; ++i) out.fw[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0.0;
  for (const auto& [a, b] : edges) {
    const double d = euclid(out.g.node(a).pos, out.g.node(b).pos);
    out.fw[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = d;
    out.fw[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = d;
  }
  for (std::size_t k = 0; k < out.fw.size(); ++k)
    for (std::size_t i = 0; i < out.fw.size(); ++i)
      for (std::size_t j = 0; j < out.fw.size(); ++j)
        out.fw[i][j] = std::min(out.fw[i][j], out.fw[i][k] + out.fw[k][j]);
  return out;
}

// Walks along edges only: a random neighbor each step.
std::vector<int> random_walk(const nav::NavGraph& g, int start, int steps, util::Rng& rng) {
  std::vector<int> path = {start};
  for (int s = 0; s < steps; ++s) {
    const auto& nb = g.neighbors(path.back());
    path.push_back(nb[rng.index(nb.size())].first);
  }
  return path;
}

Outcome c1_metric_oracle() {
  int episodes = 0, successes = 0, oracle_successes = 0;
  double worst = 0.0;
  bool ordering = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto G = random_graph(1000 + seed);
    util::Rng rng(seed);
    const int n = static_cast<int>(G.g.size());
    for (int e = 0; e < 20; ++e) {
      const int start = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
      const int goal = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
      std::vector<int> path;
      switch (e % 3) {
        case 0: path = random_walk(G.g, start, static_cast<int>(rng.index(12)), rng); break;
        case 1: {  // shortest route, then maybe wander on
          path = G.g.shortest_path(start, goal);
          auto extra = random_walk(G.g, path.back(), static_cast<int>(rng.index(3)), rng);
          path.insert(path.end(), extra.begin() + 1, extra.end());
          break;
        }
        default: {  // detour first, then the shortest route from there
          path = random_walk(G.g, start, 1 + static_cast<int>(rng.index(4)), rng);
          auto rest = G.g.shortest_path(path.back(), goal);
          path.insert(path.end(), rest.begin() + 1, rest.end());
        }
      }
      nav::NavEpisode ep{start, 0, goal, "x", G.fw[static_cast<std::size_t>(start)][static_cast<std::size_t>(goal)]};
      const auto m = eval::nav_metrics(G.g, ep, path);

      // brute force
      const auto& gp = G.g.node(goal).pos;
      const double ne = euclid(G.g.node(path.back()).pos, gp);
      const double sr = ne <= 3.0 ? 1.0 : 0.0;
      double osr = 0.0, walked = 0.0;
      for (std::size_t i = 0; i < path.size(); ++i) {
        if (euclid(G.g.node(path[i]).pos, gp) <= 3.0) osr = 1.0;
        if (i > 0) walked += euclid(G.g.node(path[i - 1]).pos, G.g.node(path[i]).pos);
      }
      const double l = ep.shortest_path_length;
      const double spl = std::max(walked, l) > 0.0 ? sr * l / std::max(walked, l) : sr;

      worst = std::max({worst, std::abs(m.ne - ne), std::abs(m.sr - sr), std::abs(m.osr - osr), std::abs(m.spl - spl)});
      ordering = ordering && m.osr >= m.sr && m.spl <= m.sr + 1e-15;
      ++episodes;
      successes += static_cast<int>(sr);
      oracle_successes += static_cast<int>(osr);
    }
  }
  return {worst <= 1e-9 && ordering,
          std::to_string(episodes) + " episodes on 50 graphs, max |diff| " + f(worst, 12) + ", SR " +
              std::to_string(successes) + ", OSR " + std::to_string(oracle_successes) +
              (ordering ? ", OSR>=SR and SPL<=SR everywhere" : ", ORDERING VIOLATED")};
}

// ------------------------------------------------------------------ 2

Outcome c2_scoring_identity() {
  backends::MockScorer lm(-0.5);
  util::Rng rng(2024);
  policy::PolicyPrompt p{Goal("put a clean mug in coffeemachine."), "", "You are in the middle of a room."};
  double worst = 0.0;
  std::vector<std::string> words = {"go", "to", "take", "mug", "1", "from", "put", "in/on", "open", "fridge", "2"};
  for (int i = 0; i < 1000; ++i) {
    const std::size_t len = 1 + rng.index(8);
    std::string text = "a" + std::to_string(i);
    std::vector<double> lps = {-rng.uniform() * 4.0};
    for (std::size_t k = 1; k < len; ++k) {
      text += " " + words[rng.index(words.size())];
      lps.push_back(-rng.uniform() * 4.0);
    }
    lm.pin(text, lps);
    double prod = 1.0;
    for (double v : lps) prod *= std::exp(v);
    worst = std::max(worst, std::abs(std::exp(policy::score_action(lm, p, {text}).logprob) - prod));
  }
  int shifts_ok = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<policy::ScoredAction> v;
    const std::size_t n = 2 + rng.index(6);
    for (std::size_t k = 0; k < n; ++k) v.push_back({{"cand " + std::to_string(k)}, -rng.uniform() * 10.0});
    const auto before = policy::argmax_action(v).text;
    const double c = (rng.uniform() - 0.5) * 100.0;
    for (auto& s : v) s.logprob += c;
    shifts_ok += policy::argmax_action(v).text == before;
  }
  return {worst <= 1e-12 && shifts_ok == 200,
          "1000 strings, max |exp(sum) - prod| " + f(worst, 16) + "; argmax unchanged under shift in " +
              std::to_string(shifts_ok) + "/200 sets"};
}

// ------------------------------------------------------------------ 3

constexpr std::uint32_t kDim = 40;

policy::CompactPolicyParams random_params(std::uint64_t seed) {
  std::vector<std::string> v;
  for (int i = 0; i < 6; ++i) v.push_back("verb" + std::to_string(i) + " {}");
  auto p = policy::CompactPolicyParams::zeros(v, kDim, seed);
  util::Rng rng(seed);
  for (auto& w : p.theta) w = (rng.uniform() * 2.0 - 1.0) * 0.5;
  return p;
}

policy::StepFeatures random_features(util::Rng& rng, std::size_t vocab, std::size_t n_cand) {
  policy::StepFeatures fe;
  for (int i = 0; i < 5; ++i) fe.prompt.push_back(static_cast<std::uint32_t>(rng.index(kDim)));
  for (std::size_t c = 0; c < n_cand; ++c) {
    fe.templates.push_back(static_cast<int>(rng.index(vocab)));
    policy::FeatureList cf;
    for (int i = 0; i < 3; ++i) cf.push_back(static_cast<std::uint32_t>(rng.index(kDim)));
    fe.candidate.push_back(cf);
  }
  return fe;
}

template <typename Loss>
double fd_relative_error(policy::CompactPolicyParams p, const std::vector<double>& analytic, Loss loss) {
  const double h = 1e-5;
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    const double keep = p.theta[i];
    p.theta[i] = keep + h;
    const double up = loss(p);
    p.theta[i] = keep - h;
    const double down = loss(p);
    p.theta[i] = keep;
    const double num = (up - down) / (2.0 * h);
    diff += (analytic[i] - num) * (analytic[i] - num);
    na += analytic[i] * analytic[i];
    nn += num * num;
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
}

Outcome c3_gradients() {
  double worst_bc = 0.0, worst_ppo = 0.0;
  training::PpoConfig cfg;
  cfg.entropy_coef = 0.01;
  for (std::uint64_t d = 0; d < 20; ++d) {
    auto p = random_params(d);
    util::Rng rng(500 + d);
    std::vector<training::Example> batch;
    for (int k = 0; k < 5; ++k) {
      auto fe = random_features(rng, p.vocab_size(), 2 + rng.index(5));
      batch.push_back({fe, static_cast<int>(rng.index(fe.templates.size()))});
    }
    worst_bc = std::max(worst_bc, fd_relative_error(p, training::bc_loss(p, batch).grad, [&](const auto& q) {
                          return training::bc_loss(q, batch).loss;
                        }));

    auto q = random_params(100 + d);
    std::vector<training::PpoSample> pb;
    for (int k = 0; k < 6; ++k) {
      training::PpoSample s;
      s.features = random_features(rng, q.vocab_size(), 2 + rng.index(4));
      s.action = static_cast<int>(rng.index(s.features.templates.size()));
      const auto lp = policy::log_softmax(policy::candidate_logits(q, s.features));
      // ratios kept away from the clip kinks, where the loss is not differentiable
      const double r = rng.bernoulli(0.5) ? 1.0 + (rng.uniform() - 0.5) * cfg.clip_eps
                                          : (rng.bernoulli(0.5) ? 1.0 + 3 * cfg.clip_eps : 1.0 - 3 * cfg.clip_eps);
      s.old_logprob = lp[static_cast<std::size_t>(s.action)] - std::log(r);
      s.advantage = rng.uniform() * 4.0 - 2.0;
      s.ret = rng.uniform();
      pb.push_back(s);
    }
    worst_ppo = std::max(worst_ppo, fd_relative_error(q, training::ppo_loss(q, pb, cfg).grad, [&](const auto& x) {
                           return training::ppo_loss(x, pb, cfg).loss;
                         }));
  }

  // r = 1 with the auxiliary terms off
  auto p = random_params(77);
  util::Rng rng(77);
  std::vector<training::PpoSample> unit;
  const std::vector<double> adv = {1.5, -0.25, 0.75, -2.0, 0.5};
  for (double a : adv) {
    training::PpoSample s;
    s.features = random_features(rng, p.vocab_size(), 3);
    s.action = 2;
    s.old_logprob = policy::log_softmax(policy::candidate_logits(p, s.features))[2];
    s.advantage = a;
    unit.push_back(s);
  }
  training::PpoConfig plain;
  plain.entropy_coef = 0.0;
  plain.value_coef = 0.0;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  // summation order differs from the reference mean, so allow rounding
  const bool unit_ok = std::abs(training::ppo_loss(p, unit, plain).loss + mean) <= 1e-12;
  const bool hand = training::ppo_surrogate(1.0, 2.0, 0.1) == 2.0 &&
                    std::abs(training::ppo_surrogate(1.3, 1.0, 0.1) - 1.1) < 1e-15 &&
                    std::abs(training::ppo_surrogate(0.8, -1.0, 0.1) + 0.9) < 1e-15;
  return {worst_bc < 1e-4 && worst_ppo < 1e-4 && unit_ok && hand,
          "max rel err bc " + f(worst_bc, 10) + ", ppo " + f(worst_ppo, 10) + "; r=1 -> -mean(A) " +
              (unit_ok ? "to 1e-12" : "MISMATCH") + "; hand examples " + (hand ? "2, 1.1, -0.9" : "MISMATCH")};
}

// ------------------------------------------------------------------ 4

Outcome c4_call_accounting() {
  agent::EnvSuite suite;
  auto specs = agent::household_specs(kFamilies, 404, 17);
  specs.resize(100);
  auto chooser = [](const agent::EpisodeSpec& s) { return std::make_unique<agent::ExpertChooser>(0.3, s.seed); };
  long steps = 0, short_circuits = 0, violations = 0, questions = 0;
  for (auto merge : {dqa::MergeStrategy::llm_merge}) {
    agent::EpisodeOptions o;
    o.dqa.merge = merge;
    auto rs = agent::run_episodes(suite, specs, agent::oracle_backends(suite, noisy_oracle()), chooser, o, 4);
    for (const auto& r : rs)
      for (std::size_t k = 0; k < r.transcripts.size(); ++k) {
        const auto& t = r.transcripts[k][0];
        const int nq = static_cast<int>(t.questions.size());
        const int want_reasoning = (nq == 0 ? 1 : 2) + t.format_retries;
        const bool ok = t.perception_calls == 1 + nq && t.reasoning_calls == want_reasoning &&
                        r.trajectory.transitions[k].calls.perception_calls == t.perception_calls &&
                        r.trajectory.transitions[k].calls.reasoning_calls == t.reasoning_calls &&
                        (nq > 0 || t.short_circuit);
        violations += !ok;
        short_circuits += nq == 0;
        questions += nq;
        ++steps;
      }
  }
  long raw_steps = 0;
  for (auto mode : {dqa::PerceptionMode::raw, dqa::PerceptionMode::goal_aware}) {
    agent::EpisodeOptions o;
    o.dqa.mode = mode;
    auto rs = agent::run_episodes(suite, specs, agent::oracle_backends(suite, noisy_oracle()), chooser, o, 4);
    for (const auto& r : rs)
      for (const auto& step : r.transcripts) {
        violations += !(step[0].perception_calls == 1 && step[0].reasoning_calls == 0);
        ++raw_steps;
      }
  }
  return {violations == 0 && steps > 0 && short_circuits > 0 && questions > 0,
          "100 episodes: " + std::to_string(steps) + " interactive steps (" + std::to_string(questions) +
              " questions, " + std::to_string(short_circuits) + " short-circuits), " + std::to_string(raw_steps) +
              " raw/goal-aware steps, " + std::to_string(violations) + " violations"};
}

// ------------------------------------------------------------------ 5

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "prism");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome c5_determinism() {
  const auto root = fs::temp_directory_path() / "prism_acceptance_c5";
  fs::remove_all(root);
  const std::vector<std::string> noise = {"--set", "oracle.answer_error_rate=0.08", "--set",
                                          "oracle.raw_omission_rate=0.4", "--set", "oracle.hallucination_rate=0.5"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), noise.begin(), noise.end());
    return a;
  };
  if (cli(with({"run-episode", "--seed", "7", "--episodes", "3", "--policy", "expert", "--set",
                "policy.expert_failure_rate=0.3", "--out", (root / "a").string()})) != 0)
    return {false, "first run-episode failed"};
  if (cli({"run-episode", "--config", (root / "a" / "manifest.json").string(), "--jobs", "4", "--out",
           (root / "b").string()}) != 0)
    return {false, "manifest replay failed"};
  if (cli(with({"ablate", "--suite", "merge", "--seed", "3", "--family", "pick", "--family", "cool", "--set",
                "ablation.demo_episodes=6", "--set", "ablation.eval_episodes=6", "--set", "bc.epochs=10", "--set",
                "ablation.bootstrap_resamples=200", "--out", (root / "c").string()})) != 0)
    return {false, "first ablate failed"};
  if (cli({"ablate", "--config", (root / "c" / "manifest.json").string(), "--jobs", "3", "--out",
           (root / "d").string()}) != 0)
    return {false, "ablate replay failed"};
  int same = 0, total = 0;
  std::string differs;
  auto compare = [&](const fs::path& x, const fs::path& y, const std::vector<std::string>& files) {
    for (const auto& name : files) {
      ++total;
      if (slurp(x / name) == slurp(y / name) && !slurp(x / name).empty())
        ++same;
      else
        differs += " " + name;
    }
  };
  compare(root / "a", root / "b", {"trajectories.jsonl", "transcripts.jsonl", "metrics.json", "metrics.md"});
  compare(root / "c", root / "d", {"trajectories.jsonl", "report.csv", "report.md", "report.json"});
  fs::remove_all(root);
  return {same == total, std::to_string(same) + "/" + std::to_string(total) +
                             " artifacts byte-identical across manifest re-runs (jobs 1 vs 3-4)" + differs};
}

// ------------------------------------------------------------------ 6

std::vector<std::pair<std::string, double>> per_family_sr(const std::vector<agent::EpisodeResult>& rs) {
  std::map<std::string, std::pair<int, int>> m;
  for (const auto& r : rs) {
    m[r.spec.family].first += r.trajectory.success ? 1 : 0;
    m[r.spec.family].second += 1;
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& fam : kFamilies)
    if (m.count(fam)) out.emplace_back(fam, static_cast<double>(m[fam].first) / m[fam].second);
  return out;
}

std::vector<agent::EpisodeResult> greedy(const agent::EnvSuite& suite, const policy::CompactPolicyParams& p,
                                         const std::vector<agent::EpisodeSpec>& specs,
                                         const backends::ScriptedOracleConfig& oc) {
  auto sp = std::make_shared<const policy::CompactPolicyParams>(p);
  return agent::run_episodes(
      suite, specs, agent::oracle_backends(suite, oc),
      [sp](const agent::EpisodeSpec&) { return std::make_unique<agent::CompactChooser>(sp, false, 0); }, {}, 4);
}

Outcome c6_bc() {
  agent::EnvSuite suite;
  suite.household.step.step_cap = 30;
  const backends::ScriptedOracleConfig clean;
  auto demos = training::collect_demos(suite, agent::household_specs({"pick"}, 1000, 200),
                                       agent::oracle_backends(suite, clean), {}, 0.0, 4);
  auto init = policy::CompactPolicyParams::zeros(policy::household_action_vocab(), 4096, 7);
  auto ex = training::build_examples(init, demos);
  training::BcConfig bc;
  bc.epochs = 50;
  bc.probe_every = 0;
  const auto r = training::train_bc(init, ex, bc);
  const auto held_out = agent::household_specs({"pick"}, 999999, 100);
  const double sr = agent::success_rate(greedy(suite, r.last, held_out, clean));
  return {sr >= 0.90 && demos.episodes_kept >= 200,
          std::to_string(demos.episodes_kept) + " demos (" + std::to_string(ex.size()) +
              " steps), 50 epochs, final loss " + f(r.log.back().loss) + ", held-out pick SR " + f(sr, 3) +
              " on 100 episodes"};
}

// ------------------------------------------------------------------ 7

// Protocol fixed before the run: BC on 10 noisy demos per family (20
// epochs), PPO lr 3e-3 for 200 episodes in iterations of 20, best
// checkpoint by probe SR on 50 episodes per family.
Outcome c7_ppo() {
  agent::EnvSuite suite;
  const auto oc = noisy_oracle();
  auto demos = training::collect_demos(suite, agent::household_specs(kFamilies, 11, 10),
                                       agent::oracle_backends(suite, oc), {}, 0.0, 4);
  auto init = policy::CompactPolicyParams::zeros(policy::household_action_vocab(), 4096, 7);
  training::BcConfig bc;
  bc.epochs = 20;
  const auto bc_params = training::train_bc(init, training::build_examples(init, demos), bc).last;

  const auto probe_specs = agent::household_specs(kFamilies, 22, 50);
  training::PpoConfig pc;
  pc.learning_rate = 3e-3;
  training::Probe probe = [&](const policy::CompactPolicyParams& p) {
    return agent::success_rate(greedy(suite, p, probe_specs, oc));
  };
  training::RolloutFn roll = [&](const policy::CompactPolicyParams& p, int it) {
    auto sp = std::make_shared<const policy::CompactPolicyParams>(p);
    agent::EpisodeOptions o;
    o.record_features = true;
    std::vector<agent::EpisodeSpec> specs;
    for (int i = 0; i < pc.episodes_per_iteration; ++i)
      specs.push_back({kFamilies[static_cast<std::size_t>(i) % kFamilies.size()],
                       util::derive_seed(4444 + static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(i)), -1});
    return agent::run_episodes(
        suite, specs, agent::oracle_backends(suite, oc),
        [sp](const agent::EpisodeSpec& s) { return std::make_unique<agent::CompactChooser>(sp, true, s.seed); }, o, 4);
  };
  const auto r = training::train_ppo(bc_params, roll, pc, probe);
  const auto before = per_family_sr(greedy(suite, bc_params, probe_specs, oc));
  const auto after = per_family_sr(greedy(suite, r.best, probe_specs, oc));
  bool no_drop = true;
  double avg_b = 0.0, avg_a = 0.0;
  std::string detail;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double d = 100.0 * (after[i].second - before[i].second);
    no_drop = no_drop && d >= -2.0 - 1e-9;
    avg_b += before[i].second / static_cast<double>(before.size());
    avg_a += after[i].second / static_cast<double>(before.size());
    detail += before[i].first + " " + f(100 * before[i].second, 0) + "->" + f(100 * after[i].second, 0) + " ";
  }
  return {no_drop && avg_a > avg_b, "probe SR by family: " + detail + "| avg " + f(100 * avg_b, 1) + " -> " +
                                        f(100 * avg_a, 1) + " (best iteration " + std::to_string(r.best_iteration) + ")"};
}

// ------------------------------------------------------------------ 8, 9

eval::AblationConfig matched_protocol() {
  eval::AblationConfig cfg;
  cfg.families = kFamilies;
  cfg.oracle = noisy_oracle();
  cfg.demo_episodes = 40;
  cfg.eval_episodes = 40;
  cfg.bc.epochs = 30;
  cfg.seed = 5;
  cfg.jobs = 4;
  return cfg;
}

Outcome c8_perception_modes() {
  const auto rep = eval::run_ablation("perception_mode", matched_protocol());
  const auto& in = rep.row("interactive", "avg");
  const double i = 100 * in.sr, r = 100 * rep.row("raw", "avg").sr, g = 100 * rep.row("goal_aware", "avg").sr;
  return {i >= r && r >= g && i - r >= 3.0,
          std::to_string(in.episodes) + " matched episodes per arm: interactive " + f(i, 1) + " >= raw " + f(r, 1) +
              " >= goal_aware " + f(g, 1) + "; interactive - raw = " + f(i - r, 1) + " pts"};
}

Outcome c9_budget() {
  const auto rep = eval::run_ablation("qa_budget", matched_protocol());
  const auto& un = rep.row("unbudgeted", "avg");
  const double u = 100 * un.sr, b1 = 100 * rep.row("budget_1", "avg").sr, b3 = 100 * rep.row("budget_3", "avg").sr;
  return {b3 >= b1 && u >= b3 - 1.0,
          std::to_string(un.episodes) + " matched episodes per arm: budget_1 " + f(b1, 1) + ", budget_3 " + f(b3, 1) +
              ", unbudgeted " + f(u, 1) + " (mean questions per pass " + f(un.mean_questions, 2) + ")"};
}

// ------------------------------------------------------------------ 10

Outcome c10_calibration() {
  backends::ScriptedOracle oracle({0.08, 0.0, 0.0, 10});
  const auto names = household::object_names();
  const std::vector<std::string> places = {"countertop", "diningtable", "sidetable", "shelf", "desk"};
  util::Rng rng(10);
  std::vector<eval::QaItem> items;
  for (int i = 0; i < 1000; ++i) {
    household::SceneState s;
    const auto& place = places[static_cast<std::size_t>(i) % places.size()];
    s.receptacles = {household::Receptacle{place, 1, household::ReceptacleKind::surface}};
    s.agent_at = 0;
    std::vector<std::string> here;
    for (int k = 0; k < 3; ++k) {
      household::Object o;
      o.name = names[rng.index(names.size())];
      o.location = 0;
      s.objects.push_back(o);
      here.push_back(o.name);
    }
    // balanced: every other query asks about an object that is there
    std::string asked;
    if (i % 2 == 0) {
      asked = here[rng.index(here.size())];
    } else {
      do asked = names[rng.index(names.size())];
      while (std::find(here.begin(), here.end(), asked) != here.end());
    }
    auto v = std::make_shared<const household::HouseholdView>(s);
    Observation obs{"calibration", i, v, v};
    Question q{"question1", "Do you see a " + asked + "?"};
    const auto truth = backends::ScriptedOracle::ground_truth(q, obs);
    items.push_back({place, eval::classify_answer(oracle.answer(q, obs)), truth.present});
  }
  const auto acc = eval::qa_accuracy(items);
  return {acc.f1 >= 0.88 && acc.f1 <= 0.96 && acc.unparsed == 0,
          "1000 balanced queries over " + std::to_string(acc.per_group.size()) + " groups: macro P " +
              f(acc.precision, 3) + " R " + f(acc.recall, 3) + " F1 " + f(acc.f1, 3)};
}

// ------------------------------------------------------------------ 11

Outcome c11_merge_length() {
  std::ifstream in(kSource + "/data/nav/house_fixture_transcripts.jsonl");
  backends::ScriptedReasoner merger(nav::landmark_vocabulary());
  std::size_t tok_llm = 0, tok_cat = 0, with_qa = 0, longer = 0, leaks = 0, replayed = 0, total = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto step = nlohmann::json::parse(line);
    for (const auto& t : step["transcripts"]) {
      ++total;
      if (t["qa"].empty()) continue;
      ++with_qa;
      const Description d_i(t["d_i"].get<std::string>(), DescriptionKind::initial, "fixture");
      std::vector<QAPair> qa;
      for (const auto& p : t["qa"]) qa.push_back({{"q", p["question"].get<std::string>()}, p["answer"].get<std::string>()});
      const auto llm = dqa::merge(merger, d_i, qa, dqa::MergeStrategy::llm_merge).text();
      const auto cat = dqa::merge(merger, d_i, qa, dqa::MergeStrategy::concat).text();
      const auto only = dqa::merge(merger, d_i, qa, dqa::MergeStrategy::qa_only).text();
      replayed += llm == t["d_f"].get<std::string>();
      const auto a = util::whitespace_token_count(llm), b = util::whitespace_token_count(cat);
      tok_llm += a;
      tok_cat += b;
      longer += b > a;
      leaks += util::contains(only, d_i.text());
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(with_qa, 1));
  return {with_qa > 0 && tok_cat > tok_llm && leaks == 0,
          std::to_string(with_qa) + "/" + std::to_string(total) + " view transcripts with QA: mean tokens llm_merge " +
              f(tok_llm / n, 1) + " vs concat " + f(tok_cat / n, 1) + " (concat longer in " + std::to_string(longer) +
              "), qa_only contains d_i in " + std::to_string(leaks) + "; llm_merge re-derives the logged d_f in " +
              std::to_string(replayed)};
}

// ------------------------------------------------------------------ 12

Outcome c12_text_metrics() {
  const double r = eval::rouge_l("the cat sat", "the cat is sat");
  const double m = eval::meteor_exact("a b c", "a b c");
  const bool ident = eval::rouge_l("put the mug away", "put the mug away") == 1.0 &&
                     std::abs(eval::meteor_exact("put the mug away now please", "put the mug away now please") - 1.0) <
                         0.01;
  const bool meteor_one = [] {
    // exact-match METEOR approaches 1 on identical inputs as the single chunk grows
    std::string s;
    for (int i = 0; i < 200; ++i) s += "w" + std::to_string(i) + " ";
    return std::abs(eval::meteor_exact(s, s) - 1.0) < 1e-6;
  }();
  const bool disjoint = eval::rouge_l("red blue", "green gray") == 0.0 && eval::meteor_exact("red blue", "green gray") == 0.0;
  return {std::abs(r - 0.8571) <= 1e-4 && std::abs(m - 0.9815) <= 1e-4 && ident && meteor_one && disjoint,
          "rouge_l " + f(r) + ", meteor_exact(3 identical tokens) " + f(m) + ", identical -> 1 " +
              (ident && meteor_one ? "yes" : "NO") + ", disjoint -> 0 " + (disjoint ? "yes" : "NO")};
}

// ------------------------------------------------------------------ 13

Outcome c13_golden() {
  const auto& t = dqa::PromptTemplates::defaults();
  const std::string g = "heat some egg and put it in diningtable.";
  const std::string d_i = "You are at the countertop 1. On the countertop 1, you see a apple 1.";
  const std::vector<QAPair> qa = {{{"question1", "Do you see a microwave?"}, "No, I do not see a microwave."},
                                  {{"question2", "Do you see a egg?"}, "Yes, there is a egg 1 on the countertop 1."}};
  const std::map<std::string, std::string> rendered = {
      {"initial_description", t.initial_description},
      {"question_generation", dqa::render_template(t.question_generation, {{"d_i", d_i}, {"g", g}})},
      {"vqa", dqa::render_template(t.vqa, {{"q", "Do you see a microwave?"}})},
      {"refinement", dqa::render_template(t.refinement, {{"d_i", d_i}, {"qa_pairs", dqa::render_qa_block(qa)}})},
      {"goal_aware", dqa::render_template(t.goal_aware, {{"g", g}})},
      {"judge",
       dqa::render_template(t.judge, {{"gt", "You are at the countertop 1. On the countertop 1, you see a apple 1, a egg 1 (occluded)."},
                                      {"a", "A countertop with an apple."},
                                      {"b", "A countertop with an apple and a microwave."},
                                      {"c", "A countertop with an apple 1 and an egg 1."}})}};
  int ok = 0;
  std::string bad;
  for (const auto& [name, text] : rendered) {
    if (text == slurp(kSource + "/tests/golden/" + name + ".txt"))
      ++ok;
    else
      bad += " " + name;
  }
  return {ok == 6, std::to_string(ok) + "/6 templates byte-match their golden files" + bad};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "metric oracle equivalence", 10, c1_metric_oracle},
      {2, "token-factored scoring identity", 5, c2_scoring_identity},
      {3, "gradient correctness", 30, c3_gradients},
      {4, "pipeline call accounting", 60, c4_call_accounting},
      {5, "determinism", 60, c5_determinism},
      {6, "BC desk-scale learning", 300, c6_bc},
      {7, "PPO directional improvement", 900, c7_ppo},
      {8, "perception-mode ordering", 0, c8_perception_modes},
      {9, "QA-budget monotonicity", 0, c9_budget},
      {10, "oracle answer calibration", 0, c10_calibration},
      {11, "merge-length property", 0, c11_merge_length},
      {12, "text-metric kernels", 0, c12_text_metrics},
      {13, "golden prompts", 0, c13_golden},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.pass = false;
      o.detail += "; over the " + f(c.limit_s, 0) + " s limit";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << c.id << "] " << c.name << ": " << o.detail << " ("
              << f(secs, 2) << " s)" << std::endl;
  }
  return failed ? 1 : 0;
}
