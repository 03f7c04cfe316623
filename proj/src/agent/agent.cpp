#include "prism/agent/agent.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "prism/backends/oracle.hpp"
#include "prism/backends/scripted_reasoner.hpp"
#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"

namespace prism::agent {

std::unique_ptr<Environment> EnvSuite::make(const EpisodeSpec& spec) const {
  if (kind == "household") {
    const auto fam = household::family_from_string(spec.family);
    return std::make_unique<household::HouseholdEnv>(household::sample_task(fam, spec.seed), household);
  }
  if (kind == "nav") {
    if (!world) throw PreconditionError("nav suite has no world loaded");
    if (spec.nav_episode < 0 || static_cast<std::size_t>(spec.nav_episode) >= world->episodes.size())
      throw PreconditionError("nav episode index out of range: " + std::to_string(spec.nav_episode));
    return std::make_unique<nav::NavEnv>(world, static_cast<std::size_t>(spec.nav_episode), nav);
  }
  throw ConfigError("unknown environment kind '" + kind + "' (expected household or nav)");
}

std::vector<EpisodeSpec> household_specs(const std::vector<std::string>& families, std::uint64_t base_seed,
                                         int per_family) {
  std::vector<EpisodeSpec> out;
  for (const auto& f : families) {
    household::family_from_string(f);  // validates
    for (int i = 0; i < per_family; ++i)
      out.push_back({f, util::derive_seed(base_seed, static_cast<std::uint64_t>(i)), -1});
  }
  return out;
}

std::vector<EpisodeSpec> nav_specs(const nav::NavWorld& world, std::uint64_t base_seed, int repeats) {
  std::vector<EpisodeSpec> out;
  for (int r = 0; r < repeats; ++r)
    for (std::size_t e = 0; e < world.episodes.size(); ++e)
      out.push_back({"nav", util::derive_seed(base_seed, static_cast<std::uint64_t>(r)), static_cast<int>(e)});
  return out;
}

BackendFactory oracle_backends(const EnvSuite& suite, const backends::ScriptedOracleConfig& oracle) {
  oracle.validate();
  const bool nav = suite.kind == "nav";
  return [oracle, nav](const EpisodeSpec&) {
    Backends b;
    b.perception = std::make_shared<backends::ScriptedOracle>(oracle);
    if (nav)
      b.reasoning = std::make_shared<backends::ScriptedReasoner>(nav::landmark_vocabulary());
    else
      b.reasoning = std::make_shared<backends::ScriptedReasoner>(household::vocabulary(), backends::household_verb_hints());
    return b;
  };
}

Perceived perceive_env(const Environment& env, const Observation& obs, const Backends& b, const dqa::DqaConfig& cfg,
                       const dqa::PromptTemplates& t) {
  if (!b.perception || !b.reasoning) throw PreconditionError("perception and reasoning backends are required");
  Perceived out;
  auto run = [&](const Observation& o) {
    auto [d_f, tr] = dqa::perceive(*b.perception, *b.reasoning, o, env.goal(), cfg, t);
    dqa::check_transcript(tr, cfg.mode);
    out.calls.perception_calls += tr.perception_calls;
    out.calls.reasoning_calls += tr.reasoning_calls;
    out.calls.questions += static_cast<int>(tr.questions.size());
    out.transcripts.push_back(std::move(tr));
    return d_f.text();
  };
  const auto views = env.view_names();
  if (views.empty()) {
    out.d_f = run(obs);
    return out;
  }
  for (const auto& v : views) {
    std::string name = v;
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    if (!out.d_f.empty()) out.d_f += "\n";
    out.d_f += name + ": " + run(env.observe_view(v));
  }
  return out;
}

namespace {

std::size_t index_of(const std::vector<ActionText>& cands, const std::string& text) {
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (cands[i].text == text) return i;
  throw InvariantViolation("expert action '" + text + "' is not among the candidates");
}

}  // namespace

Decision ExpertChooser::choose(const Environment& env, const policy::PolicyPrompt&,
                               const std::vector<ActionText>& candidates, policy::StepFeatures*) {
  if (const auto* h = dynamic_cast<const household::HouseholdEnv*>(&env)) {
    if (!bot_) bot_ = std::make_unique<household::ExpertBot>(h->task(), failure_rate_, seed_);
    return {index_of(candidates, bot_->act(h->state()).text()), 0.0, 0.0};
  }
  if (const auto* n = dynamic_cast<const nav::NavEnv*>(&env)) {
    const auto a = nav::expert_next(n->world().graph, n->episode(), n->state());
    return {index_of(candidates, nav::to_string(a)), 0.0, 0.0};
  }
  throw PreconditionError("no expert for this environment");
}

Decision CompactChooser::choose(const Environment&, const policy::PolicyPrompt& p,
                                const std::vector<ActionText>& candidates, policy::StepFeatures* features) {
  auto f = policy::featurize(*params_, p, candidates);
  const auto lp = policy::log_softmax(policy::candidate_logits(*params_, f));
  Decision d;
  if (sample_) {
    std::vector<double> probs(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) probs[i] = std::exp(lp[i]);
    d.index = rng_.categorical(probs);
  } else {
    d.index = policy::greedy_index(lp, candidates);
  }
  d.logprob = lp[d.index];
  d.value = policy::compact_value(*params_, f.prompt);
  if (features) *features = std::move(f);
  return d;
}

Decision ScorerChooser::choose(const Environment&, const policy::PolicyPrompt& p,
                               const std::vector<ActionText>& candidates, policy::StepFeatures*) {
  if (candidates.empty()) throw PreconditionError("empty candidate set");
  std::vector<policy::ScoredAction> scored;
  for (const auto& c : candidates) scored.push_back(policy::score_action(*lm_, p, c));
  const auto best = policy::argmax_action(scored);
  const std::size_t i = index_of(candidates, best.text);
  return {i, scored[i].logprob, 0.0};
}

namespace {

std::string episode_id(const EnvSuite& suite, const EpisodeSpec& spec) {
  if (suite.kind == "nav")
    return "nav-" + suite.world->name + "-" + std::to_string(spec.nav_episode) + "-s" + std::to_string(spec.seed);
  return "household-" + spec.family + "-" + std::to_string(spec.seed);
}

}  // namespace

EpisodeResult run_episode(const EnvSuite& suite, const EpisodeSpec& spec, const Backends& backends,
                          ActionChooser& chooser, const EpisodeOptions& opts) {
  opts.dqa.validate();
  auto env = suite.make(spec);
  EpisodeResult res;
  res.spec = spec;
  Observation obs = env->reset(spec.seed);
  res.trajectory.episode_id = episode_id(suite, spec);
  res.trajectory.goal = env->goal();
  res.trajectory.family = env->family();

  HistoryWindow history(opts.history_len);
  while (!env->done()) {
    const auto cands = env->admissible_actions();
    auto perceived = perceive_env(*env, obs, backends, opts.dqa, opts.templates);
    const std::string hist = history.render();
    policy::PolicyPrompt prompt{env->goal(), hist, perceived.d_f};
    policy::StepFeatures f;
    const Decision d = chooser.choose(*env, prompt, cands, opts.record_features ? &f : nullptr);
    if (d.index >= cands.size()) throw InvariantViolation("chooser returned an out-of-range action index");
    const ActionText action = cands[d.index];
    StepResult sr = env->step(action);

    Transition tr;
    tr.observation = obs;
    tr.d_final = perceived.d_f;
    tr.history_render = hist;
    tr.action = action;
    tr.reward = sr.reward;
    tr.done = sr.done;
    tr.calls = perceived.calls;
    res.trajectory.transitions.push_back(std::move(tr));
    res.transcripts.push_back(std::move(perceived.transcripts));
    std::vector<std::string> ctext;
    ctext.reserve(cands.size());
    for (const auto& c : cands) ctext.push_back(c.text);
    res.candidates.push_back(std::move(ctext));
    res.decisions.push_back(d);
    if (opts.record_features) res.features.push_back(std::move(f));

    history = history.push(Description::make_final(prompt.d_f, "agent"), action);
    obs = std::move(sr.observation);
  }
  res.trajectory.success = env->success();
  if (const auto* n = dynamic_cast<const nav::NavEnv*>(env.get())) {
    res.nav_path = n->state().path;
    res.nav_goal = n->episode().goal;
    res.trajectory.expert_path_length = n->episode().shortest_path_length;
    res.trajectory.agent_path_length = nav::walked_length(n->world().graph, res.nav_path);
  }
  const bool shaping = suite.kind == "household" && suite.household.step.subgoal_shaping;
  check_trajectory(res.trajectory, shaping);
  return res;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first;
  std::size_t first_index = n;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        // keep the lowest failing index so the reported error is stable
        if (i < first_index) {
          first_index = i;
          first = std::current_exception();
        }
      }
    }
  };
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::vector<std::thread> threads;
  threads.reserve(k);
  for (std::size_t t = 0; t < k; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

std::vector<EpisodeResult> run_episodes(const EnvSuite& suite, const std::vector<EpisodeSpec>& specs,
                                        const BackendFactory& backends, const ChooserFactory& chooser,
                                        const EpisodeOptions& opts, int jobs) {
  std::vector<EpisodeResult> out(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) {
    const Backends b = backends(specs[i]);
    auto c = chooser(specs[i]);
    out[i] = run_episode(suite, specs[i], b, *c, opts);
  });
  return out;
}

std::vector<nlohmann::json> trajectory_lines(const EpisodeResult& r) {
  std::vector<nlohmann::json> out;
  const auto& t = r.trajectory;
  for (std::size_t i = 0; i < t.transitions.size(); ++i) {
    const auto& tr = t.transitions[i];
    out.push_back({{"episode_id", t.episode_id},
                   {"family", t.family},
                   {"step", i},
                   {"goal", t.goal.text()},
                   {"d_f", tr.d_final},
                   {"history_render", tr.history_render},
                   {"action", tr.action.text},
                   {"reward", tr.reward},
                   {"done", tr.done},
                   {"calls",
                    {{"perception_calls", tr.calls.perception_calls},
                     {"reasoning_calls", tr.calls.reasoning_calls},
                     {"questions", tr.calls.questions}}}});
  }
  return out;
}

std::vector<nlohmann::json> transcript_lines(const EpisodeResult& r) {
  std::vector<nlohmann::json> out;
  for (std::size_t i = 0; i < r.transcripts.size(); ++i) {
    nlohmann::json views = nlohmann::json::array();
    for (const auto& tr : r.transcripts[i]) views.push_back(tr.to_json());
    out.push_back({{"episode_id", r.trajectory.episode_id}, {"step", i}, {"transcripts", views}});
  }
  return out;
}

double success_rate(const std::vector<EpisodeResult>& results) {
  if (results.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : results) s += r.trajectory.success ? 1.0 : 0.0;
  return s / static_cast<double>(results.size());
}

}  // namespace prism::agent
