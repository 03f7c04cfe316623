#include "prism/cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "prism/backends/mock.hpp"
#include "prism/backends/remote.hpp"
#include "prism/backends/scripted_reasoner.hpp"
#include "prism/cli/config.hpp"
#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/text.hpp"

namespace prism::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const PreconditionError*>(&e)) return kUsage;
  if (dynamic_cast<const BackendUnavailable*>(&e) || dynamic_cast<const ProtocolError*>(&e) ||
      dynamic_cast<const ScriptExhausted*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const QuestionParseError*>(&e))
    return kBackendFailure;
  return kInvariantViolation;
}

// ---------------------------------------------------------------- settings

namespace {

household::Difficulty difficulty_from(const std::string& s) {
  if (s == "easy") return household::Difficulty::easy;
  if (s == "medium") return household::Difficulty::medium;
  if (s == "hard") return household::Difficulty::hard;
  throw ConfigError("run.difficulty must be easy|medium|hard, got '" + s + "'");
}

void one_of(const std::string& v, const std::vector<std::string>& allowed, const std::string& key) {
  for (const auto& a : allowed)
    if (v == a) return;
  throw ConfigError(key + " must be " + util::join(allowed, "|") + ", got '" + v + "'");
}

int at_least(const json& v, int lo, const std::string& key) {
  const long long x = v.get<long long>();
  if (x < lo) throw ConfigError(key + " must be >= " + std::to_string(lo) + ", got " + std::to_string(x));
  return static_cast<int>(x);
}

backends::RemoteConfig remote_for(const json& r, const std::string& role) {
  backends::RemoteConfig c;
  c.api_base = r["api_base"];
  c.api_key = r["api_key"];
  c.model = r[role == "vlm" ? "model_vlm" : "model_llm"];
  c.max_attempts = at_least(r["max_attempts"], 1, "remote.max_attempts");
  c.timeout_s = at_least(r["timeout_s"], 1, "remote.timeout_s");
  c.cassette = backends::cassette_mode_from_string(r["cassette"]);
  const std::string dir = r["cassette_path"];
  if (!dir.empty()) c.cassette_path = (fs::path(dir) / (role + ".jsonl")).string();
  c.apply_env(role);
  return c;
}

std::string default_oracle_questions() { return std::string(PRISM_DATA_DIR) + "/oracle_questions.json"; }

}  // namespace

std::vector<std::string> Settings::action_vocab() const {
  return nav() ? policy::nav_action_vocab() : policy::household_action_vocab();
}

std::vector<agent::EpisodeSpec> Settings::specs(std::uint64_t base_seed, int per_family) const {
  return nav() ? agent::nav_specs(*suite.world, base_seed, per_family)
               : agent::household_specs(families, base_seed, per_family);
}

Settings build_settings(const json& cfg) {
  Settings s;
  s.raw = cfg;
  const auto& run = cfg["run"];
  s.suite.kind = run["env"];
  one_of(s.suite.kind, {"household", "nav"}, "run.env");
  for (const auto& f : run["families"]) s.families.push_back(f);
  if (!s.nav()) {
    if (s.families.empty()) throw ConfigError("run.families is empty");
    for (const auto& f : s.families) household::family_from_string(f);
  }
  s.episodes = at_least(run["episodes"], 1, "run.episodes");
  s.seed = run["seed"].get<std::uint64_t>();
  s.jobs = at_least(run["jobs"], 1, "run.jobs");
  s.suite.household.difficulty = difficulty_from(run["difficulty"]);
  s.suite.household.step.step_cap = at_least(run["step_cap"], 1, "run.step_cap");
  s.suite.nav.step_cap = at_least(run["nav_step_cap"], 1, "run.nav_step_cap");
  s.nav_world_path = run["nav_world"];
  if (s.nav()) {
    s.suite.world = std::make_shared<const nav::NavWorld>(
        s.nav_world_path.empty() ? nav::generate_world(run["nav_world_seed"].get<std::uint64_t>())
                                 : nav::load_world(s.nav_world_path));
    if (s.suite.world->episodes.empty()) throw ConfigError("the nav world has no episodes");
  }

  const auto& p = cfg["perception"];
  s.dqa.mode = dqa::mode_from_string(p["mode"]);
  s.dqa.merge = dqa::merge_from_string(p["merge"]);
  const int budget = p["question_budget"].get<int>();
  if (budget < 0) throw ConfigError("perception.question_budget must be >= 0 (0 = unbudgeted)");
  if (budget > 0) s.dqa.question_budget = budget;
  s.dqa.parallel_answers = p["parallel_answers"];
  s.dqa.validate();

  const auto& o = cfg["oracle"];
  s.oracle.answer_error_rate = o["answer_error_rate"];
  s.oracle.raw_omission_rate = o["raw_omission_rate"];
  s.oracle.hallucination_rate = o["hallucination_rate"];
  s.oracle.rng_seed = o["rng_seed"].get<std::uint64_t>();
  s.oracle.validate();

  const auto& b = cfg["backends"];
  s.perception_backend = b["perception"];
  s.reasoning_backend = b["reasoning"];
  s.scoring_backend = b["scoring"];
  one_of(s.perception_backend, {"oracle", "remote"}, "backends.perception");
  one_of(s.reasoning_backend, {"scripted", "remote"}, "backends.reasoning");
  one_of(s.scoring_backend, {"mock", "remote"}, "backends.scoring");
  s.remote_vlm = remote_for(cfg["remote"], "vlm");
  s.remote_llm = remote_for(cfg["remote"], "llm");

  const auto& pol = cfg["policy"];
  s.policy_kind = pol["kind"];
  one_of(s.policy_kind, {"expert", "compact", "scorer"}, "policy.kind");
  s.checkpoint = pol["checkpoint"];
  s.expert_failure_rate = pol["expert_failure_rate"];
  if (!(s.expert_failure_rate >= 0.0 && s.expert_failure_rate <= 1.0))
    throw ConfigError("policy.expert_failure_rate must be in [0, 1]");
  s.sample = pol["sample"];
  s.feature_dim = static_cast<std::uint32_t>(at_least(pol["feature_dim"], 1, "policy.feature_dim"));
  s.feature_seed = pol["feature_seed"].get<std::uint64_t>();
  s.mock_token_logprob = pol["mock_token_logprob"];
  if (!(s.mock_token_logprob <= 0.0)) throw ConfigError("policy.mock_token_logprob must be <= 0");

  const auto& bc = cfg["bc"];
  s.demos = bc["demos"];
  s.bc.epochs = bc["epochs"];
  s.bc.batch_size = bc["batch_size"];
  s.bc.learning_rate = bc["learning_rate"];
  s.bc.momentum = bc["momentum"];
  s.bc.probe_every = bc["probe_every"];
  s.bc.seed = s.seed;
  s.bc.validate();
  s.bc_probe_episodes = at_least(bc["probe_episodes"], 0, "bc.probe_episodes");

  const auto& ppo = cfg["ppo"];
  s.ppo.clip_eps = ppo["clip_eps"];
  s.ppo.entropy_coef = ppo["entropy_coef"];
  s.ppo.gamma = ppo["gamma"];
  s.ppo.value_coef = ppo["value_coef"];
  s.ppo.learning_rate = ppo["learning_rate"];
  s.ppo.momentum = ppo["momentum"];
  s.ppo.epochs_per_batch = ppo["epochs_per_batch"];
  s.ppo.batch_size = ppo["batch_size"];
  s.ppo.normalize_advantages = ppo["normalize_advantages"];
  s.ppo.use_gae = ppo["use_gae"];
  s.ppo.gae_lambda = ppo["gae_lambda"];
  s.ppo.episodes_per_iteration = ppo["episodes_per_iteration"];
  s.ppo.total_episodes = ppo["total_episodes"];
  s.ppo.seed = s.seed;
  s.ppo.validate();
  s.ppo_probe_episodes = at_least(ppo["probe_episodes"], 0, "ppo.probe_episodes");

  const auto& a = cfg["ablation"];
  s.ablation_suite = a["suite"];
  s.ablation_demo_episodes = at_least(a["demo_episodes"], 1, "ablation.demo_episodes");
  s.ablation_eval_episodes = at_least(a["eval_episodes"], 1, "ablation.eval_episodes");
  s.ablation_policy = a["policy"];
  one_of(s.ablation_policy, {"bc_per_arm", "checkpoint", "expert"}, "ablation.policy");
  s.bootstrap_resamples = at_least(a["bootstrap_resamples"], 1, "ablation.bootstrap_resamples");
  s.oracle_questions_path = a["oracle_questions"];
  if (s.oracle_questions_path.empty()) s.oracle_questions_path = default_oracle_questions();
  eval::suite_arms(s.ablation_suite, s.dqa);  // validates the suite name
  return s;
}

// ----------------------------------------------------------------- run dir

RunDir::RunDir(fs::path root, bool force) : root_(std::move(root)) {
  if (fs::exists(root_)) {
    if (!fs::is_directory(root_)) throw ConfigError(root_.string() + " exists and is not a directory");
    if (!fs::is_empty(root_)) {
      if (!force)
        throw ConfigError("run directory " + root_.string() + " already exists; pass --force to replace it");
      fs::remove_all(root_);
    }
  }
  fs::create_directories(root_);
}

void RunDir::begin(const std::string& command, const json& config) {
  manifest_ = {{"tool", "prism"},
               {"format", 1},
               {"command", command},
               {"status", "running"},
               {"config", config},
               {"inputs", json::object()},
               {"artifacts", json::object()}};
  flush();
}

void RunDir::input(const std::string& role, const std::string& file) {
  if (!fs::exists(file)) throw PreconditionError(role + " not found: " + file);
  manifest_["inputs"][role] = {{"path", file}, {"sha256", util::sha256_file(file)}};
  flush();
}

void RunDir::write(const std::string& name, const std::string& content) {
  std::ofstream out(path(name), std::ios::binary);
  out << content;
  out.close();
  if (!out) throw Error("cannot write " + path(name));
  adopt(name);
}

void RunDir::adopt(const std::string& name) {
  manifest_["artifacts"][name] = util::sha256_file(path(name));
  flush();
}

void RunDir::finish(const json& summary) {
  manifest_["status"] = "complete";
  manifest_["summary"] = summary;
  flush();
}

void RunDir::fail(const std::string& error, int code) {
  manifest_["status"] = "failed";
  manifest_["error"] = {{"message", error}, {"exit_code", code}};
  flush();
}

void RunDir::flush() {
  std::ofstream out(path("manifest.json"), std::ios::binary);
  out << manifest_.dump(2) << "\n";
}

// ---------------------------------------------------------------- commands

namespace {

std::string jsonl(const std::vector<json>& lines) {
  std::string out;
  for (const auto& l : lines) out += l.dump() + "\n";
  return out;
}

json spec_json(const agent::EpisodeSpec& s) {
  json j = {{"family", s.family}, {"seed", s.seed}};
  if (s.nav_episode >= 0) j["nav_episode"] = s.nav_episode;
  return j;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

agent::BackendFactory make_backends(const Settings& s) {
  std::shared_ptr<backends::ChatClient> vlm, llm;
  if (s.perception_backend == "remote") vlm = std::make_shared<backends::ChatClient>(s.remote_vlm);
  if (s.reasoning_backend == "remote" || s.scoring_backend == "remote")
    llm = std::make_shared<backends::ChatClient>(s.remote_llm);
  const auto vqa = dqa::PromptTemplates::defaults().vqa;
  return [s_ptr = &s, vlm, llm, vqa](const agent::EpisodeSpec&) {
    const Settings& st = *s_ptr;
    agent::Backends b;
    if (vlm)
      b.perception = std::make_shared<backends::RemotePerception>(vlm, vqa);
    else
      b.perception = std::make_shared<backends::ScriptedOracle>(st.oracle);
    if (st.reasoning_backend == "remote")
      b.reasoning = std::make_shared<backends::RemoteReasoning>(llm);
    else if (st.nav())
      b.reasoning = std::make_shared<backends::ScriptedReasoner>(nav::landmark_vocabulary());
    else
      b.reasoning = std::make_shared<backends::ScriptedReasoner>(household::vocabulary(), backends::household_verb_hints());
    if (st.scoring_backend == "remote")
      b.scorer = std::make_shared<backends::RemoteScorer>(llm);
    else
      b.scorer = std::make_shared<backends::MockScorer>(st.mock_token_logprob);
    return b;
  };
}

std::shared_ptr<const policy::CompactPolicyParams> load_policy(const Settings& s, RunDir& dir) {
  if (s.checkpoint.empty()) throw PreconditionError("this command needs a checkpoint (--checkpoint or policy.checkpoint)");
  dir.input("checkpoint", s.checkpoint);
  auto p = std::make_shared<const policy::CompactPolicyParams>(policy::load_checkpoint(s.checkpoint));
  if (p->action_vocab != s.action_vocab())
    throw PreconditionError("checkpoint " + s.checkpoint + " was trained for a different action space");
  return p;
}

agent::ChooserFactory make_chooser(const Settings& s, RunDir& dir, const agent::BackendFactory& be) {
  if (s.policy_kind == "expert") {
    const double f = s.expert_failure_rate;
    return [f](const agent::EpisodeSpec& spec) { return std::make_unique<agent::ExpertChooser>(f, spec.seed); };
  }
  if (s.policy_kind == "compact") {
    auto p = load_policy(s, dir);
    const bool sample = s.sample;
    return [p, sample](const agent::EpisodeSpec& spec) {
      return std::make_unique<agent::CompactChooser>(p, sample, spec.seed);
    };
  }
  return [be](const agent::EpisodeSpec& spec) { return std::make_unique<agent::ScorerChooser>(be(spec).scorer); };
}

agent::EpisodeOptions episode_options(const Settings& s) {
  agent::EpisodeOptions o;
  o.dqa = s.dqa;
  return o;
}

void record_seeds(json& summary, const std::vector<agent::EpisodeSpec>& specs) {
  json arr = json::array();
  for (const auto& sp : specs) arr.push_back(spec_json(sp));
  summary["episodes"] = arr;
}

// Per-family SR table (household) or NE/SR/OSR/SPL (nav).
json results_table(const Settings& s, const std::vector<agent::EpisodeResult>& rs, std::ostream& out, RunDir& dir,
                   int resamples) {
  json metrics;
  std::ostringstream md;
  if (s.nav()) {
    std::vector<eval::NavMetrics> ms;
    for (const auto& r : rs)
      ms.push_back(eval::nav_metrics(s.suite.world->graph,
                                     s.suite.world->episodes[static_cast<std::size_t>(r.spec.nav_episode)], r.nav_path));
    const auto m = eval::mean_nav_metrics(ms);
    md << "| World | Episodes | NE (m) | OSR | SR | SPL |\n|---|---|---|---|---|---|\n";
    md << "| " << s.suite.world->name << " | " << rs.size() << " | " << fmt(m.ne, 2) << " | " << fmt(100 * m.osr, 1)
       << " | " << fmt(100 * m.sr, 1) << " | " << fmt(100 * m.spl, 1) << " |\n";
    metrics = {{"episodes", rs.size()}, {"ne", m.ne}, {"osr", m.osr}, {"sr", m.sr}, {"spl", m.spl}};
  } else {
    md << "| Family | Episodes | Successes | SR | 95% CI |\n|---|---|---|---|---|\n";
    std::vector<std::string> fams = s.families;
    fams.push_back("avg");
    for (const auto& f : fams) {
      std::vector<int> outcomes;
      for (const auto& r : rs)
        if (f == "avg" || r.spec.family == f) outcomes.push_back(r.trajectory.success ? 1 : 0);
      if (outcomes.empty()) continue;
      int succ = 0;
      for (int x : outcomes) succ += x;
      const double sr = static_cast<double>(succ) / static_cast<double>(outcomes.size());
      const auto ci = eval::bootstrap_ci(outcomes, resamples, s.seed);
      md << "| " << f << " | " << outcomes.size() << " | " << succ << " | " << fmt(100 * sr, 1) << " | "
         << fmt(100 * ci.low, 1) << "-" << fmt(100 * ci.high, 1) << " |\n";
      metrics[f] = {{"episodes", outcomes.size()}, {"successes", succ}, {"sr", sr}, {"sr_ci", {ci.low, ci.high}}};
    }
  }
  out << md.str();
  dir.write("metrics.md", md.str());
  dir.write("metrics.json", metrics.dump(2) + "\n");
  return metrics;
}

json write_episodes(RunDir& dir, const std::vector<agent::EpisodeResult>& rs) {
  std::vector<json> traj, trans;
  for (const auto& r : rs) {
    for (auto& l : agent::trajectory_lines(r)) traj.push_back(std::move(l));
    for (auto& l : agent::transcript_lines(r)) trans.push_back(std::move(l));
  }
  dir.write("trajectories.jsonl", jsonl(traj));
  dir.write("transcripts.jsonl", jsonl(trans));
  return {{"trajectories", "trajectories.jsonl"}, {"transcripts", "transcripts.jsonl"}};
}

json cmd_run_episode(const Settings& s, RunDir& dir, std::ostream& out) {
  const auto be = make_backends(s);
  const auto chooser = make_chooser(s, dir, be);
  const auto specs = s.specs(s.seed, s.episodes);
  const auto rs = agent::run_episodes(s.suite, specs, be, chooser, episode_options(s), s.jobs);
  json summary = write_episodes(dir, rs);
  summary["metrics"] = results_table(s, rs, out, dir, 1000);
  summary["success_rate"] = agent::success_rate(rs);
  record_seeds(summary, specs);
  return summary;
}

json cmd_collect_demos(const Settings& s, RunDir& dir, std::ostream& out) {
  const auto specs = s.specs(s.seed, s.episodes);
  const auto demos = training::collect_demos(s.suite, specs, make_backends(s), episode_options(s),
                                             s.expert_failure_rate, s.jobs);
  training::save_demos(demos, dir.path("demos.jsonl"));
  dir.adopt("demos.jsonl");
  out << "kept " << demos.episodes_kept << "/" << demos.episodes_total << " expert episodes, " << demos.records.size()
      << " steps\n";
  json summary = {{"demos", "demos.jsonl"},
                  {"episodes_total", demos.episodes_total},
                  {"episodes_kept", demos.episodes_kept},
                  {"records", demos.records.size()}};
  record_seeds(summary, specs);
  return summary;
}

// Greedy success rate on a held-out episode set; empty when not requested.
training::Probe make_probe(const Settings& s, int per_family, std::uint64_t salt) {
  if (per_family <= 0) return {};
  auto specs = s.specs(util::derive_seed(s.seed, salt), per_family);
  return [&s, specs](const policy::CompactPolicyParams& p) {
    auto sp = std::make_shared<const policy::CompactPolicyParams>(p);
    auto rs = agent::run_episodes(
        s.suite, specs, make_backends(s),
        [sp](const agent::EpisodeSpec&) { return std::make_unique<agent::CompactChooser>(sp, false, 0); },
        episode_options(s), s.jobs);
    return agent::success_rate(rs);
  };
}

json training_log(RunDir& dir, const training::TrainResult& r) {
  std::vector<json> lines;
  for (const auto& m : r.log) {
    json j = {{"iteration", m.iteration}, {"loss", m.loss}, {"episodes", m.episodes}};
    if (m.probe_sr) j["probe_sr"] = *m.probe_sr;
    lines.push_back(j);
  }
  dir.write("metrics.jsonl", jsonl(lines));
  policy::save_checkpoint(r.best, dir.path("policy.ckpt"));
  dir.adopt("policy.ckpt");
  policy::save_checkpoint(r.last, dir.path("last.ckpt"));
  dir.adopt("last.ckpt");
  return {{"checkpoint", "policy.ckpt"},
          {"last_checkpoint", "last.ckpt"},
          {"best_iteration", r.best_iteration},
          {"best_probe_sr", r.best_sr},
          {"metrics", "metrics.jsonl"}};
}

json cmd_train_bc(const Settings& s, RunDir& dir, std::ostream& out) {
  if (s.demos.empty()) throw PreconditionError("train-bc needs demonstrations (--demos or bc.demos)");
  dir.input("demos", s.demos);
  const auto demos = training::load_demos(s.demos);
  auto init = policy::CompactPolicyParams::zeros(s.action_vocab(), s.feature_dim, s.feature_seed);
  const auto examples = training::build_examples(init, demos);
  if (examples.empty()) throw PreconditionError("the demonstration file has no steps");
  const auto r = training::train_bc(init, examples, s.bc, make_probe(s, s.bc_probe_episodes, 0xb0));
  for (const auto& m : r.log)
    if (m.probe_sr) out << "epoch " << m.iteration << " loss " << fmt(m.loss, 4) << " probe SR " << fmt(*m.probe_sr) << "\n";
  out << "final loss " << fmt(r.log.empty() ? 0.0 : r.log.back().loss, 4) << " over " << examples.size() << " steps\n";
  json summary = training_log(dir, r);
  summary["examples"] = examples.size();
  summary["bc"] = s.bc.to_json();
  return summary;
}

json cmd_train_ppo(const Settings& s, RunDir& dir, std::ostream& out) {
  const auto init = load_policy(s, dir);
  const auto be = make_backends(s);
  const int n_nav = s.nav() ? static_cast<int>(s.suite.world->episodes.size()) : 0;
  training::RolloutFn roll = [&](const policy::CompactPolicyParams& p, int it) {
    auto sp = std::make_shared<const policy::CompactPolicyParams>(p);
    auto o = episode_options(s);
    o.record_features = true;
    std::vector<agent::EpisodeSpec> specs;
    const auto base = util::derive_seed(s.seed, 0x9000 + static_cast<std::uint64_t>(it));
    for (int i = 0; i < s.ppo.episodes_per_iteration; ++i) {
      const auto seed = util::derive_seed(base, static_cast<std::uint64_t>(i));
      if (s.nav())
        specs.push_back({"nav", seed, i % n_nav});
      else
        specs.push_back({s.families[static_cast<std::size_t>(i) % s.families.size()], seed, -1});
    }
    return agent::run_episodes(
        s.suite, specs, be,
        [sp](const agent::EpisodeSpec& spec) { return std::make_unique<agent::CompactChooser>(sp, true, spec.seed); }, o,
        s.jobs);
  };
  const auto r = training::train_ppo(*init, roll, s.ppo, make_probe(s, s.ppo_probe_episodes, 0x9e));
  for (const auto& m : r.log) {
    out << "iteration " << m.iteration << " episodes " << m.episodes << " loss " << fmt(m.loss, 4);
    if (m.probe_sr) out << " probe SR " << fmt(*m.probe_sr);
    out << "\n";
  }
  json summary = training_log(dir, r);
  summary["ppo"] = s.ppo.to_json();
  return summary;
}

json cmd_evaluate(const Settings& s, RunDir& dir, std::ostream& out) {
  const auto be = make_backends(s);
  const auto chooser = make_chooser(s, dir, be);
  const auto specs = s.specs(s.seed, s.episodes);
  const auto rs = agent::run_episodes(s.suite, specs, be, chooser, episode_options(s), s.jobs);
  json summary = write_episodes(dir, rs);
  summary["metrics"] = results_table(s, rs, out, dir, s.bootstrap_resamples);
  record_seeds(summary, specs);
  return summary;
}

json cmd_ablate(const Settings& s, RunDir& dir, std::ostream& out) {
  eval::AblationConfig cfg;
  cfg.suite = s.suite;
  cfg.families = s.nav() ? std::vector<std::string>{"nav"} : s.families;
  cfg.demo_episodes = s.ablation_demo_episodes;
  cfg.eval_episodes = s.ablation_eval_episodes;
  cfg.seed = s.seed;
  cfg.oracle = s.oracle;
  cfg.base = s.dqa;
  cfg.policy = s.ablation_policy;
  if (cfg.policy == "checkpoint") cfg.checkpoint = load_policy(s, dir);
  cfg.bc = s.bc;
  cfg.feature_dim = s.feature_dim;
  if (s.ablation_suite == "oracle_qa") {
    dir.input("oracle_questions", s.oracle_questions_path);
    cfg.oracle_questions = eval::load_oracle_questions(s.oracle_questions_path);
  }
  cfg.jobs = s.jobs;
  cfg.bootstrap_resamples = s.bootstrap_resamples;
  const auto rep = eval::run_ablation(s.ablation_suite, cfg);
  dir.write("report.csv", rep.csv());
  dir.write("report.md", rep.markdown());
  dir.write("report.json", rep.to_json().dump(2) + "\n");
  std::vector<json> traj;
  for (const auto& run : rep.runs)
    for (const auto& ep : run.episodes)
      for (auto& l : agent::trajectory_lines(ep)) {
        l["arm"] = run.arm.name;
        traj.push_back(std::move(l));
      }
  dir.write("trajectories.jsonl", jsonl(traj));
  out << rep.markdown();
  return {{"report_csv", "report.csv"}, {"report_md", "report.md"}, {"trajectories", "trajectories.jsonl"}};
}

}  // namespace

// -------------------------------------------------------------------- main

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"prism: interactive perception for embodied agents", "prism"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool force = false;
  std::vector<std::string> sets;
  auto* seed_opt = app.add_option("--seed", seed, "Base seed (run.seed)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Parallel episode workers (run.jobs)")->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "TOML config file or an earlier run's manifest.json");
  app.add_option("--out", out_dir, "Run directory (default runs/<command>)");
  app.add_flag("--force", force, "Replace an existing run directory");
  app.add_option("--set", sets, "Override any config key: section.key=value (repeatable)");

  // Flag -> config key shortcuts shared by the subcommands.
  struct Shortcut {
    std::string flag, key, help;
  };
  const std::vector<Shortcut> shortcuts = {
      {"--env", "run.env", "household | nav"},
      {"--episodes", "run.episodes", "Episodes per family (nav: repeats of the world's episodes)"},
      {"--world", "run.nav_world", "Navigation world JSON"},
      {"--perception-mode", "perception.mode", "interactive | raw | goal_aware"},
      {"--merge", "perception.merge", "llm_merge | concat | qa_only"},
      {"--budget", "perception.question_budget", "Question budget (0 = unbudgeted)"},
      {"--policy", "policy.kind", "expert | compact | scorer"},
      {"--checkpoint", "policy.checkpoint", "Compact policy checkpoint"},
      {"--failure-rate", "policy.expert_failure_rate", "Expert abandonment probability"},
      {"--demos", "bc.demos", "Demonstration JSONL"},
      {"--suite", "ablation.suite", "architecture | merge | oracle_qa | perception_mode | qa_budget"},
  };
  std::map<std::string, std::string> shortcut_values;
  std::vector<std::string> families;
  std::vector<std::pair<CLI::Option*, std::string>> bound;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"run-episode", "Run episodes and log trajectories and DQA transcripts"},
      {"collect-demos", "Roll the expert under the configured perception and keep successful episodes"},
      {"train-bc", "Behavioral cloning of the compact policy on demonstrations"},
      {"train-ppo", "PPO fine-tuning from a BC checkpoint"},
      {"evaluate", "Greedy evaluation; household SR per family, nav NE/SR/OSR/SPL"},
      {"ablate", "Run an ablation suite and write CSV and Markdown reports"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    for (const auto& sc : shortcuts)
      bound.emplace_back(sub->add_option(sc.flag, shortcut_values[sc.key], sc.help), sc.key);
    sub->add_option("--family", families, "Household task family (repeatable; run.families)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Settings settings;
  json cfg;
  try {
    cfg = default_config();
    if (!config_path.empty()) merge_config(cfg, load_config_file(config_path), config_path);
    apply_env_overrides(cfg, [](const char* n) { return std::getenv(n); });
    if (seed_opt->count()) cfg["run"]["seed"] = seed;
    if (jobs_opt->count()) cfg["run"]["jobs"] = jobs;
    for (const auto& [opt, key] : bound)
      if (opt->count()) apply_assignment(cfg, key + "=" + shortcut_values[key]);
    if (!families.empty()) cfg["run"]["families"] = families;
    for (const auto& a : sets) apply_assignment(cfg, a);
    settings = build_settings(cfg);
  } catch (const std::exception& e) {
    err << "prism: " << e.what() << "\n";
    return exit_code_for(e);
  }

  std::unique_ptr<RunDir> dir;
  try {
    dir = std::make_unique<RunDir>(out_dir.empty() ? fs::path("runs") / command : fs::path(out_dir), force);
    dir->begin(command, cfg);
    json summary;
    if (command == "run-episode") summary = cmd_run_episode(settings, *dir, out);
    else if (command == "collect-demos") summary = cmd_collect_demos(settings, *dir, out);
    else if (command == "train-bc") summary = cmd_train_bc(settings, *dir, out);
    else if (command == "train-ppo") summary = cmd_train_ppo(settings, *dir, out);
    else if (command == "evaluate") summary = cmd_evaluate(settings, *dir, out);
    else summary = cmd_ablate(settings, *dir, out);
    dir->finish(summary);
    out << "run directory: " << dir->root().string() << "\n";
    return kOk;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    if (dir) dir->fail(e.what(), code);
    err << "prism: " << e.what() << "\n";
    return code;
  }
}

}  // namespace prism::cli
