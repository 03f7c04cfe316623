#include "prism/eval/ablation.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "prism/backends/oracle.hpp"
#include "prism/backends/scene.hpp"
#include "prism/backends/scripted_reasoner.hpp"
#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/text.hpp"

namespace prism::eval {

OracleQuestions load_oracle_questions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("oracle question fixture not found: " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError(path + ": expected a JSON object of family -> questions");
  OracleQuestions out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto qs = it.value().get<std::vector<std::string>>();
    for (const auto& q : qs)
      if (!q.starts_with("Do you see")) throw FormatError(path + ": fixture question must start with \"Do you see\": " + q);
    out[it.key()] = std::move(qs);
  }
  return out;
}

FixtureQuestionReasoner::FixtureQuestionReasoner(std::vector<std::string> templates, backends::Vocabulary vocab,
                                                 std::shared_ptr<backends::ReasoningModel> inner)
    : templates_(std::move(templates)), vocab_(std::move(vocab)), inner_(std::move(inner)) {}

std::string FixtureQuestionReasoner::complete(const std::string& prompt) {
  const std::string marker = "Your goal is: ";
  const auto g = prompt.find(marker);
  if (!util::contains(prompt, "Your current observation is: ") || g == std::string::npos)
    return inner_->complete(prompt);
  const auto end = prompt.find("\n\nTask:", g);
  const std::string goal = prompt.substr(g + marker.size(), end == std::string::npos ? std::string::npos : end - g - marker.size());
  const auto names = backends::all_matches(vocab_, goal);
  const std::string object = names.empty() ? "object" : names[0];
  const std::string target = names.size() > 1 ? names[1] : object;
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  int k = 0;
  for (const auto& t : templates_) {
    std::string q = util::replace_all(util::replace_all(t, "{object}", object), "{target}", target);
    j["question" + std::to_string(++k)] = q;
  }
  if (k == 0) return "I have all the information.";
  return j.dump();
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"architecture", "merge", "oracle_qa", "perception_mode", "qa_budget"};
  return names;
}

std::vector<Arm> suite_arms(const std::string& suite, const dqa::DqaConfig& base) {
  auto with = [&](auto fn) {
    dqa::DqaConfig c = base;
    fn(c);
    return c;
  };
  using dqa::MergeStrategy;
  using dqa::PerceptionMode;
  if (suite == "architecture")
    return {{"prism", with([](auto& c) { c.mode = PerceptionMode::interactive; }), "generated"},
            {"decoupled_raw", with([](auto& c) { c.mode = PerceptionMode::raw; }), "generated"}};
  if (suite == "merge")
    return {{"llm_merge", with([](auto& c) { c.merge = MergeStrategy::llm_merge; }), "generated"},
            {"concat", with([](auto& c) { c.merge = MergeStrategy::concat; }), "generated"},
            {"qa_only", with([](auto& c) { c.merge = MergeStrategy::qa_only; }), "generated"}};
  if (suite == "oracle_qa")
    return {{"generated", base, "generated"}, {"oracle_q", base, "oracle_q"}, {"oracle_qa", base, "oracle_qa"}};
  if (suite == "perception_mode")
    return {{"interactive", with([](auto& c) { c.mode = PerceptionMode::interactive; }), "generated"},
            {"raw", with([](auto& c) { c.mode = PerceptionMode::raw; }), "generated"},
            {"goal_aware", with([](auto& c) { c.mode = PerceptionMode::goal_aware; }), "generated"}};
  if (suite == "qa_budget")
    return {{"unbudgeted", with([](auto& c) { c.question_budget.reset(); }), "generated"},
            {"budget_1", with([](auto& c) { c.question_budget = 1; }), "generated"},
            {"budget_3", with([](auto& c) { c.question_budget = 3; }), "generated"}};
  throw ConfigError("unknown ablation suite '" + suite +
                    "' (expected architecture, merge, oracle_qa, perception_mode or qa_budget)");
}

void AblationConfig::validate() const {
  if (families.empty()) throw ConfigError("ablation needs at least one family");
  if (demo_episodes < 1 || eval_episodes < 1) throw ConfigError("ablation episode counts must be >= 1");
  if (policy != "bc_per_arm" && policy != "checkpoint" && policy != "expert")
    throw ConfigError("ablation policy must be bc_per_arm, checkpoint or expert");
  if (policy == "checkpoint" && !checkpoint) throw ConfigError("ablation policy 'checkpoint' needs a checkpoint");
  oracle.validate();
  base.validate();
  bc.validate();
}

namespace {

const backends::Vocabulary& suite_vocab(const agent::EnvSuite& s) {
  return s.kind == "nav" ? nav::landmark_vocabulary() : household::vocabulary();
}

agent::BackendFactory arm_backends(const AblationConfig& cfg, const agent::EnvSuite& suite, const Arm& arm) {
  auto base = agent::oracle_backends(suite, cfg.oracle);
  if (arm.questions == "generated") return base;
  const OracleQuestions* fixtures = &cfg.oracle_questions;
  const backends::Vocabulary* vocab = &suite_vocab(suite);
  const bool truth_answers = arm.questions == "oracle_qa";
  return [base, fixtures, vocab, truth_answers](const agent::EpisodeSpec& spec) {
    agent::Backends b = base(spec);
    auto it = fixtures->find(spec.family);
    if (it == fixtures->end()) throw ConfigError("no oracle questions for family '" + spec.family + "'");
    b.reasoning = std::make_shared<FixtureQuestionReasoner>(it->second, *vocab, b.reasoning);
    if (truth_answers)
      b.perception = std::make_shared<backends::SplitPerception>(
          b.perception, std::make_shared<backends::ScriptedOracle>(backends::ScriptedOracleConfig{}));
    return b;
  };
}

std::vector<agent::EpisodeSpec> specs_for(const agent::EnvSuite& suite, const nav::NavWorld* world,
                                          const std::vector<std::string>& families, std::uint64_t seed, int n) {
  if (suite.kind == "nav") return agent::nav_specs(*world, seed, n);
  return agent::household_specs(families, seed, n);
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

std::vector<ArmFamilyRow> summarize_arm(const std::string& arm, const std::vector<agent::EpisodeResult>& eps,
                                        const std::vector<agent::EpisodeResult>* reference,
                                        const std::vector<std::string>& families, int resamples, std::uint64_t seed,
                                        const nav::NavWorld* world) {
  if (reference && reference->size() != eps.size()) throw InvariantViolation("paired arms ran different episode sets");
  std::vector<ArmFamilyRow> rows;
  std::vector<int> all_outcomes;
  double sr_sum = 0.0;
  ArmFamilyRow avg;
  avg.arm = arm;
  avg.family = "avg";
  long avg_passes = 0, avg_questions = 0, avg_steps = 0;
  double avg_prompt = 0.0, avg_df = 0.0;
  std::vector<NavMetrics> all_nav;
  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    const auto& fam = families[fi];
    ArmFamilyRow r;
    r.arm = arm;
    r.family = fam;
    std::vector<int> outcomes;
    long passes = 0, questions = 0, steps = 0;
    double prompt_tok = 0.0, df_tok = 0.0;
    std::vector<NavMetrics> navm;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const auto& e = eps[i];
      if (e.spec.family != fam) continue;
      const int ok = e.trajectory.success ? 1 : 0;
      outcomes.push_back(ok);
      if (reference) {
        if ((*reference)[i].spec.seed != e.spec.seed || (*reference)[i].spec.family != fam)
          throw InvariantViolation("paired arms are not aligned by seed");
        const int ref = (*reference)[i].trajectory.success ? 1 : 0;
        if (ok && !ref) ++r.wins;
        if (!ok && ref) ++r.losses;
      }
      for (std::size_t s = 0; s < e.trajectory.transitions.size(); ++s) {
        const auto& tr = e.trajectory.transitions[s];
        const policy::PolicyPrompt p{e.trajectory.goal, tr.history_render, tr.d_final};
        prompt_tok += static_cast<double>(util::whitespace_token_count(policy::render_policy_prompt(p)));
        df_tok += static_cast<double>(util::whitespace_token_count(tr.d_final));
        ++steps;
        for (const auto& t : e.transcripts[s]) {
          ++passes;
          questions += static_cast<long>(t.questions.size());
        }
      }
      if (world && !e.nav_path.empty()) navm.push_back(nav_metrics(world->graph, world->episodes.at(e.spec.nav_episode), e.nav_path));
    }
    r.episodes = static_cast<int>(outcomes.size());
    for (int o : outcomes) r.successes += o;
    r.sr = r.episodes ? static_cast<double>(r.successes) / r.episodes : 0.0;
    r.sr_ci = bootstrap_ci(outcomes, resamples, util::derive_seed(seed, fi));
    r.mean_questions = passes ? static_cast<double>(questions) / static_cast<double>(passes) : 0.0;
    r.mean_prompt_tokens = steps ? prompt_tok / static_cast<double>(steps) : 0.0;
    r.mean_df_tokens = steps ? df_tok / static_cast<double>(steps) : 0.0;
    r.sign_p = sign_test(r.wins, r.losses);
    if (!navm.empty()) r.nav = mean_nav_metrics(navm);
    all_nav.insert(all_nav.end(), navm.begin(), navm.end());

    all_outcomes.insert(all_outcomes.end(), outcomes.begin(), outcomes.end());
    sr_sum += r.sr;
    avg.episodes += r.episodes;
    avg.successes += r.successes;
    avg.wins += r.wins;
    avg.losses += r.losses;
    avg_passes += passes;
    avg_questions += questions;
    avg_steps += steps;
    avg_prompt += prompt_tok;
    avg_df += df_tok;
    rows.push_back(r);
  }
  avg.sr = families.empty() ? 0.0 : sr_sum / static_cast<double>(families.size());
  avg.sr_ci = bootstrap_ci(all_outcomes, resamples, util::derive_seed(seed, 0xa11));
  avg.mean_questions = avg_passes ? static_cast<double>(avg_questions) / static_cast<double>(avg_passes) : 0.0;
  avg.mean_prompt_tokens = avg_steps ? avg_prompt / static_cast<double>(avg_steps) : 0.0;
  avg.mean_df_tokens = avg_steps ? avg_df / static_cast<double>(avg_steps) : 0.0;
  avg.sign_p = sign_test(avg.wins, avg.losses);
  if (!all_nav.empty()) avg.nav = mean_nav_metrics(all_nav);
  if (families.size() > 1) rows.push_back(avg);
  return rows;
}

AblationReport run_ablation(const std::string& suite_name, const AblationConfig& cfg) {
  const auto arms = suite_arms(suite_name, cfg.base);
  cfg.validate();
  const bool nav = cfg.suite.kind == "nav";
  if (nav && !cfg.suite.world) throw ConfigError("nav ablation needs a world");
  const std::vector<std::string> families = nav ? std::vector<std::string>{"nav"} : cfg.families;
  const nav::NavWorld* eval_world = nav ? cfg.suite.world.get() : nullptr;

  agent::EnvSuite train_suite = cfg.suite;
  if (nav && cfg.nav_train_world) train_suite.world = cfg.nav_train_world;
  const auto demo_specs = specs_for(train_suite, train_suite.world.get(), families, util::derive_seed(cfg.seed, 1),
                                    cfg.demo_episodes);
  const auto eval_specs = specs_for(cfg.suite, eval_world, families, util::derive_seed(cfg.seed, 2), cfg.eval_episodes);

  AblationReport rep;
  rep.suite = suite_name;
  rep.families = families;
  for (const auto& arm : arms) {
    ArmRun run;
    run.arm = arm;
    agent::EpisodeOptions opts;
    opts.dqa = arm.dqa;

    std::shared_ptr<const policy::CompactPolicyParams> params = cfg.checkpoint;
    if (cfg.policy == "bc_per_arm") {
      auto demos = training::collect_demos(train_suite, demo_specs, arm_backends(cfg, train_suite, arm), opts, 0.0,
                                           cfg.jobs);
      run.demo_episodes_kept = demos.episodes_kept;
      auto init = policy::CompactPolicyParams::zeros(nav ? policy::nav_action_vocab() : policy::household_action_vocab(),
                                                     cfg.feature_dim, cfg.seed);
      const auto examples = training::build_examples(init, demos);
      params = std::make_shared<const policy::CompactPolicyParams>(training::train_bc(init, examples, cfg.bc).last);
    }
    agent::ChooserFactory chooser;
    if (cfg.policy == "expert")
      chooser = [](const agent::EpisodeSpec& s) -> std::unique_ptr<agent::ActionChooser> {
        return std::make_unique<agent::ExpertChooser>(0.0, s.seed);
      };
    else
      chooser = [params](const agent::EpisodeSpec&) -> std::unique_ptr<agent::ActionChooser> {
        return std::make_unique<agent::CompactChooser>(params, false, 0);
      };
    run.episodes = agent::run_episodes(cfg.suite, eval_specs, arm_backends(cfg, cfg.suite, arm), chooser, opts, cfg.jobs);
    rep.runs.push_back(std::move(run));
  }
  for (std::size_t a = 0; a < rep.runs.size(); ++a) {
    const auto* ref = a == 0 ? nullptr : &rep.runs[0].episodes;
    auto rows = summarize_arm(rep.runs[a].arm.name, rep.runs[a].episodes, ref, families, cfg.bootstrap_resamples,
                              util::derive_seed(cfg.seed, 3), eval_world);
    rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
  }
  return rep;
}

const ArmFamilyRow& AblationReport::row(const std::string& arm, const std::string& family) const {
  for (const auto& r : rows)
    if (r.arm == arm && r.family == family) return r;
  // single-family reports have no separate avg row
  if (family == "avg" && families.size() == 1) return row(arm, families[0]);
  throw PreconditionError("no report row for " + arm + "/" + family);
}

std::string AblationReport::csv() const {
  std::ostringstream o;
  o << "suite,arm,family,episodes,successes,sr,sr_ci_low,sr_ci_high,mean_questions,mean_prompt_tokens_ws,"
       "mean_df_tokens_ws,wins_vs_ref,losses_vs_ref,sign_p,ne,osr,spl\n";
  for (const auto& r : rows) {
    o << suite << "," << r.arm << "," << r.family << "," << r.episodes << "," << r.successes << "," << fmt(r.sr) << ","
      << fmt(r.sr_ci.low) << "," << fmt(r.sr_ci.high) << "," << fmt(r.mean_questions) << ","
      << fmt(r.mean_prompt_tokens, 1) << "," << fmt(r.mean_df_tokens, 1) << "," << r.wins << "," << r.losses << ","
      << fmt(r.sign_p) << ",";
    if (r.nav) o << fmt(r.nav->ne) << "," << fmt(r.nav->osr) << "," << fmt(r.nav->spl);
    else o << ",,";
    o << "\n";
  }
  return o.str();
}

std::string AblationReport::markdown() const {
  std::ostringstream o;
  const bool multi = families.size() > 1;
  o << "Suite: " << suite << " (SR %, matched seeds; token counts are whitespace-token proxies)\n\n| Arm |";
  for (const auto& f : families) o << " " << f << " |";
  if (multi) o << " Avg | 95% CI |";
  o << " Q/pass | Prompt tok | d_f tok | W/L vs ref | sign p |\n|---|";
  for (std::size_t i = 0; i < families.size() + (multi ? 2 : 0) + 5; ++i) o << "---|";
  o << "\n";
  std::vector<std::string> arms;
  for (const auto& r : rows)
    if (arms.empty() || arms.back() != r.arm) arms.push_back(r.arm);
  for (const auto& a : arms) {
    o << "| " << a << " |";
    for (const auto& f : families) o << " " << fmt(100.0 * row(a, f).sr, 1) << " |";
    const auto& avg = row(a, "avg");
    if (multi) o << " " << fmt(100.0 * avg.sr, 1) << " | " << fmt(100.0 * avg.sr_ci.low, 1) << "-" << fmt(100.0 * avg.sr_ci.high, 1) << " |";
    o << " " << fmt(avg.mean_questions, 2) << " | " << fmt(avg.mean_prompt_tokens, 1) << " | " << fmt(avg.mean_df_tokens, 1)
      << " | " << avg.wins << "/" << avg.losses << " | " << fmt(avg.sign_p, 4) << " |\n";
  }
  bool any_nav = false;
  for (const auto& r : rows) any_nav = any_nav || r.nav.has_value();
  if (any_nav) {
    o << "\n| Arm | NE | OSR | SR | SPL |\n|---|---|---|---|---|\n";
    for (const auto& a : arms) {
      const auto& r = row(a, "avg");
      if (r.nav)
        o << "| " << a << " | " << fmt(r.nav->ne, 2) << " | " << fmt(100.0 * r.nav->osr, 1) << " | "
          << fmt(100.0 * r.nav->sr, 1) << " | " << fmt(100.0 * r.nav->spl, 1) << " |\n";
    }
  }
  return o.str();
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json j;
  j["suite"] = suite;
  j["families"] = families;
  for (const auto& r : rows) {
    nlohmann::json row = {{"arm", r.arm},
                          {"family", r.family},
                          {"episodes", r.episodes},
                          {"successes", r.successes},
                          {"sr", r.sr},
                          {"sr_ci", {r.sr_ci.low, r.sr_ci.high}},
                          {"mean_questions", r.mean_questions},
                          {"mean_prompt_tokens_ws", r.mean_prompt_tokens},
                          {"mean_df_tokens_ws", r.mean_df_tokens},
                          {"wins_vs_ref", r.wins},
                          {"losses_vs_ref", r.losses},
                          {"sign_p", r.sign_p}};
    if (r.nav) row["nav"] = {{"ne", r.nav->ne}, {"sr", r.nav->sr}, {"osr", r.nav->osr}, {"spl", r.nav->spl}};
    j["rows"].push_back(row);
  }
  for (const auto& run : runs) j["demo_episodes_kept"][run.arm.name] = run.demo_episodes_kept;
  return j;
}

}  // namespace prism::eval
