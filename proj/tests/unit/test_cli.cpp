#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "prism/cli/commands.hpp"
#include "prism/cli/config.hpp"
#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"

using namespace prism;
using namespace prism::cli;
namespace fs = std::filesystem;

namespace {

struct Ran {
  int code;
  std::string out, err;
};

Ran prism_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "prism");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("prism_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

}  // namespace

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == 1);
  CHECK(exit_code_for(PreconditionError("x")) == 1);
  CHECK(exit_code_for(BackendUnavailable("x")) == 2);
  CHECK(exit_code_for(ProtocolError("x")) == 2);
  CHECK(exit_code_for(ScriptExhausted("x")) == 2);
  CHECK(exit_code_for(InvariantViolation("x")) == 3);
  CHECK(exit_code_for(DivergenceError("x")) == 3);
  CHECK(prism_cli({}).code == 1);
  CHECK(prism_cli({"fly"}).code == 1);
  CHECK(prism_cli({"--help"}).code == 0);
  CHECK(prism_cli({"run-episode", "--jobs", "0"}).code == 1);
}

TEST_CASE("config layering and validation") {
  auto cfg = default_config();
  merge_config(cfg, {{"oracle", {{"answer_error_rate", 0}}}, {"run", {{"families", {"pick"}}}}}, "t");
  CHECK(cfg["oracle"]["answer_error_rate"].is_number_float());
  CHECK_THROWS_AS(merge_config(cfg, {{"run", {{"episodes", "five"}}}}, "t"), ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, {{"nope", {{"x", 1}}}}, "t"), ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, {{"run", {{"x", 1}}}}, "t"), ConfigError);

  std::map<std::string, std::string> env = {{"PRISM_RUN_EPISODES", "9"},
                                            {"PRISM_RUN_FAMILIES", "heat, cool"},
                                            {"PRISM_PERCEPTION_PARALLEL_ANSWERS", "true"}};
  apply_env_overrides(cfg, [&](const char* n) -> const char* {
    auto it = env.find(n);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(cfg["run"]["episodes"] == 9);
  CHECK(cfg["run"]["families"] == nlohmann::json({"heat", "cool"}));
  CHECK(cfg["perception"]["parallel_answers"] == true);
  CHECK_THROWS_AS(apply_env_overrides(cfg, [](const char* n) -> const char* {
                    return std::string(n) == "PRISM_RUN_SEED" ? "x1" : nullptr;
                  }),
                  ConfigError);

  apply_assignment(cfg, "ppo.learning_rate=0.003");
  CHECK(cfg["ppo"]["learning_rate"] == 0.003);
  CHECK_THROWS_AS(apply_assignment(cfg, "ppo.lr=1"), ConfigError);
  CHECK_THROWS_AS(apply_assignment(cfg, "nodot=1"), ConfigError);

  CHECK_NOTHROW(build_settings(cfg));
  for (const auto* bad : {"perception.mode=psychic", "oracle.hallucination_rate=2", "ppo.gamma=1", "run.env=space",
                          "ablation.suite=vibes", "policy.expert_failure_rate=-0.1", "run.families=pick,juggle"}) {
    auto c = cfg;
    apply_assignment(c, bad);
    CHECK_THROWS_AS(build_settings(c), ConfigError);
  }
}

TEST_CASE("toml file and manifest as config") {
  auto dir = scratch("toml");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "c.toml");
    f << "[run]\nfamilies = [\"clean\"]\nepisodes = 2\nseed = 11\n[oracle]\nanswer_error_rate = 0.08\n";
  }
  auto c = load_config_file((dir / "c.toml").string());
  CHECK(c["run"]["seed"] == 11);
  {
    std::ofstream f(dir / "broken.toml");
    f << "[run\n";
  }
  CHECK_THROWS_AS(load_config_file((dir / "broken.toml").string()), ConfigError);
  CHECK_THROWS_AS(load_config_file((dir / "missing.toml").string()), ConfigError);

  auto a = prism_cli({"run-episode", "--config", (dir / "c.toml").string(), "--out", (dir / "a").string()});
  REQUIRE(a.code == 0);
  auto m = manifest(dir / "a");
  CHECK(m["status"] == "complete");
  CHECK(m["config"]["oracle"]["answer_error_rate"] == 0.08);
  // replaying the manifest reproduces every artifact byte for byte
  auto b = prism_cli({"run-episode", "--config", (dir / "a" / "manifest.json").string(), "--out", (dir / "b").string(),
                      "--jobs", "3"});
  REQUIRE(b.code == 0);
  for (const auto* f : {"trajectories.jsonl", "transcripts.jsonl", "metrics.json", "metrics.md"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  fs::remove_all(dir);
}

TEST_CASE("run directories are immutable without --force") {
  auto dir = scratch("immutable");
  const std::vector<std::string> cmd = {"run-episode", "--family", "pick", "--episodes", "1", "--out", dir.string()};
  REQUIRE(prism_cli(cmd).code == 0);
  const auto before = slurp(dir / "trajectories.jsonl");
  auto again = prism_cli(cmd);
  CHECK(again.code == 1);
  CHECK(again.err.find("--force") != std::string::npos);
  CHECK(slurp(dir / "trajectories.jsonl") == before);
  auto forced = cmd;
  forced.push_back("--force");
  CHECK(prism_cli(forced).code == 0);
  // every file in the directory is listed in the manifest with its hash
  auto m = manifest(dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name == "manifest.json") continue;
    REQUIRE(m["artifacts"].contains(name));
    CHECK(m["artifacts"][name] == util::sha256_file(e.path().string()));
  }
  fs::remove_all(dir);
}

TEST_CASE("raw mode transcripts and concat rendering") {
  auto dir = scratch("modes");
  REQUIRE(prism_cli({"run-episode", "--perception-mode", "raw", "--family", "pick", "--episodes", "1", "--out",
                     (dir / "raw").string()})
              .code == 0);
  std::istringstream lines(slurp(dir / "raw" / "transcripts.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    for (const auto& t : nlohmann::json::parse(line)["transcripts"]) CHECK(t["reasoning_calls"] == 0);
    ++n;
  }
  CHECK(n > 0);
  REQUIRE(prism_cli({"run-episode", "--merge", "concat", "--family", "heat", "--episodes", "1", "--out",
                     (dir / "cat").string()})
              .code == 0);
  CHECK(slurp(dir / "cat" / "trajectories.jsonl").find("QA: [(") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("demos, BC, PPO chain records the checkpoint hash") {
  auto dir = scratch("chain");
  REQUIRE(prism_cli({"collect-demos", "--family", "pick", "--episodes", "8", "--out", (dir / "demos").string()}).code == 0);
  CHECK(manifest(dir / "demos")["summary"]["episodes_kept"] == 8);
  CHECK(prism_cli({"train-bc", "--out", (dir / "nodemos").string()}).code == 1);
  CHECK(manifest(dir / "nodemos")["status"] == "failed");
  REQUIRE(prism_cli({"train-bc", "--demos", (dir / "demos" / "demos.jsonl").string(), "--set", "bc.epochs=3", "--out",
                     (dir / "bc").string()})
              .code == 0);
  const auto ckpt = (dir / "bc" / "policy.ckpt").string();
  CHECK(manifest(dir / "bc")["inputs"]["demos"]["sha256"] ==
        util::sha256_file((dir / "demos" / "demos.jsonl").string()));
  REQUIRE(prism_cli({"train-ppo", "--checkpoint", ckpt, "--family", "pick", "--set", "ppo.total_episodes=4", "--set",
                     "ppo.episodes_per_iteration=2", "--out", (dir / "ppo").string()})
              .code == 0);
  CHECK(manifest(dir / "ppo")["inputs"]["checkpoint"]["sha256"] == util::sha256_file(ckpt));
  // a household checkpoint does not fit the nav action space
  CHECK(prism_cli({"evaluate", "--env", "nav", "--policy", "compact", "--checkpoint", ckpt, "--out",
                   (dir / "mismatch").string()})
            .code == 1);
  fs::remove_all(dir);
}

TEST_CASE("evaluate on the nav fixture prints the navigation table") {
  auto dir = scratch("nav");
  auto r = prism_cli({"evaluate", "--env", "nav", "--world", std::string(PRISM_SOURCE_DIR) + "/data/nav/house_fixture.json",
                      "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("| NE (m) | OSR | SR | SPL |") != std::string::npos);
  auto metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  CHECK(metrics["sr"] == 1.0);
  CHECK(metrics["spl"] == 1.0);
  fs::remove_all(dir);
}

TEST_CASE("ablate --suite merge writes a three-arm CSV") {
  auto dir = scratch("ablate");
  REQUIRE(prism_cli({"ablate", "--suite", "merge", "--family", "pick", "--set", "ablation.policy=expert", "--set",
                     "ablation.eval_episodes=3", "--set", "ablation.bootstrap_resamples=50", "--out", dir.string()})
              .code == 0);
  const auto csv = slurp(dir / "report.csv");
  for (const auto* arm : {"merge,llm_merge,pick", "merge,concat,pick", "merge,qa_only,pick"})
    CHECK(csv.find(arm) != std::string::npos);
  CHECK(fs::exists(dir / "report.md"));
  fs::remove_all(dir);
}

TEST_CASE("unreachable remote backend exits 2") {
  auto dir = scratch("remote");
  auto r = prism_cli({"run-episode", "--family", "pick", "--episodes", "1", "--set", "backends.perception=remote", "--set",
                      "remote.api_base=http://127.0.0.1:9", "--set", "remote.max_attempts=1", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(manifest(dir)["error"]["exit_code"] == 2);
  fs::remove_all(dir);
}
