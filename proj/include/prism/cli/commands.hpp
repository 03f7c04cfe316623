#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/agent/agent.hpp"
#include "prism/backends/remote.hpp"
#include "prism/eval/ablation.hpp"
#include "prism/training/training.hpp"

namespace prism::cli {

enum ExitCode { kOk = 0, kUsage = 1, kBackendFailure = 2, kInvariantViolation = 3 };

// Config errors, missing prerequisites and refused overwrites are usage
// errors; transport and model-output failures are backend failures;
// invariant and divergence failures (and anything unexpected) map to 3.
int exit_code_for(const std::exception& e);

// The config JSON made concrete. Building it validates every field.
struct Settings {
  nlohmann::json raw;
  agent::EnvSuite suite;
  std::vector<std::string> families;
  int episodes = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string nav_world_path;
  dqa::DqaConfig dqa;
  backends::ScriptedOracleConfig oracle;
  std::string perception_backend, reasoning_backend, scoring_backend;
  backends::RemoteConfig remote_vlm, remote_llm;
  std::string policy_kind;
  std::string checkpoint;
  double expert_failure_rate = 0.0;
  bool sample = false;
  std::uint32_t feature_dim = 4096;
  std::uint64_t feature_seed = 7;
  double mock_token_logprob = -1.0;
  std::string demos;
  training::BcConfig bc;
  int bc_probe_episodes = 0;
  training::PpoConfig ppo;
  int ppo_probe_episodes = 0;
  std::string ablation_suite;
  int ablation_demo_episodes = 40;
  int ablation_eval_episodes = 40;
  std::string ablation_policy;
  int bootstrap_resamples = 1000;
  std::string oracle_questions_path;

  bool nav() const { return suite.kind == "nav"; }
  std::vector<std::string> action_vocab() const;
  std::vector<agent::EpisodeSpec> specs(std::uint64_t base_seed, int per_family) const;
};

Settings build_settings(const nlohmann::json& cfg);

// Output directory with a manifest. Refuses an existing non-empty directory
// unless forced. Every artifact goes through write()/adopt() so the manifest
// lists it with its hash.
class RunDir {
 public:
  RunDir(std::filesystem::path root, bool force);
  const std::filesystem::path& root() const { return root_; }
  std::string path(const std::string& name) const { return (root_ / name).string(); }

  void begin(const std::string& command, const nlohmann::json& config);
  void input(const std::string& role, const std::string& file);
  void write(const std::string& name, const std::string& content);
  // Registers a file some library call already wrote inside the run dir.
  void adopt(const std::string& name);
  void finish(const nlohmann::json& summary);
  void fail(const std::string& error, int code);

 private:
  void flush();

  std::filesystem::path root_;
  nlohmann::json manifest_;
};

// Full entry point; argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace prism::cli
