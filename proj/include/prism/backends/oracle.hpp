#pragma once

#include <cstdint>
#include <string>

#include "prism/backends/model.hpp"
#include "prism/backends/scene.hpp"

namespace prism::backends {

struct ScriptedOracleConfig {
  double answer_error_rate = 0.0;
  double raw_omission_rate = 0.0;
  double hallucination_rate = 0.0;
  std::uint64_t rng_seed = 0;

  // Throws ConfigError when a probability is outside [0, 1].
  void validate() const;
};

// Perception backed by simulator ground truth. Noise draws are keyed on
// (seed, episode, step, prompt or question), so the same observation always
// gets the same text no matter how calls interleave across threads.
class ScriptedOracle : public PerceptionModel {
 public:
  explicit ScriptedOracle(ScriptedOracleConfig cfg, std::string plain_prompt = "Describe the scene in detail");

  std::string describe(const std::string& prompt, const Observation& obs) override;
  std::string answer(const Question& question, const Observation& obs) override;
  std::string id() const override { return "scripted-oracle"; }

  const ScriptedOracleConfig& config() const { return cfg_; }

  // Ground-truth polarity for a question (error-free); "" entity = unknown.
  struct Truth {
    std::string entity;
    bool present = false;
  };
  static Truth ground_truth(const Question& question, const Observation& obs);

 private:
  ScriptedOracleConfig cfg_;
  std::string plain_prompt_;
};

// The part of a "Do you see ..." question naming what is asked about.
std::string question_subject(const std::string& question_text);

}  // namespace prism::backends
