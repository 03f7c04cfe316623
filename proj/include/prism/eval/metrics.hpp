#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prism/dqa/dqa.hpp"
#include "prism/env/nav.hpp"

namespace prism::eval {

struct NavMetrics {
  double ne = 0.0;
  double sr = 0.0;
  double osr = 0.0;
  double spl = 0.0;
};

// `path` is the visited node list (start included); the last node is where
// the agent stopped (or was when the step cap hit).
NavMetrics nav_metrics(const nav::NavGraph& g, const nav::NavEpisode& ep, const std::vector<int>& path);

NavMetrics mean_nav_metrics(const std::vector<NavMetrics>& ms);

// Both tokenize with util::normalized_tokens.
double rouge_l(const std::string& candidate, const std::string& reference);
double meteor_exact(const std::string& candidate, const std::string& reference);

struct DescQuality {
  double rouge_l = 0.0;
  double meteor = 0.0;
  std::optional<std::string> judge_preference;
};

DescQuality description_quality(const std::string& candidate, const std::string& reference);

enum class Polarity { yes, no, unparsed };
// Leading yes/no after lowercasing and stripping punctuation.
Polarity classify_answer(const std::string& answer);

struct QaItem {
  std::string group;
  Polarity predicted = Polarity::unparsed;
  bool truth = false;  // entity present
};

struct QaScores {
  int tp = 0, fp = 0, fn = 0, tn = 0, unparsed = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct QaAccuracy {
  std::map<std::string, QaScores> per_group;
  // Unweighted means over groups.
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  int unparsed = 0;
};

QaScores qa_scores(int tp, int fp, int fn, int tn = 0, int unparsed = 0);
QaAccuracy qa_accuracy(const std::vector<QaItem>& items);

struct CallAccounting {
  long perception_calls = 0;
  long reasoning_calls = 0;
  long steps = 0;
  double mean_questions = 0.0;
};

// Sums per-step transcripts after validating each against the mode.
// Throws InvariantViolation on an inconsistent transcript.
CallAccounting call_accounting(const std::vector<dqa::StepTranscript>& steps, dqa::PerceptionMode mode);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap of the mean of 0/1 outcomes.
Interval bootstrap_ci(const std::vector<int>& outcomes, int resamples, std::uint64_t seed, double level = 0.95);

// Two-sided exact binomial sign test on paired wins/losses (ties dropped).
double sign_test(int wins, int losses);

}  // namespace prism::eval
