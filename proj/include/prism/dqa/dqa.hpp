#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prism/backends/model.hpp"
#include "prism/core/types.hpp"
#include "prism/dqa/templates.hpp"

namespace prism::dqa {

enum class MergeStrategy { llm_merge, concat, qa_only };
enum class PerceptionMode { interactive, raw, goal_aware };

const char* to_string(MergeStrategy m);
const char* to_string(PerceptionMode m);
MergeStrategy merge_from_string(const std::string& s);
PerceptionMode mode_from_string(const std::string& s);

struct DqaConfig {
  MergeStrategy merge = MergeStrategy::llm_merge;
  std::optional<int> question_budget;  // none = the model decides
  PerceptionMode mode = PerceptionMode::interactive;
  bool parallel_answers = false;

  void validate() const;
};

struct StepTranscript {
  Description d_i{"-", DescriptionKind::initial, "-"};
  QuestionSet questions;
  std::vector<QAPair> qa;
  Description d_f{"-", DescriptionKind::final, "-"};
  int perception_calls = 0;
  int reasoning_calls = 0;
  int format_retries = 0;
  bool short_circuit = false;

  nlohmann::json to_json() const;
};

inline constexpr std::string_view kAllInfo = "I have all the information";
inline constexpr std::string_view kReformat = "Output only the JSON dictionary.";

Description initial_description(backends::PerceptionModel& vp, const Observation& obs,
                                const PromptTemplates& t = PromptTemplates::defaults());

// Parses a question dictionary out of raw model text. Tolerates code fences
// and prose around the dictionary. Returns nullopt for the "all information"
// sentence. Throws QuestionParseError when nothing usable is found.
std::optional<QuestionSet> parse_questions(const std::string& raw);

struct GeneratedQuestions {
  QuestionSet questions;
  int reasoning_calls = 0;
  int format_retries = 0;
  bool short_circuit = false;
};

GeneratedQuestions generate_questions_detailed(backends::ReasoningModel& r, const Description& d_i, const Goal& g,
                                               std::optional<int> budget,
                                               const PromptTemplates& t = PromptTemplates::defaults());

QuestionSet generate_questions(backends::ReasoningModel& r, const Description& d_i, const Goal& g,
                               std::optional<int> budget, const PromptTemplates& t = PromptTemplates::defaults());

std::vector<QAPair> answer_questions(backends::PerceptionModel& vp, const QuestionSet& qs, const Observation& obs,
                                     bool parallel = false);

// QA: [('q', 'a'), ...]
std::string render_qa_list(const std::vector<QAPair>& qa);
// Question: ...\nAnswer: ... per pair; fills the refinement prompt.
std::string render_qa_block(const std::vector<QAPair>& qa);

Description merge(backends::ReasoningModel& r, const Description& d_i, const std::vector<QAPair>& qa,
                  MergeStrategy strategy, const PromptTemplates& t = PromptTemplates::defaults());

std::pair<Description, StepTranscript> perceive(backends::PerceptionModel& vp, backends::ReasoningModel& r,
                                                const Observation& obs, const Goal& g, const DqaConfig& cfg,
                                                const PromptTemplates& t = PromptTemplates::defaults());

// Throws InvariantViolation when the call counters disagree with the mode.
void check_transcript(const StepTranscript& tr, PerceptionMode mode);

}  // namespace prism::dqa
