#include "prism/dqa/dqa.hpp"

#include <algorithm>
#include <future>

#include "prism/core/errors.hpp"
#include "prism/util/text.hpp"

namespace prism::dqa {

const char* to_string(MergeStrategy m) {
  switch (m) {
    case MergeStrategy::llm_merge: return "llm_merge";
    case MergeStrategy::concat: return "concat";
    case MergeStrategy::qa_only: return "qa_only";
  }
  return "?";
}

const char* to_string(PerceptionMode m) {
  switch (m) {
    case PerceptionMode::interactive: return "interactive";
    case PerceptionMode::raw: return "raw";
    case PerceptionMode::goal_aware: return "goal_aware";
  }
  return "?";
}

MergeStrategy merge_from_string(const std::string& s) {
  for (auto m : {MergeStrategy::llm_merge, MergeStrategy::concat, MergeStrategy::qa_only})
    if (s == to_string(m)) return m;
  throw ConfigError("merge strategy must be llm_merge|concat|qa_only, got '" + s + "'");
}

PerceptionMode mode_from_string(const std::string& s) {
  for (auto m : {PerceptionMode::interactive, PerceptionMode::raw, PerceptionMode::goal_aware})
    if (s == to_string(m)) return m;
  throw ConfigError("perception mode must be interactive|raw|goal_aware, got '" + s + "'");
}

void DqaConfig::validate() const {
  if (question_budget && *question_budget < 1)
    throw ConfigError("question budget must be >= 1, got " + std::to_string(*question_budget));
}

nlohmann::json StepTranscript::to_json() const {
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& q : questions) qs.push_back({{"key", q.key}, {"text", q.text}});
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : qa) pairs.push_back({{"question", p.question.text}, {"answer", p.answer}});
  return {{"d_i", d_i.text()},
          {"d_i_kind", prism::to_string(d_i.kind())},
          {"questions", qs},
          {"qa", pairs},
          {"d_f", d_f.text()},
          {"perception_calls", perception_calls},
          {"reasoning_calls", reasoning_calls},
          {"format_retries", format_retries},
          {"short_circuit", short_circuit}};
}

Description initial_description(backends::PerceptionModel& vp, const Observation& obs, const PromptTemplates& t) {
  return Description(vp.describe(t.initial_description, obs), DescriptionKind::initial, vp.id());
}

namespace {

// Span of the first balanced {...} block, skipping braces inside strings.
std::optional<std::string> first_object(const std::string& s) {
  for (std::size_t start = s.find('{'); start != std::string::npos; start = s.find('{', start + 1)) {
    int depth = 0;
    bool in_str = false;
    char quote = 0;
    for (std::size_t i = start; i < s.size(); ++i) {
      const char c = s[i];
      if (in_str) {
        if (c == '\\') ++i;
        else if (c == quote) in_str = false;
        continue;
      }
      if (c == '"' || c == '\'') {
        in_str = true;
        quote = c;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        return s.substr(start, i - start + 1);
      }
    }
  }
  return std::nullopt;
}

// Python-style dicts come back from some models; swap quote styles when the
// text has no double quotes at all.
std::string repair(std::string s) {
  if (s.find('"') == std::string::npos) std::replace(s.begin(), s.end(), '\'', '"');
  // trailing commas
  for (std::size_t pos; (pos = s.find(",}")) != std::string::npos;) s.erase(pos, 1);
  for (std::size_t pos; (pos = s.find(", }")) != std::string::npos;) s.erase(pos, 1);
  return s;
}

int key_ordinal(const std::string& key) {
  std::size_t i = key.size();
  while (i > 0 && std::isdigit(static_cast<unsigned char>(key[i - 1]))) --i;
  if (i == key.size()) return 1 << 30;
  return std::stoi(key.substr(i));
}

}  // namespace

std::optional<QuestionSet> parse_questions(const std::string& raw) {
  if (util::contains(raw, kAllInfo)) return std::nullopt;
  auto block = first_object(raw);
  if (!block) throw QuestionParseError("no JSON dictionary in model output: '" + raw.substr(0, 80) + "'");
  auto j = nlohmann::json::parse(*block, nullptr, false);
  if (j.is_discarded()) j = nlohmann::json::parse(repair(*block), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw QuestionParseError("question dictionary is not valid JSON");

  std::vector<std::pair<std::string, std::string>> items;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.value().is_string()) items.emplace_back(it.key(), util::trim(it.value().get<std::string>()));
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    const int ka = key_ordinal(a.first);
    const int kb = key_ordinal(b.first);
    return ka != kb ? ka < kb : a.first < b.first;
  });
  QuestionSet out;
  for (auto& [key, text] : items)
    if (text.starts_with("Do you see")) out.push_back({key, text});
  if (out.empty()) throw QuestionParseError("dictionary holds no \"Do you see\" question");
  return out;
}

GeneratedQuestions generate_questions_detailed(backends::ReasoningModel& r, const Description& d_i, const Goal& g,
                                               std::optional<int> budget, const PromptTemplates& t) {
  if (d_i.kind() != DescriptionKind::initial) throw PreconditionError("questions are generated from an initial description");
  if (budget && *budget < 1) throw PreconditionError("question budget must be >= 1");
  const std::string prompt = render_template(t.question_generation, {{"d_i", d_i.text()}, {"g", g.text()}});
  GeneratedQuestions out;
  std::optional<QuestionSet> parsed;
  ++out.reasoning_calls;
  try {
    parsed = parse_questions(r.complete(prompt));
  } catch (const QuestionParseError&) {
    ++out.reasoning_calls;
    ++out.format_retries;
    parsed = parse_questions(r.complete(prompt + "\n\n" + std::string(kReformat)));
  }
  if (!parsed) {
    out.short_circuit = true;
    return out;
  }
  out.questions = std::move(*parsed);
  if (budget && out.questions.size() > static_cast<std::size_t>(*budget)) out.questions.resize(static_cast<std::size_t>(*budget));
  return out;
}

QuestionSet generate_questions(backends::ReasoningModel& r, const Description& d_i, const Goal& g,
                               std::optional<int> budget, const PromptTemplates& t) {
  return generate_questions_detailed(r, d_i, g, budget, t).questions;
}

namespace {

template <typename E>
[[noreturn]] void rethrow_with(const E& e, const Question& q) {
  throw E(std::string(e.what()) + " [while answering " + q.key + ": '" + q.text + "']");
}

std::string answer_one(backends::PerceptionModel& vp, const Question& q, const Observation& obs) {
  try {
    auto a = vp.answer(q, obs);
    if (util::trim(a).empty()) throw ProtocolError("empty answer");
    return a;
  } catch (const BackendUnavailable& e) {
    rethrow_with(e, q);
  } catch (const ProtocolError& e) {
    rethrow_with(e, q);
  } catch (const ScriptExhausted& e) {
    rethrow_with(e, q);
  } catch (const FormatError& e) {
    rethrow_with(e, q);
  }
}

}  // namespace

std::vector<QAPair> answer_questions(backends::PerceptionModel& vp, const QuestionSet& qs, const Observation& obs,
                                     bool parallel) {
  std::vector<QAPair> out;
  out.reserve(qs.size());
  if (!parallel || qs.size() < 2) {
    for (const auto& q : qs) out.push_back({q, answer_one(vp, q, obs)});
    return out;
  }
  std::vector<std::future<std::string>> futures;
  for (const auto& q : qs)
    futures.push_back(std::async(std::launch::async, [&vp, &obs, q] { return answer_one(vp, q, obs); }));
  for (std::size_t i = 0; i < qs.size(); ++i) out.push_back({qs[i], futures[i].get()});
  return out;
}

std::string render_qa_list(const std::vector<QAPair>& qa) {
  std::vector<std::string> parts;
  for (const auto& p : qa) parts.push_back("(" + util::py_quote(p.question.text) + ", " + util::py_quote(p.answer) + ")");
  return "QA: [" + util::join(parts, ", ") + "]";
}

std::string render_qa_block(const std::vector<QAPair>& qa) {
  std::vector<std::string> lines;
  for (const auto& p : qa) {
    lines.push_back("Question: " + p.question.text);
    lines.push_back("Answer: " + p.answer);
  }
  return util::join(lines, "\n");
}

Description merge(backends::ReasoningModel& r, const Description& d_i, const std::vector<QAPair>& qa,
                  MergeStrategy strategy, const PromptTemplates& t) {
  switch (strategy) {
    case MergeStrategy::llm_merge: {
      const std::string prompt = render_template(t.refinement, {{"d_i", d_i.text()}, {"qa_pairs", render_qa_block(qa)}});
      std::string text = util::trim(r.complete(prompt));
      if (text.empty()) throw ProtocolError("merge model returned an empty description");
      return Description::make_final(std::move(text), r.id());
    }
    case MergeStrategy::concat:
      if (qa.empty()) return Description::make_final(d_i.text(), "concat");
      return Description::make_final(d_i.text() + "\n" + render_qa_list(qa), "concat");
    case MergeStrategy::qa_only:
      if (qa.empty()) return Description::make_final(d_i.text(), "qa_only");
      return Description::make_final(render_qa_list(qa), "qa_only");
  }
  throw PreconditionError("unknown merge strategy");
}

std::pair<Description, StepTranscript> perceive(backends::PerceptionModel& vp, backends::ReasoningModel& r,
                                                const Observation& obs, const Goal& g, const DqaConfig& cfg,
                                                const PromptTemplates& t) {
  StepTranscript tr;
  if (cfg.mode == PerceptionMode::goal_aware) {
    Description d(vp.describe(render_template(t.goal_aware, {{"g", g.text()}}), obs), DescriptionKind::goal_aware, vp.id());
    tr.d_i = d;
    tr.d_f = Description::make_final(d.text(), d.source());
    tr.perception_calls = 1;
    return {tr.d_f, tr};
  }
  tr.d_i = initial_description(vp, obs, t);
  tr.perception_calls = 1;
  if (cfg.mode == PerceptionMode::raw) {
    tr.d_f = Description::make_final(tr.d_i.text(), tr.d_i.source());
    return {tr.d_f, tr};
  }
  auto gen = generate_questions_detailed(r, tr.d_i, g, cfg.question_budget, t);
  tr.reasoning_calls = gen.reasoning_calls;
  tr.format_retries = gen.format_retries;
  tr.short_circuit = gen.short_circuit;
  tr.questions = std::move(gen.questions);
  if (tr.questions.empty()) {
    tr.d_f = Description::make_final(tr.d_i.text(), tr.d_i.source());
    return {tr.d_f, tr};
  }
  tr.qa = answer_questions(vp, tr.questions, obs, cfg.parallel_answers);
  tr.perception_calls += static_cast<int>(tr.qa.size());
  tr.d_f = merge(r, tr.d_i, tr.qa, cfg.merge, t);
  if (cfg.merge == MergeStrategy::llm_merge) ++tr.reasoning_calls;
  return {tr.d_f, tr};
}

void check_transcript(const StepTranscript& tr, PerceptionMode mode) {
  const int n = static_cast<int>(tr.questions.size());
  auto fail = [&](const std::string& what) {
    throw InvariantViolation("call accounting: " + what + " (perception " + std::to_string(tr.perception_calls) +
                             ", reasoning " + std::to_string(tr.reasoning_calls) + ", questions " + std::to_string(n) + ")");
  };
  if (mode != PerceptionMode::interactive) {
    if (tr.perception_calls != 1 || tr.reasoning_calls != 0) fail("single-description mode must log (1, 0)");
    return;
  }
  if (tr.perception_calls != 1 + n) fail("perception calls must be 1 + |Q|");
  if (static_cast<int>(tr.qa.size()) != n) fail("one answer per question");
  const bool merged_by_llm = n > 0 && tr.reasoning_calls - tr.format_retries == 2;
  const bool single = tr.reasoning_calls - tr.format_retries == 1;
  if (n == 0 && !single) fail("a short-circuited step makes exactly one reasoning call");
  if (n > 0 && !merged_by_llm && !single) fail("reasoning calls must be 2 with questions");
  if (n == 0 && tr.d_f.text() != tr.d_i.text()) fail("short-circuit must keep d_i");
}

}  // namespace prism::dqa
