#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

namespace prism {

// Natural-language instruction. Fixed for the lifetime of an episode.
class Goal {
 public:
  explicit Goal(std::string text);
  const std::string& text() const { return text_; }
  bool operator==(const Goal&) const = default;

 private:
  std::string text_;
};

// Ground truth behind an observation. Only environments, scripted oracle
// backends and evaluators include the concrete subclasses; the reasoning and
// policy layers never see anything but text.
class SymbolicState {
 public:
  virtual ~SymbolicState() = default;
  // Full-truth rendering, used as the reference for description metrics.
  virtual std::string render() const = 0;
};

// Opaque observation payload handed to perception backends. A remote backend
// would carry image bytes here; the desk-scale simulators reuse their
// symbolic snapshot.
class RawView {
 public:
  virtual ~RawView() = default;
};

struct Observation {
  std::string episode_id;
  int step = 0;
  std::shared_ptr<const SymbolicState> symbolic;
  std::shared_ptr<const RawView> raw_view;
};

enum class DescriptionKind { initial, final, goal_aware, raw };

const char* to_string(DescriptionKind k);

class Description {
 public:
  Description(std::string text, DescriptionKind kind, std::string source);

  const std::string& text() const { return text_; }
  DescriptionKind kind() const { return kind_; }
  const std::string& source() const { return source_; }

  // The only way to obtain a kind=final description; used by the merge step
  // and by the short-circuit/raw paths that relabel an existing text.
  static Description make_final(std::string text, std::string source);

 private:
  std::string text_;
  DescriptionKind kind_;
  std::string source_;
};

struct Question {
  std::string key;  // question1, question2, ...
  std::string text;
};

using QuestionSet = std::vector<Question>;

struct QAPair {
  Question question;
  std::string answer;
};

struct ActionText {
  std::string text;
  bool operator==(const ActionText&) const = default;
  auto operator<=>(const ActionText&) const = default;
};

// Bounded FIFO of (final description, action) pairs. Values are immutable;
// push returns a new window.
class HistoryWindow {
 public:
  struct Entry {
    std::string description;
    std::string action;
  };

  static constexpr std::size_t kDefaultMaxLen = 5;

  explicit HistoryWindow(std::size_t max_len = kDefaultMaxLen);

  HistoryWindow push(const Description& d_final, const ActionText& a) const;

  const std::deque<Entry>& entries() const { return entries_; }
  std::size_t max_len() const { return max_len_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // "Observation: <d>\nAction: <a>" per entry, oldest first, joined by "\n".
  std::string render() const;

 private:
  std::size_t max_len_;
  std::deque<Entry> entries_;
};

// Free-function spelling of the window operations.
HistoryWindow history_push(const HistoryWindow& h, const Description& d, const ActionText& a);
std::string render_history(const HistoryWindow& h);

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

// Per-step DQA call record carried in trajectory logs.
struct CallRecord {
  int perception_calls = 0;
  int reasoning_calls = 0;
  int questions = 0;
};

struct Transition {
  Observation observation;
  std::string d_final;
  std::string history_render;
  ActionText action;
  double reward = 0.0;
  bool done = false;
  CallRecord calls;
};

struct Trajectory {
  std::string episode_id;
  Goal goal{"?"};
  std::string family;
  std::vector<Transition> transitions;
  bool success = false;
  // Navigation only; zero elsewhere.
  double expert_path_length = 0.0;
  double agent_path_length = 0.0;
};

// Throws InvariantViolation unless done is set exactly once, on the last
// transition, and (without shaping) positive reward appears only there.
void check_trajectory(const Trajectory& t, bool allow_shaping = false);

// Goal-conditioned, seeded, deterministic environment.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(const ActionText& action) = 0;
  virtual std::vector<ActionText> admissible_actions() const = 0;
  virtual const Goal& goal() const = 0;
  virtual bool done() const = 0;
  virtual bool success() const = 0;
  // Task family label used for per-family reporting.
  virtual std::string family() const = 0;
  // Names (objects, receptacles, landmarks) the scripted reasoner may ask
  // about. Exposes vocabulary only, never placement.
  virtual std::vector<std::string> vocabulary() const = 0;
  // Environments with several camera views per step (navigation) name them
  // here; the agent then perceives each view separately.
  virtual std::vector<std::string> view_names() const { return {}; }
  virtual Observation observe_view(const std::string& view) const;
};

}  // namespace prism
