#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/backends/scene.hpp"
#include "prism/core/types.hpp"
#include "prism/util/rng.hpp"

namespace prism::household {

enum class ReceptacleKind { surface, container, sink, microwave, fridge, garbage, desklamp };
enum class Family { pick, look, clean, heat, cool, pick2 };

inline constexpr int kMiddleOfRoom = -1;
inline constexpr int kCarried = -1;
inline constexpr int kDefaultStepCap = 30;

const char* to_string(Family f);
Family family_from_string(const std::string& s);
const std::vector<Family>& all_families();

struct Receptacle {
  std::string name;
  int id = 1;
  ReceptacleKind kind = ReceptacleKind::surface;
  bool openable = false;
  bool open = true;
  bool lamp_on = false;
  std::string label() const { return name + " " + std::to_string(id); }
};

struct Object {
  std::string name;
  int id = 1;
  int location = kCarried;  // receptacle index, or kCarried
  bool clean = false;
  bool hot = false;
  bool cold = false;
  bool occluded = false;
  std::string label() const { return name + " " + std::to_string(id); }
};

struct SceneState {
  std::vector<Receptacle> receptacles;
  std::vector<Object> objects;
  int agent_at = kMiddleOfRoom;
  std::optional<int> carried;  // object index
  bool examined_under_lamp = false;
  int steps = 0;

  int find_receptacle(const std::string& label) const;
  int find_object(const std::string& label) const;
  bool operator==(const SceneState&) const;
};

struct TaskSpec {
  Family family = Family::pick;
  std::string object_name;
  std::string target_receptacle;  // receptacle name (not label); unused by look
  int count = 1;                  // 2 for pick2
};

std::string goal_text(const TaskSpec& task);

// Object and target drawn from the family's compatible sets.
TaskSpec sample_task(Family family, std::uint64_t seed);

enum class Difficulty { easy, medium, hard };

// Procedural layout. Solvable by construction: task objects start outside
// the target, and the appliance the family needs is always present.
SceneState generate_scene(std::uint64_t seed, const TaskSpec& task, Difficulty difficulty = Difficulty::medium);

enum class Verb { go_to, open, close, take, put, clean, heat, cool, use, examine };

struct HouseholdAction {
  Verb verb = Verb::go_to;
  std::string object;      // label, may be empty
  std::string receptacle;  // label, may be empty
  std::string text() const;
};

// Throws FormatError on text outside the grammar.
HouseholdAction parse_action(const std::string& text);

struct StepOutcome {
  SceneState state;
  double reward = 0.0;
  bool done = false;
  bool changed = false;  // false = "Nothing happens"
};

struct StepOptions {
  int step_cap = kDefaultStepCap;
  bool subgoal_shaping = false;
  double shaping_bonus = 0.2;
};

bool is_success(const SceneState& state, const TaskSpec& task);

// Pure transition function. Inadmissible actions are no-ops.
StepOutcome step(const SceneState& state, const TaskSpec& task, const HouseholdAction& action,
                 const StepOptions& opts = {});

// Full local truth: every object at the current receptacle (occluded and
// closed-container contents included) with ids and state suffixes.
std::string render_symbolic(const SceneState& state);

// Candidate actions offered to the policy. Built from what the agent can
// know (room layout, open/closed state here, the held object, the scene's
// object catalog); never reveals where an object lies.
std::vector<ActionText> candidate_actions(const SceneState& state);

// Fixed search order over storage receptacles.
std::vector<int> search_order(const SceneState& state, const TaskSpec& task);

// Deterministic rule-based bot. Throws PreconditionError when the state is
// not solvable (e.g. no task object left in the scene).
HouseholdAction expert_action(const SceneState& state, const TaskSpec& task);

// Expert with the abandonment knob: with probability failure_rate it stops
// making progress at a random step strictly before its last action and
// wanders, so an abandoning episode never succeeds.
class ExpertBot {
 public:
  ExpertBot(const TaskSpec& task, double failure_rate, std::uint64_t seed);
  HouseholdAction act(const SceneState& state);
  bool abandons() const { return abandons_; }

 private:
  TaskSpec task_;
  util::Rng rng_;
  bool abandons_ = false;
  int abandon_at_ = -1;  // drawn on the first act()
};

const backends::Vocabulary& vocabulary();
std::vector<std::string> object_names();
std::vector<std::string> receptacle_names();

// Raw view and symbolic snapshot for one observation.
class HouseholdView : public SymbolicState, public backends::OracleSceneSource {
 public:
  explicit HouseholdView(SceneState state) : state_(std::move(state)) {}
  std::string render() const override { return render_symbolic(state_); }
  backends::LocalScene local_scene() const override;
  const backends::Vocabulary& vocabulary() const override { return household::vocabulary(); }
  std::string fabricated_label(const std::string& name) const override;
  const SceneState& state() const { return state_; }

 private:
  SceneState state_;
};

struct EnvConfig {
  Difficulty difficulty = Difficulty::medium;
  StepOptions step;
};

class HouseholdEnv : public Environment {
 public:
  explicit HouseholdEnv(TaskSpec task, EnvConfig cfg = {});

  Observation reset(std::uint64_t seed) override;
  StepResult step(const ActionText& action) override;
  std::vector<ActionText> admissible_actions() const override;
  const Goal& goal() const override { return goal_; }
  bool done() const override { return done_; }
  bool success() const override { return success_; }
  std::string family() const override { return to_string(task_.family); }
  std::vector<std::string> vocabulary() const override;

  const SceneState& state() const { return state_; }
  const TaskSpec& task() const { return task_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Observation observe() const;

  TaskSpec task_;
  EnvConfig cfg_;
  Goal goal_;
  SceneState state_;
  std::uint64_t seed_ = 0;
  bool done_ = false;
  bool success_ = false;
};

nlohmann::json to_json(const SceneState& s);
nlohmann::json to_json(const TaskSpec& t);
SceneState scene_from_json(const nlohmann::json& j);
TaskSpec task_from_json(const nlohmann::json& j);

}  // namespace prism::household
