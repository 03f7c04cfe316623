#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prism/backends/scene.hpp"
#include "prism/core/types.hpp"

namespace prism::nav {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

// 0 = north (+y), 1 = east (+x), 2 = south, 3 = west.
inline constexpr int kHeadings = 4;
const char* heading_name(int h);
inline int turn_left(int h) { return (h + 3) % kHeadings; }
inline int turn_right(int h) { return (h + 1) % kHeadings; }

struct NavNode {
  int id = 0;
  Vec3 pos;
  // Landmarks seen when facing each cardinal direction.
  std::array<std::vector<std::string>, kHeadings> views;
  // Landmarks at the node itself.
  std::vector<std::string> here;
};

class NavGraph {
 public:
  int add_node(Vec3 pos);
  void add_edge(int a, int b);

  const std::vector<NavNode>& nodes() const { return nodes_; }
  NavNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const NavNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::pair<int, double>>& neighbors(int id) const { return adj_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }
  bool connected() const;
  // Length of edge a-b; throws PreconditionError if absent.
  double edge_length(int a, int b) const;

  // Single-source shortest distances (infinity when unreachable); prev gets
  // the predecessor tree when non-null.
  std::vector<double> dijkstra(int source, std::vector<int>* prev = nullptr) const;
  // Node sequence from a to b inclusive; throws PreconditionError when b is
  // unreachable.
  std::vector<int> shortest_path(int a, int b) const;

  // Fills every node's cardinal views from the landmarks in `here`.
  void annotate_views(double radius = 10.0, std::size_t max_items = 3);

 private:
  std::vector<NavNode> nodes_;
  std::vector<std::vector<std::pair<int, double>>> adj_;
};

struct NavEpisode {
  int start = 0;
  int heading = 0;
  int goal = 0;
  std::string instruction;
  double shortest_path_length = 0.0;
};

struct NavState {
  int node = 0;
  int heading = 0;
  int steps = 0;
  bool stopped = false;
  std::vector<int> path;  // visited nodes, start included
};

enum class NavAction { turn_left, turn_right, forward, stop };

const char* to_string(NavAction a);
// "turn left" | "turn right" | "move forward" | "stop"; FormatError otherwise.
NavAction parse_nav_action(const std::string& text);
std::vector<ActionText> nav_actions();

inline constexpr double kSuccessRadius = 3.0;
inline constexpr int kDefaultNavStepCap = 40;

struct NavStepOutcome {
  NavState state;
  double reward = 0.0;
  bool done = false;
};

NavState initial_state(const NavEpisode& ep);

// Neighbour reached by moving forward, or -1 when no edge lies within 45
// degrees of the heading.
int forward_target(const NavGraph& g, int node, int heading);

NavStepOutcome nav_step(const NavGraph& g, const NavEpisode& ep, const NavState& s, NavAction a,
                        int step_cap = kDefaultNavStepCap);

double walked_length(const NavGraph& g, const std::vector<int>& path);

// Shortest path from the episode start compiled into turns and forwards,
// ending with stop.
std::vector<NavAction> dijkstra_expert(const NavGraph& g, const NavEpisode& ep);
// One expert move from an arbitrary state.
NavAction expert_next(const NavGraph& g, const NavEpisode& ep, const NavState& s);

struct NavWorld {
  std::string name;
  NavGraph graph;
  std::vector<NavEpisode> episodes;
};

// Fixture views are given relative to facing north (front = north, left =
// west, right = east, optional back = south).
NavWorld world_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NavWorld& w);
NavWorld load_world(const std::string& path);

// Jittered grid, spacing 4 m, so every edge falls in its own cardinal sector.
NavWorld generate_world(std::uint64_t seed, int cols = 6, int rows = 5, int episodes = 20);

const backends::Vocabulary& landmark_vocabulary();
std::vector<std::string> landmark_names();

class NavView : public SymbolicState, public backends::OracleSceneSource {
 public:
  NavView(std::shared_ptr<const NavWorld> world, int node, int heading, std::string view);
  std::string render() const override;
  backends::LocalScene local_scene() const override;
  const backends::Vocabulary& vocabulary() const override { return landmark_vocabulary(); }
  std::string fabricated_label(const std::string& name) const override { return name; }

 private:
  std::shared_ptr<const NavWorld> world_;
  int node_;
  int heading_;
  std::string view_;
};

struct NavEnvConfig {
  int step_cap = kDefaultNavStepCap;
};

class NavEnv : public Environment {
 public:
  NavEnv(std::shared_ptr<const NavWorld> world, std::size_t episode_index, NavEnvConfig cfg = {});

  Observation reset(std::uint64_t seed) override;
  StepResult step(const ActionText& action) override;
  std::vector<ActionText> admissible_actions() const override { return nav_actions(); }
  const Goal& goal() const override { return goal_; }
  bool done() const override { return done_; }
  bool success() const override { return success_; }
  std::string family() const override { return "nav"; }
  std::vector<std::string> vocabulary() const override { return landmark_names(); }
  std::vector<std::string> view_names() const override { return {"front", "left", "right"}; }
  Observation observe_view(const std::string& view) const override;

  const NavState& state() const { return state_; }
  const NavEpisode& episode() const { return episode_; }
  const NavWorld& world() const { return *world_; }

 private:
  std::shared_ptr<const NavWorld> world_;
  NavEpisode episode_;
  NavEnvConfig cfg_;
  Goal goal_;
  NavState state_;
  bool done_ = false;
  bool success_ = false;
  std::string base_id_;
  std::string id_;
};

}  // namespace prism::nav
