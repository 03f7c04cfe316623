#include "prism/env/nav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>
#include <set>

#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/rng.hpp"
#include "prism/util/text.hpp"

namespace prism::nav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAlignTolerance = std::numbers::pi / 4 + 1e-9;

const std::array<std::pair<double, double>, kHeadings> kDir = {{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};

// Angle between the planar direction a->b and heading h.
double heading_angle(const Vec3& a, const Vec3& b, int h) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return kInf;
  const double c = (dx * kDir[static_cast<std::size_t>(h)].first + dy * kDir[static_cast<std::size_t>(h)].second) / len;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

const std::vector<std::string> kLandmarks = {
    "staircase", "sofa",      "piano",   "fireplace", "bookshelf",  "bathtub",    "bed",
    "dining table", "kitchen counter", "front door", "painting", "plant", "mirror", "chandelier",
    "armchair",  "television", "rug",    "pillar",    "washing machine", "wardrobe", "fountain"};

}  // namespace

double distance(const Vec3& a, const Vec3& b) { return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z)); }

const char* heading_name(int h) {
  static const char* names[] = {"north", "east", "south", "west"};
  return names[((h % kHeadings) + kHeadings) % kHeadings];
}

int NavGraph::add_node(Vec3 pos) {
  NavNode n;
  n.id = static_cast<int>(nodes_.size());
  n.pos = pos;
  nodes_.push_back(n);
  adj_.emplace_back();
  return n.id;
}

void NavGraph::add_edge(int a, int b) {
  if (a == b) throw PreconditionError("self loop on node " + std::to_string(a));
  const double len = distance(node(a).pos, node(b).pos);
  for (const auto& [m, _] : adj_.at(static_cast<std::size_t>(a)))
    if (m == b) return;
  adj_[static_cast<std::size_t>(a)].emplace_back(b, len);
  adj_[static_cast<std::size_t>(b)].emplace_back(a, len);
}

bool NavGraph::connected() const {
  if (nodes_.empty()) return true;
  const auto d = dijkstra(0);
  return std::all_of(d.begin(), d.end(), [](double x) { return x < kInf; });
}

double NavGraph::edge_length(int a, int b) const {
  for (const auto& [m, len] : neighbors(a))
    if (m == b) return len;
  throw PreconditionError("no edge " + std::to_string(a) + "-" + std::to_string(b));
}

std::vector<double> NavGraph::dijkstra(int source, std::vector<int>* prev) const {
  std::vector<double> dist(nodes_.size(), kInf);
  if (prev) prev->assign(nodes_.size(), -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist.at(static_cast<std::size_t>(source)) = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& [v, w] : adj_[static_cast<std::size_t>(u)]) {
      const double nd = d + w;
      // strict improvement, then smaller predecessor id on exact ties
      auto& dv = dist[static_cast<std::size_t>(v)];
      if (nd < dv || (prev && nd == dv && u < (*prev)[static_cast<std::size_t>(v)])) {
        const bool improved = nd < dv;
        dv = nd;
        if (prev) (*prev)[static_cast<std::size_t>(v)] = u;
        if (improved) pq.emplace(nd, v);
      }
    }
  }
  return dist;
}

std::vector<int> NavGraph::shortest_path(int a, int b) const {
  std::vector<int> prev;
  const auto dist = dijkstra(a, &prev);
  if (dist.at(static_cast<std::size_t>(b)) == kInf)
    throw PreconditionError("node " + std::to_string(b) + " unreachable from " + std::to_string(a));
  std::vector<int> path;
  for (int v = b; v != -1; v = prev[static_cast<std::size_t>(v)]) {
    path.push_back(v);
    if (v == a) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void NavGraph::annotate_views(double radius, std::size_t max_items) {
  for (auto& n : nodes_) {
    for (int h = 0; h < kHeadings; ++h) {
      std::vector<std::pair<double, std::string>> seen;
      for (const auto& m : nodes_) {
        if (m.id == n.id || m.here.empty()) continue;
        const double d = distance(n.pos, m.pos);
        if (d > radius || heading_angle(n.pos, m.pos, h) > kAlignTolerance) continue;
        for (const auto& l : m.here) seen.emplace_back(d, l);
      }
      std::stable_sort(seen.begin(), seen.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      auto& view = n.views[static_cast<std::size_t>(h)];
      view.clear();
      for (const auto& [d, l] : seen) {
        if (view.size() >= max_items) break;
        if (std::find(view.begin(), view.end(), l) == view.end()) view.push_back(l);
      }
    }
  }
}

const char* to_string(NavAction a) {
  switch (a) {
    case NavAction::turn_left: return "turn left";
    case NavAction::turn_right: return "turn right";
    case NavAction::forward: return "move forward";
    case NavAction::stop: return "stop";
  }
  return "?";
}

NavAction parse_nav_action(const std::string& text) {
  const std::string t = util::trim(util::to_lower(text));
  for (auto a : {NavAction::turn_left, NavAction::turn_right, NavAction::forward, NavAction::stop})
    if (t == to_string(a)) return a;
  throw FormatError("unparseable navigation action: '" + text + "'");
}

std::vector<ActionText> nav_actions() {
  return {{"move forward"}, {"stop"}, {"turn left"}, {"turn right"}};
}

NavState initial_state(const NavEpisode& ep) {
  NavState s;
  s.node = ep.start;
  s.heading = ep.heading;
  s.path = {ep.start};
  return s;
}

int forward_target(const NavGraph& g, int node, int heading) {
  int best = -1;
  double best_angle = kAlignTolerance;
  for (const auto& [m, _] : g.neighbors(node)) {
    const double a = heading_angle(g.node(node).pos, g.node(m).pos, heading);
    if (a <= best_angle && (best < 0 || a < best_angle || m < best)) {
      best = m;
      best_angle = a;
    }
  }
  return best;
}

NavStepOutcome nav_step(const NavGraph& g, const NavEpisode& ep, const NavState& s, NavAction a, int step_cap) {
  if (s.stopped) throw PreconditionError("action after stop");
  NavStepOutcome out{s, 0.0, false};
  NavState& n = out.state;
  switch (a) {
    case NavAction::turn_left: n.heading = turn_left(n.heading); break;
    case NavAction::turn_right: n.heading = turn_right(n.heading); break;
    case NavAction::forward: {
      const int to = forward_target(g, n.node, n.heading);
      if (to >= 0) {
        n.node = to;
        n.path.push_back(to);
      }
      break;
    }
    case NavAction::stop: n.stopped = true; break;
  }
  ++n.steps;
  if (n.stopped || n.steps >= step_cap) {
    n.stopped = true;
    out.done = true;
    if (distance(g.node(n.node).pos, g.node(ep.goal).pos) <= kSuccessRadius) out.reward = 1.0;
  }
  return out;
}

double walked_length(const NavGraph& g, const std::vector<int>& path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += g.edge_length(path[i - 1], path[i]);
  return total;
}

NavAction expert_next(const NavGraph& g, const NavEpisode& ep, const NavState& s) {
  if (s.node == ep.goal) return NavAction::stop;
  const auto path = g.shortest_path(s.node, ep.goal);
  const int next = path.at(1);
  int want = -1;
  for (int h = 0; h < kHeadings; ++h)
    if (forward_target(g, s.node, h) == next) {
      want = h;
      break;
    }
  if (want < 0)
    throw PreconditionError("edge " + std::to_string(s.node) + "-" + std::to_string(next) +
                            " is not reachable by any heading");
  if (want == s.heading) return NavAction::forward;
  if (want == turn_right(s.heading)) return NavAction::turn_right;
  return NavAction::turn_left;
}

std::vector<NavAction> dijkstra_expert(const NavGraph& g, const NavEpisode& ep) {
  std::vector<NavAction> out;
  NavState s = initial_state(ep);
  const int cap = static_cast<int>(4 * g.size() + 4);
  while (!s.stopped) {
    const NavAction a = expert_next(g, ep, s);
    out.push_back(a);
    s = nav_step(g, ep, s, a, cap).state;
  }
  return out;
}

namespace {

int heading_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return ((j.get<int>() % kHeadings) + kHeadings) % kHeadings;
  const std::string s = j.get<std::string>();
  for (int h = 0; h < kHeadings; ++h)
    if (s == heading_name(h)) return h;
  throw ConfigError("bad heading '" + s + "'");
}

Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() < 2) throw ConfigError("node position must be [x, y] or [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j.size() > 2 ? j[2].get<double>() : 0.0};
}

void finish_episode(const NavGraph& g, NavEpisode& ep) {
  const auto d = g.dijkstra(ep.start);
  const double l = d.at(static_cast<std::size_t>(ep.goal));
  if (l == kInf) throw ConfigError("episode goal unreachable from start");
  ep.shortest_path_length = l;
}

}  // namespace

NavWorld world_from_json(const nlohmann::json& j) {
  NavWorld w;
  w.name = j.value("name", std::string("fixture"));
  bool has_views = false;
  const auto& nodes = j.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.at("id").get<int>() != static_cast<int>(i)) throw ConfigError("node ids must be 0..n-1 in order");
    const int id = w.graph.add_node(vec_from_json(n.at("pos")));
    auto& node = w.graph.node(id);
    node.here = n.value("here", std::vector<std::string>{});
    if (n.contains("views")) {
      has_views = true;
      const auto& v = n["views"];
      node.views[0] = v.value("front", std::vector<std::string>{});
      node.views[3] = v.value("left", std::vector<std::string>{});
      node.views[1] = v.value("right", std::vector<std::string>{});
      node.views[2] = v.value("back", std::vector<std::string>{});
    }
  }
  for (const auto& e : j.at("edges")) w.graph.add_edge(e.at(0).get<int>(), e.at(1).get<int>());
  if (!w.graph.connected()) throw ConfigError("navigation graph is not connected");
  if (!has_views) w.graph.annotate_views();
  for (const auto& e : j.at("episodes")) {
    NavEpisode ep;
    ep.start = e.at("start").get<int>();
    ep.heading = heading_from_json(e.value("heading", nlohmann::json(0)));
    ep.goal = e.at("goal").get<int>();
    ep.instruction = e.at("instruction").get<std::string>();
    finish_episode(w.graph, ep);
    w.episodes.push_back(ep);
  }
  return w;
}

nlohmann::json to_json(const NavWorld& w) {
  nlohmann::json j;
  j["name"] = w.name;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : w.graph.nodes())
    j["nodes"].push_back({{"id", n.id},
                          {"pos", {n.pos.x, n.pos.y, n.pos.z}},
                          {"here", n.here},
                          {"views", {{"front", n.views[0]}, {"left", n.views[3]}, {"right", n.views[1]}, {"back", n.views[2]}}}});
  j["edges"] = nlohmann::json::array();
  for (const auto& n : w.graph.nodes())
    for (const auto& [m, _] : w.graph.neighbors(n.id))
      if (n.id < m) j["edges"].push_back({n.id, m});
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : w.episodes)
    j["episodes"].push_back({{"start", e.start}, {"heading", e.heading}, {"goal", e.goal}, {"instruction", e.instruction}});
  return j;
}

NavWorld load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open navigation fixture " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("navigation fixture is not valid JSON: " + path);
  return world_from_json(j);
}

NavWorld generate_world(std::uint64_t seed, int cols, int rows, int episodes) {
  if (cols < 2 || rows < 2) throw PreconditionError("grid must be at least 2x2");
  util::Rng rng(util::derive_seed(seed, 0x9a7));
  NavWorld w;
  w.name = "generated-" + std::to_string(seed);
  constexpr double kSpacing = 4.0;
  constexpr double kJitter = 0.4;
  auto at = [cols](int c, int r) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      w.graph.add_node({c * kSpacing + (rng.uniform() * 2 - 1) * kJitter, r * kSpacing + (rng.uniform() * 2 - 1) * kJitter, 0.0});

  // randomized DFS spanning tree over grid neighbours, then some extra edges
  std::vector<std::pair<int, int>> grid_edges;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) grid_edges.emplace_back(at(c, r), at(c + 1, r));
      if (r + 1 < rows) grid_edges.emplace_back(at(c, r), at(c, r + 1));
    }
  const int n = cols * rows;
  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  std::vector<int> stack{static_cast<int>(rng.index(static_cast<std::size_t>(n)))};
  visited[static_cast<std::size_t>(stack.back())] = true;
  std::set<std::pair<int, int>> tree;
  while (!stack.empty()) {
    const int u = stack.back();
    std::vector<int> options;
    const int c = u % cols;
    const int r = u / cols;
    if (c > 0) options.push_back(at(c - 1, r));
    if (c + 1 < cols) options.push_back(at(c + 1, r));
    if (r > 0) options.push_back(at(c, r - 1));
    if (r + 1 < rows) options.push_back(at(c, r + 1));
    std::erase_if(options, [&](int v) { return visited[static_cast<std::size_t>(v)]; });
    if (options.empty()) {
      stack.pop_back();
      continue;
    }
    const int v = rng.pick(options);
    visited[static_cast<std::size_t>(v)] = true;
    tree.insert({std::min(u, v), std::max(u, v)});
    stack.push_back(v);
  }
  for (const auto& e : grid_edges)
    if (tree.count(e) || rng.bernoulli(0.3)) w.graph.add_edge(e.first, e.second);

  for (int i = 0; i < n; ++i)
    if (rng.bernoulli(0.45)) w.graph.node(i).here.push_back(rng.pick(kLandmarks));

  // goals need a landmark no other node carries
  auto unique_goal = [&](int node) {
    const auto& here = w.graph.node(node).here;
    if (here.empty()) return false;
    for (const auto& m : w.graph.nodes())
      if (m.id != node && std::find(m.here.begin(), m.here.end(), here[0]) != m.here.end()) return false;
    return true;
  };
  std::vector<int> goals;
  for (int i = 0; i < n; ++i)
    if (unique_goal(i)) goals.push_back(i);
  if (goals.empty()) {
    const int g = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) std::erase(w.graph.node(i).here, "fountain");
    w.graph.node(g).here = {"fountain"};
    goals.push_back(g);
  }
  w.graph.annotate_views();

  for (int e = 0; e < episodes; ++e) {
    NavEpisode ep;
    ep.goal = rng.pick(goals);
    const auto dist = w.graph.dijkstra(ep.goal);
    std::vector<int> far;
    for (int i = 0; i < n; ++i)
      if (dist[static_cast<std::size_t>(i)] >= 2.5 * kSpacing) far.push_back(i);
    if (far.empty())
      for (int i = 0; i < n; ++i)
        if (i != ep.goal) far.push_back(i);
    ep.start = rng.pick(far);
    ep.heading = rng.range(0, kHeadings - 1);
    const auto path = w.graph.shortest_path(ep.start, ep.goal);
    std::string via;
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
      const auto& here = w.graph.node(path[k]).here;
      if (!here.empty() && here[0] != w.graph.node(ep.goal).here[0]) {
        via = here[0];
        break;
      }
    }
    const std::string goal_mark = w.graph.node(ep.goal).here[0];
    ep.instruction = via.empty() ? "Walk to the " + goal_mark + " and stop."
                                 : "Walk past the " + via + " and stop at the " + goal_mark + ".";
    finish_episode(w.graph, ep);
    w.episodes.push_back(ep);
  }
  return w;
}

const backends::Vocabulary& landmark_vocabulary() {
  static const backends::Vocabulary v = [] {
    backends::Vocabulary m;
    for (const auto& l : kLandmarks) m[l] = l;
    const std::vector<std::pair<std::string, std::string>> aliases = {
        {"stairs", "staircase"},  {"stairway", "staircase"}, {"couch", "sofa"},  {"tv", "television"},
        {"door", "front door"},   {"table", "dining table"},  {"counter", "kitchen counter"},
        {"bookcase", "bookshelf"}, {"tub", "bathtub"},        {"column", "pillar"}, {"carpet", "rug"},
        {"closet", "wardrobe"}};
    for (const auto& [a, n] : aliases) m[a] = n;
    return m;
  }();
  return v;
}

std::vector<std::string> landmark_names() { return kLandmarks; }

NavView::NavView(std::shared_ptr<const NavWorld> world, int node, int heading, std::string view)
    : world_(std::move(world)), node_(node), heading_(heading), view_(std::move(view)) {}

namespace {

int view_heading(int heading, const std::string& view) {
  if (view == "front") return heading;
  if (view == "left") return turn_left(heading);
  if (view == "right") return turn_right(heading);
  if (view == "back") return (heading + 2) % kHeadings;
  throw PreconditionError("unknown view '" + view + "'");
}

std::string passage(const NavGraph& g, int node, int heading) {
  return forward_target(g, node, heading) >= 0 ? "The way is open." : "The way is blocked.";
}

}  // namespace

std::string NavView::render() const {
  const auto& n = world_->graph.node(node_);
  const int vh = view_heading(heading_, view_);
  const auto& seen = n.views[static_cast<std::size_t>(vh)];
  std::string out = passage(world_->graph, node_, vh) + " Ahead you see " + (seen.empty() ? std::string("nothing") : "a " + util::join(seen, ", a ")) + ".";
  if (!n.here.empty()) out += " You are next to a " + util::join(n.here, ", a ") + ".";
  return out;
}

backends::LocalScene NavView::local_scene() const {
  const auto& n = world_->graph.node(node_);
  backends::LocalScene ls;
  ls.preamble = passage(world_->graph, node_, view_heading(heading_, view_));
  ls.list_intro = "Ahead you see";
  ls.here = "ahead";
  for (const auto& l : n.views[static_cast<std::size_t>(view_heading(heading_, view_))]) {
    backends::SceneEntity e{l, l, "ahead", false, false};
    ls.listed.push_back(e);
    ls.answerable.push_back(e);
  }
  if (!n.here.empty()) {
    ls.epilogue = "You are next to a " + util::join(n.here, ", a ") + ".";
    for (const auto& l : n.here) ls.answerable.push_back({l, l, "right next to you", false, true});
  }
  return ls;
}

NavEnv::NavEnv(std::shared_ptr<const NavWorld> world, std::size_t episode_index, NavEnvConfig cfg)
    : world_(std::move(world)),
      episode_(world_->episodes.at(episode_index)),
      cfg_(cfg),
      goal_(episode_.instruction) {
  base_id_ = "nav-" + world_->name + "-" + std::to_string(episode_index);
  id_ = base_id_;
}

Observation NavEnv::reset(std::uint64_t seed) {
  id_ = base_id_ + "-s" + std::to_string(seed);
  state_ = initial_state(episode_);
  done_ = false;
  success_ = false;
  return observe_view("front");
}

Observation NavEnv::observe_view(const std::string& view) const {
  auto v = std::make_shared<const NavView>(world_, state_.node, state_.heading, view);
  Observation obs;
  obs.episode_id = id_ + "-" + view;
  obs.step = state_.steps;
  obs.symbolic = v;
  obs.raw_view = v;
  return obs;
}

StepResult NavEnv::step(const ActionText& action) {
  if (done_) throw PreconditionError("step() after episode end");
  auto out = nav_step(world_->graph, episode_, state_, parse_nav_action(action.text), cfg_.step_cap);
  state_ = std::move(out.state);
  done_ = out.done;
  success_ = out.reward > 0.0;
  return StepResult{observe_view("front"), out.reward, out.done};
}

}  // namespace prism::nav
