#include <doctest.h>

#include <cmath>
#include <limits>

#include "prism/core/errors.hpp"
#include "prism/env/nav.hpp"
#include "prism/eval/metrics.hpp"
#include "prism/util/rng.hpp"
#include "prism/util/text.hpp"

using namespace prism;
using namespace prism::nav;

namespace {

// Two nodes on the x axis; the goal is the second.
std::pair<NavGraph, NavEpisode> pair_graph(double gap) {
  NavGraph g;
  g.add_node({0, 0, 0});
  g.add_node({gap, 0, 0});
  g.add_edge(0, 1);
  NavEpisode ep;
  ep.start = 0;
  ep.heading = 1;
  ep.goal = 1;
  ep.shortest_path_length = gap;
  return {g, ep};
}

NavGraph random_graph(std::uint64_t seed, int n) {
  util::Rng rng(seed);
  NavGraph g;
  for (int i = 0; i < n; ++i) g.add_node({rng.uniform() * 40.0, rng.uniform() * 40.0, rng.uniform()});
  for (int i = 1; i < n; ++i) g.add_edge(i, static_cast<int>(rng.index(static_cast<std::size_t>(i))));
  for (int k = 0; k < n; ++k) {
    const int a = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    const int b = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    if (a == b) continue;
    bool dup = false;
    for (const auto& [m, _] : g.neighbors(a)) dup = dup || m == b;
    if (!dup) g.add_edge(a, b);
  }
  return g;
}

std::vector<std::vector<double>> floyd_warshall(const NavGraph& g) {
  const std::size_t n = g.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0.0;
    for (const auto& [m, _] : g.neighbors(static_cast<int>(i)))
      d[i][static_cast<std::size_t>(m)] = distance(g.node(static_cast<int>(i)).pos, g.node(m).pos);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

std::string fixture_path() { return std::string(PRISM_SOURCE_DIR) + "/data/nav/house_fixture.json"; }

}  // namespace

TEST_CASE("stopping at 2.5 m succeeds, at 3.5 m fails") {
  for (double gap : {2.5, 3.5}) {
    auto [g, ep] = pair_graph(gap);
    auto out = nav_step(g, ep, initial_state(ep), NavAction::stop);
    CHECK(out.done);
    CHECK(out.reward == (gap <= 3.0 ? 1.0 : 0.0));
    auto m = eval::nav_metrics(g, ep, out.state.path);
    CHECK(m.ne == doctest::Approx(gap));
  }
}

TEST_CASE("forward with no aligned edge stays put") {
  auto [g, ep] = pair_graph(4.0);
  ep.heading = 0;  // edge points east, agent faces north
  auto out = nav_step(g, ep, initial_state(ep), NavAction::forward);
  CHECK(out.state.node == 0);
  CHECK(out.state.path.size() == 1);
  CHECK_FALSE(out.done);
  CHECK_THROWS_AS(nav_step(g, ep, nav_step(g, ep, initial_state(ep), NavAction::stop).state, NavAction::stop),
                  PreconditionError);
}

TEST_CASE("straight 3-node line: forward, forward, stop") {
  NavGraph g;
  for (int i = 0; i < 3; ++i) g.add_node({0, 4.0 * i, 0});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  NavEpisode ep{0, 0, 2, "go", 8.0};
  CHECK(dijkstra_expert(g, ep) == std::vector<NavAction>{NavAction::forward, NavAction::forward, NavAction::stop});
}

TEST_CASE("views: fixture front view and left-turn remapping") {
  nlohmann::json j = {
      {"nodes",
       {{{"id", 0}, {"pos", {0, 0}}, {"views", {{"front", {"staircase"}}, {"left", {"sofa"}}, {"right", {"piano"}}}}},
        {{"id", 1}, {"pos", {0, 4}}}}},
      {"edges", {{0, 1}}},
      {"episodes", {{{"start", 0}, {"heading", 0}, {"goal", 1}, {"instruction", "Walk ahead."}}}}};
  auto w = std::make_shared<const NavWorld>(world_from_json(j));
  CHECK(util::contains(NavView(w, 0, 0, "front").render(), "staircase"));
  CHECK(util::contains(NavView(w, 0, 0, "left").render(), "sofa"));
  // after turning left the former left view is in front, the former front on the right
  CHECK(util::contains(NavView(w, 0, turn_left(0), "front").render(), "sofa"));
  CHECK(util::contains(NavView(w, 0, turn_left(0), "right").render(), "staircase"));
  CHECK(util::contains(NavView(w, 0, 0, "front").render(), "The way is open."));
  CHECK(util::contains(NavView(w, 0, 0, "left").render(), "The way is blocked."));

  NavEnv env(w, 0);
  env.reset(3);
  CHECK(env.view_names().size() == 3);
  CHECK(env.observe_view("front").episode_id == "nav-fixture-0-s3-front");
}

TEST_CASE("shortest paths agree with Floyd-Warshall on random 30-node graphs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = random_graph(seed, 30);
    auto fw = floyd_warshall(g);
    for (int s = 0; s < 30; s += 7) {
      auto d = g.dijkstra(s);
      for (int t = 0; t < 30; ++t) {
        CHECK(d[static_cast<std::size_t>(t)] == doctest::Approx(fw[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)]).epsilon(1e-12));
        CHECK(walked_length(g, g.shortest_path(s, t)) ==
              doctest::Approx(fw[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("expert on generated worlds: path length optimal, SPL 1") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto w = generate_world(seed);
    auto fw = floyd_warshall(w.graph);
    for (const auto& ep : w.episodes) {
      NavState s = initial_state(ep);
      double reward = 0.0;
      for (auto a : dijkstra_expert(w.graph, ep)) {
        auto out = nav_step(w.graph, ep, s, a);
        s = out.state;
        reward = out.reward;
        if (out.done) break;
      }
      CHECK(reward == 1.0);
      CHECK(walked_length(w.graph, s.path) ==
            doctest::Approx(fw[static_cast<std::size_t>(ep.start)][static_cast<std::size_t>(ep.goal)]).epsilon(1e-12));
      auto m = eval::nav_metrics(w.graph, ep, s.path);
      CHECK(m.spl == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("house fixture loads and the expert solves every episode") {
  auto w = std::make_shared<const NavWorld>(load_world(fixture_path()));
  REQUIRE(w->episodes.size() == 6);
  for (std::size_t i = 0; i < w->episodes.size(); ++i) {
    NavEnv env(w, i);
    env.reset(0);
    while (!env.done())
      env.step({to_string(expert_next(w->graph, env.episode(), env.state()))});
    CHECK(env.success());
  }
}

TEST_CASE("world json round trip") {
  auto w = generate_world(4);
  auto back = world_from_json(to_json(w));
  REQUIRE(back.graph.size() == w.graph.size());
  CHECK(to_json(back) == to_json(w));
  CHECK_THROWS_AS(world_from_json({{"nodes", {{{"id", 1}, {"pos", {0, 0}}}}}, {"edges", nlohmann::json::array()},
                                   {"episodes", nlohmann::json::array()}}),
                  ConfigError);
}

TEST_CASE("action parsing") {
  CHECK(parse_nav_action("move forward") == NavAction::forward);
  CHECK(parse_nav_action("stop") == NavAction::stop);
  CHECK_THROWS_AS(parse_nav_action("jump"), FormatError);
}
