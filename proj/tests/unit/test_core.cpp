#include <doctest.h>

#include "prism/core/errors.hpp"
#include "prism/core/types.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/text.hpp"

using namespace prism;

namespace {

Description fin(const std::string& s) { return Description::make_final(s, "test"); }

Transition tr(double reward, bool done) {
  Transition t;
  t.reward = reward;
  t.done = done;
  return t;
}

}  // namespace

TEST_CASE("history push on an empty window") {
  HistoryWindow h(5);
  auto h1 = h.push(fin("d1"), {"a1"});
  REQUIRE(h1.size() == 1);
  CHECK(h1.entries()[0].description == "d1");
  CHECK(h1.entries()[0].action == "a1");
  CHECK(h.empty());  // values, not references
}

TEST_CASE("sixth push evicts the oldest") {
  HistoryWindow h(5);
  for (int i = 1; i <= 6; ++i) h = history_push(h, fin("d" + std::to_string(i)), {"a" + std::to_string(i)});
  REQUIRE(h.size() == 5);
  CHECK(h.entries().front().description == "d2");
  CHECK(h.entries().back().description == "d6");
}

TEST_CASE("render_history") {
  HistoryWindow h;
  CHECK(render_history(h).empty());
  h = h.push(fin("a table"), {"go to table 1"});
  CHECK(render_history(h) == "Observation: a table\nAction: go to table 1");
  h = h.push(fin("a mug"), {"take mug 1 from table 1"});
  CHECK(render_history(h) ==
        "Observation: a table\nAction: go to table 1\nObservation: a mug\nAction: take mug 1 from table 1");
}

TEST_CASE("domain invariants") {
  CHECK_THROWS_AS(Goal(""), PreconditionError);
  CHECK_THROWS_AS(Description("", DescriptionKind::initial, "x"), PreconditionError);
  CHECK_THROWS_AS(HistoryWindow(0), PreconditionError);
  CHECK(fin("x").kind() == DescriptionKind::final);
}

TEST_CASE("check_trajectory") {
  Trajectory t;
  t.transitions = {tr(0, false), tr(0, false), tr(1, true)};
  CHECK_NOTHROW(check_trajectory(t));

  t.transitions = {tr(0, true), tr(1, true)};
  CHECK_THROWS_AS(check_trajectory(t), InvariantViolation);

  t.transitions = {tr(0, false), tr(0, false)};
  CHECK_THROWS_AS(check_trajectory(t), InvariantViolation);

  t.transitions = {tr(0.2, false), tr(1, true)};
  CHECK_THROWS_AS(check_trajectory(t), InvariantViolation);
  CHECK_NOTHROW(check_trajectory(t, true));
}

TEST_CASE("text helpers") {
  CHECK(util::normalized_tokens("The  cat, SAT!") == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(util::whitespace_token_count("  a b\n c ") == 3);
  CHECK(util::py_quote("it's") == "\"it's\"");
  CHECK(util::py_quote("plain") == "'plain'");
  CHECK(util::starts_with_ci("do you see x", "Do you see"));
}

TEST_CASE("sha256 of the empty string") {
  CHECK(util::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(util::derive_seed(1, 2) != util::derive_seed(2, 1));
}
