#include <doctest.h>

#include <atomic>
#include <stdexcept>

#include "prism/agent/agent.hpp"
#include "prism/core/errors.hpp"
#include "prism/util/text.hpp"

using namespace prism;
using namespace prism::agent;

namespace {

std::shared_ptr<const nav::NavWorld> fixture_world() {
  return std::make_shared<const nav::NavWorld>(
      nav::load_world(std::string(PRISM_SOURCE_DIR) + "/data/nav/house_fixture.json"));
}

EnvSuite nav_suite() {
  EnvSuite s;
  s.kind = "nav";
  s.world = fixture_world();
  return s;
}

ChooserFactory expert(double failure) {
  return [failure](const EpisodeSpec& spec) { return std::make_unique<ExpertChooser>(failure, spec.seed); };
}

std::string dump(const std::vector<EpisodeResult>& rs) {
  std::string out;
  for (const auto& r : rs) {
    for (const auto& j : trajectory_lines(r)) out += j.dump() + "\n";
    for (const auto& j : transcript_lines(r)) out += j.dump() + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("parallel_for visits every index once and keeps slots ordered") {
  for (int jobs : {1, 3, 16}) {
    std::vector<int> out(50, -1);
    std::atomic<int> calls{0};
    parallel_for(out.size(), jobs, [&](std::size_t i) {
      out[i] = static_cast<int>(i * i);
      ++calls;
    });
    CHECK(calls == 50);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  }
}

TEST_CASE("parallel_for rethrows after the workers finish") {
  std::atomic<int> calls{0};
  CHECK_THROWS_AS(parallel_for(20, 4,
                               [&](std::size_t i) {
                                 ++calls;
                                 if (i == 7) throw BackendUnavailable("down");
                               }),
                  BackendUnavailable);
  CHECK(calls >= 1);
}

TEST_CASE("household runs are identical across job counts and reruns") {
  EnvSuite suite;
  const backends::ScriptedOracleConfig noisy{0.08, 0.3, 0.2, 9};
  auto specs = household_specs({"pick", "clean", "heat", "pick2"}, 100, 3);
  REQUIRE(specs.size() == 12);
  EpisodeOptions opts;
  auto one = run_episodes(suite, specs, oracle_backends(suite, noisy), expert(0.3), opts, 1);
  auto four = run_episodes(suite, specs, oracle_backends(suite, noisy), expert(0.3), opts, 4);
  auto again = run_episodes(suite, specs, oracle_backends(suite, noisy), expert(0.3), opts, 4);
  REQUIRE(one.size() == specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) CHECK(one[i].spec.seed == specs[i].seed);
  CHECK(dump(one) == dump(four));
  CHECK(dump(four) == dump(again));
}

TEST_CASE("household step bookkeeping matches the transcripts") {
  EnvSuite suite;
  auto specs = household_specs({"cool"}, 3, 2);
  auto rs = run_episodes(suite, specs, oracle_backends(suite, {}), expert(0.0), {}, 2);
  CHECK(success_rate(rs) == 1.0);
  for (const auto& r : rs) {
    CHECK_NOTHROW(check_trajectory(r.trajectory));
    REQUIRE(r.transcripts.size() == r.trajectory.transitions.size());
    for (std::size_t k = 0; k < r.transcripts.size(); ++k) {
      REQUIRE(r.transcripts[k].size() == 1);
      const auto& tr = r.transcripts[k][0];
      const auto& calls = r.trajectory.transitions[k].calls;
      CHECK(calls.perception_calls == tr.perception_calls);
      CHECK(calls.reasoning_calls == tr.reasoning_calls);
      CHECK(r.trajectory.transitions[k].d_final == tr.d_f.text());
    }
  }
}

TEST_CASE("nav: three DQA passes per step, one per view") {
  auto suite = nav_suite();
  auto specs = nav_specs(*suite.world, 0);
  auto rs = run_episodes(suite, specs, oracle_backends(suite, {}), expert(0.0), {}, 3);
  CHECK(success_rate(rs) == 1.0);
  for (const auto& r : rs) {
    CHECK(r.nav_path.front() == suite.world->episodes[static_cast<std::size_t>(r.spec.nav_episode)].start);
    for (std::size_t k = 0; k < r.transcripts.size(); ++k) {
      CHECK(r.transcripts[k].size() == 3);
      const auto& t = r.trajectory.transitions[k];
      int p = 0;
      for (const auto& tr : r.transcripts[k]) p += tr.perception_calls;
      CHECK(t.calls.perception_calls == p);
      CHECK(t.d_final.rfind("Front: ", 0) == 0);
      CHECK(util::contains(t.d_final, "\nLeft: "));
      CHECK(util::contains(t.d_final, "\nRight: "));
    }
  }
}

TEST_CASE("nav merge strategies on the house fixture") {
  auto suite = nav_suite();
  auto specs = nav_specs(*suite.world, 0);
  auto run = [&](dqa::MergeStrategy m) {
    EpisodeOptions opts;
    opts.dqa.merge = m;
    return run_episodes(suite, specs, oracle_backends(suite, {0.0, 0.0, 0.0, 1}), expert(0.0), opts, 2);
  };
  auto llm = run(dqa::MergeStrategy::llm_merge);
  auto cat = run(dqa::MergeStrategy::concat);
  auto qa = run(dqa::MergeStrategy::qa_only);
  std::size_t len_llm = 0, len_cat = 0, asked = 0;
  for (std::size_t e = 0; e < specs.size(); ++e)
    for (std::size_t k = 0; k < llm[e].transcripts.size(); ++k)
      for (std::size_t v = 0; v < 3; ++v) {
        const auto& a = llm[e].transcripts[k][v];
        const auto& b = cat[e].transcripts[k][v];
        const auto& c = qa[e].transcripts[k][v];
        len_llm += a.d_f.text().size();
        len_cat += b.d_f.text().size();
        if (!c.qa.empty()) {
          ++asked;
          CHECK_FALSE(util::contains(c.d_f.text(), c.d_i.text()));
        }
      }
  CHECK(asked > 0);
  CHECK(len_cat > len_llm);
}
