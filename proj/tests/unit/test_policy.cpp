#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "prism/backends/mock.hpp"
#include "prism/core/errors.hpp"
#include "prism/policy/compact.hpp"
#include "prism/policy/policy.hpp"
#include "prism/util/rng.hpp"

using namespace prism;
using namespace prism::policy;

namespace {

PolicyPrompt canonical_prompt() {
  HistoryWindow h;
  h = h.push(Description::make_final("You are in the middle of a room.", "t"), {"go to countertop 1"});
  return {Goal("heat some egg and put it in diningtable."), h.render(),
          "You are at the countertop 1. On the countertop 1, you see a egg 1."};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double sum_exp(const std::vector<double>& lp) {
  double s = 0.0;
  for (double v : lp) s += std::exp(v);
  return s;
}

}  // namespace

TEST_CASE("policy prompt matches its golden file") {
  const auto want = slurp(std::string(PRISM_SOURCE_DIR) + "/tests/golden/policy_prompt.txt");
  CHECK(render_policy_prompt(canonical_prompt()) == want);
  PolicyPrompt first{Goal("x"), "", "d"};
  CHECK(render_policy_prompt(first).find("Previous transitions") == std::string::npos);
}

TEST_CASE("score_action under the mock scorer") {
  backends::MockScorer s(std::log(0.5));
  auto sc = score_action(s, canonical_prompt(), {"go to table"});
  CHECK(std::exp(sc.logprob) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK_THROWS_AS(score_action(s, canonical_prompt(), {"  "}), PreconditionError);
}

TEST_CASE("exp of summed logprobs equals the product of token probabilities") {
  backends::MockScorer s(-0.3);
  util::Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> lps(1 + rng.index(6));
    for (auto& v : lps) v = -rng.uniform() * 3.0;
    std::string text = "t" + std::to_string(i);
    for (std::size_t k = 1; k < lps.size(); ++k) text += " w" + std::to_string(k);
    s.pin(text, lps);
    double prod = 1.0;
    for (double v : lps) prod *= std::exp(v);
    CHECK(std::abs(std::exp(score_action(s, canonical_prompt(), {text}).logprob) - prod) < 1e-12);
  }
}

TEST_CASE("select_action: argmax, ties, shift invariance") {
  backends::MockScorer s(-1.0);
  s.pin("open fridge 1", {-1.0});
  s.pin("go to fridge 1", {-0.5, -0.5, -1.0});
  CHECK(select_action(s, canonical_prompt(), {{"open fridge 1"}, {"go to fridge 1"}}).text == "open fridge 1");

  std::vector<ScoredAction> tie = {{{"zeta"}, -1.0}, {{"alpha"}, -1.0}};
  CHECK(argmax_action(tie).text == "alpha");

  std::vector<ScoredAction> v = {{{"a"}, -3.0}, {{"b"}, -1.5}, {{"c"}, -2.0}};
  auto best = argmax_action(v).text;
  for (auto& x : v) x.logprob -= 7.25;
  CHECK(argmax_action(v).text == best);
  CHECK_THROWS_AS(argmax_action({}), PreconditionError);
}

TEST_CASE("action templates") {
  std::vector<std::string> args;
  CHECK(action_template("take apple 1 from countertop 2", &args) == "take {} from {}");
  CHECK(args == std::vector<std::string>{"apple 1", "countertop 2"});
  CHECK(action_template("move forward") == "move forward");
  CHECK(action_template("put mug 1 in/on shelf 1") == "put {} in/on {}");
  auto vocab = household_action_vocab();
  CHECK(vocab.size() == 10);
}

TEST_CASE("compact logits: zeros, one-hot, normalization") {
  auto params = CompactPolicyParams::zeros(household_action_vocab(), 512, 3);
  auto lp = log_softmax(compact_logits(params, canonical_prompt()));
  for (double v : lp) CHECK(v == doctest::Approx(-std::log(10.0)).epsilon(1e-12));
  CHECK(compact_value(params, canonical_prompt()) == 0.0);

  auto f = prompt_features(canonical_prompt(), params.feature_dim, params.feature_seed);
  REQUIRE_FALSE(f.empty());
  params.row(4)[f[0]] = 1.0;
  auto logits = compact_logits(params, f);
  for (std::size_t t = 0; t < logits.size(); ++t)
    if (t != 4) CHECK(logits[4] > logits[t]);

  util::Rng rng(9);
  for (auto& w : params.theta) w = rng.uniform() * 4.0 - 2.0;
  CHECK(sum_exp(log_softmax(compact_logits(params, canonical_prompt()))) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sum_exp(log_softmax({1000.0, -1000.0, 999.0})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("value head is linear in the features") {
  auto params = CompactPolicyParams::zeros(nav_action_vocab(), 256, 1);
  util::Rng rng(2);
  for (auto& w : params.theta) w = rng.uniform() - 0.5;
  auto f = prompt_features(canonical_prompt(), params.feature_dim, params.feature_seed);
  FeatureList twice = f;
  twice.insert(twice.end(), f.begin(), f.end());
  CHECK(compact_value(params, twice) == doctest::Approx(2.0 * compact_value(params, f)).epsilon(1e-12));
  CHECK(std::isfinite(compact_value(params, canonical_prompt())));
}

TEST_CASE("featurize and candidate logits") {
  auto params = CompactPolicyParams::zeros(household_action_vocab(), 1024, 0);
  std::vector<ActionText> cands = {{"go to microwave 1"}, {"take egg 1 from countertop 1"}, {"examine countertop 1"}};
  auto sf = featurize(params, canonical_prompt(), cands);
  CHECK(sf.templates.size() == 3);
  CHECK(sf.candidate.size() == 3);
  auto logits = candidate_logits(params, sf);
  for (double v : logits) CHECK(v == 0.0);
  // all tied: lexicographically smallest text
  CHECK(cands[greedy_index(logits, cands)].text == "examine countertop 1");
  CHECK_THROWS_AS(featurize(params, canonical_prompt(), {{"dance wildly"}}), PreconditionError);
}

TEST_CASE("featurization is deterministic and seed dependent") {
  auto a = prompt_features(canonical_prompt(), 4096, 1);
  CHECK(a == prompt_features(canonical_prompt(), 4096, 1));
  CHECK(a != prompt_features(canonical_prompt(), 4096, 2));
}

TEST_CASE("checkpoint round trip") {
  auto params = CompactPolicyParams::zeros(household_action_vocab(), 64, 11);
  util::Rng rng(4);
  for (auto& w : params.theta) w = rng.uniform() - 0.5;
  params.stage = "bc";
  const auto path = (std::filesystem::temp_directory_path() / "prism_ckpt_test.bin").string();
  save_checkpoint(params, path);
  auto back = load_checkpoint(path);
  CHECK(back.theta == params.theta);
  CHECK(back.action_vocab == params.action_vocab);
  CHECK(back.feature_dim == 64);
  CHECK(back.feature_seed == 11);
  CHECK(back.stage == "bc");
  {
    std::ofstream junk(path, std::ios::binary);
    junk << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), PreconditionError);
}
