#include "prism/eval/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "prism/core/errors.hpp"
#include "prism/util/rng.hpp"
#include "prism/util/text.hpp"

namespace prism::eval {

NavMetrics nav_metrics(const nav::NavGraph& g, const nav::NavEpisode& ep, const std::vector<int>& path) {
  if (path.empty()) throw PreconditionError("nav_metrics needs a non-empty path");
  const auto& goal = g.node(ep.goal).pos;
  NavMetrics m;
  m.ne = nav::distance(g.node(path.back()).pos, goal);
  m.sr = m.ne <= nav::kSuccessRadius ? 1.0 : 0.0;
  double closest = std::numeric_limits<double>::infinity();
  for (int n : path) closest = std::min(closest, nav::distance(g.node(n).pos, goal));
  m.osr = closest <= nav::kSuccessRadius ? 1.0 : 0.0;
  const double p = nav::walked_length(g, path);
  const double l = ep.shortest_path_length;
  const double denom = std::max(p, l);
  m.spl = denom > 0.0 ? m.sr * l / denom : m.sr;
  return m;
}

NavMetrics mean_nav_metrics(const std::vector<NavMetrics>& ms) {
  NavMetrics out;
  if (ms.empty()) return out;
  for (const auto& m : ms) {
    out.ne += m.ne;
    out.sr += m.sr;
    out.osr += m.osr;
    out.spl += m.spl;
  }
  const double n = static_cast<double>(ms.size());
  out.ne /= n;
  out.sr /= n;
  out.osr /= n;
  out.spl /= n;
  return out;
}

namespace {

std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l(const std::string& candidate, const std::string& reference) {
  const auto c = util::normalized_tokens(candidate);
  const auto r = util::normalized_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  const double l = static_cast<double>(lcs(c, r));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(c.size());
  const double rec = l / static_cast<double>(r.size());
  return 2.0 * p * rec / (p + rec);
}

double meteor_exact(const std::string& candidate, const std::string& reference) {
  const auto c = util::normalized_tokens(candidate);
  const auto r = util::normalized_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  // Greedy exact alignment: each candidate token takes the first unused
  // matching reference position.
  std::vector<bool> used(r.size(), false);
  std::vector<long> align;  // reference position per matched candidate token, in candidate order
  for (const auto& tok : c) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!used[j] && r[j] == tok) {
        used[j] = true;
        align.push_back(static_cast<long>(j));
        break;
      }
    }
  }
  const double m = static_cast<double>(align.size());
  if (m == 0.0) return 0.0;
  double chunks = 1.0;
  for (std::size_t i = 1; i < align.size(); ++i)
    if (align[i] != align[i - 1] + 1) chunks += 1.0;
  const double p = m / static_cast<double>(c.size());
  const double rec = m / static_cast<double>(r.size());
  const double fmean = 10.0 * p * rec / (rec + 9.0 * p);
  const double penalty = 0.5 * std::pow(chunks / m, 3.0);
  return fmean * (1.0 - penalty);
}

DescQuality description_quality(const std::string& candidate, const std::string& reference) {
  return {rouge_l(candidate, reference), meteor_exact(candidate, reference), std::nullopt};
}

Polarity classify_answer(const std::string& answer) {
  const auto toks = util::normalized_tokens(answer);
  if (toks.empty()) return Polarity::unparsed;
  if (toks[0] == "yes") return Polarity::yes;
  if (toks[0] == "no") return Polarity::no;
  return Polarity::unparsed;
}

QaScores qa_scores(int tp, int fp, int fn, int tn, int unparsed) {
  QaScores s{tp, fp, fn, tn, unparsed, 0.0, 0.0, 0.0};
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

QaAccuracy qa_accuracy(const std::vector<QaItem>& items) {
  std::map<std::string, std::array<int, 5>> counts;  // tp fp fn tn unparsed
  for (const auto& it : items) {
    auto& c = counts[it.group];
    if (it.predicted == Polarity::unparsed) {
      ++c[4];
      continue;
    }
    const bool pred = it.predicted == Polarity::yes;
    if (pred && it.truth) ++c[0];
    else if (pred && !it.truth) ++c[1];
    else if (!pred && it.truth) ++c[2];
    else ++c[3];
  }
  QaAccuracy out;
  for (const auto& [g, c] : counts) {
    out.per_group[g] = qa_scores(c[0], c[1], c[2], c[3], c[4]);
    out.unparsed += c[4];
  }
  if (!out.per_group.empty()) {
    for (const auto& [g, s] : out.per_group) {
      out.precision += s.precision;
      out.recall += s.recall;
      out.f1 += s.f1;
    }
    const double n = static_cast<double>(out.per_group.size());
    out.precision /= n;
    out.recall /= n;
    out.f1 /= n;
  }
  return out;
}

CallAccounting call_accounting(const std::vector<dqa::StepTranscript>& steps, dqa::PerceptionMode mode) {
  CallAccounting a;
  long questions = 0;
  for (const auto& s : steps) {
    dqa::check_transcript(s, mode);
    a.perception_calls += s.perception_calls;
    a.reasoning_calls += s.reasoning_calls;
    questions += static_cast<long>(s.questions.size());
    ++a.steps;
  }
  a.mean_questions = a.steps ? static_cast<double>(questions) / static_cast<double>(a.steps) : 0.0;
  return a;
}

Interval bootstrap_ci(const std::vector<int>& outcomes, int resamples, std::uint64_t seed, double level) {
  if (outcomes.empty() || resamples < 1) return {};
  util::Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  const std::size_t n = outcomes.size();
  for (auto& m : means) {
    long s = 0;
    for (std::size_t i = 0; i < n; ++i) s += outcomes[rng.index(n)];
    m = static_cast<double>(s) / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(means.size() - 1) + 0.5));
    return means[std::min(k, means.size() - 1)];
  };
  return {at(alpha), at(1.0 - alpha)};
}

double sign_test(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  const int k = std::min(wins, losses);
  double tail = 0.0;
  for (int i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, 2.0 * tail);
}

}  // namespace prism::eval
