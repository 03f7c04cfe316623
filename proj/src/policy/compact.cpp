#include "prism/policy/compact.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/text.hpp"

namespace prism::policy {

namespace {

using u64 = std::uint64_t;

bool is_number(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool is_word(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalpha(c) != 0; });
}

u64 tok(std::string_view s) { return util::fnv1a(s); }

u64 key(u64 ns, u64 a) { return util::combine(ns, a); }
u64 key(u64 ns, u64 a, u64 b) { return util::combine(util::combine(ns, a), b); }
u64 key(u64 ns, u64 a, u64 b, u64 c) { return util::combine(util::combine(util::combine(ns, a), b), c); }

std::vector<std::string> instances_in(const std::vector<std::string>& toks) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i)
    if (is_word(toks[i]) && is_number(toks[i + 1])) out.push_back(toks[i] + " " + toks[i + 1]);
  return out;
}

template <typename T>
void dedup(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Tokens of the observation text; a line opening with "Word:" prefixes its
// tokens with that section name (Front/Left/Right, QA).
std::vector<u64> section_tokens(const std::string& text) {
  std::vector<u64> out;
  for (const auto& line : util::split(text, '\n')) {
    std::string section;
    std::string body = line;
    const auto colon = line.find(':');
    if (colon != std::string::npos && colon > 0 && colon < 12 &&
        std::isupper(static_cast<unsigned char>(line[0])) &&
        std::all_of(line.begin(), line.begin() + static_cast<long>(colon), [](unsigned char c) { return std::isalpha(c) != 0; })) {
      section = util::to_lower(line.substr(0, colon));
      body = line.substr(colon + 1);
    }
    const u64 sh = tok(section);
    for (const auto& t : util::normalized_tokens(body))
      if (!is_number(t)) out.push_back(util::combine(sh, tok(t)));
  }
  dedup(out);
  return out;
}

struct Context {
  std::vector<u64> goal_toks;
  std::unordered_set<std::string> goal_words;
  std::vector<u64> d_toks;
  std::unordered_set<std::string> d_words;
  std::unordered_set<std::string> d_instances;
  std::vector<u64> d_inst_hashes;
  std::unordered_set<std::string> hist_actions;
  std::unordered_set<std::string> hist_insts;
  std::vector<u64> hist_tpls;
  std::string last_action;
  u64 last_tpl = 0;
  // (section, sentence kind, goal word, word is the final destination)
  std::vector<u64> matches;
};

bool stopword(const std::string& w) {
  static const std::unordered_set<std::string> s = {"the", "and", "stop", "walk", "you", "see", "are", "there",
                                                     "here", "put", "some", "it", "in", "on", "at", "to",
                                                     "a", "an", "of", "with", "then", "is", "no", "nothing"};
  return w.size() < 3 || s.count(w) > 0;
}

// Goal words that appear in an observation sentence, keyed by where they
// appear. Lets a linear model see "the destination is ahead".
std::vector<u64> goal_matches(const std::string& text, const std::vector<std::string>& goal_toks) {
  std::unordered_set<std::string> content, final_words;
  std::size_t last_dest = 0;
  for (std::size_t i = 0; i < goal_toks.size(); ++i)
    if (goal_toks[i] == "to" || goal_toks[i] == "at") last_dest = i + 1;
  for (std::size_t i = 0; i < goal_toks.size(); ++i) {
    if (stopword(goal_toks[i])) continue;
    content.insert(goal_toks[i]);
    if (last_dest > 0 && i >= last_dest) final_words.insert(goal_toks[i]);
  }
  std::vector<u64> out;
  if (content.empty()) return out;
  for (const auto& line : util::split(text, '\n')) {
    std::string section, body = line;
    const auto colon = line.find(':');
    if (colon != std::string::npos && colon > 0 && colon < 12 &&
        std::all_of(line.begin(), line.begin() + static_cast<long>(colon), [](unsigned char c) { return std::isalpha(c) != 0; })) {
      section = util::to_lower(line.substr(0, colon));
      body = line.substr(colon + 1);
    }
    for (const auto& sentence : util::split(body, '.')) {
      const auto toks = util::normalized_tokens(sentence);
      if (toks.empty()) continue;
      const std::string kind = toks.size() > 1 ? toks[0] + " " + toks[1] : toks[0];
      for (const auto& t : toks) {
        if (!content.count(t)) continue;
        const u64 where = util::combine(tok(section), tok(kind));
        const u64 fin = final_words.count(t) ? 1 : 0;
        out.push_back(util::combine(where, util::combine(tok(t), fin)));
        out.push_back(util::combine(where, fin + 2));  // word-agnostic
      }
    }
  }
  dedup(out);
  return out;
}

Context analyze(const PolicyPrompt& p) {
  Context c;
  const auto gt = util::normalized_tokens(p.goal.text());
  for (const auto& t : gt) {
    c.goal_words.insert(t);
    c.goal_toks.push_back(tok(t));
  }
  dedup(c.goal_toks);
  c.matches = goal_matches(p.d_f, gt);
  c.d_toks = section_tokens(p.d_f);
  const auto dt = util::normalized_tokens(p.d_f);
  c.d_words.insert(dt.begin(), dt.end());
  for (auto& inst : instances_in(dt))
    if (c.d_instances.insert(inst).second) c.d_inst_hashes.push_back(tok(inst));
  dedup(c.d_inst_hashes);
  for (const auto& line : util::split(p.history_render, '\n')) {
    if (!line.starts_with("Action: ")) continue;
    const std::string a = line.substr(8);
    c.hist_actions.insert(a);
    c.hist_tpls.push_back(tok(action_template(a)));
    for (auto& inst : instances_in(util::normalized_tokens(a))) c.hist_insts.insert(inst);
    c.last_action = a;
    c.last_tpl = tok(action_template(a));
  }
  dedup(c.hist_tpls);
  return c;
}

struct Emitter {
  FeatureList& out;
  std::uint32_t dim;
  u64 seed;
  void operator()(u64 k) { out.push_back(static_cast<std::uint32_t>(util::mix64(k ^ seed) % dim)); }
};

void emit_prompt(const Context& c, Emitter& emit) {
  emit(key(30, 1));
  for (u64 t : c.d_toks) emit(key(31, t));
  for (u64 t : c.goal_toks) emit(key(32, t));
  for (u64 t : c.hist_tpls) emit(key(33, t));
  if (c.last_tpl) emit(key(34, c.last_tpl));
  for (u64 m : c.matches) emit(key(35, m));
}

}  // namespace

std::string action_template(const std::string& action, std::vector<std::string>* args) {
  const auto toks = util::whitespace_tokens(action);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i + 1 < toks.size() && is_word(toks[i]) && is_number(toks[i + 1])) {
      if (args) args->push_back(toks[i] + " " + toks[i + 1]);
      out.emplace_back("{}");
      ++i;
    } else {
      out.push_back(toks[i]);
    }
  }
  return util::join(out, " ");
}

std::vector<std::string> household_action_vocab() {
  return {"go to {}",        "open {}",         "close {}",        "take {} from {}", "put {} in/on {}",
          "clean {} with {}", "heat {} with {}", "cool {} with {}", "use {}",          "examine {}"};
}

std::vector<std::string> nav_action_vocab() { return {"move forward", "stop", "turn left", "turn right"}; }

CompactPolicyParams CompactPolicyParams::zeros(std::vector<std::string> vocab, std::uint32_t feature_dim,
                                               std::uint64_t feature_seed) {
  if (vocab.empty()) throw PreconditionError("action vocab must be non-empty");
  if (feature_dim == 0) throw PreconditionError("feature_dim must be positive");
  CompactPolicyParams p;
  p.feature_dim = feature_dim;
  p.feature_seed = feature_seed;
  p.action_vocab = std::move(vocab);
  p.theta.assign((p.action_vocab.size() + 1) * feature_dim, 0.0);
  return p;
}

int CompactPolicyParams::template_index(const std::string& tmpl) const {
  for (std::size_t i = 0; i < action_vocab.size(); ++i)
    if (action_vocab[i] == tmpl) return static_cast<int>(i);
  return -1;
}

bool CompactPolicyParams::finite() const {
  return std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); });
}

FeatureList prompt_features(const PolicyPrompt& p, std::uint32_t dim, std::uint64_t seed) {
  FeatureList out;
  Emitter emit{out, dim, seed};
  emit_prompt(analyze(p), emit);
  return out;
}

StepFeatures featurize(const CompactPolicyParams& params, const PolicyPrompt& p, const std::vector<ActionText>& candidates) {
  const Context c = analyze(p);
  StepFeatures f;
  {
    Emitter emit{f.prompt, params.feature_dim, params.feature_seed};
    emit_prompt(c, emit);
  }
  f.templates.reserve(candidates.size());
  f.candidate.resize(candidates.size());
  std::vector<u64> base;
  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    const std::string& text = candidates[ci].text;
    std::vector<std::string> args;
    const std::string tmpl = action_template(text, &args);
    const int t = params.template_index(tmpl);
    if (t < 0) throw PreconditionError("action '" + text + "' has template '" + tmpl + "' outside the action vocab");
    f.templates.push_back(t);

    base.clear();
    for (std::size_t k = 0; k < args.size(); ++k) {
      const std::string& label = args[k];
      const std::string name = label.substr(0, label.find(' '));
      base.push_back(key(1, k, tok(name)));
      base.push_back(key(2, k, tok(label)));
      if (c.d_instances.count(label)) base.push_back(key(3, k));
      if (c.d_words.count(name)) base.push_back(key(4, k));
      if (c.goal_words.count(name)) base.push_back(key(5, k));
      if (c.hist_insts.count(label)) base.push_back(key(6, k));
    }
    if (c.hist_actions.count(text)) base.push_back(key(7, 1));
    if (text == c.last_action) base.push_back(key(8, 1));

    FeatureList& out = f.candidate[ci];
    Emitter emit{out, params.feature_dim, params.feature_seed};
    for (u64 b : base) {
      emit(b);
      for (u64 d : c.d_toks) emit(key(20, b, d));
      for (u64 g : c.goal_toks) emit(key(21, b, g));
      for (u64 h : c.hist_tpls) emit(key(22, b, h));
      if (c.last_tpl) emit(key(23, b, c.last_tpl));
    }
    for (std::size_t i = 0; i < base.size(); ++i)
      for (std::size_t j = i + 1; j < base.size(); ++j) emit(key(24, base[i], base[j]));
    for (std::size_t k = 0; k < args.size(); ++k)
      for (u64 d : c.d_inst_hashes) emit(key(25, k, tok(args[k]), d));
  }
  return f;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double lz = m + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

namespace {

double dot(const double* w, const FeatureList& f) {
  double s = 0.0;
  for (auto i : f) s += w[i];
  return s;
}

}  // namespace

std::vector<double> compact_logits(const CompactPolicyParams& params, const FeatureList& prompt) {
  std::vector<double> out(params.vocab_size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = dot(params.row(t), prompt);
  return out;
}

std::vector<double> compact_logits(const CompactPolicyParams& params, const PolicyPrompt& p) {
  return compact_logits(params, prompt_features(p, params.feature_dim, params.feature_seed));
}

double compact_value(const CompactPolicyParams& params, const FeatureList& prompt) {
  return dot(params.value_row(), prompt);
}

double compact_value(const CompactPolicyParams& params, const PolicyPrompt& p) {
  return compact_value(params, prompt_features(p, params.feature_dim, params.feature_seed));
}

std::vector<double> candidate_logits(const CompactPolicyParams& params, const StepFeatures& f) {
  std::vector<double> per_template(params.vocab_size(), std::nan(""));
  std::vector<double> out(f.templates.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto t = static_cast<std::size_t>(f.templates[i]);
    if (std::isnan(per_template[t])) per_template[t] = dot(params.row(t), f.prompt);
    out[i] = per_template[t] + dot(params.row(t), f.candidate[i]);
  }
  return out;
}

std::size_t greedy_index(const std::vector<double>& logits, const std::vector<ActionText>& candidates) {
  if (logits.empty()) throw PreconditionError("empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best] || (logits[i] == logits[best] && candidates[i].text < candidates[best].text)) best = i;
  return best;
}

namespace {
constexpr char kMagic[8] = {'P', 'R', 'I', 'S', 'M', 'C', 'K', '1'};
}

void save_checkpoint(const CompactPolicyParams& params, const std::string& path) {
  nlohmann::json header = {{"format", "prism-compact-policy"},
                           {"version", 1},
                           {"feature_dim", params.feature_dim},
                           {"feature_seed", params.feature_seed},
                           {"action_vocab", params.action_vocab},
                           {"stage", params.stage},
                           {"n_params", params.theta.size()}};
  const std::string h = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  out.write(kMagic, sizeof kMagic);
  const auto len = static_cast<std::uint32_t>(h.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(params.theta.data()), static_cast<std::streamsize>(params.theta.size() * sizeof(double)));
  if (!out) throw Error("short write on checkpoint " + path);
}

CompactPolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("checkpoint not found: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError("not a policy checkpoint: " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string h(len, '\0');
  in.read(h.data(), len);
  auto header = nlohmann::json::parse(h, nullptr, false);
  if (header.is_discarded() || header.value("version", 0) != 1) throw FormatError("unsupported checkpoint header in " + path);
  auto p = CompactPolicyParams::zeros(header.at("action_vocab").get<std::vector<std::string>>(),
                                      header.at("feature_dim").get<std::uint32_t>(),
                                      header.at("feature_seed").get<std::uint64_t>());
  p.stage = header.value("stage", std::string("init"));
  if (header.at("n_params").get<std::size_t>() != p.theta.size()) throw FormatError("checkpoint size mismatch in " + path);
  in.read(reinterpret_cast<char*>(p.theta.data()), static_cast<std::streamsize>(p.theta.size() * sizeof(double)));
  if (!in) throw FormatError("truncated checkpoint " + path);
  return p;
}

}  // namespace prism::policy
