#include "prism/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "prism/core/errors.hpp"
#include "prism/util/text.hpp"

namespace prism::cli {

using nlohmann::json;

json default_config() {
  return {
      {"run",
       {{"env", "household"},
        {"families", {"pick", "look", "clean", "heat", "cool", "pick2"}},
        {"episodes", 5},
        {"seed", 0},
        {"jobs", 1},
        {"difficulty", "medium"},
        {"step_cap", 30},
        {"nav_world", ""},
        {"nav_world_seed", 0},
        {"nav_step_cap", 40}}},
      {"perception",
       {{"mode", "interactive"}, {"merge", "llm_merge"}, {"question_budget", 0}, {"parallel_answers", false}}},
      {"backends", {{"perception", "oracle"}, {"reasoning", "scripted"}, {"scoring", "mock"}}},
      {"oracle",
       {{"answer_error_rate", 0.0}, {"raw_omission_rate", 0.0}, {"hallucination_rate", 0.0}, {"rng_seed", 0}}},
      {"remote",
       {{"api_base", "http://127.0.0.1:8000"},
        {"api_key", ""},
        {"model_vlm", ""},
        {"model_llm", ""},
        {"max_attempts", 3},
        {"timeout_s", 60},
        {"cassette", "off"},
        {"cassette_path", ""}}},
      {"policy",
       {{"kind", "expert"},
        {"checkpoint", ""},
        {"expert_failure_rate", 0.0},
        {"sample", false},
        {"feature_dim", 4096},
        {"feature_seed", 7},
        {"mock_token_logprob", -1.0}}},
      {"bc",
       {{"demos", ""},
        {"epochs", 50},
        {"batch_size", 32},
        {"learning_rate", 1e-2},
        {"momentum", 0.9},
        {"probe_every", 5},
        {"probe_episodes", 0}}},
      {"ppo",
       {{"clip_eps", 0.1},
        {"entropy_coef", 0.001},
        {"gamma", 0.99},
        {"value_coef", 0.5},
        {"learning_rate", 1e-2},
        {"momentum", 0.9},
        {"epochs_per_batch", 4},
        {"batch_size", 64},
        {"normalize_advantages", true},
        {"use_gae", false},
        {"gae_lambda", 0.95},
        {"episodes_per_iteration", 20},
        {"total_episodes", 200},
        {"probe_episodes", 0}}},
      {"ablation",
       {{"suite", "merge"},
        {"demo_episodes", 40},
        {"eval_episodes", 40},
        {"policy", "bc_per_arm"},
        {"bootstrap_resamples", 1000},
        {"oracle_questions", ""}}},
  };
}

namespace {

json from_toml(const toml::node& n) {
  if (auto t = n.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = from_toml(v);
    return out;
  }
  if (auto a = n.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(from_toml(v));
    return out;
  }
  if (auto s = n.as_string()) return s->get();
  if (auto i = n.as_integer()) return i->get();
  if (auto f = n.as_floating_point()) return f->get();
  if (auto b = n.as_boolean()) return b->get();
  throw ConfigError("unsupported TOML value (dates and times are not config values)");
}

// Integers are accepted where the schema holds a float; nothing else
// converts.
bool same_kind(const json& schema, const json& v) {
  if (schema.is_boolean()) return v.is_boolean();
  if (schema.is_number_integer()) return v.is_number_integer();
  if (schema.is_number()) return v.is_number();
  if (schema.is_string()) return v.is_string();
  if (schema.is_array()) return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
  return false;
}

const char* kind_name(const json& schema) {
  if (schema.is_boolean()) return "a boolean";
  if (schema.is_number_integer()) return "an integer";
  if (schema.is_number()) return "a number";
  if (schema.is_string()) return "a string";
  return "a list of strings";
}

json parse_scalar(const json& schema, const std::string& raw, const std::string& where) {
  const std::string s = util::trim(raw);
  try {
    if (schema.is_boolean()) {
      const std::string l = util::to_lower(s);
      if (l == "true" || l == "1" || l == "yes") return true;
      if (l == "false" || l == "0" || l == "no") return false;
      throw ConfigError("");
    }
    std::size_t used = 0;
    if (schema.is_number_integer()) {
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw ConfigError("");
      return v;
    }
    if (schema.is_number()) {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw ConfigError("");
      return v;
    }
  } catch (const std::exception&) {
    throw ConfigError(where + " expects " + kind_name(schema) + ", got '" + raw + "'");
  }
  if (schema.is_string()) return s;
  json arr = json::array();
  for (const auto& part : util::split(s, ','))
    if (!util::trim(part).empty()) arr.push_back(util::trim(part));
  return arr;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

}  // namespace

json load_config_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
  if (std::filesystem::path(path).extension() == ".json") {
    std::ifstream in(path);
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse " + path + ": " + e.what());
    }
    if (!m.contains("config")) throw ConfigError(path + " is not a run manifest (no \"config\" object)");
    return m["config"];
  }
  try {
    return from_toml(toml::parse_file(path));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
}

void merge_config(json& base, const json& patch, const std::string& origin) {
  if (!patch.is_object()) throw ConfigError(origin + ": expected a table of sections");
  for (const auto& sec : patch.items()) {
    const std::string& section = sec.key();
    const json& table = sec.value();
    if (!base.contains(section)) throw ConfigError(origin + ": unknown section [" + section + "]");
    if (!table.is_object()) throw ConfigError(origin + ": [" + section + "] must be a table");
    for (const auto& kv : table.items()) {
      const std::string& key = kv.key();
      const json& value = kv.value();
      if (!base[section].contains(key)) throw ConfigError(origin + ": unknown key " + section + "." + key);
      const json& schema = base[section][key];
      if (!same_kind(schema, value))
        throw ConfigError(origin + ": " + section + "." + key + " expects " + kind_name(schema) + ", got " + value.dump());
      base[section][key] = schema.is_number_float() ? json(value.get<double>()) : value;
    }
  }
}

void apply_env_overrides(json& cfg, const EnvLookup& getenv) {
  for (auto& sec : cfg.items())
    for (auto& kv : sec.value().items()) {
      const std::string name = "PRISM_" + upper(sec.key()) + "_" + upper(kv.key());
      if (const char* v = getenv(name.c_str())) kv.value() = parse_scalar(kv.value(), v, name);
    }
}

void apply_assignment(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  const std::string section = util::trim(assignment.substr(0, dot));
  const std::string key = util::trim(assignment.substr(dot + 1, eq - dot - 1));
  if (!cfg.contains(section) || !cfg[section].contains(key))
    throw ConfigError("--set: unknown key " + section + "." + key);
  cfg[section][key] = parse_scalar(cfg[section][key], assignment.substr(eq + 1), section + "." + key);
}

}  // namespace prism::cli
