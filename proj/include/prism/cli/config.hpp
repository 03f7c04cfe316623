#pragma once

#include <functional>
#include <map>
#include <string>

#include <json.hpp>

namespace prism::cli {

// Every setting lives in a two-level [section] key = value table. The
// defaults below define the schema: unknown sections or keys and values of
// the wrong type are ConfigErrors.
nlohmann::json default_config();

// Reads a TOML file, or the "config" object of a run manifest (*.json).
nlohmann::json load_config_file(const std::string& path);

// Overlays `patch` onto `base` after checking it against the schema.
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& origin);

// PRISM_<SECTION>_<KEY> for every key, e.g. PRISM_ORACLE_ANSWER_ERROR_RATE.
// Arrays take comma-separated values.
using EnvLookup = std::function<const char*(const char*)>;
void apply_env_overrides(nlohmann::json& cfg, const EnvLookup& getenv);

// "section.key=value" with the value parsed per the schema type.
void apply_assignment(nlohmann::json& cfg, const std::string& assignment);

}  // namespace prism::cli
