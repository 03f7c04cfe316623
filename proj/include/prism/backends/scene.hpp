#pragma once

#include <map>
#include <string>
#include <vector>

#include "prism/core/types.hpp"

namespace prism::backends {

// One nameable thing in the agent's current view.
struct SceneEntity {
  std::string name;   // vocabulary name, e.g. "apple"
  std::string label;  // instance label, e.g. "apple 1"
  std::string where;  // "on the countertop 1", "in your hand", ...
  bool occluded = false;
  // Focal entities (the viewed receptacle, the held object) are never
  // dropped by the omission noise.
  bool focal = false;
};

// Structured local view that scripted perception turns into text.
struct LocalScene {
  std::string preamble;    // sentences always present
  std::string list_intro;  // "On the countertop 1, you see"; empty = no list
  std::vector<SceneEntity> listed;
  std::string epilogue;
  std::string here;        // location phrase used for fabricated answers
  // Everything truthfully present for question answering (occluded
  // objects included).
  std::vector<SceneEntity> answerable;
};

// Alias -> canonical vocabulary name ("dining table" -> "diningtable").
using Vocabulary = std::map<std::string, std::string>;

// Raw view payload understood by the scripted oracle.
class OracleSceneSource : public RawView {
 public:
  virtual LocalScene local_scene() const = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  // Label used when noise claims an absent entity is here.
  virtual std::string fabricated_label(const std::string& name) const = 0;
};

// Longest match (in tokens) of any alias inside `text`; earliest wins ties.
// Returns the canonical name or "" when nothing matches.
std::string longest_match(const Vocabulary& vocab, const std::string& text);

// Every vocabulary name mentioned in `text`, in order of first mention,
// scanning left to right and preferring the longest alias at each position.
std::vector<std::string> all_matches(const Vocabulary& vocab, const std::string& text);

}  // namespace prism::backends
