#pragma once

#include <map>
#include <string>

namespace prism::dqa {

// The six prompt templates, read verbatim from one directory (one file per
// prompt). Placeholders are {name}; {{ and }} stand for literal braces.
struct PromptTemplates {
  std::string initial_description;
  std::string question_generation;  // {d_i} {g}
  std::string vqa;                  // {q}
  std::string refinement;           // {d_i} {qa_pairs}
  std::string goal_aware;           // {g}
  std::string judge;                // {gt} {a} {b} {c}

  static PromptTemplates load(const std::string& dir);
  // The shipped templates/ directory.
  static const PromptTemplates& defaults();
};

std::string default_template_dir();

// Fills every {name} slot; an unknown slot name is a FormatError.
std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& slots);

}  // namespace prism::dqa
