#include "prism/dqa/templates.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "prism/core/errors.hpp"

#ifndef PRISM_TEMPLATE_DIR
#define PRISM_TEMPLATE_DIR "templates"
#endif

namespace prism::dqa {

namespace {

std::string read_template(const std::string& dir, const char* name) {
  const std::string path = dir + "/" + name + ".txt";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing prompt template " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  // files end with a newline for editors' sake; the prompt does not
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

std::string default_template_dir() {
  if (const char* env = std::getenv("PRISM_TEMPLATE_DIR")) return env;
  return PRISM_TEMPLATE_DIR;
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
  PromptTemplates t;
  t.initial_description = read_template(dir, "initial_description");
  t.question_generation = read_template(dir, "question_generation");
  t.vqa = read_template(dir, "vqa");
  t.refinement = read_template(dir, "refinement");
  t.goal_aware = read_template(dir, "goal_aware");
  t.judge = read_template(dir, "judge");
  return t;
}

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates t = load(default_template_dir());
  return t;
}

std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if ((c == '{' || c == '}') && i + 1 < tmpl.size() && tmpl[i + 1] == c) {
      out += c;
      ++i;
      continue;
    }
    if (c == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && (std::islower(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_')) ++j;
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        const std::string name = tmpl.substr(i + 1, j - i - 1);
        auto it = slots.find(name);
        if (it == slots.end()) throw FormatError("template slot {" + name + "} has no value");
        out += it->second;
        i = j;
        continue;
      }
    }
    out += c;
  }
  return out;
}

}  // namespace prism::dqa
