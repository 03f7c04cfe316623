#include "prism/core/types.hpp"

#include "prism/core/errors.hpp"

namespace prism {

Goal::Goal(std::string text) : text_(std::move(text)) {
  if (text_.empty()) throw PreconditionError("goal text must be non-empty");
}

const char* to_string(DescriptionKind k) {
  switch (k) {
    case DescriptionKind::initial: return "initial";
    case DescriptionKind::final: return "final";
    case DescriptionKind::goal_aware: return "goal_aware";
    case DescriptionKind::raw: return "raw";
  }
  return "?";
}

Description::Description(std::string text, DescriptionKind kind, std::string source)
    : text_(std::move(text)), kind_(kind), source_(std::move(source)) {
  if (text_.empty()) throw PreconditionError("description text must be non-empty");
}

Description Description::make_final(std::string text, std::string source) {
  return Description(std::move(text), DescriptionKind::final, std::move(source));
}

HistoryWindow::HistoryWindow(std::size_t max_len) : max_len_(max_len) {
  if (max_len_ == 0) throw PreconditionError("history max_len must be positive");
}

HistoryWindow HistoryWindow::push(const Description& d_final, const ActionText& a) const {
  HistoryWindow next = *this;
  next.entries_.push_back(Entry{d_final.text(), a.text});
  while (next.entries_.size() > next.max_len_) next.entries_.pop_front();
  return next;
}

std::string HistoryWindow::render() const {
  std::string out;
  for (const auto& e : entries_) {
    if (!out.empty()) out += '\n';
    out += "Observation: ";
    out += e.description;
    out += "\nAction: ";
    out += e.action;
  }
  return out;
}

HistoryWindow history_push(const HistoryWindow& h, const Description& d, const ActionText& a) {
  return h.push(d, a);
}

std::string render_history(const HistoryWindow& h) { return h.render(); }

void check_trajectory(const Trajectory& t, bool allow_shaping) {
  for (std::size_t i = 0; i < t.transitions.size(); ++i) {
    const auto& tr = t.transitions[i];
    const bool last = i + 1 == t.transitions.size();
    if (tr.done && !last) throw InvariantViolation("done set before the last transition");
    if (last && !tr.done) throw InvariantViolation("last transition is not marked done");
    if (!allow_shaping && tr.reward > 0.0 && !last)
      throw InvariantViolation("positive reward before the terminal transition");
  }
}

Observation Environment::observe_view(const std::string& view) const {
  throw PreconditionError("environment has no view named '" + view + "'");
}

}  // namespace prism
