#include "prism/env/household.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <regex>
#include <set>

#include "prism/core/errors.hpp"
#include "prism/util/hash.hpp"
#include "prism/util/text.hpp"

namespace prism::household {

namespace {

struct ReceptacleDef {
  const char* name;
  ReceptacleKind kind;
  bool openable;
  int max_instances;
};

// Canonical order doubles as the expert's search order.
constexpr std::array<ReceptacleDef, 12> kReceptacles{{
    {"countertop", ReceptacleKind::surface, false, 2},
    {"diningtable", ReceptacleKind::surface, false, 1},
    {"sidetable", ReceptacleKind::surface, false, 1},
    {"shelf", ReceptacleKind::surface, false, 2},
    {"desk", ReceptacleKind::surface, false, 1},
    {"cabinet", ReceptacleKind::container, true, 3},
    {"drawer", ReceptacleKind::container, true, 2},
    {"fridge", ReceptacleKind::fridge, true, 1},
    {"microwave", ReceptacleKind::microwave, true, 1},
    {"sinkbasin", ReceptacleKind::sink, false, 1},
    {"garbagecan", ReceptacleKind::garbage, false, 1},
    {"desklamp", ReceptacleKind::desklamp, false, 1},
}};

const std::vector<std::string> kPortable = {
    "apple", "egg",   "potato",   "tomato",    "bread",     "lettuce", "mug",         "cup",
    "plate", "bowl",  "knife",    "spoon",     "fork",      "book",    "cd",          "pen",
    "keychain", "cellphone", "candle", "spraybottle", "toiletpaper", "cloth", "soapbar"};

const std::vector<std::string> kTargets = {"countertop", "diningtable", "sidetable", "shelf",
                                           "desk",       "cabinet",     "drawer"};

const std::vector<std::string>& compatible_objects(Family f) {
  static const std::vector<std::string> clean = {"apple", "tomato", "potato", "lettuce", "mug", "cup",
                                                 "plate", "bowl",   "knife",  "spoon",   "fork", "cloth"};
  static const std::vector<std::string> heat = {"apple", "egg", "potato", "tomato", "bread", "mug", "cup", "plate"};
  static const std::vector<std::string> cool = {"apple", "egg",   "potato", "tomato", "lettuce",
                                                "bread", "mug",   "cup",    "plate",  "bowl"};
  static const std::vector<std::string> look = {"book", "cd", "pen", "keychain", "cellphone", "candle", "mug"};
  switch (f) {
    case Family::clean: return clean;
    case Family::heat: return heat;
    case Family::cool: return cool;
    case Family::look: return look;
    default: return kPortable;
  }
}

int canonical_rank(const std::string& name) {
  for (std::size_t i = 0; i < kReceptacles.size(); ++i)
    if (name == kReceptacles[i].name) return static_cast<int>(i);
  return static_cast<int>(kReceptacles.size());
}

const ReceptacleDef& def_of(const std::string& name) {
  for (const auto& d : kReceptacles)
    if (name == d.name) return d;
  throw PreconditionError("unknown receptacle name: " + name);
}

Receptacle make_receptacle(const std::string& name, int id) {
  const auto& d = def_of(name);
  Receptacle r;
  r.name = name;
  r.id = id;
  r.kind = d.kind;
  r.openable = d.openable;
  r.open = !d.openable;
  return r;
}

bool is_storage(ReceptacleKind k) {
  return k == ReceptacleKind::surface || k == ReceptacleKind::container || k == ReceptacleKind::fridge;
}

const char* preposition(const Receptacle& r) {
  return r.kind == ReceptacleKind::surface ? "On" : "In";
}

std::string lower_prep(const Receptacle& r) {
  return r.kind == ReceptacleKind::surface ? "on" : "in";
}

bool visible_inside(const Receptacle& r) { return !r.openable || r.open; }

ReceptacleKind appliance_for(Family f) {
  switch (f) {
    case Family::clean: return ReceptacleKind::sink;
    case Family::heat: return ReceptacleKind::microwave;
    case Family::cool: return ReceptacleKind::fridge;
    case Family::look: return ReceptacleKind::desklamp;
    default: return ReceptacleKind::surface;
  }
}

bool needs_processing(Family f) { return f == Family::clean || f == Family::heat || f == Family::cool; }

bool processed(const Object& o, Family f) {
  switch (f) {
    case Family::clean: return o.clean;
    case Family::heat: return o.hot;
    case Family::cool: return o.cold;
    default: return true;
  }
}

int find_kind(const SceneState& s, ReceptacleKind k) {
  for (std::size_t i = 0; i < s.receptacles.size(); ++i)
    if (s.receptacles[i].kind == k) return static_cast<int>(i);
  return -1;
}

int find_named(const SceneState& s, const std::string& name) {
  for (std::size_t i = 0; i < s.receptacles.size(); ++i)
    if (s.receptacles[i].name == name) return static_cast<int>(i);
  return -1;
}

std::string state_suffix(const Object& o) {
  std::vector<std::string> flags;
  if (o.clean) flags.emplace_back("clean");
  if (o.hot) flags.emplace_back("hot");
  if (o.cold) flags.emplace_back("cold");
  if (o.occluded) flags.emplace_back("occluded");
  if (flags.empty()) return "";
  return " (" + util::join(flags, ", ") + ")";
}

}  // namespace

const char* to_string(Family f) {
  switch (f) {
    case Family::pick: return "pick";
    case Family::look: return "look";
    case Family::clean: return "clean";
    case Family::heat: return "heat";
    case Family::cool: return "cool";
    case Family::pick2: return "pick2";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  for (Family f : all_families())
    if (s == to_string(f)) return f;
  throw ConfigError("unknown task family '" + s + "' (expected pick|look|clean|heat|cool|pick2)");
}

const std::vector<Family>& all_families() {
  static const std::vector<Family> v = {Family::pick, Family::look, Family::clean,
                                        Family::heat, Family::cool, Family::pick2};
  return v;
}

int SceneState::find_receptacle(const std::string& label) const {
  for (std::size_t i = 0; i < receptacles.size(); ++i)
    if (receptacles[i].label() == label) return static_cast<int>(i);
  return -1;
}

int SceneState::find_object(const std::string& label) const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].label() == label) return static_cast<int>(i);
  return -1;
}

bool SceneState::operator==(const SceneState& o) const {
  return to_json(*this) == to_json(o);
}

std::string goal_text(const TaskSpec& t) {
  switch (t.family) {
    case Family::pick: return "put some " + t.object_name + " in " + t.target_receptacle + ".";
    case Family::pick2: return "put two " + t.object_name + " in " + t.target_receptacle + ".";
    case Family::clean: return "clean some " + t.object_name + " and put it in " + t.target_receptacle + ".";
    case Family::heat: return "heat some " + t.object_name + " and put it in " + t.target_receptacle + ".";
    case Family::cool: return "cool some " + t.object_name + " and put it in " + t.target_receptacle + ".";
    case Family::look: return "look at " + t.object_name + " under the desklamp.";
  }
  return "";
}

TaskSpec sample_task(Family family, std::uint64_t seed) {
  util::Rng rng(util::derive_seed(seed, 0x7a5c));
  TaskSpec t;
  t.family = family;
  t.object_name = rng.pick(compatible_objects(family));
  t.target_receptacle = family == Family::look ? "desklamp" : rng.pick(kTargets);
  t.count = family == Family::pick2 ? 2 : 1;
  return t;
}

SceneState generate_scene(std::uint64_t seed, const TaskSpec& task, Difficulty difficulty) {
  util::Rng rng(util::derive_seed(seed, 0x5ce9e));
  const int extra_storage = difficulty == Difficulty::easy ? 2 : difficulty == Difficulty::medium ? 3 : 4;
  const int distractors = difficulty == Difficulty::easy ? 2 : difficulty == Difficulty::medium ? 3 : 4;

  std::vector<std::pair<std::string, int>> pool;
  for (const auto& d : kReceptacles) {
    if (d.kind != ReceptacleKind::surface && d.kind != ReceptacleKind::container) continue;
    if (task.family != Family::look && task.target_receptacle == d.name) continue;
    for (int id = 1; id <= d.max_instances; ++id) pool.emplace_back(d.name, id);
  }
  rng.shuffle(pool);
  pool.resize(static_cast<std::size_t>(extra_storage));
  if (task.family != Family::look) pool.emplace_back(task.target_receptacle, 1);
  for (const char* fixed : {"fridge", "microwave", "sinkbasin", "garbagecan"}) pool.emplace_back(fixed, 1);
  if (task.family == Family::look) pool.emplace_back("desklamp", 1);
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    return std::pair(canonical_rank(a.first), a.second) < std::pair(canonical_rank(b.first), b.second);
  });

  SceneState s;
  for (const auto& [name, id] : pool) s.receptacles.push_back(make_receptacle(name, id));

  std::vector<int> search;
  std::vector<int> storage;
  for (std::size_t i = 0; i < s.receptacles.size(); ++i) {
    if (!is_storage(s.receptacles[i].kind)) continue;
    storage.push_back(static_cast<int>(i));
    if (s.receptacles[i].name != task.target_receptacle) search.push_back(static_cast<int>(i));
  }

  for (int k = 1; k <= task.count; ++k) {
    Object o;
    o.name = task.object_name;
    o.id = k;
    o.location = rng.pick(search);
    s.objects.push_back(o);
  }
  std::vector<std::string> names;
  for (const auto& n : kPortable)
    if (n != task.object_name) names.push_back(n);
  rng.shuffle(names);
  for (int k = 0; k < distractors; ++k) {
    Object o;
    o.name = names[static_cast<std::size_t>(k)];
    o.id = 1;
    o.location = rng.pick(storage);
    s.objects.push_back(o);
  }
  // an object can hide behind another one sharing its receptacle
  for (auto& o : s.objects) {
    const int shared = static_cast<int>(std::count_if(s.objects.begin(), s.objects.end(),
                                                      [&](const Object& p) { return p.location == o.location; }));
    if (shared > 1 && rng.bernoulli(0.25)) o.occluded = true;
  }
  // never let every object at a receptacle be occluded
  for (const int r : storage) {
    bool any_visible = false;
    Object* first = nullptr;
    for (auto& o : s.objects) {
      if (o.location != r) continue;
      if (!first) first = &o;
      any_visible = any_visible || !o.occluded;
    }
    if (first && !any_visible) first->occluded = false;
  }
  return s;
}

std::string HouseholdAction::text() const {
  switch (verb) {
    case Verb::go_to: return "go to " + receptacle;
    case Verb::open: return "open " + receptacle;
    case Verb::close: return "close " + receptacle;
    case Verb::take: return "take " + object + " from " + receptacle;
    case Verb::put: return "put " + object + " in/on " + receptacle;
    case Verb::clean: return "clean " + object + " with " + receptacle;
    case Verb::heat: return "heat " + object + " with " + receptacle;
    case Verb::cool: return "cool " + object + " with " + receptacle;
    case Verb::use: return "use " + receptacle;
    case Verb::examine: return "examine " + object;
  }
  return "";
}

HouseholdAction parse_action(const std::string& raw) {
  static const std::regex kLabel("[a-z]+ [0-9]+");
  static const std::regex go("go to ([a-z]+ [0-9]+)");
  static const std::regex open("open ([a-z]+ [0-9]+)");
  static const std::regex close("close ([a-z]+ [0-9]+)");
  static const std::regex take("take ([a-z]+ [0-9]+) from ([a-z]+ [0-9]+)");
  static const std::regex put("put ([a-z]+ [0-9]+) (?:in/on|in|on) ([a-z]+ [0-9]+)");
  static const std::regex with("(clean|heat|cool) ([a-z]+ [0-9]+) with ([a-z]+ [0-9]+)");
  static const std::regex use("use ([a-z]+ [0-9]+)");
  static const std::regex examine("examine ([a-z]+ [0-9]+)");
  const std::string text = util::trim(util::to_lower(raw));
  std::smatch m;
  HouseholdAction a;
  if (std::regex_match(text, m, go)) {
    a.verb = Verb::go_to;
    a.receptacle = m[1];
  } else if (std::regex_match(text, m, open)) {
    a.verb = Verb::open;
    a.receptacle = m[1];
  } else if (std::regex_match(text, m, close)) {
    a.verb = Verb::close;
    a.receptacle = m[1];
  } else if (std::regex_match(text, m, take)) {
    a.verb = Verb::take;
    a.object = m[1];
    a.receptacle = m[2];
  } else if (std::regex_match(text, m, put)) {
    a.verb = Verb::put;
    a.object = m[1];
    a.receptacle = m[2];
  } else if (std::regex_match(text, m, with)) {
    a.verb = m[1] == "clean" ? Verb::clean : m[1] == "heat" ? Verb::heat : Verb::cool;
    a.object = m[2];
    a.receptacle = m[3];
  } else if (std::regex_match(text, m, use)) {
    a.verb = Verb::use;
    a.receptacle = m[1];
  } else if (std::regex_match(text, m, examine)) {
    a.verb = Verb::examine;
    a.object = m[1];
  } else {
    throw FormatError("unparseable household action: '" + raw + "'");
  }
  return a;
}

bool is_success(const SceneState& s, const TaskSpec& task) {
  if (task.family == Family::look) return s.examined_under_lamp;
  int delivered = 0;
  for (const auto& o : s.objects) {
    if (o.name != task.object_name || o.location == kCarried) continue;
    if (s.carried && s.objects[static_cast<std::size_t>(*s.carried)].label() == o.label()) continue;
    if (s.receptacles[static_cast<std::size_t>(o.location)].name != task.target_receptacle) continue;
    if (!processed(o, task.family)) continue;
    ++delivered;
  }
  return delivered >= task.count;
}

StepOutcome step(const SceneState& state, const TaskSpec& task, const HouseholdAction& a, const StepOptions& opts) {
  StepOutcome out{state, 0.0, false, false};
  SceneState& s = out.state;
  const int here = s.agent_at;
  const int r = a.receptacle.empty() ? -1 : s.find_receptacle(a.receptacle);
  const int o = a.object.empty() ? -1 : s.find_object(a.object);
  Receptacle* rec = r >= 0 ? &s.receptacles[static_cast<std::size_t>(r)] : nullptr;
  Object* obj = o >= 0 ? &s.objects[static_cast<std::size_t>(o)] : nullptr;
  const bool holding_obj = obj && s.carried && *s.carried == o;
  const bool at_rec = rec && here == r;

  switch (a.verb) {
    case Verb::go_to:
      if (rec && here != r) {
        s.agent_at = r;
        out.changed = true;
      }
      break;
    case Verb::open:
      if (at_rec && rec->openable && !rec->open) {
        rec->open = true;
        out.changed = true;
      }
      break;
    case Verb::close:
      if (at_rec && rec->openable && rec->open) {
        rec->open = false;
        out.changed = true;
      }
      break;
    case Verb::take:
      if (at_rec && obj && !s.carried && obj->location == r && visible_inside(*rec)) {
        obj->location = kCarried;
        obj->occluded = false;
        s.carried = o;
        out.changed = true;
      }
      break;
    case Verb::put:
      if (at_rec && holding_obj && rec->kind != ReceptacleKind::desklamp && visible_inside(*rec)) {
        obj->location = r;
        s.carried.reset();
        out.changed = true;
      }
      break;
    case Verb::clean:
      if (at_rec && holding_obj && rec->kind == ReceptacleKind::sink) {
        obj->clean = true;
        out.changed = true;
      }
      break;
    case Verb::heat:
      if (at_rec && holding_obj && rec->kind == ReceptacleKind::microwave) {
        obj->hot = true;
        obj->cold = false;
        out.changed = true;
      }
      break;
    case Verb::cool:
      if (at_rec && holding_obj && rec->kind == ReceptacleKind::fridge) {
        obj->cold = true;
        obj->hot = false;
        out.changed = true;
      }
      break;
    case Verb::use:
      if (at_rec && rec->kind == ReceptacleKind::desklamp && !rec->lamp_on) {
        rec->lamp_on = true;
        out.changed = true;
      }
      break;
    case Verb::examine:
      if (holding_obj && here >= 0) {
        const auto& lamp = s.receptacles[static_cast<std::size_t>(here)];
        if (lamp.kind == ReceptacleKind::desklamp && lamp.lamp_on && obj->name == task.object_name) {
          s.examined_under_lamp = true;
          out.changed = true;
        }
      }
      break;
  }

  s.steps = state.steps + 1;
  if (is_success(s, task)) {
    out.done = true;
    out.reward = 1.0;
  } else if (s.steps >= opts.step_cap) {
    out.done = true;
  }
  if (opts.subgoal_shaping && !out.done && out.changed) {
    const bool took = s.carried && s.objects[static_cast<std::size_t>(*s.carried)].name == task.object_name &&
                      !(state.carried && *state.carried == *s.carried);
    const bool proc = obj && needs_processing(task.family) && processed(*obj, task.family) &&
                      !processed(state.objects[static_cast<std::size_t>(o)], task.family);
    if (took || proc) out.reward += opts.shaping_bonus;
  }
  return out;
}

std::string render_symbolic(const SceneState& s) {
  std::string out;
  if (s.agent_at == kMiddleOfRoom) {
    out = "You are in the middle of a room. Looking around, you see ";
    std::vector<std::string> items;
    for (const auto& r : s.receptacles) items.push_back("a " + r.label());
    out += util::join(items, ", ") + ".";
  } else {
    const auto& r = s.receptacles[static_cast<std::size_t>(s.agent_at)];
    out = "You are at the " + r.label() + ".";
    if (r.openable) out += " The " + r.label() + (r.open ? " is open." : " is closed.");
    if (r.kind == ReceptacleKind::desklamp) {
      out += " The " + r.label() + (r.lamp_on ? " is on." : " is off.");
    } else {
      std::vector<std::string> items;
      for (const auto& o : s.objects)
        if (o.location == s.agent_at) items.push_back("a " + o.label() + state_suffix(o));
      out += std::string(" ") + preposition(r) + " the " + r.label() + ", you see " +
             (items.empty() ? std::string("nothing") : util::join(items, ", ")) + ".";
    }
  }
  if (s.carried) {
    const auto& o = s.objects[static_cast<std::size_t>(*s.carried)];
    out += " You are carrying a " + o.label() + state_suffix(o) + ".";
  }
  return out;
}

std::vector<ActionText> candidate_actions(const SceneState& s) {
  std::vector<ActionText> out;
  for (std::size_t i = 0; i < s.receptacles.size(); ++i)
    if (static_cast<int>(i) != s.agent_at) out.push_back({"go to " + s.receptacles[i].label()});
  if (s.agent_at == kMiddleOfRoom) return out;
  const auto& here = s.receptacles[static_cast<std::size_t>(s.agent_at)];
  if (here.openable) out.push_back({(here.open ? "close " : "open ") + here.label()});
  if (!s.carried) {
    if (here.kind != ReceptacleKind::desklamp)
      for (const auto& o : s.objects) out.push_back({"take " + o.label() + " from " + here.label()});
  } else {
    const auto& held = s.objects[static_cast<std::size_t>(*s.carried)];
    if (here.kind != ReceptacleKind::desklamp) out.push_back({"put " + held.label() + " in/on " + here.label()});
    if (here.kind == ReceptacleKind::sink) out.push_back({"clean " + held.label() + " with " + here.label()});
    if (here.kind == ReceptacleKind::microwave) out.push_back({"heat " + held.label() + " with " + here.label()});
    if (here.kind == ReceptacleKind::fridge) out.push_back({"cool " + held.label() + " with " + here.label()});
    out.push_back({"examine " + held.label()});
  }
  if (here.kind == ReceptacleKind::desklamp) out.push_back({"use " + here.label()});
  return out;
}

std::vector<int> search_order(const SceneState& s, const TaskSpec& task) {
  std::vector<int> out;
  for (std::size_t i = 0; i < s.receptacles.size(); ++i) {
    const auto& r = s.receptacles[i];
    if (is_storage(r.kind) && r.name != task.target_receptacle) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

// Next search receptacle after `at` in canonical order, cycling. Memoryless,
// so a policy that only sees its current location can imitate it.
int successor(const SceneState& s, const TaskSpec& task, int at) {
  const auto order = search_order(s, task);
  if (order.empty()) throw PreconditionError("scene has no searchable receptacle");
  if (at == kMiddleOfRoom) return order.front();
  for (int idx : order)
    if (idx > at) return idx;
  return order.front();
}

HouseholdAction go(const SceneState& s, int idx) {
  return {Verb::go_to, "", s.receptacles[static_cast<std::size_t>(idx)].label()};
}

}  // namespace

HouseholdAction expert_action(const SceneState& s, const TaskSpec& task) {
  if (is_success(s, task)) throw PreconditionError("task already solved");
  const int target = task.family == Family::look ? -1 : find_named(s, task.target_receptacle);
  const int appliance = find_kind(s, appliance_for(task.family));
  if (task.family != Family::look && target < 0) throw PreconditionError("target receptacle missing");
  if ((needs_processing(task.family) || task.family == Family::look) && appliance < 0)
    throw PreconditionError("appliance missing");

  const auto pending = [&](const Object& o) {
    if (o.name != task.object_name) return false;
    if (task.family == Family::look) return true;
    if (o.location == kCarried) return true;
    return s.receptacles[static_cast<std::size_t>(o.location)].name != task.target_receptacle ||
           !processed(o, task.family);
  };
  if (std::none_of(s.objects.begin(), s.objects.end(), pending))
    throw PreconditionError("no task object left to deliver");

  if (s.carried) {
    const auto& held = s.objects[static_cast<std::size_t>(*s.carried)];
    if (held.name != task.object_name) {
      if (s.agent_at >= 0) return {Verb::put, held.label(), s.receptacles[static_cast<std::size_t>(s.agent_at)].label()};
      return go(s, successor(s, task, s.agent_at));
    }
    if (task.family == Family::look) {
      const auto& lamp = s.receptacles[static_cast<std::size_t>(appliance)];
      if (s.agent_at != appliance) return go(s, appliance);
      if (!lamp.lamp_on) return {Verb::use, "", lamp.label()};
      return {Verb::examine, held.label(), ""};
    }
    if (needs_processing(task.family) && !processed(held, task.family)) {
      if (s.agent_at != appliance) return go(s, appliance);
      const auto& app = s.receptacles[static_cast<std::size_t>(appliance)];
      const Verb v = task.family == Family::clean ? Verb::clean : task.family == Family::heat ? Verb::heat : Verb::cool;
      return {v, held.label(), app.label()};
    }
    const auto& t = s.receptacles[static_cast<std::size_t>(target)];
    if (s.agent_at != target) return go(s, target);
    if (t.openable && !t.open) return {Verb::open, "", t.label()};
    return {Verb::put, held.label(), t.label()};
  }

  if (s.agent_at >= 0) {
    const auto& here = s.receptacles[static_cast<std::size_t>(s.agent_at)];
    const bool searchable = is_storage(here.kind) && here.name != task.target_receptacle;
    if (searchable && here.openable && !here.open) return {Verb::open, "", here.label()};
    if (searchable) {
      for (const auto& o : s.objects)
        if (o.location == s.agent_at && pending(o)) return {Verb::take, o.label(), here.label()};
    }
  }
  return go(s, successor(s, task, s.agent_at));
}

ExpertBot::ExpertBot(const TaskSpec& task, double failure_rate, std::uint64_t seed)
    : task_(task), rng_(util::derive_seed(seed, 0xb07)) {
  abandons_ = rng_.bernoulli(failure_rate);
}

HouseholdAction ExpertBot::act(const SceneState& state) {
  if (abandons_ && abandon_at_ < 0) {
    // length of the remaining expert solution, by dry run
    SceneState s = state;
    int len = 0;
    const StepOptions unbounded{1 << 20, false, 0.0};
    while (!is_success(s, task_) && len < 200) {
      s = step(s, task_, expert_action(s, task_), unbounded).state;
      ++len;
    }
    abandon_at_ = state.steps + rng_.range(0, std::max(0, len - 1));
  }
  if (abandons_ && state.steps >= abandon_at_) {
    int idx = static_cast<int>(rng_.index(state.receptacles.size()));
    if (idx == state.agent_at) idx = (idx + 1) % static_cast<int>(state.receptacles.size());
    return go(state, idx);
  }
  return expert_action(state, task_);
}

const backends::Vocabulary& vocabulary() {
  static const backends::Vocabulary v = [] {
    backends::Vocabulary m;
    for (const auto& n : kPortable) m[n] = n;
    for (const auto& d : kReceptacles) m[d.name] = d.name;
    const std::vector<std::pair<std::string, std::string>> aliases = {
        {"dining table", "diningtable"}, {"side table", "sidetable"}, {"counter top", "countertop"},
        {"counter", "countertop"},       {"sink", "sinkbasin"},        {"sink basin", "sinkbasin"},
        {"garbage can", "garbagecan"},   {"trash can", "garbagecan"},  {"desk lamp", "desklamp"},
        {"lamp", "desklamp"},            {"cell phone", "cellphone"},  {"phone", "cellphone"},
        {"spray bottle", "spraybottle"}, {"toilet paper", "toiletpaper"}, {"key chain", "keychain"},
        {"keys", "keychain"},            {"soap bar", "soapbar"},      {"soap", "soapbar"},
        {"refrigerator", "fridge"}};
    for (const auto& [alias, name] : aliases) m[alias] = name;
    return m;
  }();
  return v;
}

std::vector<std::string> object_names() { return kPortable; }

std::vector<std::string> receptacle_names() {
  std::vector<std::string> out;
  for (const auto& d : kReceptacles) out.emplace_back(d.name);
  return out;
}

backends::LocalScene HouseholdView::local_scene() const {
  const SceneState& s = state_;
  backends::LocalScene ls;
  if (s.agent_at == kMiddleOfRoom) {
    ls.preamble = "You are in the middle of a room.";
    ls.list_intro = "Looking around, you see";
    ls.here = "in the room";
    for (const auto& r : s.receptacles) {
      backends::SceneEntity e{r.name, r.label(), "in the room", false, true};
      ls.listed.push_back(e);
      ls.answerable.push_back(e);
    }
  } else {
    const auto& r = s.receptacles[static_cast<std::size_t>(s.agent_at)];
    ls.preamble = "You are at the " + r.label() + ".";
    if (r.openable) ls.preamble += " The " + r.label() + (r.open ? " is open." : " is closed.");
    if (r.kind == ReceptacleKind::desklamp) ls.preamble += " The " + r.label() + (r.lamp_on ? " is on." : " is off.");
    ls.here = lower_prep(r) + " the " + r.label();
    ls.answerable.push_back({r.name, r.label(), "in front of you", false, true});
    if (r.kind != ReceptacleKind::desklamp && visible_inside(r)) {
      ls.list_intro = std::string(preposition(r)) + " the " + r.label() + ", you see";
      for (const auto& o : s.objects) {
        if (o.location != s.agent_at) continue;
        backends::SceneEntity e{o.name, o.label(), ls.here, o.occluded, false};
        ls.listed.push_back(e);
        ls.answerable.push_back(e);
      }
    }
  }
  if (s.carried) {
    const auto& o = s.objects[static_cast<std::size_t>(*s.carried)];
    ls.epilogue = "You are holding a " + o.label() + ".";
    ls.answerable.push_back({o.name, o.label(), "in your hand", false, true});
  }
  return ls;
}

std::string HouseholdView::fabricated_label(const std::string& name) const {
  for (const auto& o : state_.objects)
    if (o.name == name && o.location != state_.agent_at && o.location != kCarried) return o.label();
  for (const auto& r : state_.receptacles)
    if (r.name == name) return r.label();
  return name + " 1";
}

HouseholdEnv::HouseholdEnv(TaskSpec task, EnvConfig cfg)
    : task_(std::move(task)), cfg_(cfg), goal_(goal_text(task_)) {}

Observation HouseholdEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  state_ = generate_scene(seed, task_, cfg_.difficulty);
  done_ = false;
  success_ = false;
  return observe();
}

Observation HouseholdEnv::observe() const {
  auto view = std::make_shared<const HouseholdView>(state_);
  Observation obs;
  obs.episode_id = std::string("household-") + to_string(task_.family) + "-" + std::to_string(seed_);
  obs.step = state_.steps;
  obs.symbolic = view;
  obs.raw_view = view;
  return obs;
}

StepResult HouseholdEnv::step(const ActionText& action) {
  if (done_) throw PreconditionError("step() after episode end");
  const auto parsed = parse_action(action.text);
  auto out = household::step(state_, task_, parsed, cfg_.step);
  state_ = std::move(out.state);
  done_ = out.done;
  success_ = is_success(state_, task_);
  return StepResult{observe(), out.reward, out.done};
}

std::vector<ActionText> HouseholdEnv::admissible_actions() const { return candidate_actions(state_); }

std::vector<std::string> HouseholdEnv::vocabulary() const {
  std::set<std::string> names;
  for (const auto& [alias, name] : household::vocabulary()) names.insert(name);
  return {names.begin(), names.end()};
}

nlohmann::json to_json(const SceneState& s) {
  nlohmann::json j;
  for (const auto& r : s.receptacles)
    j["receptacles"].push_back({{"name", r.name}, {"id", r.id}, {"open", r.open}, {"lamp_on", r.lamp_on}});
  j["objects"] = nlohmann::json::array();
  for (const auto& o : s.objects)
    j["objects"].push_back({{"name", o.name},
                            {"id", o.id},
                            {"location", o.location},
                            {"clean", o.clean},
                            {"hot", o.hot},
                            {"cold", o.cold},
                            {"occluded", o.occluded}});
  j["agent_at"] = s.agent_at;
  j["carried"] = s.carried ? nlohmann::json(*s.carried) : nlohmann::json(nullptr);
  j["examined_under_lamp"] = s.examined_under_lamp;
  j["steps"] = s.steps;
  return j;
}

nlohmann::json to_json(const TaskSpec& t) {
  return {{"family", to_string(t.family)},
          {"object", t.object_name},
          {"target", t.target_receptacle},
          {"count", t.count}};
}

SceneState scene_from_json(const nlohmann::json& j) {
  SceneState s;
  for (const auto& r : j.at("receptacles")) {
    auto rec = make_receptacle(r.at("name").get<std::string>(), r.at("id").get<int>());
    rec.open = r.value("open", rec.open);
    rec.lamp_on = r.value("lamp_on", false);
    s.receptacles.push_back(rec);
  }
  for (const auto& o : j.at("objects")) {
    Object ob;
    ob.name = o.at("name").get<std::string>();
    ob.id = o.at("id").get<int>();
    ob.location = o.at("location").get<int>();
    ob.clean = o.value("clean", false);
    ob.hot = o.value("hot", false);
    ob.cold = o.value("cold", false);
    ob.occluded = o.value("occluded", false);
    s.objects.push_back(ob);
  }
  s.agent_at = j.value("agent_at", kMiddleOfRoom);
  if (j.contains("carried") && !j["carried"].is_null()) s.carried = j["carried"].get<int>();
  s.examined_under_lamp = j.value("examined_under_lamp", false);
  s.steps = j.value("steps", 0);
  return s;
}

TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec t;
  t.family = family_from_string(j.at("family").get<std::string>());
  t.object_name = j.at("object").get<std::string>();
  t.target_receptacle = j.value("target", std::string(t.family == Family::look ? "desklamp" : ""));
  t.count = j.value("count", t.family == Family::pick2 ? 2 : 1);
  return t;
}

}  // namespace prism::household
