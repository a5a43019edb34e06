#include "gridagent/env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace gridagent {

namespace {

constexpr std::size_t ci(CellKind k) { return static_cast<std::size_t>(k); }

const std::vector<std::string> kLongHorizonTasks = {"craft_wooden_pickaxe", "craft_furnace",      "craft_stone_pickaxe",
                                                    "smelt_iron_ingot",     "craft_iron_pickaxe", "obtain_diamond"};

const std::map<std::string, Item> kLongHorizonTargets = {
    {"craft_wooden_pickaxe", Item::wooden_pickaxe}, {"craft_furnace", Item::furnace},
    {"craft_stone_pickaxe", Item::stone_pickaxe},   {"smelt_iron_ingot", Item::iron_ingot},
    {"craft_iron_pickaxe", Item::iron_pickaxe},     {"obtain_diamond", Item::diamond},
};

bool deep_kind(CellKind k) { return k == CellKind::stone || k == CellKind::iron_ore || k == CellKind::diamond_ore; }

int deep_start_row(int height, double surface_fraction) {
  const int interior = height - 2;
  return 1 + static_cast<int>(std::lround(interior * surface_fraction));
}

std::array<double, kCellKindCount> default_density() {
  std::array<double, kCellKindCount> d{};
  d[ci(CellKind::tree)] = 0.06;
  d[ci(CellKind::grass)] = 0.06;
  d[ci(CellKind::dirt)] = 0.06;
  d[ci(CellKind::stone)] = 0.30;
  d[ci(CellKind::iron_ore)] = 0.05;
  d[ci(CellKind::diamond_ore)] = 0.03;
  return d;
}

// Counts cells of each kind that touch the air region reachable from `start`.
std::array<int, kCellKindCount> reachable_kinds(const WorldState& s, Pos start) {
  std::vector<char> seen(s.grid.size(), 0), counted(s.grid.size(), 0);
  std::array<int, kCellKindCount> counts{};
  std::deque<Pos> queue{start};
  seen[static_cast<std::size_t>(start.row * s.width + start.col)] = 1;
  while (!queue.empty()) {
    Pos p = queue.front();
    queue.pop_front();
    for (Facing f : {Facing::north, Facing::south, Facing::east, Facing::west}) {
      Pos q = step_toward(p, f);
      if (!s.in_bounds(q.row, q.col)) continue;
      const auto k = static_cast<std::size_t>(q.row * s.width + q.col);
      if (s.passable(q.row, q.col)) {
        if (!seen[k]) {
          seen[k] = 1;
          queue.push_back(q);
        }
      } else if (!counted[k]) {
        counted[k] = 1;
        counts[ci(s.cell(q.row, q.col))]++;
      }
    }
  }
  return counts;
}

std::string zone_name(SpawnZone z) {
  switch (z) {
    case SpawnZone::surface: return "surface";
    case SpawnZone::deep: return "deep";
    case SpawnZone::any: return "any";
  }
  return "surface";
}

std::string kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::atomic: return "atomic";
    case TaskKind::craft: return "craft";
    case TaskKind::long_horizon: return "long_horizon";
  }
  return "atomic";
}

}  // namespace

Pos step_toward(Pos p, Facing f) {
  switch (f) {
    case Facing::north: return {p.row - 1, p.col};
    case Facing::south: return {p.row + 1, p.col};
    case Facing::east: return {p.row, p.col + 1};
    case Facing::west: return {p.row, p.col - 1};
  }
  return p;
}

int action_count(const CraftGraph& graph) { return action::craft_base + graph.recipe_count(); }

ActionId move_action(Facing f) { return action::move_north + static_cast<int>(f); }

ActionId craft_action(int recipe_id) { return action::craft_base + recipe_id; }

std::string action_name(const CraftGraph& graph, ActionId a) {
  switch (a) {
    case action::noop: return "noop";
    case action::move_north: return "move_N";
    case action::move_south: return "move_S";
    case action::move_east: return "move_E";
    case action::move_west: return "move_W";
    case action::mine: return "mine";
    default: break;
  }
  if (a >= action::craft_base && a < action_count(graph)) return "craft_" + graph.recipe(a - action::craft_base).name;
  return "invalid(" + std::to_string(a) + ")";
}

std::vector<std::string> builtin_task_names() {
  std::vector<std::string> names = all_goal_ids();
  names.insert(names.end(), kLongHorizonTasks.begin(), kLongHorizonTasks.end());
  return names;
}

const std::vector<std::string>& long_horizon_task_names() { return kLongHorizonTasks; }

std::string task_for_goal(const std::string& goal_id) {
  goal_spec(goal_id);
  return goal_id;
}

TaskConfig TaskConfig::builtin(const std::string& name, const CraftGraph& graph) {
  TaskConfig t;
  t.name = name;
  t.density = default_density();
  if (is_known_goal(name)) {
    const GoalSpec& g = goal_spec(name);
    t.target = g.item;
    if (g.kind == SubGoalKind::collect) {
      t.kind = TaskKind::atomic;
      const int tier = gather_tier(g.item);
      if (tier > 0) at(t.start_inventory, pickaxe_for_tier(tier)) = 1;
      t.required_cells[*source_cell(g.item)] = 1;
    } else {
      t.kind = TaskKind::craft;
      const Recipe* r = graph.recipe_for(g.item);
      if (!r) throw ConfigError("task " + name + " has no recipe in the graph");
      for (const auto& in : r->inputs) at(t.per_unit_inventory, in.item) += in.count;
      if (r->station) at(t.start_inventory, *r->station) = 1;
      t.unit_target = r->output.count;
    }
    return t;
  }
  auto lh = kLongHorizonTargets.find(name);
  if (lh == kLongHorizonTargets.end()) throw ConfigError("unknown task: " + name);
  t.kind = TaskKind::long_horizon;
  t.target = lh->second;
  t.step_cap = 1024;
  for (const auto& g : plan_subgoals(graph, t.target, t.start_inventory)) {
    if (g.kind == SubGoalKind::collect) t.required_cells[*source_cell(g.item)] = g.count;
  }
  return t;
}

TaskConfig TaskConfig::from_config(const KeyValueConfig& cfg, const CraftGraph& graph) {
  const std::string name = cfg.get_string("task.name", "");
  if (name.empty()) throw ConfigError("task.name is required");
  std::set<std::string> known = {"task.name",          "task.kind",       "task.height",     "task.width",
                                 "task.surface_fraction", "task.spawn",   "task.start_inventory",
                                 "task.per_unit_inventory", "task.target", "task.unit_target", "task.units_min",
                                 "task.units_max",     "task.step_cap",   "task.required"};
  for (int k = 0; k < kCellKindCount; ++k) known.insert("task.density." + std::string(cell_info(static_cast<CellKind>(k)).name));
  for (const auto& key : cfg.keys_with_prefix("task")) {
    if (!known.count(key)) throw ConfigError("unknown config key: " + key);
  }

  TaskConfig t;
  bool builtin_known = false;
  for (const auto& n : builtin_task_names()) builtin_known |= (n == name);
  if (builtin_known) {
    t = builtin(name, graph);
  } else {
    t.name = name;
    t.density = default_density();
    if (!cfg.has("task.target")) throw ConfigError("task " + name + " is not builtin and has no task.target");
  }
  if (cfg.has("task.kind")) {
    const auto k = cfg.raw("task.kind");
    if (k == "atomic") t.kind = TaskKind::atomic;
    else if (k == "craft") t.kind = TaskKind::craft;
    else if (k == "long_horizon") t.kind = TaskKind::long_horizon;
    else throw ConfigError("unknown task.kind: " + k);
  }
  t.height = static_cast<int>(cfg.get_int("task.height", t.height));
  t.width = static_cast<int>(cfg.get_int("task.width", t.width));
  t.surface_fraction = cfg.get_double("task.surface_fraction", t.surface_fraction);
  for (int k = 0; k < kCellKindCount; ++k) {
    const std::string key = "task.density." + std::string(cell_info(static_cast<CellKind>(k)).name);
    t.density[static_cast<std::size_t>(k)] = cfg.get_double(key, t.density[static_cast<std::size_t>(k)]);
  }
  if (cfg.has("task.spawn")) {
    const auto z = cfg.raw("task.spawn");
    if (z == "surface") t.spawn = SpawnZone::surface;
    else if (z == "deep") t.spawn = SpawnZone::deep;
    else if (z == "any") t.spawn = SpawnZone::any;
    else throw ConfigError("unknown task.spawn: " + z);
  }
  if (cfg.has("task.start_inventory")) t.start_inventory = parse_inventory(cfg.raw("task.start_inventory"));
  if (cfg.has("task.per_unit_inventory")) t.per_unit_inventory = parse_inventory(cfg.raw("task.per_unit_inventory"));
  if (cfg.has("task.target")) {
    auto item = parse_item(cfg.raw("task.target"));
    if (!item) throw ConfigError("unknown task.target: " + cfg.raw("task.target"));
    t.target = *item;
  }
  t.unit_target = static_cast<int>(cfg.get_int("task.unit_target", t.unit_target));
  t.units_min = static_cast<int>(cfg.get_int("task.units_min", t.units_min));
  t.units_max = static_cast<int>(cfg.get_int("task.units_max", t.units_max));
  t.step_cap = static_cast<int>(cfg.get_int("task.step_cap", t.step_cap));
  if (cfg.has("task.required")) {
    t.required_cells.clear();
    std::istringstream in(cfg.raw("task.required"));
    std::string part;
    while (std::getline(in, part, ',')) {
      auto colon = part.find(':');
      std::string kind = part.substr(0, colon);
      kind.erase(std::remove(kind.begin(), kind.end(), ' '), kind.end());
      if (kind.empty()) continue;
      int count = colon == std::string::npos ? 1 : std::stoi(part.substr(colon + 1));
      bool found = false;
      for (int k = 0; k < kCellKindCount; ++k) {
        if (cell_info(static_cast<CellKind>(k)).name == kind) {
          t.required_cells[static_cast<CellKind>(k)] = count;
          found = true;
        }
      }
      if (!found) throw ConfigError("unknown cell kind in task.required: " + kind);
    }
  }
  if (t.height < 3 || t.width < 3) throw ConfigError("task grid must be at least 3x3");
  if (t.units_min < 1 || t.units_max < t.units_min) throw ConfigError("task units range invalid");
  if (t.step_cap < 1) throw ConfigError("task.step_cap must be positive");
  return t;
}

KeyValueConfig TaskConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set("task.name", name);
  cfg.set("task.kind", kind_name(kind));
  cfg.set("task.height", std::to_string(height));
  cfg.set("task.width", std::to_string(width));
  std::ostringstream sf;
  sf << surface_fraction;
  cfg.set("task.surface_fraction", sf.str());
  for (int k = 0; k < kCellKindCount; ++k) {
    if (density[static_cast<std::size_t>(k)] == 0.0) continue;
    std::ostringstream v;
    v << density[static_cast<std::size_t>(k)];
    cfg.set("task.density." + std::string(cell_info(static_cast<CellKind>(k)).name), v.str());
  }
  cfg.set("task.spawn", zone_name(spawn));
  cfg.set("task.start_inventory", inventory_to_config(start_inventory));
  cfg.set("task.per_unit_inventory", inventory_to_config(per_unit_inventory));
  cfg.set("task.target", std::string(item_name(target)));
  cfg.set("task.unit_target", std::to_string(unit_target));
  cfg.set("task.units_min", std::to_string(units_min));
  cfg.set("task.units_max", std::to_string(units_max));
  cfg.set("task.step_cap", std::to_string(step_cap));
  std::string req;
  for (const auto& [k, n] : required_cells) {
    if (!req.empty()) req += ", ";
    req += std::string(cell_info(k).name) + ":" + std::to_string(n);
  }
  cfg.set("task.required", req);
  return cfg;
}

WorldState WorldState::empty(int height, int width, Pos agent, Facing facing) {
  WorldState s;
  s.height = height;
  s.width = width;
  s.grid.assign(static_cast<std::size_t>(height * width), CellKind::air);
  s.agent = agent;
  s.facing = facing;
  return s;
}

WorldState generate_world(std::uint64_t seed, const TaskConfig& task) {
  if (task.height < 3 || task.width < 3) throw GenerationError("grid must be at least 3x3");
  const int deep_row = deep_start_row(task.height, task.surface_fraction);
  const int interior_cols = task.width - 2;
  const int surface_cells = std::max(0, deep_row - 1) * interior_cols;
  const int deep_cells = std::max(0, task.height - 1 - deep_row) * interior_cols;
  for (const auto& [kind, count] : task.required_cells) {
    const int capacity = deep_kind(kind) ? deep_cells : surface_cells;
    if (count > capacity) {
      throw GenerationError("grid " + std::to_string(task.height) + "x" + std::to_string(task.width) +
                            " too small for " + std::to_string(count) + " " + std::string(cell_info(kind).name));
    }
  }

  WorldState s;
  s.height = task.height;
  s.width = task.width;
  s.seed = seed;
  s.step_cap = task.step_cap;
  s.rng = make_rng(seed, fnv1a(task.name));
  const int units = task.units_min + static_cast<int>(uniform_index(s.rng, static_cast<std::uint64_t>(task.units_max - task.units_min + 1)));
  s.target_count = units * task.unit_target;
  s.inventory = task.start_inventory;
  for (int i = 0; i < kItemCount; ++i) s.inventory[static_cast<std::size_t>(i)] += units * task.per_unit_inventory[static_cast<std::size_t>(i)];

  const std::array<CellKind, 3> surface_kinds = {CellKind::tree, CellKind::grass, CellKind::dirt};
  const std::array<CellKind, 3> deep_kinds = {CellKind::stone, CellKind::iron_ore, CellKind::diamond_ore};
  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    s.grid.assign(static_cast<std::size_t>(s.height * s.width), CellKind::bedrock);
    for (int r = 1; r < s.height - 1; ++r) {
      const bool deep = r >= deep_row;
      for (int c = 1; c < s.width - 1; ++c) {
        double u = uniform01(s.rng);
        CellKind kind = CellKind::air;
        for (CellKind k : deep ? deep_kinds : surface_kinds) {
          const double d = task.density[ci(k)];
          if (u < d) {
            kind = k;
            break;
          }
          u -= d;
        }
        s.cell(r, c) = kind;
      }
    }
    std::vector<Pos> spawns;
    for (int r = 1; r < s.height - 1; ++r) {
      const bool deep = r >= deep_row;
      if (task.spawn == SpawnZone::surface && deep) continue;
      if (task.spawn == SpawnZone::deep && !deep) continue;
      for (int c = 1; c < s.width - 1; ++c) {
        if (s.cell(r, c) == CellKind::air) spawns.push_back({r, c});
      }
    }
    if (spawns.empty()) continue;
    s.agent = spawns[uniform_index(s.rng, spawns.size())];
    s.facing = static_cast<Facing>(uniform_index(s.rng, 4));
    const auto counts = reachable_kinds(s, s.agent);
    bool ok = true;
    for (const auto& [kind, count] : task.required_cells) ok = ok && counts[ci(kind)] >= count;
    if (ok) return s;
  }
  throw GenerationError("could not generate a world for task " + task.name + " (seed " + std::to_string(seed) +
                        ") satisfying resource requirements");
}

Observation observe(const WorldState& state, const ObsConfig& cfg) {
  Observation obs;
  obs.radius = cfg.radius;
  const int side = cfg.side();
  obs.window.resize(static_cast<std::size_t>(side * side));
  for (int dr = -cfg.radius; dr <= cfg.radius; ++dr) {
    for (int dc = -cfg.radius; dc <= cfg.radius; ++dc) {
      const int r = state.agent.row + dr;
      const int c = state.agent.col + dc;
      const CellKind k = state.in_bounds(r, c) ? state.cell(r, c) : CellKind::bedrock;
      obs.window[static_cast<std::size_t>((dr + cfg.radius) * side + (dc + cfg.radius))] = static_cast<std::uint8_t>(k);
    }
  }
  obs.facing = static_cast<std::uint8_t>(state.facing);
  for (int i = 0; i < kItemCount; ++i) {
    obs.inventory[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(std::clamp(state.inventory[static_cast<std::size_t>(i)], 0, cfg.clip_max));
  }
  obs.held_tool = static_cast<std::uint8_t>(held_tool_tier(state.inventory));
  return obs;
}

bool success(const WorldState& state, const TaskConfig& task) {
  return at(state.inventory, task.target) >= std::max(1, state.target_count);
}

StepResult step(WorldState& state, const TaskConfig& task, const CraftGraph& graph, ActionId a, const ObsConfig& obs_cfg) {
  if (a < 0 || a >= action_count(graph)) throw Error("action id out of range: " + std::to_string(a));
  if (state.tick >= state.step_cap) throw Error("step called on a finished episode");
  StepEvent ev;
  if (a >= action::move_north && a <= action::move_west) {
    const Facing f = static_cast<Facing>(a - action::move_north);
    state.facing = f;
    const Pos dest = step_toward(state.agent, f);
    if (state.passable(dest.row, dest.col)) {
      state.agent = dest;
    } else {
      ev.blocked = true;
    }
  } else if (a == action::mine) {
    const Pos front = step_toward(state.agent, state.facing);
    if (!state.in_bounds(front.row, front.col)) {
      ev.blocked = true;
    } else {
      const CellInfo& info = cell_info(state.cell(front.row, front.col));
      if (!info.yield || info.required_tier > held_tool_tier(state.inventory)) {
        ev.blocked = true;
      } else {
        state.cell(front.row, front.col) = CellKind::air;
        at(state.inventory, *info.yield) += 1;
        ev.obtained = ItemCount{*info.yield, 1};
      }
    }
  } else if (a >= action::craft_base) {
    const Recipe& r = graph.recipe(a - action::craft_base);
    if (recipe_affordable(state.inventory, r)) {
      state.inventory = apply_recipe(state.inventory, r);
      ev.crafted = r.id;
    } else {
      ev.blocked = true;
    }
  }
  state.tick += 1;
  StepResult out;
  out.observation = observe(state, obs_cfg);
  out.event = ev;
  out.done = success(state, task) || state.tick >= state.step_cap;
  return out;
}

std::string render_text(const WorldState& state) {
  std::ostringstream out;
  for (int r = 0; r < state.height; ++r) {
    for (int c = 0; c < state.width; ++c) {
      if (state.agent == Pos{r, c}) {
        constexpr char glyphs[] = {'^', 'v', '>', '<'};
        out << glyphs[static_cast<int>(state.facing)];
      } else {
        out << cell_info(state.cell(r, c)).glyph;
      }
    }
    out << '\n';
  }
  out << "inv: " << format_inventory(state.inventory) << '\n';
  return out.str();
}

Env::Env(const CraftGraph& graph, ObsConfig obs) : graph_(&graph), obs_(obs) {}

Observation Env::reset(std::uint64_t seed, const TaskConfig& task) {
  task_ = task;
  state_ = generate_world(seed, task);
  done_ = false;
  return observation();
}

StepResult Env::step(ActionId a) {
  StepResult r = gridagent::step(state_, task_, *graph_, a, obs_);
  done_ = r.done;
  return r;
}

}  // namespace gridagent
