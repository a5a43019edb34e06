#include "gridagent/craft_graph.hpp"

#include <algorithm>
#include <functional>

namespace gridagent {

namespace {

constexpr std::size_t idx(Item item) { return static_cast<std::size_t>(item); }

std::vector<Item> dependencies(const std::vector<Recipe>& recipes, Item item, const Recipe* recipe) {
  std::vector<Item> deps;
  if (recipe) {
    for (const auto& in : recipe->inputs) deps.push_back(in.item);
    if (recipe->station) deps.push_back(*recipe->station);
  } else {
    int tier = gather_tier(item);
    if (tier > 0 && tier != kUnminable) deps.push_back(pickaxe_for_tier(tier));
  }
  (void)recipes;
  return deps;
}

ItemCount parse_single(const std::string& text, const std::string& where) {
  Inventory inv = parse_inventory(text);
  std::optional<ItemCount> found;
  for (int i = 0; i < kItemCount; ++i) {
    if (inv[static_cast<std::size_t>(i)] == 0) continue;
    if (found) throw ConfigError(where + ": expected a single item, got '" + text + "'");
    found = ItemCount{static_cast<Item>(i), inv[static_cast<std::size_t>(i)]};
  }
  if (!found) throw ConfigError(where + ": missing item");
  return *found;
}

}  // namespace

std::vector<Recipe> default_recipes() {
  using I = Item;
  return {
      {0, "planks", {I::plank, 4}, {{I::log, 1}}, std::nullopt},
      {1, "sticks", {I::stick, 4}, {{I::plank, 2}}, std::nullopt},
      {2, "crafting_table", {I::crafting_table, 1}, {{I::plank, 4}}, std::nullopt},
      {3, "wooden_pickaxe", {I::wooden_pickaxe, 1}, {{I::plank, 3}, {I::stick, 2}}, I::crafting_table},
      {4, "furnace", {I::furnace, 1}, {{I::stone, 8}}, I::crafting_table},
      {5, "stone_pickaxe", {I::stone_pickaxe, 1}, {{I::stone, 3}, {I::stick, 2}}, I::crafting_table},
      {6, "iron_ingot", {I::iron_ingot, 1}, {{I::iron_ore, 1}, {I::plank, 1}}, I::furnace},
      {7, "iron_pickaxe", {I::iron_pickaxe, 1}, {{I::iron_ingot, 3}, {I::stick, 2}}, I::crafting_table},
  };
}

GraphReport validate_graph(const std::vector<Recipe>& recipes) {
  std::array<const Recipe*, kItemCount> producer{};
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    const Recipe& r = recipes[i];
    if (r.id != static_cast<int>(i)) {
      throw GraphError("recipe '" + r.name + "' has id " + std::to_string(r.id) + ", expected dense id " +
                       std::to_string(i));
    }
    if (r.output.count < 1) throw GraphError("recipe '" + r.name + "' has non-positive output count");
    for (const auto& in : r.inputs) {
      if (in.count < 1) throw GraphError("recipe '" + r.name + "' has non-positive input count");
      if (in.item == r.output.item) {
        throw GraphError("cycle: recipe '" + r.name + "' consumes its own output " +
                         std::string(item_name(in.item)));
      }
    }
    if (r.station && *r.station == r.output.item) {
      throw GraphError("cycle: recipe '" + r.name + "' requires its own output as station");
    }
    if (producer[idx(r.output.item)]) {
      throw GraphError("recipe '" + r.name + "' duplicates the output of '" + producer[idx(r.output.item)]->name + "'");
    }
    producer[idx(r.output.item)] = &r;
  }
  for (const auto& r : recipes) {
    if (r.station && !producer[idx(*r.station)] && !source_cell(*r.station)) {
      throw GraphError("recipe '" + r.name + "' needs station " + std::string(item_name(*r.station)) +
                       " which is neither craftable nor collectible");
    }
  }

  GraphReport report;
  enum class Mark { none, active, done };
  std::array<Mark, kItemCount> mark{};
  std::function<int(Item)> visit = [&](Item item) -> int {
    auto i = idx(item);
    if (mark[i] == Mark::done) return report.depth[i];
    if (mark[i] == Mark::active) {
      const Recipe* r = producer[i];
      throw GraphError("cycle through item " + std::string(item_name(item)) +
                       (r ? " (recipe '" + r->name + "')" : std::string()));
    }
    mark[i] = Mark::active;
    int depth = 0;
    const auto deps = dependencies(recipes, item, producer[i]);
    for (Item dep : deps) depth = std::max(depth, visit(dep) + 1);
    report.depth[i] = depth;
    report.leaf[i] = producer[i] == nullptr;
    mark[i] = Mark::done;
    return depth;
  };
  for (int i = 0; i < kItemCount; ++i) {
    report.max_depth = std::max(report.max_depth, visit(static_cast<Item>(i)));
  }
  return report;
}

CraftGraph::CraftGraph(std::vector<Recipe> recipes) : recipes_(std::move(recipes)), report_(validate_graph(recipes_)) {}

const CraftGraph& CraftGraph::default_graph() {
  static const CraftGraph graph(default_recipes());
  return graph;
}

CraftGraph CraftGraph::from_config(const KeyValueConfig& cfg) {
  const auto version = cfg.get_int("version", -1);
  if (version != kRecipeTableVersion) {
    throw ConfigError("recipe table version " + std::to_string(version) + " not supported (expected " +
                      std::to_string(kRecipeTableVersion) + ")");
  }
  std::map<std::string, Recipe> by_name;
  std::set<std::string> known = {"version"};
  for (const auto& key : cfg.keys_with_prefix("recipe")) {
    auto rest = key.substr(std::string("recipe.").size());
    auto dot = rest.find('.');
    if (dot == std::string::npos) throw ConfigError("malformed recipe key: " + key);
    by_name[rest.substr(0, dot)].name = rest.substr(0, dot);
  }
  std::vector<Recipe> recipes;
  for (auto& [name, r] : by_name) {
    const std::string p = "recipe." + name + ".";
    for (const char* k : {"id", "output", "inputs", "station"}) known.insert(p + k);
    r.id = static_cast<int>(cfg.get_int(p + "id", -1));
    r.output = parse_single(cfg.raw(p + "output"), p + "output");
    Inventory inputs = parse_inventory(cfg.get_string(p + "inputs", ""));
    for (int i = 0; i < kItemCount; ++i) {
      if (inputs[static_cast<std::size_t>(i)] > 0) r.inputs.push_back({static_cast<Item>(i), inputs[static_cast<std::size_t>(i)]});
    }
    auto station = cfg.get_string(p + "station", "");
    if (!station.empty()) {
      auto item = parse_item(station);
      if (!item) throw ConfigError(p + "station: unknown item '" + station + "'");
      r.station = *item;
    }
    recipes.push_back(r);
  }
  cfg.reject_unknown(known);
  std::sort(recipes.begin(), recipes.end(), [](const Recipe& a, const Recipe& b) { return a.id < b.id; });
  return CraftGraph(std::move(recipes));
}

KeyValueConfig CraftGraph::to_config() const {
  KeyValueConfig cfg;
  cfg.set("version", std::to_string(kRecipeTableVersion));
  for (const auto& r : recipes_) {
    const std::string p = "recipe." + r.name + ".";
    Inventory out{}, in{};
    at(out, r.output.item) = r.output.count;
    for (const auto& i : r.inputs) at(in, i.item) += i.count;
    cfg.set(p + "id", std::to_string(r.id));
    cfg.set(p + "output", inventory_to_config(out));
    cfg.set(p + "inputs", inventory_to_config(in));
    cfg.set(p + "station", r.station ? std::string(item_name(*r.station)) : "");
  }
  return cfg;
}

const Recipe* CraftGraph::recipe_for(Item output) const {
  for (const auto& r : recipes_) {
    if (r.output.item == output) return &r;
  }
  return nullptr;
}

const Recipe* CraftGraph::recipe_by_name(const std::string& name) const {
  for (const auto& r : recipes_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

bool CraftGraph::obtainable(Item item) const {
  if (const Recipe* r = recipe_for(item)) {
    for (const auto& in : r->inputs) {
      if (!obtainable(in.item)) return false;
    }
    return !r->station || obtainable(*r->station);
  }
  auto cell = source_cell(item);
  if (!cell) return false;
  int tier = cell_info(*cell).required_tier;
  return tier == 0 || (tier != kUnminable && obtainable(pickaxe_for_tier(tier)));
}

bool recipe_affordable(const Inventory& inv, const Recipe& recipe) {
  for (const auto& in : recipe.inputs) {
    if (at(inv, in.item) < in.count) return false;
  }
  return !recipe.station || at(inv, *recipe.station) >= 1;
}

Inventory apply_recipe(const Inventory& inv, const Recipe& recipe) {
  if (!recipe_affordable(inv, recipe)) throw PlanningError("recipe '" + recipe.name + "' is not affordable");
  Inventory out = inv;
  for (const auto& in : recipe.inputs) at(out, in.item) -= in.count;
  at(out, recipe.output.item) += recipe.output.count;
  return out;
}

std::vector<SubGoal> plan_subgoals(const CraftGraph& graph, Item target, const Inventory& inventory, int target_count,
                                   const InstructionPool& pool) {
  if (target_count < 1) throw PlanningError("target count must be positive");
  if (!graph.obtainable(target)) {
    throw PlanningError("item " + std::string(item_name(target)) + " cannot be reached from collectible leaves");
  }
  std::array<long long, kItemCount> consumed{};
  std::array<bool, kItemCount> present{};
  std::array<long long, kItemCount> hold{};
  consumed[idx(target)] = target_count;

  std::vector<Item> order;
  for (int i = 0; i < kItemCount; ++i) order.push_back(static_cast<Item>(i));
  std::sort(order.begin(), order.end(), [&](Item a, Item b) {
    if (graph.depth(a) != graph.depth(b)) return graph.depth(a) > graph.depth(b);
    return a > b;
  });

  const int held_tier = held_tool_tier(inventory);
  for (Item x : order) {
    const auto i = idx(x);
    const long long demand = consumed[i] + (present[i] ? 1 : 0);
    if (demand <= at(inventory, x)) continue;
    hold[i] = demand;
    const long long missing = demand - at(inventory, x);
    if (const Recipe* r = graph.recipe_for(x)) {
      const long long crafts = (missing + r->output.count - 1) / r->output.count;
      for (const auto& in : r->inputs) consumed[idx(in.item)] += in.count * crafts;
      if (r->station) present[idx(*r->station)] = true;
    } else {
      const int tier = gather_tier(x);
      if (tier > held_tier) present[idx(pickaxe_for_tier(tier))] = true;
    }
  }

  std::vector<Item> chosen;
  for (int i = 0; i < kItemCount; ++i) {
    if (hold[static_cast<std::size_t>(i)] > 0) chosen.push_back(static_cast<Item>(i));
  }
  std::stable_sort(chosen.begin(), chosen.end(), [&](Item a, Item b) { return graph.depth(a) < graph.depth(b); });

  std::vector<SubGoal> plan;
  for (Item x : chosen) {
    SubGoal g;
    const Recipe* r = graph.recipe_for(x);
    g.kind = r ? SubGoalKind::craft : SubGoalKind::collect;
    g.item = x;
    g.count = static_cast<int>(hold[idx(x)]);
    g.goal_id = goal_for(g.kind, x).id;
    g.instruction = pool.render(g.goal_id, Split::train, 0);
    if (r) g.recipe_id = r->id;
    plan.push_back(std::move(g));
  }
  return plan;
}

std::vector<SubGoal> plan_subgoals(const CraftGraph& graph, const std::string& target, const Inventory& inventory) {
  auto item = parse_item(target);
  if (!item) throw PlanningError("unknown item: " + target);
  return plan_subgoals(graph, *item, inventory);
}

SubGoal subgoal_for_goal(const CraftGraph& graph, const std::string& goal_id, int count, const std::string& instruction) {
  const GoalSpec& spec = goal_spec(goal_id);
  SubGoal g;
  g.kind = spec.kind;
  g.item = spec.item;
  g.count = count;
  g.goal_id = goal_id;
  g.instruction = instruction;
  if (spec.kind == SubGoalKind::craft) {
    const Recipe* r = graph.recipe_for(spec.item);
    if (!r) throw PlanningError("goal " + goal_id + " has no recipe");
    g.recipe_id = r->id;
  }
  return g;
}

Inventory replay_plan(const CraftGraph& graph, const std::vector<SubGoal>& plan, Inventory inventory) {
  for (const auto& g : plan) {
    if (g.kind == SubGoalKind::collect) {
      const int tier = gather_tier(g.item);
      if (tier > held_tool_tier(inventory)) {
        throw PlanningError("collecting " + std::string(item_name(g.item)) + " needs a tier " + std::to_string(tier) +
                            " pickaxe");
      }
      at(inventory, g.item) = std::max(at(inventory, g.item), g.count);
    } else {
      const Recipe& r = graph.recipe(g.recipe_id.value());
      while (!g.satisfied(inventory)) inventory = apply_recipe(inventory, r);
    }
  }
  return inventory;
}

nlohmann::json plan_to_json(const std::vector<SubGoal>& plan) {
  auto out = nlohmann::json::array();
  for (const auto& g : plan) {
    nlohmann::json j;
    j["kind"] = g.kind == SubGoalKind::collect ? "collect" : "craft";
    j["item"] = std::string(item_name(g.item));
    j["count"] = g.count;
    j["goal_id"] = g.goal_id;
    j["instruction"] = g.instruction;
    if (g.recipe_id) j["recipe_id"] = *g.recipe_id;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace gridagent
