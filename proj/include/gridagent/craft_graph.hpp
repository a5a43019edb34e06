#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridagent/config.hpp"
#include "gridagent/instructions.hpp"
#include "gridagent/items.hpp"

namespace gridagent {

class GraphError : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

struct ItemCount {
  Item item;
  int count;
  bool operator==(const ItemCount&) const = default;
};

struct Recipe {
  int id = 0;
  std::string name;
  ItemCount output{Item::plank, 1};
  std::vector<ItemCount> inputs;
  std::optional<Item> station;  // must be held, never consumed
};

// Result of validating a recipe set. Depth is the tech level: gathered items
// sit one level above the pickaxe they need, crafted items one level above
// their deepest input or station.
struct GraphReport {
  std::array<int, kItemCount> depth{};
  std::array<bool, kItemCount> leaf{};
  int max_depth = 0;
};

GraphReport validate_graph(const std::vector<Recipe>& recipes);

inline constexpr int kRecipeTableVersion = 1;

class CraftGraph {
 public:
  explicit CraftGraph(std::vector<Recipe> recipes);

  static const CraftGraph& default_graph();
  // Reads a versioned recipe table ("[recipe.<name>]" sections).
  static CraftGraph from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;

  const std::vector<Recipe>& recipes() const { return recipes_; }
  int recipe_count() const { return static_cast<int>(recipes_.size()); }
  const Recipe& recipe(int id) const { return recipes_.at(static_cast<std::size_t>(id)); }
  const Recipe* recipe_for(Item output) const;
  const Recipe* recipe_by_name(const std::string& name) const;

  const GraphReport& report() const { return report_; }
  int depth(Item item) const { return report_.depth[static_cast<std::size_t>(item)]; }
  bool is_leaf(Item item) const { return report_.leaf[static_cast<std::size_t>(item)]; }
  bool obtainable(Item item) const;

 private:
  std::vector<Recipe> recipes_;
  GraphReport report_;
};

std::vector<Recipe> default_recipes();

bool recipe_affordable(const Inventory& inv, const Recipe& recipe);
// Throws PlanningError if the recipe is not affordable.
Inventory apply_recipe(const Inventory& inv, const Recipe& recipe);

struct SubGoal {
  SubGoalKind kind = SubGoalKind::collect;
  Item item = Item::log;
  int count = 1;  // amount to hold in inventory when the sub-goal is done
  std::string instruction;
  std::string goal_id;
  std::optional<int> recipe_id;

  bool satisfied(const Inventory& inv) const { return at(inv, item) >= count; }
};

// Decomposes `target` into an ordered list of collect/craft sub-goals with
// minimal quantities, starting from `inventory`. Sub-goals are ordered by
// tech depth, so every craft is affordable at its turn.
std::vector<SubGoal> plan_subgoals(const CraftGraph& graph, Item target, const Inventory& inventory,
                                   int target_count = 1,
                                   const InstructionPool& pool = InstructionPool::default_pool());
std::vector<SubGoal> plan_subgoals(const CraftGraph& graph, const std::string& target, const Inventory& inventory);

// Single sub-goal for a catalog goal id.
SubGoal subgoal_for_goal(const CraftGraph& graph, const std::string& goal_id, int count,
                         const std::string& instruction);

// Replays a plan symbolically: collects add the missing amount, crafts apply
// their recipe until satisfied. Returns the final inventory; throws
// PlanningError if some craft is unaffordable at its turn.
Inventory replay_plan(const CraftGraph& graph, const std::vector<SubGoal>& plan, Inventory inventory);

nlohmann::json plan_to_json(const std::vector<SubGoal>& plan);

}  // namespace gridagent
