#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridagent/items.hpp"
#include "gridagent/random.hpp"

namespace gridagent {

enum class SubGoalKind : std::uint8_t { collect, craft };

// One trainable goal: a gathering skill ("collect_logs") or a single-recipe
// craft ("make_planks"). Sub-goals from the planner map onto these ids.
struct GoalSpec {
  std::string id;
  SubGoalKind kind;
  Item item;
  std::string item_words;  // surface form substituted into templates
};

const std::vector<GoalSpec>& goal_catalog();
const GoalSpec& goal_spec(const std::string& goal_id);
const GoalSpec& goal_for(SubGoalKind kind, Item item);
bool is_known_goal(const std::string& goal_id);

// The four evaluation skills (logs, seeds, dirt, stone).
const std::vector<std::string>& atomic_eval_goals();
// Every catalog goal, in catalog order.
std::vector<std::string> all_goal_ids();

enum class Split : std::uint8_t { train, heldout };

class InstructionPool {
 public:
  struct Templates {
    std::vector<std::string> train;
    std::vector<std::string> heldout;
  };

  static InstructionPool default_pool();
  explicit InstructionPool(std::map<std::string, Templates> templates);

  const std::vector<std::string>& templates(const std::string& goal_id, Split split) const;
  std::string render(const std::string& goal_id, Split split, std::size_t index) const;
  std::vector<std::string> rendered(const std::string& goal_id, Split split) const;
  // Every rendered string in the pool, both splits; the vocabulary source.
  std::vector<std::string> all_rendered() const;
  const std::map<std::string, Templates>& entries() const { return templates_; }

 private:
  std::map<std::string, Templates> templates_;
};

// Uniform draw from one split with the item name substituted.
std::string sample_instruction(const InstructionPool& pool, const std::string& goal_id, Split split, Rng& rng);

}  // namespace gridagent
