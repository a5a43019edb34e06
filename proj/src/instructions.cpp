#include "gridagent/instructions.hpp"

#include <boost/algorithm/string/replace.hpp>

namespace gridagent {

namespace {

const std::vector<GoalSpec> kCatalog = {
    {"collect_logs", SubGoalKind::collect, Item::log, "logs"},
    {"collect_seeds", SubGoalKind::collect, Item::seed, "seeds"},
    {"collect_dirt", SubGoalKind::collect, Item::dirt, "dirt"},
    {"mine_stone", SubGoalKind::collect, Item::stone, "stone"},
    {"mine_iron_ore", SubGoalKind::collect, Item::iron_ore, "iron ore"},
    {"mine_diamond", SubGoalKind::collect, Item::diamond, "diamond"},
    {"make_planks", SubGoalKind::craft, Item::plank, "planks"},
    {"make_crafting_table", SubGoalKind::craft, Item::crafting_table, "crafting table"},
    {"make_sticks", SubGoalKind::craft, Item::stick, "sticks"},
    {"make_wooden_pickaxe", SubGoalKind::craft, Item::wooden_pickaxe, "wooden pickaxe"},
    {"make_furnace", SubGoalKind::craft, Item::furnace, "furnace"},
    {"make_stone_pickaxe", SubGoalKind::craft, Item::stone_pickaxe, "stone pickaxe"},
    {"make_iron_ingot", SubGoalKind::craft, Item::iron_ingot, "iron ingot"},
    {"make_iron_pickaxe", SubGoalKind::craft, Item::iron_pickaxe, "iron pickaxe"},
};

const std::vector<std::string> kGatherTrain = {"collect {item}", "gather some {item}", "get {item}",
                                               "obtain {item}"};
const std::vector<std::string> kGatherHeldout = {"please bring me {item}", "i need you to find {item}",
                                                 "go fetch {item}", "could you harvest {item}",
                                                 "your job is to acquire {item}"};
const std::vector<std::string> kCraftTrain = {"craft {item}", "make {item}", "craft some {item}",
                                              "use the recipe for {item}", "create {item}"};
const std::vector<std::string> kCraftHeldout = {"please build {item}", "i need you to assemble {item}",
                                                "put together {item}", "could you produce {item}",
                                                "your job is to fashion {item}"};

// Skill-specific phrasings lead the train split so render(..., 0) reads naturally.
const std::map<std::string, std::string> kLeadPhrase = {
    {"collect_logs", "chop a tree to get {item}"},
    {"collect_seeds", "break grass to collect {item}"},
    {"collect_dirt", "dig up some {item}"},
    {"mine_stone", "dig down to mine {item}"},
    {"mine_iron_ore", "dig down to mine {item}"},
    {"mine_diamond", "dig deep to mine {item}"},
};

}  // namespace

const std::vector<GoalSpec>& goal_catalog() { return kCatalog; }

const GoalSpec& goal_spec(const std::string& goal_id) {
  for (const auto& g : kCatalog) {
    if (g.id == goal_id) return g;
  }
  throw ConfigError("unknown goal: " + goal_id);
}

const GoalSpec& goal_for(SubGoalKind kind, Item item) {
  for (const auto& g : kCatalog) {
    if (g.kind == kind && g.item == item) return g;
  }
  throw ConfigError("no goal for " + std::string(kind == SubGoalKind::collect ? "collect " : "craft ") +
                    std::string(item_name(item)));
}

bool is_known_goal(const std::string& goal_id) {
  for (const auto& g : kCatalog) {
    if (g.id == goal_id) return true;
  }
  return false;
}

const std::vector<std::string>& atomic_eval_goals() {
  static const std::vector<std::string> goals = {"collect_logs", "collect_seeds", "collect_dirt", "mine_stone"};
  return goals;
}

std::vector<std::string> all_goal_ids() {
  std::vector<std::string> ids;
  for (const auto& g : kCatalog) ids.push_back(g.id);
  return ids;
}

InstructionPool InstructionPool::default_pool() {
  std::map<std::string, Templates> entries;
  for (const auto& g : kCatalog) {
    Templates t;
    if (g.kind == SubGoalKind::collect) {
      t.train.push_back(kLeadPhrase.at(g.id));
      t.train.insert(t.train.end(), kGatherTrain.begin(), kGatherTrain.end());
      t.heldout = kGatherHeldout;
    } else {
      t.train = kCraftTrain;
      t.heldout = kCraftHeldout;
    }
    entries.emplace(g.id, std::move(t));
  }
  return InstructionPool(std::move(entries));
}

InstructionPool::InstructionPool(std::map<std::string, Templates> templates) : templates_(std::move(templates)) {
  for (const auto& [goal, t] : templates_) {
    if (t.train.empty() || t.heldout.empty()) throw ConfigError("goal " + goal + " needs train and heldout templates");
    for (const auto& a : t.train) {
      if (a.find("{item}") == std::string::npos) throw ConfigError("template lacks {item}: " + a);
      for (const auto& b : t.heldout) {
        if (a == b) throw ConfigError("template in both splits: " + a);
      }
    }
    for (const auto& b : t.heldout) {
      if (b.find("{item}") == std::string::npos) throw ConfigError("template lacks {item}: " + b);
    }
  }
}

const std::vector<std::string>& InstructionPool::templates(const std::string& goal_id, Split split) const {
  auto it = templates_.find(goal_id);
  if (it == templates_.end()) throw ConfigError("unknown goal: " + goal_id);
  return split == Split::train ? it->second.train : it->second.heldout;
}

std::string InstructionPool::render(const std::string& goal_id, Split split, std::size_t index) const {
  const auto& list = templates(goal_id, split);
  return boost::replace_all_copy(list.at(index % list.size()), "{item}", goal_spec(goal_id).item_words);
}

std::vector<std::string> InstructionPool::rendered(const std::string& goal_id, Split split) const {
  std::vector<std::string> out;
  const auto n = templates(goal_id, split).size();
  for (std::size_t i = 0; i < n; ++i) out.push_back(render(goal_id, split, i));
  return out;
}

std::vector<std::string> InstructionPool::all_rendered() const {
  std::vector<std::string> out;
  for (const auto& [goal, t] : templates_) {
    for (auto split : {Split::train, Split::heldout}) {
      auto r = rendered(goal, split);
      out.insert(out.end(), r.begin(), r.end());
    }
  }
  return out;
}

std::string sample_instruction(const InstructionPool& pool, const std::string& goal_id, Split split, Rng& rng) {
  const auto n = pool.templates(goal_id, split).size();
  return pool.render(goal_id, split, uniform_index(rng, n));
}

}  // namespace gridagent
