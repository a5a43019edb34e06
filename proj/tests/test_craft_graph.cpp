#include "doctest.h"

#include <deque>
#include <map>

#include "gridagent/craft_graph.hpp"
#include "gridagent/env.hpp"

using namespace gridagent;

namespace {

const CraftGraph& G() { return CraftGraph::default_graph(); }

// Fewest gathered units that reach `count` of `target`, by 0-1 BFS over
// inventories: gathering one unit costs 1, crafting costs 0. Counts are capped
// to keep the space finite; the cap is far above any optimal plan's needs.
int brute_force_min_gathers(Item target, int count) {
  constexpr int kCap = 24;
  std::map<Inventory, int> dist;
  std::deque<Inventory> queue;
  Inventory start{};
  dist[start] = 0;
  queue.push_back(start);
  while (!queue.empty()) {
    const Inventory inv = queue.front();
    queue.pop_front();
    const int d = dist[inv];
    if (at(inv, target) >= count) return d;
    auto relax = [&](const Inventory& next, int cost) {
      for (int v : next) {
        if (v > kCap) return;
      }
      auto it = dist.find(next);
      if (it != dist.end() && it->second <= d + cost) return;
      dist[next] = d + cost;
      if (cost == 0) queue.push_front(next);
      else queue.push_back(next);
    };
    for (const auto& r : G().recipes()) {
      if (recipe_affordable(inv, r)) relax(apply_recipe(inv, r), 0);
    }
    for (int i = 0; i < kItemCount; ++i) {
      const Item it = static_cast<Item>(i);
      if (!G().is_leaf(it) || gather_tier(it) > held_tool_tier(inv)) continue;
      Inventory next = inv;
      at(next, it) += 1;
      relax(next, 1);
    }
  }
  return -1;
}

int plan_gathers(const std::vector<SubGoal>& plan, Inventory inv) {
  int total = 0;
  for (const auto& g : plan) {
    if (g.kind == SubGoalKind::collect) {
      total += std::max(0, g.count - at(inv, g.item));
      at(inv, g.item) = std::max(at(inv, g.item), g.count);
    } else {
      while (!g.satisfied(inv)) inv = apply_recipe(inv, G().recipe(*g.recipe_id));
    }
  }
  return total;
}

}  // namespace

TEST_SUITE("craft_graph") {

TEST_CASE("default graph validates with the expected tech depths") {
  CHECK(G().recipe_count() == 8);
  CHECK(G().is_leaf(Item::log));
  CHECK_FALSE(G().is_leaf(Item::plank));
  CHECK(G().depth(Item::wooden_pickaxe) < G().depth(Item::stone_pickaxe));
  CHECK(G().depth(Item::stone_pickaxe) < G().depth(Item::iron_pickaxe));
  CHECK(G().depth(Item::iron_pickaxe) < G().depth(Item::diamond));
}

TEST_CASE("cycles and unreachable items are rejected") {
  auto recipes = default_recipes();
  recipes[0].inputs = {{Item::stick, 1}};  // planks <- sticks <- planks
  CHECK_THROWS_AS(validate_graph(recipes), GraphError);
  auto dup = default_recipes();
  dup[1].output = {Item::plank, 1};
  CHECK_THROWS_AS(validate_graph(dup), GraphError);
}

TEST_CASE("wooden pickaxe plan has five sub-goals in dependency order") {
  const auto plan = plan_subgoals(G(), Item::wooden_pickaxe, Inventory{});
  REQUIRE(plan.size() == 5u);
  CHECK(plan[0].kind == SubGoalKind::collect);
  CHECK(plan[0].item == Item::log);
  CHECK(plan.back().item == Item::wooden_pickaxe);
  const auto final_inv = replay_plan(G(), plan, Inventory{});
  CHECK(at(final_inv, Item::wooden_pickaxe) >= 1);
}

TEST_CASE("plans replay and gather no more than the brute-force optimum") {
  for (Item target : {Item::plank, Item::stick, Item::crafting_table, Item::wooden_pickaxe, Item::furnace,
                      Item::stone_pickaxe, Item::iron_ingot, Item::iron_pickaxe}) {
    for (int count : {1, 2}) {
      CAPTURE(item_name(target));
      CAPTURE(count);
      const auto plan = plan_subgoals(G(), target, Inventory{}, count);
      const auto inv = replay_plan(G(), plan, Inventory{});
      CHECK(at(inv, target) >= count);
      CHECK(plan_gathers(plan, Inventory{}) == brute_force_min_gathers(target, count));
    }
  }
}

TEST_CASE("held items shorten the plan") {
  Inventory inv{};
  at(inv, Item::crafting_table) = 1;
  at(inv, Item::plank) = 5;
  const auto plan = plan_subgoals(G(), Item::wooden_pickaxe, inv);
  for (const auto& g : plan) CHECK(g.item != Item::log);
  CHECK(at(replay_plan(G(), plan, inv), Item::wooden_pickaxe) == 1);
}

TEST_CASE("recipe table round-trips and rejects bad versions") {
  const auto kv = G().to_config();
  const auto back = CraftGraph::from_config(kv);
  REQUIRE(back.recipe_count() == G().recipe_count());
  for (int i = 0; i < back.recipe_count(); ++i) {
    CHECK(back.recipe(i).name == G().recipe(i).name);
    CHECK(back.recipe(i).output == G().recipe(i).output);
  }
  auto bad = kv;
  bad.set("version", "2");
  CHECK_THROWS_AS(CraftGraph::from_config(bad), ConfigError);
}

TEST_CASE("unaffordable crafts raise PlanningError") {
  CHECK_THROWS_AS(apply_recipe(Inventory{}, G().recipe(0)), PlanningError);
  CHECK_THROWS_AS(plan_subgoals(G(), Item::plank, Inventory{}, 0), PlanningError);
}

}
