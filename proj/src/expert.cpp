#include "gridagent/expert.hpp"

#include <algorithm>
#include <deque>

namespace gridagent {

namespace {

constexpr Facing kOrder[] = {Facing::north, Facing::south, Facing::east, Facing::west};

ActionId random_move(Rng& rng) { return action::move_north + static_cast<ActionId>(uniform_index(rng, 4)); }

}  // namespace

void ExpertConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ConfigError("expert epsilon must lie in [0, 0.5)");
}

std::vector<ActionId> bfs_path(const WorldState& state, Pos start, const std::vector<CellKind>& targets) {
  auto is_target = [&](Pos p) {
    return state.in_bounds(p.row, p.col) &&
           std::find(targets.begin(), targets.end(), state.cell(p.row, p.col)) != targets.end();
  };
  auto target_side = [&](Pos p) -> int {
    for (int k = 0; k < 4; ++k) {
      if (is_target(step_toward(p, kOrder[k]))) return k;
    }
    return -1;
  };

  const auto cells = static_cast<std::size_t>(state.height * state.width);
  std::vector<int> parent(cells, -2);
  auto key = [&](Pos p) { return static_cast<std::size_t>(p.row * state.width + p.col); };
  std::deque<Pos> queue{start};
  parent[key(start)] = -1;
  while (!queue.empty()) {
    Pos p = queue.front();
    queue.pop_front();
    if (int side = target_side(p); side >= 0) {
      std::vector<ActionId> path;
      for (Pos cur = p; parent[key(cur)] >= 0;) {
        const int from = parent[key(cur)];
        const Pos prev{from / state.width, from % state.width};
        for (Facing f : kOrder) {
          if (step_toward(prev, f) == cur) path.push_back(move_action(f));
        }
        cur = prev;
      }
      std::reverse(path.begin(), path.end());
      path.push_back(move_action(kOrder[side]));
      return path;
    }
    for (Facing f : kOrder) {
      Pos q = step_toward(p, f);
      if (!state.passable(q.row, q.col) || parent[key(q)] != -2) continue;
      parent[key(q)] = static_cast<int>(key(p));
      queue.push_back(q);
    }
  }
  return {};
}

ActionId expert_action(const WorldState& state, const SubGoal& goal, const CraftGraph& graph,
                       const ExpertConfig& cfg, Rng& rng) {
  if (cfg.epsilon > 0.0 && uniform01(rng) < cfg.epsilon) {
    return static_cast<ActionId>(uniform_index(rng, static_cast<std::uint64_t>(action_count(graph))));
  }
  if (goal.satisfied(state.inventory)) return action::noop;

  std::vector<SubGoal> plan;
  try {
    plan = plan_subgoals(graph, goal.item, state.inventory, goal.count);
  } catch (const PlanningError&) {
    return random_move(rng);
  }
  if (plan.empty()) return action::noop;
  const SubGoal& next = plan.front();

  if (next.kind == SubGoalKind::craft) {
    const Recipe& r = graph.recipe(next.recipe_id.value());
    return recipe_affordable(state.inventory, r) ? craft_action(r.id) : random_move(rng);
  }

  const CellKind source = source_cell(next.item).value();
  const Pos front = step_toward(state.agent, state.facing);
  if (state.in_bounds(front.row, front.col) && state.cell(front.row, front.col) == source &&
      cell_info(source).required_tier <= held_tool_tier(state.inventory)) {
    return action::mine;
  }
  const auto path = bfs_path(state, state.agent, {source});
  return path.empty() ? random_move(rng) : path.front();
}

}  // namespace gridagent
