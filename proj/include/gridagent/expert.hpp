#pragma once

#include <vector>

#include "gridagent/craft_graph.hpp"
#include "gridagent/env.hpp"

namespace gridagent {

struct ExpertConfig {
  double epsilon = 0.1;  // probability of a uniform random action
  std::uint64_t seed = 0;

  void validate() const;
};

// Shortest 4-connected walk from `start` to an air cell adjacent to any cell of
// `targets`, followed by one move toward the target (a blocked move that only
// turns the agent). Empty if no target is reachable. Neighbors are expanded in
// N, S, E, W order, which fixes ties.
std::vector<ActionId> bfs_path(const WorldState& state, Pos start, const std::vector<CellKind>& targets);

// One greedy expert decision toward `goal` (hold goal.count of goal.item).
// Missing inputs are pursued through the planner from the current inventory.
ActionId expert_action(const WorldState& state, const SubGoal& goal, const CraftGraph& graph,
                       const ExpertConfig& cfg, Rng& rng);

}  // namespace gridagent
