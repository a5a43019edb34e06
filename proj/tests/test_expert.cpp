#include "doctest.h"

#include <queue>

#include "gridagent/expert.hpp"
#include "gridagent/rollout.hpp"

using namespace gridagent;

namespace {

// Dijkstra with unit weights: distance from start to the nearest passable
// cell that has a target neighbour.
int dijkstra_to_adjacent(const WorldState& s, Pos start, CellKind target) {
  const int n = s.height * s.width;
  std::vector<int> dist(static_cast<std::size_t>(n), INT32_MAX);
  using Item = std::pair<int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(start.row * s.width + start.col)] = 0;
  pq.push({0, start.row * s.width + start.col});
  const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, 1, -1};
  while (!pq.empty()) {
    auto [d, id] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(id)]) continue;
    const int r = id / s.width, c = id % s.width;
    for (int k = 0; k < 4; ++k) {
      if (s.in_bounds(r + dr[k], c + dc[k]) && s.cell(r + dr[k], c + dc[k]) == target) return d;
    }
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (!s.passable(nr, nc)) continue;
      const int nid = nr * s.width + nc;
      if (d + 1 < dist[static_cast<std::size_t>(nid)]) {
        dist[static_cast<std::size_t>(nid)] = d + 1;
        pq.push({d + 1, nid});
      }
    }
  }
  return -1;
}

}  // namespace

TEST_SUITE("expert_policies") {

TEST_CASE("bfs path matches Dijkstra on 200 random grids and ends facing the target") {
  const auto& graph = CraftGraph::default_graph();
  Rng rng = make_rng(42, 1);
  int reachable = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 5 + static_cast<int>(uniform_index(rng, 10));
    const int w = 5 + static_cast<int>(uniform_index(rng, 10));
    auto s = WorldState::empty(h, w, {h / 2, w / 2});
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (Pos{r, c} == s.agent) continue;
        const double u = uniform01(rng);
        s.cell(r, c) = u < 0.25 ? CellKind::bedrock : u < 0.3 ? CellKind::tree : CellKind::air;
      }
    }
    const auto path = bfs_path(s, s.agent, {CellKind::tree});
    const int oracle = dijkstra_to_adjacent(s, s.agent, CellKind::tree);
    CAPTURE(trial);
    if (oracle < 0) {
      CHECK(path.empty());
      continue;
    }
    ++reachable;
    REQUIRE(static_cast<int>(path.size()) == oracle + 1);
    auto task = TaskConfig::builtin("collect_logs");
    for (ActionId a : path) step(s, task, graph, a);
    const Pos front = step_toward(s.agent, s.facing);
    CHECK(s.cell(front.row, front.col) == CellKind::tree);
  }
  CHECK(reachable > 100);
}

TEST_CASE("expert config rejects epsilon outside [0, 0.5)") {
  CHECK_THROWS_AS((ExpertConfig{0.5, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((ExpertConfig{-0.1, 0}.validate()), ConfigError);
  CHECK_NOTHROW((ExpertConfig{0.0, 0}.validate()));
}

TEST_CASE("noise-free expert solves every goal and long-horizon task") {
  const auto& graph = CraftGraph::default_graph();
  ExpertPolicy expert(graph);
  for (const auto& goal : all_goal_ids()) {
    const auto task = TaskConfig::builtin(goal);
    const auto g = subgoal_for_goal(graph, goal, task.unit_target, "x");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      CAPTURE(goal);
      CHECK(rollout(expert, {g}, seed, task, graph, 256).success);
    }
  }
  for (const auto& name : long_horizon_task_names()) {
    const auto task = TaskConfig::builtin(name);
    const auto plan = plan_subgoals(graph, task.target, task.start_inventory);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CAPTURE(name);
      CHECK(rollout(expert, plan, seed, task, graph, 256).success);
    }
  }
}

TEST_CASE("epsilon noise is reproducible per seed") {
  const auto& graph = CraftGraph::default_graph();
  const auto s = generate_world(5, TaskConfig::builtin("collect_logs"));
  const auto g = subgoal_for_goal(graph, "collect_logs", 1, "x");
  ExpertConfig cfg{0.3, 0};
  Rng a = make_rng(1, 2), b = make_rng(1, 2);
  for (int i = 0; i < 50; ++i) CHECK(expert_action(s, g, graph, cfg, a) == expert_action(s, g, graph, cfg, b));
}

}
