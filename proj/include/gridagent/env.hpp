#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridagent/config.hpp"
#include "gridagent/craft_graph.hpp"
#include "gridagent/items.hpp"
#include "gridagent/random.hpp"

namespace gridagent {

class GenerationError : public Error {
 public:
  using Error::Error;
};

enum class Facing : std::uint8_t { north, south, east, west };

struct Pos {
  int row = 0;
  int col = 0;
  bool operator==(const Pos&) const = default;
};

Pos step_toward(Pos p, Facing f);

// Discrete action table: 0 noop, 1..4 moves (N,S,E,W), 5 mine, 6.. craft(recipe k).
using ActionId = int;
namespace action {
inline constexpr ActionId noop = 0;
inline constexpr ActionId move_north = 1;
inline constexpr ActionId move_south = 2;
inline constexpr ActionId move_east = 3;
inline constexpr ActionId move_west = 4;
inline constexpr ActionId mine = 5;
inline constexpr ActionId craft_base = 6;
inline constexpr int kActionTableVersion = 1;
}  // namespace action

int action_count(const CraftGraph& graph);
ActionId move_action(Facing f);
ActionId craft_action(int recipe_id);
std::string action_name(const CraftGraph& graph, ActionId a);

enum class TaskKind : std::uint8_t { atomic, craft, long_horizon };
enum class SpawnZone : std::uint8_t { surface, deep, any };

struct TaskConfig {
  std::string name;
  TaskKind kind = TaskKind::atomic;
  int height = 16;
  int width = 16;
  double surface_fraction = 0.5;  // share of interior rows above the deep band
  std::array<double, kCellKindCount> density{};
  SpawnZone spawn = SpawnZone::surface;
  Inventory start_inventory{};
  Inventory per_unit_inventory{};  // scaled by the sampled unit count
  Item target = Item::log;
  int unit_target = 1;  // target items required per unit
  int units_min = 1;
  int units_max = 1;
  int step_cap = 256;
  // Minimum number of reachable cells of each kind the world must contain.
  std::map<CellKind, int> required_cells;

  static TaskConfig builtin(const std::string& name, const CraftGraph& graph = CraftGraph::default_graph());
  // Reads "[task]" keys on top of the builtin of the same name (if any).
  static TaskConfig from_config(const KeyValueConfig& cfg, const CraftGraph& graph = CraftGraph::default_graph());
  KeyValueConfig to_config() const;
};

std::vector<std::string> builtin_task_names();
const std::vector<std::string>& long_horizon_task_names();
// Task name for a catalog goal id (gathering goals and make_* goals share ids).
std::string task_for_goal(const std::string& goal_id);

struct WorldState {
  int height = 0;
  int width = 0;
  std::vector<CellKind> grid;
  Pos agent;
  Facing facing = Facing::north;
  Inventory inventory{};
  int tick = 0;
  int step_cap = 256;
  int target_count = 1;
  std::uint64_t seed = 0;
  Rng rng;

  CellKind cell(int r, int c) const { return grid[static_cast<std::size_t>(r * width + c)]; }
  CellKind& cell(int r, int c) { return grid[static_cast<std::size_t>(r * width + c)]; }
  bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
  bool passable(int r, int c) const { return in_bounds(r, c) && cell_info(cell(r, c)).passable; }

  static WorldState empty(int height, int width, Pos agent, Facing facing = Facing::north);
};

struct ObsConfig {
  int radius = 3;
  int clip_max = 15;
  int side() const { return 2 * radius + 1; }
  int patches() const { return side() * side(); }
};

struct Observation {
  int radius = 3;
  std::vector<std::uint8_t> window;  // row-major (2r+1)^2 cell-kind ids
  std::uint8_t facing = 0;
  std::array<std::uint8_t, kItemCount> inventory{};  // clipped counts
  std::uint8_t held_tool = 0;

  bool operator==(const Observation&) const = default;
};

Observation observe(const WorldState& state, const ObsConfig& cfg = {});

struct StepEvent {
  std::optional<ItemCount> obtained;
  std::optional<int> crafted;
  bool blocked = false;
  bool operator==(const StepEvent&) const = default;
};

struct StepResult {
  Observation observation;
  StepEvent event;
  bool done = false;
};

bool success(const WorldState& state, const TaskConfig& task);

// Generates the world for (seed, task). Deterministic.
WorldState generate_world(std::uint64_t seed, const TaskConfig& task);

StepResult step(WorldState& state, const TaskConfig& task, const CraftGraph& graph, ActionId a,
                const ObsConfig& obs_cfg = {});

std::string render_text(const WorldState& state);

// Owns one world instance for a task; the usual entry point.
class Env {
 public:
  explicit Env(const CraftGraph& graph = CraftGraph::default_graph(), ObsConfig obs = {});

  Observation reset(std::uint64_t seed, const TaskConfig& task);
  StepResult step(ActionId a);

  const WorldState& state() const { return state_; }
  WorldState& mutable_state() { return state_; }
  const TaskConfig& task() const { return task_; }
  const CraftGraph& graph() const { return *graph_; }
  const ObsConfig& obs_config() const { return obs_; }
  Observation observation() const { return observe(state_, obs_); }
  int num_actions() const { return action_count(*graph_); }
  bool done() const { return done_; }

 private:
  const CraftGraph* graph_;
  ObsConfig obs_;
  TaskConfig task_;
  WorldState state_;
  bool done_ = false;
};

}  // namespace gridagent
