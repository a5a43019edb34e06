#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridagent/craft_graph.hpp"
#include "gridagent/episode_io.hpp"
#include "gridagent/expert.hpp"

namespace gridagent {

struct DatasetConfig {
  double epsilon = 0.1;
  int max_len = 256;            // filter threshold on episode length
  int attempt_cap = 4;          // attempts per goal are capped at attempt_cap * n
  int max_target_count = 3;     // unit count sampled per episode in [1, max]
  std::uint64_t seed = 0;
  int n_per_goal = 300;
  int workers = 1;
  std::vector<std::string> goals;  // empty = whole catalog
  bool noisy = false;           // unfiltered high-epsilon corpus
  double noisy_epsilon = 0.3;
  // Chance that a gathering episode starts with a random pickaxe, so held
  // tools do not identify the goal.
  double tool_grant_prob = 0.5;

  static DatasetConfig from_config(const KeyValueConfig& cfg);
  static const std::set<std::string>& known_keys();
  const std::vector<std::string>& goal_list() const;
  double effective_epsilon() const { return noisy ? noisy_epsilon : epsilon; }
};

// Environment seeds used by the dataset. Evaluation draws from [0, 1e9), so
// the two ranges never meet.
std::uint64_t dataset_seed(std::uint64_t base_seed, std::uint64_t attempt);

// The task an episode of `goal_id` with env seed `seed` runs in: the dataset's
// unit range plus the seeded tool grant.
TaskConfig dataset_task(const std::string& goal_id, const DatasetConfig& cfg, const CraftGraph& graph,
                        std::uint64_t seed);

Episode generate_episode(const std::string& goal_id, std::uint64_t seed, const DatasetConfig& cfg,
                         const CraftGraph& graph = CraftGraph::default_graph(),
                         const InstructionPool& pool = InstructionPool::default_pool());

bool filter_episode(const Episode& ep, const DatasetConfig& cfg);

struct GoalStats {
  std::string goal_id;
  std::string shard;
  int kept = 0;
  int attempts = 0;
  long long frames = 0;
  bool feasible = true;
};

// Generates, filters and writes one shard per goal plus manifest.json into
// `out_dir`. Content depends only on the config, never on the worker count.
nlohmann::json build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir,
                             const CraftGraph& graph = CraftGraph::default_graph(),
                             const InstructionPool& pool = InstructionPool::default_pool());

struct AuditReport {
  int episodes = 0;
  int replay_mismatches = 0;
  int filter_violations = 0;
  int count_mismatches = 0;
  std::vector<std::string> problems;

  bool ok() const { return replay_mismatches == 0 && filter_violations == 0 && count_mismatches == 0; }
};

// Replays every shard episode through the environment and re-applies the filter.
bool replay_matches(const Episode& ep, const TaskConfig& task, const CraftGraph& graph);
AuditReport audit_dataset(const std::filesystem::path& dir, const CraftGraph& graph = CraftGraph::default_graph());

nlohmann::json read_manifest(const std::filesystem::path& dir);
// All episodes of a dataset directory, in manifest goal order.
std::vector<Episode> load_corpus(const std::filesystem::path& dir);

}  // namespace gridagent
