#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridagent/evaluation.hpp"
#include "gridagent/pipeline.hpp"

namespace gridagent {

// Every section a command can read, resolved from one INI file plus
// "section.key=value" overrides. Unknown keys are rejected.
struct RunConfig {
  KeyValueConfig values;
  std::filesystem::path recipes_path;  // empty: builtin table
  CraftGraph graph = CraftGraph::default_graph();
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  std::optional<TaskConfig> task;  // only when task.name is set

  static RunConfig resolve(const std::filesystem::path& config_path, const std::vector<std::string>& overrides);
  static RunConfig from_values(KeyValueConfig values, const std::filesystem::path& base_dir = {});
  static std::set<std::string> known_keys();

  // Hash of the canonical config text and the recipe table.
  std::string fingerprint() const;
  // Writes config.resolved.ini into `dir`.
  void write_snapshot(const std::filesystem::path& dir) const;
};

}  // namespace gridagent
