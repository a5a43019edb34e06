#include "gridagent/run_config.hpp"

#include <cstdio>
#include <fstream>

namespace gridagent {

std::set<std::string> RunConfig::known_keys() {
  std::set<std::string> keys = {"recipes.file"};
  for (const auto* part : {&DatasetConfig::known_keys(), &ModelConfig::known_keys(), &TrainConfig::known_keys(),
                           &EvalConfig::known_keys()}) {
    keys.insert(part->begin(), part->end());
  }
  return keys;
}

RunConfig RunConfig::from_values(KeyValueConfig values, const std::filesystem::path& base_dir) {
  const auto known = known_keys();
  std::vector<std::string> unknown;
  for (const auto& [k, v] : values.values()) {
    if (k.rfind("task.", 0) == 0) continue;  // validated by the task reader
    if (!known.count(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

  RunConfig rc;
  if (values.has("recipes.file")) {
    std::filesystem::path p = values.raw("recipes.file");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    rc.recipes_path = p;
    rc.graph = CraftGraph::from_config(KeyValueConfig::load(p));
  }
  rc.dataset = DatasetConfig::from_config(values);
  rc.model = ModelConfig::from_config(values, action_count(rc.graph));
  rc.train = TrainConfig::from_config(values);
  rc.eval = EvalConfig::from_config(values);
  if (values.has("task.name")) {
    KeyValueConfig task_values;
    for (const auto& k : values.keys_with_prefix("task")) task_values.set(k, values.raw(k));
    rc.task = TaskConfig::from_config(task_values, rc.graph);
  }
  rc.values = std::move(values);
  return rc;
}

RunConfig RunConfig::resolve(const std::filesystem::path& config_path, const std::vector<std::string>& overrides) {
  KeyValueConfig values;
  std::filesystem::path base;
  if (!config_path.empty()) {
    values = KeyValueConfig::load(config_path);
    base = config_path.parent_path();
  }
  values.apply_overrides(overrides);
  return from_values(std::move(values), base);
}

std::string RunConfig::fingerprint() const {
  KeyValueConfig canon = values;
  canon.set("recipes.file", "");
  const std::string text = canon.dump() + graph.to_config().dump();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

void RunConfig::write_snapshot(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "config.resolved.ini");
  if (!out) throw Error("cannot write config snapshot in " + dir.string());
  out << "# fingerprint " << fingerprint() << "\n" << values.dump();
  if (!recipes_path.empty()) {
    std::ofstream rec(dir / "recipes.resolved.ini");
    rec << graph.to_config().dump();
  }
}

}  // namespace gridagent
