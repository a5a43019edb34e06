#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridagent/rollout.hpp"
#include "gridagent/stats.hpp"
#include "gridagent/trainer.hpp"

namespace gridagent {

struct EvalConfig {
  int n = 30;
  std::uint64_t seed = 0;
  int subgoal_budget = 256;
  int long_horizon_cap = 1024;
  SelectMode select = SelectMode::sample;  // how a model picks actions during rollouts
  double temperature = 1.0;
  std::vector<std::string> atomic_tasks = atomic_eval_goals();
  std::vector<std::string> long_horizon_tasks = long_horizon_task_names();

  static EvalConfig from_config(const KeyValueConfig& cfg);
  static const std::set<std::string>& known_keys();
  // Evaluation seeds; always below the dataset seed range.
  std::vector<std::uint64_t> seeds(const std::string& stream) const;
};

struct AtomicRow {
  std::string task;
  std::string policy;
  std::string instruction;
  std::vector<std::uint64_t> seeds;
  std::vector<double> rewards;  // target items held at the end
  double mean = 0.0;
  double std = 0.0;
};

// n rollouts of `policy` on a gathering task, instructed with the first train
// template of `commanded_goal` (default: the task itself). Reward is the
// task's target count when the commanded goal is met or the budget runs out.
AtomicRow eval_atomic(Policy& policy, const std::string& task, const EvalConfig& cfg, const CraftGraph& graph,
                      const std::string& commanded_goal = "");

struct LongHorizonRow {
  std::string task;
  int depth = 0;
  int plan_length = 0;
  int n = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::vector<int> first_failed;  // per sub-goal index: episodes that failed there
  std::vector<bool> outcomes;
};

LongHorizonRow eval_long_horizon(Policy& policy, const std::string& task, const EvalConfig& cfg, const CraftGraph& graph,
                                 const InstructionPool& pool = InstructionPool::default_pool());

struct OpenEndedRow {
  std::string task;
  double train_rate = 0.0;
  double heldout_rate = 0.0;
  double gap = 0.0;  // train - heldout
  int n = 0;         // per template set
  std::vector<double> heldout_per_template;
};

// Same seeds with train-template and held-out-template instructions
// (template i % count for episode i).
OpenEndedRow eval_open_ended(Policy& policy, const std::string& task, const EvalConfig& cfg, const CraftGraph& graph,
                             const InstructionPool& pool = InstructionPool::default_pool());

nlohmann::json to_json(const AtomicRow& row);
nlohmann::json to_json(const LongHorizonRow& row);
nlohmann::json to_json(const OpenEndedRow& row);

struct EvalReport {
  nlohmann::json data;
  std::string markdown() const;
};

// suite: atomic, long-horizon, open-ended or all.
EvalReport evaluate_suite(Policy& policy, const std::string& suite, const EvalConfig& cfg, const CraftGraph& graph,
                          const std::string& fingerprint, const std::string& checkpoint_hash,
                          const InstructionPool& pool = InstructionPool::default_pool());

struct EmbeddingSet {
  Mat behavior;  // per episode: mean over tokens of the final behavior tokens
  Mat raw;       // per episode: mean over patches of the final raw observation features
  std::vector<int> labels;
  std::vector<std::string> label_names;
};

EmbeddingSet collect_embeddings(Model& model, const std::vector<std::string>& tasks, const EvalConfig& cfg,
                                const CraftGraph& graph);
// CSV: label, e0 .. e{d-1}
void write_embeddings_csv(const std::filesystem::path& path, const Mat& rows, const std::vector<int>& labels,
                          const std::vector<std::string>& names);
void read_embeddings_csv(const std::filesystem::path& path, Mat& rows, std::vector<int>& labels,
                         std::vector<std::string>& names);

struct AblationSpec {
  std::string name;
  bool cp = true;
  bool ha = true;
  bool mb = true;
};
// full; none; cp only; ha + mb; cp + ha
const std::vector<AblationSpec>& ablation_grid();
ModelConfig apply_ablation(ModelConfig cfg, const AblationSpec& spec);

struct AblationRequest {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  bool resume = true;
  std::vector<std::string> configs;  // subset of grid names; empty = all
};

// Trains every (configuration, seed) from scratch with one goal-blind teacher
// per seed, evaluates atomic rewards and tabulates deltas against the full model.
nlohmann::json run_ablations(const AblationRequest& req, const Vocab& vocab, const Corpus& corpus,
                             const CraftGraph& graph);
std::string ablation_markdown(const nlohmann::json& table);

}  // namespace gridagent
