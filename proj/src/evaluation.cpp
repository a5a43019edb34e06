#include "gridagent/evaluation.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>

namespace gridagent {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

std::string fmt(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string hex64(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Off-goal pairing for the conditioning check: the next atomic skill, cyclically.
std::string other_goal(const std::string& goal) {
  const auto& goals = atomic_eval_goals();
  for (std::size_t i = 0; i < goals.size(); ++i) {
    if (goals[i] == goal) return goals[(i + 1) % goals.size()];
  }
  return goals.front() == goal ? goals.back() : goals.front();
}

// Episode i uses instruction i % count.
std::vector<double> successes(Policy& policy, const std::string& task_name, const std::vector<std::uint64_t>& seeds,
                              const EvalConfig& cfg, const CraftGraph& graph,
                              const std::vector<std::string>& instructions) {
  const TaskConfig task = TaskConfig::builtin(task_name, graph);
  std::vector<double> out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& text = instructions[i % instructions.size()];
    const SubGoal g = subgoal_for_goal(graph, task_name, task.unit_target * task.units_min, text);
    out.push_back(rollout(policy, {g}, seeds[i], task, graph, cfg.subgoal_budget).success ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace

EvalConfig EvalConfig::from_config(const KeyValueConfig& kv) {
  EvalConfig c;
  c.n = static_cast<int>(kv.get_int("eval.n", c.n));
  c.seed = static_cast<std::uint64_t>(kv.get_int("eval.seed", static_cast<long long>(c.seed)));
  c.subgoal_budget = static_cast<int>(kv.get_int("eval.subgoal_budget", c.subgoal_budget));
  c.long_horizon_cap = static_cast<int>(kv.get_int("eval.long_horizon_cap", c.long_horizon_cap));
  const std::string select = kv.get_string("eval.select", c.select == SelectMode::argmax ? "argmax" : "sample");
  if (select == "argmax") c.select = SelectMode::argmax;
  else if (select == "sample") c.select = SelectMode::sample;
  else throw ConfigError("eval.select must be argmax or sample, got " + select);
  c.temperature = kv.get_double("eval.temperature", c.temperature);
  if (!(c.temperature > 0.0)) throw ConfigError("eval.temperature must be positive");
  if (kv.has("eval.atomic_tasks")) c.atomic_tasks = split_list(kv.raw("eval.atomic_tasks"));
  if (kv.has("eval.long_horizon_tasks")) c.long_horizon_tasks = split_list(kv.raw("eval.long_horizon_tasks"));
  if (c.n < 1) throw ConfigError("eval.n must be >= 1");
  if (c.subgoal_budget < 1 || c.long_horizon_cap < 1) throw ConfigError("eval budgets must be positive");
  for (const auto& t : c.atomic_tasks) {
    if (!is_known_goal(t)) throw ConfigError("unknown atomic task: " + t);
  }
  for (const auto& t : c.long_horizon_tasks) TaskConfig::builtin(t);
  return c;
}

const std::set<std::string>& EvalConfig::known_keys() {
  static const std::set<std::string> keys = {"eval.n", "eval.seed", "eval.subgoal_budget", "eval.long_horizon_cap",
                                             "eval.atomic_tasks", "eval.long_horizon_tasks", "eval.select",
                                             "eval.temperature"};
  return keys;
}

std::vector<std::uint64_t> EvalConfig::seeds(const std::string& stream) const {
  // Dataset seeds start at 1e9, so this range never overlaps training worlds.
  const std::uint64_t base = (seed * 7919ULL + fnv1a(stream)) % 800'000'000ULL;
  std::vector<std::uint64_t> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = base + static_cast<std::uint64_t>(i);
  return out;
}

AtomicRow eval_atomic(Policy& policy, const std::string& task_name, const EvalConfig& cfg, const CraftGraph& graph,
                      const std::string& commanded_goal) {
  const TaskConfig task = TaskConfig::builtin(task_name, graph);
  const std::string goal = commanded_goal.empty() ? task_name : commanded_goal;
  const TaskConfig goal_task = goal == task_name ? task : TaskConfig::builtin(goal, graph);
  AtomicRow row;
  row.task = task_name;
  row.policy = policy.name();
  row.instruction = InstructionPool::default_pool().render(goal, Split::train, 0);
  row.seeds = cfg.seeds("atomic:" + task_name);
  // The episode ends when the commanded goal is met, so an off-goal command
  // only scores target items picked up along the way. Capping at the task's
  // own quota is the same as also stopping once the task itself succeeds.
  const SubGoal g = subgoal_for_goal(graph, goal, goal_task.unit_target * goal_task.units_min, row.instruction);
  const int quota = task.unit_target * task.units_min;
  for (auto seed : row.seeds) {
    const auto r = rollout(policy, {g}, seed, task, graph, cfg.subgoal_budget);
    const int got = at(r.final_state.inventory, task.target);
    row.rewards.push_back(goal == task_name ? got : std::min(got, quota));
  }
  row.mean = mean(row.rewards);
  row.std = stddev(row.rewards);
  return row;
}

LongHorizonRow eval_long_horizon(Policy& policy, const std::string& task_name, const EvalConfig& cfg,
                                 const CraftGraph& graph, const InstructionPool& pool) {
  TaskConfig task = TaskConfig::builtin(task_name, graph);
  task.step_cap = cfg.long_horizon_cap;
  const auto plan = plan_subgoals(graph, task.target, task.start_inventory, 1, pool);
  LongHorizonRow row;
  row.task = task_name;
  row.depth = graph.depth(task.target);
  row.plan_length = static_cast<int>(plan.size());
  row.first_failed.assign(plan.size(), 0);
  for (auto seed : cfg.seeds("long:" + task_name)) {
    const auto r = rollout(policy, plan, seed, task, graph, cfg.subgoal_budget);
    row.outcomes.push_back(r.success);
    if (r.success) ++row.successes;
    if (r.first_failed >= 0) ++row.first_failed[static_cast<std::size_t>(r.first_failed)];
  }
  row.n = static_cast<int>(row.outcomes.size());
  row.success_rate = row.n ? static_cast<double>(row.successes) / row.n : 0.0;
  return row;
}

OpenEndedRow eval_open_ended(Policy& policy, const std::string& task_name, const EvalConfig& cfg,
                             const CraftGraph& graph, const InstructionPool& pool) {
  OpenEndedRow row;
  row.task = task_name;
  row.n = cfg.n;
  const auto seeds = cfg.seeds("open:" + task_name);
  row.train_rate = mean(successes(policy, task_name, seeds, cfg, graph, pool.rendered(task_name, Split::train)));
  const auto heldout = pool.rendered(task_name, Split::heldout);
  const auto held = successes(policy, task_name, seeds, cfg, graph, heldout);
  row.heldout_rate = mean(held);
  row.gap = row.train_rate - row.heldout_rate;
  for (std::size_t t = 0; t < heldout.size(); ++t) {
    std::vector<double> subset;
    for (std::size_t i = t; i < held.size(); i += heldout.size()) subset.push_back(held[i]);
    row.heldout_per_template.push_back(mean(subset));
  }
  return row;
}

nlohmann::json to_json(const AtomicRow& row) {
  return {{"task", row.task},   {"policy", row.policy}, {"instruction", row.instruction},
          {"n", row.rewards.size()}, {"mean_reward", row.mean}, {"std", row.std},
          {"rewards", row.rewards}, {"seeds", row.seeds}};
}

nlohmann::json to_json(const LongHorizonRow& row) {
  return {{"task", row.task},
          {"depth", row.depth},
          {"plan_length", row.plan_length},
          {"n", row.n},
          {"successes", row.successes},
          {"success_rate", row.success_rate},
          {"first_failed", row.first_failed},
          {"outcomes", row.outcomes}};
}

nlohmann::json to_json(const OpenEndedRow& row) {
  return {{"task", row.task},
          {"n", row.n},
          {"train_success_rate", row.train_rate},
          {"heldout_success_rate", row.heldout_rate},
          {"gap", row.gap},
          {"heldout_per_template", row.heldout_per_template}};
}

EvalReport evaluate_suite(Policy& policy, const std::string& suite, const EvalConfig& cfg, const CraftGraph& graph,
                          const std::string& fingerprint, const std::string& checkpoint_hash,
                          const InstructionPool& pool) {
  if (suite != "atomic" && suite != "long-horizon" && suite != "open-ended" && suite != "all") {
    throw ConfigError("unknown suite: " + suite + " (expected atomic, long-horizon, open-ended or all)");
  }
  EvalReport report;
  auto& d = report.data;
  d["policy"] = policy.name();
  d["suite"] = suite;
  d["n"] = cfg.n;
  d["eval_seed"] = cfg.seed;
  d["config_fingerprint"] = fingerprint;
  d["checkpoint_hash"] = checkpoint_hash;
  if (suite == "atomic" || suite == "all") {
    d["atomic"] = nlohmann::json::array();
    for (const auto& t : cfg.atomic_tasks) {
      auto row = to_json(eval_atomic(policy, t, cfg, graph));
      const auto off = eval_atomic(policy, t, cfg, graph, other_goal(t));
      row["off_goal_instruction"] = off.instruction;
      row["off_goal_mean_reward"] = off.mean;
      d["atomic"].push_back(std::move(row));
    }
  }
  if (suite == "long-horizon" || suite == "all") {
    d["long_horizon"] = nlohmann::json::array();
    for (const auto& t : cfg.long_horizon_tasks) d["long_horizon"].push_back(to_json(eval_long_horizon(policy, t, cfg, graph, pool)));
  }
  if (suite == "open-ended" || suite == "all") {
    d["open_ended"] = nlohmann::json::array();
    for (const auto& t : cfg.atomic_tasks) d["open_ended"].push_back(to_json(eval_open_ended(policy, t, cfg, graph, pool)));
  }
  return report;
}

std::string EvalReport::markdown() const {
  std::ostringstream out;
  out << "# Evaluation: " << data.value("policy", "") << "\n\n";
  out << "config `" << data.value("config_fingerprint", "") << "`, checkpoint `" << data.value("checkpoint_hash", "")
      << "`, n = " << data.value("n", 0) << "\n\n";
  if (data.contains("atomic")) {
    out << "## Atomic tasks\n\n| task | n | mean reward | std | off-goal mean |\n|---|---|---|---|---|\n";
    for (const auto& r : data["atomic"]) {
      out << "| " << r["task"].get<std::string>() << " | " << r["n"].get<int>() << " | " << fmt(r["mean_reward"])
          << " | " << fmt(r["std"]) << " | " << fmt(r.value("off_goal_mean_reward", 0.0)) << " |\n";
    }
    out << "\n";
  }
  if (data.contains("long_horizon")) {
    out << "## Long-horizon tasks\n\n| task | depth | sub-goals | n | success rate | first failed |\n"
           "|---|---|---|---|---|---|\n";
    for (const auto& r : data["long_horizon"]) {
      out << "| " << r["task"].get<std::string>() << " | " << r["depth"].get<int>() << " | "
          << r["plan_length"].get<int>() << " | " << r["n"].get<int>() << " | " << fmt(r["success_rate"]) << " | "
          << r["first_failed"].dump() << " |\n";
    }
    out << "\n";
  }
  if (data.contains("open_ended")) {
    out << "## Open-ended instructions\n\n| task | n | train SR | held-out SR | gap |\n|---|---|---|---|---|\n";
    for (const auto& r : data["open_ended"]) {
      out << "| " << r["task"].get<std::string>() << " | " << r["n"].get<int>() << " | "
          << fmt(r["train_success_rate"]) << " | " << fmt(r["heldout_success_rate"]) << " | " << fmt(r["gap"])
          << " |\n";
    }
    out << "\n";
  }
  return out.str();
}

EmbeddingSet collect_embeddings(Model& model, const std::vector<std::string>& tasks, const EvalConfig& cfg,
                                const CraftGraph& graph) {
  EmbeddingSet set;
  set.label_names = tasks;
  const int d = model.config().d();
  std::vector<Eigen::RowVectorXd> beh, raw;
  ModelPolicy policy(model, cfg.select, cfg.temperature);
  const auto& pool = InstructionPool::default_pool();
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const TaskConfig task = TaskConfig::builtin(tasks[k], graph);
    const SubGoal g = subgoal_for_goal(graph, tasks[k], task.unit_target * task.units_min,
                                       pool.render(tasks[k], Split::train, 0));
    for (auto seed : cfg.seeds("embed:" + tasks[k])) {
      rollout(policy, {g}, seed, task, graph, cfg.subgoal_budget);
      beh.push_back(policy.last_behavior().colwise().mean());
      raw.push_back(policy.last_obs_features().colwise().mean());
      set.labels.push_back(static_cast<int>(k));
    }
  }
  set.behavior.resize(static_cast<Eigen::Index>(beh.size()), d);
  set.raw.resize(static_cast<Eigen::Index>(raw.size()), d);
  for (std::size_t i = 0; i < beh.size(); ++i) {
    set.behavior.row(static_cast<Eigen::Index>(i)) = beh[i];
    set.raw.row(static_cast<Eigen::Index>(i)) = raw[i];
  }
  return set;
}

void write_embeddings_csv(const std::filesystem::path& path, const Mat& rows, const std::vector<int>& labels,
                          const std::vector<std::string>& names) {
  if (static_cast<std::size_t>(rows.rows()) != labels.size()) throw Error("embedding rows and labels differ in count");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "label";
  for (Eigen::Index j = 0; j < rows.cols(); ++j) out << ",e" << j;
  out << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out << names.at(static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]));
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", rows(i, j));
      out << buf;
    }
    out << "\n";
  }
}

void read_embeddings_csv(const std::filesystem::path& path, Mat& rows, std::vector<int>& labels,
                         std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("empty embedding file " + path.string());
  std::vector<std::string> header;
  boost::split(header, line, boost::is_any_of(","));
  if (header.empty() || header[0] != "label") throw Error("embedding file lacks a label column");
  const auto cols = static_cast<Eigen::Index>(header.size() - 1);
  std::vector<std::vector<double>> values;
  labels.clear();
  names.clear();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    boost::split(cells, line, boost::is_any_of(","));
    if (static_cast<Eigen::Index>(cells.size()) != cols + 1) throw Error("ragged embedding row in " + path.string());
    auto it = std::find(names.begin(), names.end(), cells[0]);
    if (it == names.end()) it = names.insert(names.end(), cells[0]);
    labels.push_back(static_cast<int>(it - names.begin()));
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(std::stod(cells[j]));
    values.push_back(std::move(row));
  }
  rows.resize(static_cast<Eigen::Index>(values.size()), cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) rows(static_cast<Eigen::Index>(i), j) = values[i][static_cast<std::size_t>(j)];
  }
}

const std::vector<AblationSpec>& ablation_grid() {
  static const std::vector<AblationSpec> grid = {
      {"full", true, true, true},
      {"none", false, false, false},
      {"cp_only", true, false, false},
      {"ha_mb", false, true, true},
      {"cp_ha", true, true, false},
  };
  return grid;
}

ModelConfig apply_ablation(ModelConfig cfg, const AblationSpec& spec) {
  cfg.encoder.disable_cp = !spec.cp;
  cfg.encoder.disable_ha = !spec.ha;
  cfg.encoder.disable_mb = !spec.mb;
  return cfg;
}

nlohmann::json run_ablations(const AblationRequest& req, const Vocab& vocab, const Corpus& corpus,
                             const CraftGraph& graph) {
  if (req.seeds.empty()) throw ConfigError("ablation needs at least one training seed");
  std::vector<AblationSpec> specs;
  for (const auto& s : ablation_grid()) {
    if (req.configs.empty() || std::find(req.configs.begin(), req.configs.end(), s.name) != req.configs.end()) {
      specs.push_back(s);
    }
  }
  if (specs.empty() || specs.front().name != "full") throw ConfigError("ablation grid must include the full model");

  nlohmann::json eval_key = {{"n", req.eval.n}, {"seed", req.eval.seed}, {"budget", req.eval.subgoal_budget},
                             {"tasks", req.eval.atomic_tasks}, {"select", req.eval.select == SelectMode::argmax ? "argmax" : "sample"},
                             {"temperature", req.eval.temperature}};
  // rewards[config] = concatenation over (seed, task, episode), same order for every config.
  std::map<std::string, std::vector<double>> rewards;
  std::map<std::string, std::map<std::string, std::vector<double>>> per_task;
  nlohmann::json cells = nlohmann::json::array();

  for (auto seed : req.seeds) {
    const auto seed_dir = req.out_dir / ("seed_" + std::to_string(seed));
    ModelConfig base = req.model;
    base.init_seed = seed;
    TrainConfig tcfg = req.train;
    tcfg.seed = seed;
    std::filesystem::path teacher;
    for (const auto& spec : specs) {
      const auto run_dir = seed_dir / spec.name;
      const auto start = std::chrono::steady_clock::now();
      TrainRequest treq;
      treq.resume = req.resume;
      treq.run_dir = run_dir;
      treq.teacher_checkpoint = teacher;
      const auto outcome = run_training(apply_ablation(base, spec), vocab, corpus, corpus, tcfg, treq);
      if (teacher.empty()) teacher = outcome.teacher_checkpoint;

      Model model = Model::load(outcome.final_checkpoint);
      const std::string ckpt_hash = hex64(model.params().hash());
      const auto cache_path = run_dir / "ablation_eval.json";
      nlohmann::json cell;
      if (req.resume && std::filesystem::exists(cache_path)) {
        std::ifstream in(cache_path);
        nlohmann::json cached = nlohmann::json::parse(in, nullptr, false);
        if (!cached.is_discarded() && cached.value("checkpoint_hash", "") == ckpt_hash && cached["eval"] == eval_key) {
          cell = cached;
        }
      }
      if (cell.is_null()) {
        ModelPolicy policy(model, req.eval.select, req.eval.temperature);
        cell = {{"config", spec.name}, {"seed", seed}, {"checkpoint_hash", ckpt_hash}, {"eval", eval_key}};
        for (const auto& t : req.eval.atomic_tasks) cell["tasks"][t] = eval_atomic(policy, t, req.eval, graph).rewards;
        std::ofstream out(cache_path);
        out << cell.dump(2) << "\n";
      }
      int epochs = 0;
      for (const auto& r : outcome.rows) {
        if (r.split == "val") ++epochs;
      }
      cell["epochs_run"] = epochs;
      cell["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      for (const auto& t : req.eval.atomic_tasks) {
        const auto r = cell["tasks"][t].get<std::vector<double>>();
        rewards[spec.name].insert(rewards[spec.name].end(), r.begin(), r.end());
        per_task[spec.name][t].insert(per_task[spec.name][t].end(), r.begin(), r.end());
      }
      cells.push_back(cell);
    }
  }

  nlohmann::json table;
  table["seeds"] = req.seeds;
  table["tasks"] = req.eval.atomic_tasks;
  table["n"] = req.eval.n;
  table["cells"] = cells;
  table["rows"] = nlohmann::json::array();
  const double full_mean = mean(rewards["full"]);
  for (const auto& spec : specs) {
    nlohmann::json row;
    row["config"] = spec.name;
    row["cp"] = spec.cp;
    row["ha"] = spec.ha;
    row["mb"] = spec.mb;
    for (const auto& t : req.eval.atomic_tasks) row["task_mean"][t] = mean(per_task[spec.name][t]);
    const double m = mean(rewards[spec.name]);
    row["mean_reward"] = m;
    row["delta_pct"] = spec.name == "full" || full_mean == 0.0 ? 0.0 : 100.0 * (m - full_mean) / full_mean;
    const auto above = paired_sign_test(rewards[spec.name], rewards["full"]);
    const auto below = paired_sign_test(rewards["full"], rewards[spec.name]);
    row["sign_test_above_full"] = {{"wins", above.wins}, {"losses", above.losses}, {"ties", above.ties},
                                   {"p_value", above.p_value}};
    row["sign_test_below_full_p"] = below.p_value;
    table["rows"].push_back(row);
  }
  return table;
}

std::string ablation_markdown(const nlohmann::json& table) {
  std::ostringstream out;
  out << "| CP | HA | MB | config |";
  for (const auto& t : table["tasks"]) out << " " << t.get<std::string>() << " |";
  out << " mean | delta | p(above full) |\n|---|---|---|---|";
  for (std::size_t i = 0; i < table["tasks"].size(); ++i) out << "---|";
  out << "---|---|---|\n";
  auto mark = [](bool on) { return on ? "x" : " "; };
  for (const auto& r : table["rows"]) {
    out << "| " << mark(r["cp"]) << " | " << mark(r["ha"]) << " | " << mark(r["mb"]) << " | "
        << r["config"].get<std::string>() << " |";
    for (const auto& t : table["tasks"]) out << " " << fmt(r["task_mean"][t.get<std::string>()]) << " |";
    out << " " << fmt(r["mean_reward"]) << " | " << fmt(r["delta_pct"], 1) << "% | "
        << fmt(r["sign_test_above_full"]["p_value"]) << " |\n";
  }
  return out.str();
}

}  // namespace gridagent
