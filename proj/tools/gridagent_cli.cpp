// Single entry point: gen-data, train, eval, ablate, export-embeddings, play.
// Exit codes: 0 success, 1 user or config error, 2 internal failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "gridagent/run_config.hpp"

using namespace gridagent;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI config file");
  cmd->add_option("--set", c.overrides, "override, section.key=value (repeatable)");
}

// Relative output paths land under GRIDAGENT_OUTPUT_ROOT when it is set.
fs::path output_path(const std::string& p) {
  fs::path path(p);
  const char* root = std::getenv("GRIDAGENT_OUTPUT_ROOT");
  if (root && *root && path.is_relative()) return fs::path(root) / path;
  return path;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string hex64(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Corpus load_split_corpus(const fs::path& data, const RunConfig& rc) {
  auto episodes = load_corpus(data);
  if (episodes.empty()) throw ConfigError("no episodes in " + data.string());
  return Corpus::split(std::move(episodes), rc.train.val_fraction);
}

int cmd_gen_data(const Common& c, const std::vector<std::string>& goals, int n, int workers, const std::string& out) {
  RunConfig rc = RunConfig::resolve(c.config, c.overrides);
  if (!goals.empty()) rc.dataset.goals = goals;
  if (n > 0) rc.dataset.n_per_goal = n;
  if (workers > 0) rc.dataset.workers = workers;
  const fs::path dir = output_path(out);
  rc.write_snapshot(dir);
  const auto manifest = build_dataset(rc.dataset, dir, rc.graph);
  const auto audit = audit_dataset(dir, rc.graph);
  std::cout << "episodes " << manifest["total_episodes"] << " in " << dir.string() << "\n";
  if (!audit.ok()) {
    for (const auto& p : audit.problems) std::cerr << "audit: " << p << "\n";
    return 2;
  }
  std::cout << "audit ok: " << audit.episodes << " episodes replay exactly\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& phase, const std::string& data, const std::string& out,
              bool resume, const std::string& teacher) {
  const RunConfig rc = RunConfig::resolve(c.config, c.overrides);
  if (phase != "pretrain" && phase != "finetune" && phase != "both") {
    throw ConfigError("--phase must be pretrain, finetune or both");
  }
  const fs::path dir = output_path(out);
  rc.write_snapshot(dir);
  const Corpus corpus = load_split_corpus(data, rc);
  TrainRequest req;
  req.pretrain = phase != "finetune";
  req.finetune = phase != "pretrain";
  req.resume = resume;
  req.run_dir = dir;
  req.teacher_checkpoint = teacher;
  // A finetune-only run picks up the teacher its pretrain run left behind.
  if (teacher.empty() && phase == "finetune" && fs::exists(dir / "teacher.ckpt")) req.teacher_checkpoint = dir / "teacher.ckpt";
  if (phase == "finetune") {
    req.init_checkpoint = dir / "pretrain.ckpt";
    if (!fs::exists(req.init_checkpoint)) throw ConfigError("finetune needs " + req.init_checkpoint.string());
  }
  const Vocab vocab = Vocab::build(InstructionPool::default_pool());
  const auto outcome = run_training(rc.model, vocab, corpus, corpus, rc.train, req);
  std::cout << "checkpoint " << outcome.final_checkpoint.string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& suite, int n,
             const std::string& policy_kind, const std::string& out) {
  RunConfig rc = RunConfig::resolve(c.config, c.overrides);
  if (n > 0) rc.eval.n = n;
  std::optional<Model> model;
  std::string ckpt_hash = "none";
  if (policy_kind == "model") {
    if (checkpoint.empty()) throw ConfigError("--checkpoint is required for the model policy");
    model.emplace(Model::load(checkpoint));
    ckpt_hash = hex64(model->params().hash());
  }
  auto policy = make_policy(policy_kind, rc.graph, model ? &*model : nullptr, rc.eval.select, rc.eval.temperature);
  const auto report = evaluate_suite(*policy, suite, rc.eval, rc.graph, rc.fingerprint(), ckpt_hash);
  const fs::path dir = output_path(out);
  rc.write_snapshot(dir);
  write_text(dir / "report.json", report.data.dump(2) + "\n");
  write_text(dir / "report.md", report.markdown());
  std::cout << report.markdown();
  return 0;
}

int cmd_ablate(const Common& c, const std::string& data, const std::string& out, const std::vector<std::uint64_t>& seeds,
               const std::vector<std::string>& configs) {
  const RunConfig rc = RunConfig::resolve(c.config, c.overrides);
  const fs::path dir = output_path(out);
  rc.write_snapshot(dir);
  AblationRequest req;
  req.model = rc.model;
  req.train = rc.train;
  req.eval = rc.eval;
  req.seeds = seeds;
  req.out_dir = dir;
  req.configs = configs;
  const Corpus corpus = load_split_corpus(data, rc);
  const auto table = run_ablations(req, Vocab::build(InstructionPool::default_pool()), corpus, rc.graph);
  write_text(dir / "ablation.json", table.dump(2) + "\n");
  write_text(dir / "ablation.md", ablation_markdown(table));
  std::cout << ablation_markdown(table);
  return 0;
}

int cmd_export(const Common& c, const std::string& checkpoint, int n, const std::string& out, bool raw) {
  RunConfig rc = RunConfig::resolve(c.config, c.overrides);
  if (n > 0) rc.eval.n = n;
  Model model = Model::load(checkpoint);
  const auto set = collect_embeddings(model, rc.eval.atomic_tasks, rc.eval, rc.graph);
  const fs::path path = output_path(out);
  write_embeddings_csv(path, set.behavior, set.labels, set.label_names);
  if (raw) {
    fs::path raw_path = path;
    raw_path.replace_filename(path.stem().string() + "_raw" + path.extension().string());
    write_embeddings_csv(raw_path, set.raw, set.labels, set.label_names);
  }
  std::cout << set.labels.size() << " embeddings written to " << path.string() << "\n";
  return 0;
}

int cmd_play(const Common& c, std::uint64_t seed, const std::string& task_name, const std::string& policy_kind,
             const std::string& checkpoint) {
  const RunConfig rc = RunConfig::resolve(c.config, c.overrides);
  const TaskConfig task = rc.task && rc.task->name == task_name ? *rc.task : TaskConfig::builtin(task_name, rc.graph);
  std::vector<SubGoal> plan;
  const auto& pool = InstructionPool::default_pool();
  if (task.kind == TaskKind::long_horizon) {
    plan = plan_subgoals(rc.graph, task.target, task.start_inventory, 1, pool);
  } else {
    plan = {subgoal_for_goal(rc.graph, task_name, task.unit_target * task.units_min, pool.render(task_name, Split::train, 0))};
  }
  std::optional<Model> model;
  if (!checkpoint.empty()) model.emplace(Model::load(checkpoint));
  auto policy = make_policy(policy_kind, rc.graph, model ? &*model : nullptr, rc.eval.select, rc.eval.temperature);
  int frame = 0;
  const auto result = rollout(*policy, plan, seed, task, rc.graph, task.step_cap, ObsConfig{},
                              [&](const WorldState& s, ActionId a) {
                                std::cout << "frame " << frame++ << " tick " << s.tick << "\n"
                                          << render_text(s) << "action " << action_name(rc.graph, a) << "\n\n";
                              });
  std::cout << "frame " << frame << " tick " << result.final_state.tick << "\n" << render_text(result.final_state);
  std::cout << (result.success ? "success" : "failure") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridagent: goal-conditioned behavior cloning in a crafting gridworld"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, abl_c, exp_c, play_c;
  std::vector<std::string> goals;
  int gen_n = 0, workers = 0;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen-data", "generate expert demonstration shards");
  add_common(gen, gen_c);
  gen->add_option("--goals", goals, "goal ids (default: all)")->delimiter(',');
  gen->add_option("--n", gen_n, "episodes per goal");
  gen->add_option("--workers", workers, "worker threads");
  gen->add_option("--out", gen_out, "output directory");

  std::string phase = "both", train_data = "data", train_out = "run", teacher;
  bool resume = false;
  auto* train = app.add_subcommand("train", "two-phase training");
  add_common(train, train_c);
  train->add_option("--phase", phase, "pretrain, finetune or both");
  train->add_option("--data", train_data, "dataset directory");
  train->add_option("--out", train_out, "run directory");
  train->add_option("--teacher", teacher, "existing teacher checkpoint");
  train->add_flag("--resume", resume, "continue from the run directory's state");

  std::string eval_ckpt, suite = "all", eval_policy = "model", eval_out = "eval";
  int eval_n = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a policy");
  add_common(eval, eval_c);
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint");
  eval->add_option("--suite", suite, "atomic, long-horizon, open-ended or all");
  eval->add_option("--n", eval_n, "rollouts per task (default from config, 30)");
  eval->add_option("--policy", eval_policy, "model, expert or random");
  eval->add_option("--out", eval_out, "report directory");

  std::string abl_data = "data", abl_out = "ablation";
  std::vector<std::uint64_t> abl_seeds = {0, 1, 2};
  std::vector<std::string> abl_configs;
  auto* abl = app.add_subcommand("ablate", "encoder ablation grid");
  add_common(abl, abl_c);
  abl->add_option("--data", abl_data, "dataset directory");
  abl->add_option("--out", abl_out, "output directory");
  abl->add_option("--seeds", abl_seeds, "training seeds")->delimiter(',');
  abl->add_option("--configs", abl_configs, "subset of full,none,cp_only,ha_mb,cp_ha")->delimiter(',');

  std::string exp_ckpt, exp_out = "embeddings.csv";
  int exp_n = 0;
  bool exp_raw = false;
  auto* exp = app.add_subcommand("export-embeddings", "write final behavior embeddings as CSV");
  add_common(exp, exp_c);
  exp->add_option("--checkpoint", exp_ckpt, "model checkpoint")->required();
  exp->add_option("--n", exp_n, "episodes per task");
  exp->add_option("--out", exp_out, "CSV path");
  exp->add_flag("--raw", exp_raw, "also write raw observation features");

  std::uint64_t play_seed = 0;
  std::string play_task = "collect_logs", play_policy = "expert", play_ckpt;
  auto* play = app.add_subcommand("play", "print the frames of one rollout");
  add_common(play, play_c);
  play->add_option("--seed", play_seed, "world seed");
  play->add_option("--task", play_task, "task name");
  play->add_option("--policy", play_policy, "expert, random or model");
  play->add_option("--checkpoint", play_ckpt, "model checkpoint for --policy model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(gen_c, goals, gen_n, workers, gen_out);
    if (*train) return cmd_train(train_c, phase, train_data, train_out, resume, teacher);
    if (*eval) return cmd_eval(eval_c, eval_ckpt, suite, eval_n, eval_policy, eval_out);
    if (*abl) return cmd_ablate(abl_c, abl_data, abl_out, abl_seeds, abl_configs);
    if (*exp) return cmd_export(exp_c, exp_ckpt, exp_n, exp_out, exp_raw);
    if (*play) return cmd_play(play_c, play_seed, play_task, play_policy, play_ckpt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const GraphError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
