#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "numeric_checks.hpp"

#include "gridagent/pipeline.hpp"
#include "gridagent/trainer.hpp"

using namespace gridagent;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Corpus tiny_corpus() {
  DatasetConfig cfg;
  std::vector<Episode> eps;
  std::uint64_t i = 0;
  for (const char* goal : {"collect_logs", "make_planks", "collect_dirt"}) {
    for (int k = 0; k < 10; ++k) eps.push_back(generate_episode(goal, dataset_seed(0, i++), cfg));
  }
  Corpus c;
  for (std::size_t k = 0; k < eps.size(); ++k) (k % 10 == 9 ? c.val : c.train).push_back(eps[k]);
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.teacher_epochs = 2;
  t.pretrain_epochs = 2;
  t.finetune_epochs = 2;
  t.batch_episodes = 8;
  t.bptt_window = 4;
  t.teacher_lr = t.pretrain_lr = t.finetune_lr = 3e-3;
  t.patience = 10;
  return t;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gridagent_train_" + name);
  fs::remove_all(p);
  return p;
}

ModelConfig tiny_model() {
  auto m = checks::tiny_config();
  m.obs_radius = 3;
  m.pool_rows = 8;
  m.g_max = 24;
  return m;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("AdamW matches a hand-computed update with decoupled decay on matrices only") {
  ParamStore store;
  store.add("w", Mat::Constant(2, 2, 1.0));
  store.add("b", Mat::Constant(1, 2, 1.0));
  store.get("w").grad = Mat::Constant(2, 2, 0.5);
  store.get("b").grad = Mat::Constant(1, 2, -0.5);
  TrainConfig cfg;
  AdamW adam;
  adam.step(store, 0.1, cfg);
  // First step: m_hat = g, v_hat = g^2, so the update is lr * sign(g) (up to eps).
  const double expect_w = 1.0 * (1.0 - 0.1 * 0.01) - 0.1 * 0.5 / (0.5 + 1e-8);
  const double expect_b = 1.0 + 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(store.get("w").value(0, 0) == doctest::Approx(expect_w).epsilon(1e-12));
  CHECK(store.get("b").value(0, 1) == doctest::Approx(expect_b).epsilon(1e-12));
}

TEST_CASE("validation hold-out is deterministic and near the requested fraction") {
  std::vector<Episode> eps(4000);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    eps[i].goal_id = i % 2 ? "collect_logs" : "make_planks";
    eps[i].seed = 1'000'000'000ULL + i;
    eps[i].steps.resize(1);
  }
  const auto a = Corpus::split(eps, 0.05);
  const auto b = Corpus::split(eps, 0.05);
  CHECK(a.val.size() == b.val.size());
  CHECK(a.val.size() + a.train.size() == eps.size());
  CHECK(a.val.size() > 120u);
  CHECK(a.val.size() < 280u);
}

TEST_CASE("training lowers the BC loss on a tiny corpus") {
  Model model(tiny_model(), Vocab::build(InstructionPool::default_pool()), false);
  const auto corpus = tiny_corpus();
  const double before = evaluate_bc(model, corpus.train);
  auto cfg = tiny_train();
  cfg.pretrain_epochs = 4;
  run_phase(model, nullptr, corpus, Phase::pretrain, cfg);
  CHECK(evaluate_bc(model, corpus.train) < before);
}

TEST_CASE("early stopping triggers when validation stops improving") {
  Model model(tiny_model(), Vocab::build(InstructionPool::default_pool()), false);
  auto cfg = tiny_train();
  cfg.pretrain_lr = 0.0;  // validation loss is flat
  cfg.pretrain_epochs = 6;
  cfg.patience = 2;
  const auto r = run_phase(model, nullptr, tiny_corpus(), Phase::pretrain, cfg);
  CHECK(r.early_stopped);
  CHECK(r.epochs_run == 3);
}

TEST_CASE("interrupt and resume reproduce the uninterrupted run bit-exactly") {
  const auto corpus = tiny_corpus();
  const Vocab vocab = Vocab::build(InstructionPool::default_pool());
  const auto cfg = tiny_train();
  const auto full = scratch("full");
  const auto split = scratch("split");
  TrainRequest req;
  req.run_dir = full;
  run_training(tiny_model(), vocab, corpus, corpus, cfg, req);

  auto icfg = cfg;
  icfg.interrupt_after_epochs = 3;  // stops inside the pretrain phase
  req.run_dir = split;
  CHECK_THROWS_AS(run_training(tiny_model(), vocab, corpus, corpus, icfg, req), TrainingInterrupted);
  CHECK_FALSE(fs::exists(split / "final.ckpt"));
  req.resume = true;
  run_training(tiny_model(), vocab, corpus, corpus, cfg, req);

  CHECK(slurp(full / "metrics.csv") == slurp(split / "metrics.csv"));
  CHECK(slurp(full / "final.ckpt") == slurp(split / "final.ckpt"));
  CHECK(slurp(full / "teacher.ckpt") == slurp(split / "teacher.ckpt"));
  fs::remove_all(full);
  fs::remove_all(split);
}

TEST_CASE("finetune leaves the observation embedder and encoder untouched") {
  const auto dir = scratch("frozen");
  TrainRequest req;
  req.run_dir = dir;
  const auto out = run_training(tiny_model(), Vocab::build(InstructionPool::default_pool()), tiny_corpus(),
                                tiny_corpus(), tiny_train(), req);
  const Model pre = Model::load(dir / "pretrain.ckpt");
  const Model fin = Model::load(out.final_checkpoint);
  CHECK(pre.params().hash("enc.") == fin.params().hash("enc."));
  CHECK(pre.params().hash("obs.") == fin.params().hash("obs."));
  CHECK(pre.params().hash("bb.") != fin.params().hash("bb."));
  const auto csv = slurp(dir / "metrics.csv");
  CHECK(csv.find("teacher,") != std::string::npos);
  CHECK(csv.find("finetune,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("injected NaN aborts with NumericError and keeps the last good state") {
  const auto dir = scratch("nan");
  auto cfg = tiny_train();
  cfg.inject_nan_at_step = 4;  // second epoch of the teacher phase
  TrainRequest req;
  req.run_dir = dir;
  std::string message;
  try {
    run_training(tiny_model(), Vocab::build(InstructionPool::default_pool()), tiny_corpus(), tiny_corpus(), cfg, req);
  } catch (const NumericError& e) {
    message = e.what();
  }
  CHECK(message.find("non-finite") != std::string::npos);
  CHECK(fs::exists(dir / "state_teacher.ckpt"));
  CHECK(fs::exists(dir / "checkpoints" / "teacher_e1.ckpt"));
  CHECK_NOTHROW(Model::load(dir / "checkpoints" / "teacher_e1.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("checkpoints round-trip and reject corruption") {
  const auto dir = scratch("ckpt");
  fs::create_directories(dir);
  Model model(tiny_model(), Vocab::build(InstructionPool::default_pool()), false);
  model.save(dir / "m.ckpt");
  const Model back = Model::load(dir / "m.ckpt");
  CHECK(back.params().hash() == model.params().hash());
  CHECK(back.vocab() == model.vocab());
  auto bytes = slurp(dir / "m.ckpt");
  std::ofstream(dir / "cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 9);
  CHECK_THROWS_AS(Model::load(dir / "cut.ckpt"), CheckpointError);
  fs::remove_all(dir);
}

TEST_CASE("training config rejects unknown keys and bad values") {
  CHECK(TrainConfig::from_config(KeyValueConfig::parse("[training]\nbatch_episodes = 4\n")).batch_episodes == 4);
  CHECK_THROWS_AS(TrainConfig::from_config(KeyValueConfig::parse("[training]\nbatch_episodes = 0\n")), ConfigError);
}

}
