#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "gridagent/episode_io.hpp"
#include "gridagent/losses.hpp"
#include "gridagent/policy.hpp"

namespace gridagent {

enum class Phase { teacher, pretrain, finetune };
std::string phase_name(Phase phase);

class TrainingInterrupted : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  double teacher_lr = 1e-4;
  double pretrain_lr = 1e-4;
  double finetune_lr = 4e-5;
  int teacher_epochs = 5;
  int pretrain_epochs = 5;
  int finetune_epochs = 10;
  int batch_episodes = 16;
  int bptt_window = 32;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LossConfig loss;
  int patience = 3;
  double val_fraction = 0.05;
  std::uint64_t seed = 0;
  long long inject_nan_at_step = -1;  // test hook: poison the loss at this optimizer step
  int interrupt_after_epochs = -1;    // test hook: stop the process after this many epochs
  bool epoch_checkpoints = true;

  static TrainConfig from_config(const KeyValueConfig& cfg);
  static const std::set<std::string>& known_keys();
  double lr(Phase phase) const;
  int epochs(Phase phase) const;
};

// Deterministic ~val_fraction hold-out keyed on (goal, seed).
bool is_validation_episode(const Episode& ep, double val_fraction);

struct Corpus {
  std::vector<Episode> train;
  std::vector<Episode> val;
  static Corpus split(std::vector<Episode> episodes, double val_fraction);
};

struct MetricRow {
  std::string phase;
  int epoch = 0;
  std::string split;
  double bc = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  long long steps = 0;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);

// Decoupled weight decay Adam. Decay applies to matrices, not to vectors.
class AdamW {
 public:
  void step(ParamStore& store, double lr, const TrainConfig& cfg);
  long long t() const { return t_; }
  std::map<std::string, Mat>& m() { return m_; }
  std::map<std::string, Mat>& v() { return v_; }
  void set_t(long long t) { t_ = t; }

 private:
  long long t_ = 0;
  std::map<std::string, Mat> m_;
  std::map<std::string, Mat> v_;
};

struct PhaseResult {
  int epochs_run = 0;
  bool early_stopped = false;
  double best_val = 0.0;
  std::vector<MetricRow> rows;
};

struct PhaseOptions {
  std::filesystem::path run_dir;      // empty: nothing written
  bool resume = false;
  std::vector<MetricRow> prior_rows;  // earlier phases, kept at the top of metrics.csv
  int* epochs_left = nullptr;         // shared epoch budget for interrupt tests
};

// Trains `model` for one phase. Pretrain and teacher phases train everything
// with BC only; finetune freezes the observation embedder and encoder stack and
// adds the KL term against `teacher`. With a run directory, per-epoch state is
// saved there and `resume` continues from it bit-exactly.
PhaseResult run_phase(Model& model, const Model* teacher, const Corpus& corpus, Phase phase, const TrainConfig& cfg,
                      const PhaseOptions& opts = {});

// Mean BC loss of `model` over every step of `episodes`.
double evaluate_bc(Model& model, const std::vector<Episode>& episodes);

// Full schedule: teacher (if finetune is requested and none is given), pretrain,
// finetune. Writes teacher.ckpt, pretrain.ckpt, final.ckpt and metrics.csv.
struct TrainRequest {
  bool pretrain = true;
  bool finetune = true;
  bool resume = false;
  std::filesystem::path run_dir;
  std::filesystem::path teacher_checkpoint;  // reuse instead of training one
  std::filesystem::path init_checkpoint;     // start finetune from this model
};

struct TrainOutcome {
  std::filesystem::path final_checkpoint;
  std::filesystem::path teacher_checkpoint;
  std::vector<MetricRow> rows;
};

TrainOutcome run_training(const ModelConfig& model_cfg, const Vocab& vocab, const Corpus& corpus,
                          const Corpus& teacher_corpus, const TrainConfig& cfg, const TrainRequest& req);

}  // namespace gridagent
