#include "gridagent/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace gridagent {

namespace {

struct CachedEpisode {
  std::vector<int> goal;
  std::vector<int> actions;
  std::vector<Mat> pooled;
  std::vector<Mat> behavior;
  Mat teacher_logits;
};

struct EpisodeLoss {
  double bc = 0.0;  // sums over steps
  double kl = 0.0;
};

int prev_action(const Model& model, const Episode& ep, std::size_t t) {
  return t == 0 ? model.start_action() : ep.steps[t - 1].action;
}

// Full model pass with truncated backprop through time. Each window gets its
// own tape; the encoder state crosses window borders as constants.
EpisodeLoss run_episode_full(Model& model, const Episode& ep, double grad_scale, const TrainConfig& cfg, bool record) {
  EpisodeLoss loss;
  const auto goal = model.goal_tokens(ep.instruction);
  EncoderState state = model.initial_state();
  std::unique_ptr<Tape> tape;
  const std::size_t T = ep.steps.size();
  for (std::size_t start = 0; start < T; start += static_cast<std::size_t>(cfg.bptt_window)) {
    auto next = std::make_unique<Tape>(record);
    state.detach_to(*next);
    tape = std::move(next);
    std::vector<Var> rows;
    std::vector<int> actions;
    for (std::size_t t = start; t < std::min(T, start + static_cast<std::size_t>(cfg.bptt_window)); ++t) {
      rows.push_back(model.step(*tape, state, goal, ep.steps[t].obs, prev_action(model, ep, t)).policy.logits);
      actions.push_back(ep.steps[t].action);
    }
    const Var ce = ad::cross_entropy_sum(ad::concat_rows(rows), actions, cfg.loss.label_smoothing);
    loss.bc += ce.scalar();
    if (record) tape->backward(ad::scale(ce, grad_scale));
  }
  return loss;
}

CachedEpisode build_cache(Model& model, const Model* teacher, const Episode& ep, const TrainConfig& cfg) {
  CachedEpisode c;
  c.goal = model.goal_tokens(ep.instruction);
  const std::size_t T = ep.steps.size();
  for (const auto& s : ep.steps) c.actions.push_back(s.action);
  EncoderState state = model.initial_state();
  std::unique_ptr<Tape> tape;
  for (std::size_t t = 0; t < T; ++t) {
    if (t % static_cast<std::size_t>(cfg.bptt_window) == 0) {
      auto next = std::make_unique<Tape>(false);
      state.detach_to(*next);
      tape = std::move(next);
    }
    const Var v = model.encode_observation(*tape, ep.steps[t].obs);
    const auto enc = encode_step(model.params(), model.config().encoder, state, v, prev_action(model, ep, t));
    c.pooled.push_back(ad::pool_rows(v, model.config().pool_rows).value());
    c.behavior.push_back(enc.behavior.value());
  }
  if (teacher) {
    Model& tm = const_cast<Model&>(*teacher);
    c.teacher_logits.resize(static_cast<Eigen::Index>(T), tm.num_actions());
    const auto tgoal = tm.goal_tokens(ep.instruction);
    EncoderState ts = tm.initial_state();
    std::unique_ptr<Tape> tt;
    for (std::size_t t = 0; t < T; ++t) {
      if (t % static_cast<std::size_t>(cfg.bptt_window) == 0) {
        auto next = std::make_unique<Tape>(false);
        ts.detach_to(*next);
        tt = std::move(next);
      }
      const auto out = tm.step(*tt, ts, tgoal, ep.steps[t].obs, prev_action(tm, ep, t));
      c.teacher_logits.row(static_cast<Eigen::Index>(t)) = out.policy.logits.value().row(0);
    }
  }
  return c;
}

// Backbone-only pass over cached frozen features (finetune).
EpisodeLoss run_episode_cached(Model& model, const CachedEpisode& c, double grad_scale, const TrainConfig& cfg,
                               bool record, bool with_kl) {
  EpisodeLoss loss;
  const std::size_t T = c.actions.size();
  for (std::size_t start = 0; start < T; start += static_cast<std::size_t>(cfg.bptt_window)) {
    Tape tape(record);
    const std::size_t end = std::min(T, start + static_cast<std::size_t>(cfg.bptt_window));
    std::vector<Var> rows;
    for (std::size_t t = start; t < end; ++t) {
      rows.push_back(model.forward_pooled(tape, c.goal, tape.constant(c.pooled[t]), tape.constant(c.behavior[t])).logits);
    }
    const Var logits = ad::concat_rows(rows);
    const std::vector<int> actions(c.actions.begin() + static_cast<std::ptrdiff_t>(start),
                                   c.actions.begin() + static_cast<std::ptrdiff_t>(end));
    const Var ce = ad::cross_entropy_sum(logits, actions, cfg.loss.label_smoothing);
    loss.bc += ce.scalar();
    std::vector<Var> terms{ce};
    std::vector<double> weights{cfg.loss.lambda_bc};
    if (with_kl) {
      const Mat probs = softmax_rows(Mat(c.teacher_logits.middleRows(static_cast<Eigen::Index>(start),
                                                                      static_cast<Eigen::Index>(end - start))));
      const Var kl = ad::kl_sum(logits, probs);
      loss.kl += kl.scalar();
      terms.push_back(kl);
      weights.push_back(cfg.loss.lambda_kl);
    }
    if (record) tape.backward(ad::scale(ad::lincomb(terms, weights), grad_scale));
  }
  return loss;
}

nlohmann::json rows_to_json(const std::vector<MetricRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"phase", r.phase}, {"epoch", r.epoch}, {"split", r.split}, {"bc", r.bc}, {"kl", r.kl},
                   {"total", r.total}, {"grad_norm", r.grad_norm}, {"lr", r.lr}, {"steps", r.steps}});
  }
  return out;
}

std::vector<MetricRow> rows_from_json(const nlohmann::json& j) {
  std::vector<MetricRow> rows;
  for (const auto& r : j) {
    rows.push_back({r.at("phase"), r.at("epoch"), r.at("split"), r.at("bc"), r.at("kl"), r.at("total"),
                    r.at("grad_norm"), r.at("lr"), r.at("steps")});
  }
  return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << text;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct PhaseProgress {
  int epochs_done = 0;
  long long step = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  bool complete = false;
  bool early_stopped = false;
  std::vector<MetricRow> rows;
};

void save_state(const std::filesystem::path& path, const Model& model, AdamW& adam, const ParamStore& best,
                const PhaseProgress& p, Phase phase) {
  Archive a;
  a.meta = {{"kind", "gridagent-train-state"},
            {"phase", phase_name(phase)},
            {"epochs_done", p.epochs_done},
            {"step", p.step},
            {"best_val", std::isfinite(p.best_val) ? nlohmann::json(p.best_val) : nlohmann::json(nullptr)},
            {"bad_epochs", p.bad_epochs},
            {"complete", p.complete},
            {"early_stopped", p.early_stopped},
            {"adam_t", adam.t()},
            {"param_hash", model.params().hash()},
            {"rows", rows_to_json(p.rows)}};
  for (const auto& [name, prm] : model.params().all()) a.tensors.emplace("param/" + name, prm.value);
  for (const auto& [name, m] : adam.m()) a.tensors.emplace("adam_m/" + name, m);
  for (const auto& [name, v] : adam.v()) a.tensors.emplace("adam_v/" + name, v);
  for (const auto& [name, prm] : best.all()) a.tensors.emplace("best/" + name, prm.value);
  save_archive(path, a);
}

PhaseProgress load_state(const std::filesystem::path& path, Model& model, AdamW& adam, ParamStore& best, Phase phase) {
  Archive a = load_archive(path);
  if (a.meta.value("kind", "") != "gridagent-train-state" || a.meta.at("phase") != phase_name(phase)) {
    throw CheckpointError(path.string() + " is not a " + phase_name(phase) + " training state");
  }
  PhaseProgress p;
  p.epochs_done = a.meta.at("epochs_done");
  p.step = a.meta.at("step");
  p.best_val = a.meta.at("best_val").is_null() ? std::numeric_limits<double>::infinity() : a.meta.at("best_val").get<double>();
  p.bad_epochs = a.meta.at("bad_epochs");
  p.complete = a.meta.at("complete");
  p.early_stopped = a.meta.at("early_stopped");
  p.rows = rows_from_json(a.meta.at("rows"));
  adam.set_t(a.meta.at("adam_t"));
  for (auto& [name, prm] : model.params().all()) {
    auto it = a.tensors.find("param/" + name);
    if (it == a.tensors.end() || it->second.rows() != prm.value.rows() || it->second.cols() != prm.value.cols()) {
      throw CheckpointError("training state does not match the model (" + name + ")");
    }
    prm.value = it->second;
  }
  for (auto& [key, m] : a.tensors) {
    if (key.rfind("adam_m/", 0) == 0) adam.m()[key.substr(7)] = m;
    if (key.rfind("adam_v/", 0) == 0) adam.v()[key.substr(7)] = m;
    if (key.rfind("best/", 0) == 0) {
      const std::string name = key.substr(5);
      if (best.has(name)) {
        best.get(name).value = m;
      } else {
        best.add(name, m, false);
      }
    }
  }
  return p;
}

ParamStore snapshot(const ParamStore& store) {
  ParamStore copy;
  for (const auto& [name, p] : store.all()) copy.add(name, p.value, false);
  return copy;
}

}  // namespace

std::string phase_name(Phase phase) {
  switch (phase) {
    case Phase::teacher: return "teacher";
    case Phase::pretrain: return "pretrain";
    case Phase::finetune: return "finetune";
  }
  return "pretrain";
}

const std::set<std::string>& TrainConfig::known_keys() {
  static const std::set<std::string> keys = {
      "training.teacher_lr",     "training.pretrain_lr",     "training.finetune_lr",   "training.teacher_epochs",
      "training.pretrain_epochs", "training.finetune_epochs", "training.batch_episodes", "training.bptt_window",
      "training.weight_decay",   "training.grad_clip",       "training.beta1",         "training.beta2",
      "training.adam_eps",       "training.lambda_bc",       "training.lambda_kl",     "training.label_smoothing",
      "training.patience",       "training.val_fraction",    "training.seed",          "training.inject_nan_at_step",
      "training.interrupt_after_epochs", "training.epoch_checkpoints"};
  return keys;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig c;
  c.teacher_lr = cfg.get_double("training.teacher_lr", c.teacher_lr);
  c.pretrain_lr = cfg.get_double("training.pretrain_lr", c.pretrain_lr);
  c.finetune_lr = cfg.get_double("training.finetune_lr", c.finetune_lr);
  c.teacher_epochs = static_cast<int>(cfg.get_int("training.teacher_epochs", c.teacher_epochs));
  c.pretrain_epochs = static_cast<int>(cfg.get_int("training.pretrain_epochs", c.pretrain_epochs));
  c.finetune_epochs = static_cast<int>(cfg.get_int("training.finetune_epochs", c.finetune_epochs));
  c.batch_episodes = static_cast<int>(cfg.get_int("training.batch_episodes", c.batch_episodes));
  c.bptt_window = static_cast<int>(cfg.get_int("training.bptt_window", c.bptt_window));
  c.weight_decay = cfg.get_double("training.weight_decay", c.weight_decay);
  c.grad_clip = cfg.get_double("training.grad_clip", c.grad_clip);
  c.beta1 = cfg.get_double("training.beta1", c.beta1);
  c.beta2 = cfg.get_double("training.beta2", c.beta2);
  c.adam_eps = cfg.get_double("training.adam_eps", c.adam_eps);
  c.loss.lambda_bc = cfg.get_double("training.lambda_bc", c.loss.lambda_bc);
  c.loss.lambda_kl = cfg.get_double("training.lambda_kl", c.loss.lambda_kl);
  c.loss.label_smoothing = cfg.get_double("training.label_smoothing", c.loss.label_smoothing);
  c.patience = static_cast<int>(cfg.get_int("training.patience", c.patience));
  c.val_fraction = cfg.get_double("training.val_fraction", c.val_fraction);
  c.seed = static_cast<std::uint64_t>(cfg.get_int("training.seed", 0));
  c.inject_nan_at_step = cfg.get_int("training.inject_nan_at_step", c.inject_nan_at_step);
  c.interrupt_after_epochs = static_cast<int>(cfg.get_int("training.interrupt_after_epochs", c.interrupt_after_epochs));
  c.epoch_checkpoints = cfg.get_bool("training.epoch_checkpoints", c.epoch_checkpoints);
  c.loss.validate();
  if (c.batch_episodes < 1 || c.bptt_window < 1) throw ConfigError("batch and window sizes must be positive");
  if (c.teacher_epochs < 0 || c.pretrain_epochs < 0 || c.finetune_epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(c.teacher_lr > 0 && c.pretrain_lr > 0 && c.finetune_lr > 0)) throw ConfigError("learning rates must be positive");
  if (c.patience < 1) throw ConfigError("training.patience must be >= 1");
  if (c.val_fraction < 0.0 || c.val_fraction >= 1.0) throw ConfigError("training.val_fraction must lie in [0, 1)");
  return c;
}

double TrainConfig::lr(Phase phase) const {
  switch (phase) {
    case Phase::teacher: return teacher_lr;
    case Phase::pretrain: return pretrain_lr;
    case Phase::finetune: return finetune_lr;
  }
  return pretrain_lr;
}

int TrainConfig::epochs(Phase phase) const {
  switch (phase) {
    case Phase::teacher: return teacher_epochs;
    case Phase::pretrain: return pretrain_epochs;
    case Phase::finetune: return finetune_epochs;
  }
  return pretrain_epochs;
}

bool is_validation_episode(const Episode& ep, double val_fraction) {
  const std::uint64_t h = fnv1a(ep.goal_id + "#" + std::to_string(ep.seed));
  return static_cast<double>(h % 100000) < val_fraction * 100000.0;
}

Corpus Corpus::split(std::vector<Episode> episodes, double val_fraction) {
  Corpus c;
  for (auto& ep : episodes) {
    if (ep.steps.empty()) continue;
    (is_validation_episode(ep, val_fraction) ? c.val : c.train).push_back(std::move(ep));
  }
  return c;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "phase,epoch,split,bc,kl,total,grad_norm,lr,steps\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.phase << ',' << r.epoch << ',' << r.split << ',' << r.bc << ',' << r.kl << ',' << r.total << ','
        << r.grad_norm << ',' << r.lr << ',' << r.steps << '\n';
  }
  return out.str();
}

void AdamW::step(ParamStore& store, double lr, const TrainConfig& cfg) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (auto* p : store.trainable()) {
    auto& m = m_[p->name];
    auto& v = v_[p->name];
    if (m.size() == 0) {
      m = Mat::Zero(p->value.rows(), p->value.cols());
      v = Mat::Zero(p->value.rows(), p->value.cols());
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * p->grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * p->grad.cwiseProduct(p->grad);
    if (p->value.rows() > 1 && p->value.cols() > 1) p->value *= (1.0 - lr * cfg.weight_decay);
    p->value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
  }
}

double evaluate_bc(Model& model, const std::vector<Episode>& episodes) {
  TrainConfig cfg;
  double total = 0.0;
  long long steps = 0;
  for (const auto& ep : episodes) {
    total += run_episode_full(model, ep, 0.0, cfg, false).bc;
    steps += ep.length();
  }
  return steps ? total / static_cast<double>(steps) : 0.0;
}

PhaseResult run_phase(Model& model, const Model* teacher, const Corpus& corpus, Phase phase, const TrainConfig& cfg,
                      const PhaseOptions& opts) {
  if (corpus.train.empty()) throw Error("training corpus is empty");
  const bool finetune = phase == Phase::finetune;
  const bool with_kl = finetune && cfg.loss.lambda_kl > 0.0;
  if (with_kl && !teacher) throw Error("finetune with lambda_kl > 0 needs a teacher");
  if (phase == Phase::teacher && !model.goal_blind()) throw Error("teacher phase needs a goal-blind model");

  model.params().set_trainable("", true);
  if (finetune) {
    model.params().set_trainable("obs.", false);
    model.params().set_trainable("enc.", false);
  }
  const std::uint64_t frozen_hash = model.params().hash("enc.") ^ model.params().hash("obs.");

  AdamW adam;
  ParamStore best = snapshot(model.params());
  PhaseProgress prog;
  const std::filesystem::path state_path =
      opts.run_dir.empty() ? std::filesystem::path() : opts.run_dir / ("state_" + phase_name(phase) + ".ckpt");
  if (!opts.run_dir.empty()) std::filesystem::create_directories(opts.run_dir / "checkpoints");
  if (opts.resume && !state_path.empty() && std::filesystem::exists(state_path)) {
    prog = load_state(state_path, model, adam, best, phase);
  }
  const double lr = cfg.lr(phase);
  const int epochs = cfg.epochs(phase);

  auto write_metrics = [&] {
    if (opts.run_dir.empty()) return;
    auto all = opts.prior_rows;
    all.insert(all.end(), prog.rows.begin(), prog.rows.end());
    write_text(opts.run_dir / "metrics.csv", metrics_csv(all));
  };

  std::vector<CachedEpisode> train_cache;
  std::vector<CachedEpisode> val_cache;
  if (finetune && !prog.complete && prog.epochs_done < epochs) {
    for (const auto& ep : corpus.train) train_cache.push_back(build_cache(model, with_kl ? teacher : nullptr, ep, cfg));
    for (const auto& ep : corpus.val) val_cache.push_back(build_cache(model, nullptr, ep, cfg));
  }

  while (!prog.complete && prog.epochs_done < epochs) {
    if (opts.epochs_left && *opts.epochs_left == 0) {
      throw TrainingInterrupted("training interrupted after the configured number of epochs");
    }
    const int epoch = prog.epochs_done + 1;
    std::vector<std::size_t> order(corpus.train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(cfg.seed, fnv1a(phase_name(phase)) + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    double sum_bc = 0.0, sum_kl = 0.0, sum_gn = 0.0;
    long long steps = 0;
    int batches = 0;
    model.params().zero_grad();
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_episodes)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_episodes));
      long long n = 0;
      for (std::size_t i = b; i < e; ++i) n += corpus.train[order[i]].length();
      const double scale = 1.0 / static_cast<double>(n);
      EpisodeLoss batch;
      for (std::size_t i = b; i < e; ++i) {
        const EpisodeLoss l = finetune ? run_episode_cached(model, train_cache[order[i]], scale, cfg, true, with_kl)
                                       : run_episode_full(model, corpus.train[order[i]], scale, cfg, true);
        batch.bc += l.bc;
        batch.kl += l.kl;
      }
      double loss = (finetune ? cfg.loss.lambda_bc * batch.bc + cfg.loss.lambda_kl * batch.kl : batch.bc) * scale;
      if (cfg.inject_nan_at_step >= 0 && prog.step == cfg.inject_nan_at_step) loss = std::nan("");
      const double gn = model.params().grad_norm();
      if (!std::isfinite(loss) || !std::isfinite(gn)) {
        std::ostringstream msg;
        msg << "non-finite loss in " << phase_name(phase) << " epoch " << epoch << " step " << prog.step;
        if (!state_path.empty() && std::filesystem::exists(state_path)) msg << "; last good state: " << state_path.string();
        throw NumericError(msg.str());
      }
      if (gn > cfg.grad_clip) {
        for (auto* p : model.params().trainable()) p->grad *= cfg.grad_clip / gn;
      }
      adam.step(model.params(), lr, cfg);
      model.params().zero_grad();
      ++prog.step;
      ++batches;
      sum_bc += batch.bc;
      sum_kl += batch.kl;
      sum_gn += gn;
      steps += n;
    }
    if (finetune && (model.params().hash("enc.") ^ model.params().hash("obs.")) != frozen_hash) {
      throw std::logic_error("frozen parameters changed during finetune");
    }

    MetricRow tr{phase_name(phase), epoch, "train", sum_bc / steps, sum_kl / steps, 0.0, sum_gn / batches, lr, prog.step};
    tr.total = finetune ? cfg.loss.lambda_bc * tr.bc + cfg.loss.lambda_kl * tr.kl : tr.bc;
    prog.rows.push_back(tr);

    if (!corpus.val.empty()) {
      double vbc = 0.0;
      long long vsteps = 0;
      for (std::size_t i = 0; i < corpus.val.size(); ++i) {
        vbc += finetune ? run_episode_cached(model, val_cache[i], 0.0, cfg, false, false).bc
                        : run_episode_full(model, corpus.val[i], 0.0, cfg, false).bc;
        vsteps += corpus.val[i].length();
      }
      vbc /= static_cast<double>(vsteps);
      prog.rows.push_back({phase_name(phase), epoch, "val", vbc, 0.0, vbc, 0.0, lr, prog.step});
      if (vbc < prog.best_val) {
        prog.best_val = vbc;
        prog.bad_epochs = 0;
        best = snapshot(model.params());
      } else if (++prog.bad_epochs >= cfg.patience) {
        prog.early_stopped = true;
      }
    } else {
      best = snapshot(model.params());
    }
    prog.epochs_done = epoch;
    if (prog.early_stopped || prog.epochs_done >= epochs) {
      for (auto& [name, p] : model.params().all()) p.value = best.get(name).value;
      prog.complete = true;
    }
    if (!opts.run_dir.empty()) {
      if (cfg.epoch_checkpoints) {
        model.save(opts.run_dir / "checkpoints" / (phase_name(phase) + "_e" + std::to_string(epoch) + ".ckpt"),
                   {{"phase", phase_name(phase)}, {"epoch", epoch}});
      }
      write_metrics();
      save_state(state_path, model, adam, best, prog, phase);
    }
    if (opts.epochs_left && *opts.epochs_left > 0) --*opts.epochs_left;
  }
  if (epochs == 0) prog.complete = true;
  write_metrics();
  model.params().set_trainable("", true);

  PhaseResult r;
  r.epochs_run = prog.epochs_done;
  r.early_stopped = prog.early_stopped;
  r.best_val = prog.best_val;
  r.rows = prog.rows;
  return r;
}

TrainOutcome run_training(const ModelConfig& model_cfg, const Vocab& vocab, const Corpus& corpus,
                          const Corpus& teacher_corpus, const TrainConfig& cfg, const TrainRequest& req) {
  if (req.run_dir.empty()) throw ConfigError("training needs an output directory");
  std::filesystem::create_directories(req.run_dir);
  TrainOutcome out;
  int budget = cfg.interrupt_after_epochs;
  PhaseOptions opts;
  opts.run_dir = req.run_dir;
  opts.resume = req.resume;
  opts.epochs_left = budget >= 0 ? &budget : nullptr;

  std::unique_ptr<Model> teacher;
  if (req.finetune && cfg.loss.lambda_kl > 0.0) {
    if (!req.teacher_checkpoint.empty()) {
      teacher = std::make_unique<Model>(Model::load(req.teacher_checkpoint));
      if (!teacher->goal_blind()) throw ConfigError(req.teacher_checkpoint.string() + " is not a goal-blind teacher");
      out.teacher_checkpoint = req.teacher_checkpoint;
    } else {
      ModelConfig tcfg = model_cfg;
      tcfg.encoder.disable_cp = tcfg.encoder.disable_ha = tcfg.encoder.disable_mb = false;
      teacher = std::make_unique<Model>(tcfg, vocab, true);
      auto r = run_phase(*teacher, nullptr, teacher_corpus, Phase::teacher, cfg, opts);
      opts.prior_rows.insert(opts.prior_rows.end(), r.rows.begin(), r.rows.end());
      out.teacher_checkpoint = req.run_dir / "teacher.ckpt";
      teacher->save(out.teacher_checkpoint, {{"phase", "teacher"}});
    }
  }

  std::unique_ptr<Model> student;
  if (req.pretrain) {
    student = std::make_unique<Model>(model_cfg, vocab, false);
    auto r = run_phase(*student, nullptr, corpus, Phase::pretrain, cfg, opts);
    opts.prior_rows.insert(opts.prior_rows.end(), r.rows.begin(), r.rows.end());
    student->save(req.run_dir / "pretrain.ckpt", {{"phase", "pretrain"}});
  } else {
    if (req.init_checkpoint.empty()) throw ConfigError("finetune without pretrain needs an initial checkpoint");
    student = std::make_unique<Model>(Model::load(req.init_checkpoint));
    if (student->goal_blind()) throw ConfigError("cannot finetune a goal-blind checkpoint as the student");
  }
  if (req.finetune) {
    auto r = run_phase(*student, teacher.get(), corpus, Phase::finetune, cfg, opts);
    opts.prior_rows.insert(opts.prior_rows.end(), r.rows.begin(), r.rows.end());
  }
  out.final_checkpoint = req.run_dir / "final.ckpt";
  student->save(out.final_checkpoint, {{"phase", req.finetune ? "finetune" : "pretrain"}});
  out.rows = opts.prior_rows;
  write_text(req.run_dir / "metrics.csv", metrics_csv(out.rows));
  return out;
}

}  // namespace gridagent
