#pragma once
// Long fuzz trajectories through the encoder stack, shared by the unit tests
// and the acceptance binary.

#include "numeric_checks.hpp"

namespace checks {

struct FuzzResult {
  bool shapes_ok = true;
  bool bank_bounded = true;
  bool weights_ok = true;
  bool identity_at_init = true;
  bool matches_oracle_bank = true;
  double oracle_rel = 0.0;  // worst scaled behavior-token gap to the loop oracle
  int first_mismatch = -1;
  int steps = 0;
};

inline FuzzResult encoder_fuzz(int steps, std::uint64_t seed, bool disable_mb = false) {
  const Vocab vocab = Vocab::build(InstructionPool::default_pool());
  ModelConfig cfg = tiny_config();
  cfg.encoder.bank_capacity = 5;
  cfg.encoder.disable_mb = disable_mb;
  cfg.init_seed = seed;
  Model fresh(cfg, vocab, false);  // untouched init: every output projection is zero
  Model trained(cfg, vocab, false);
  randomize(trained.params(), seed, 0.4);

  FuzzResult r;
  r.steps = steps;
  const auto obs = random_observations(steps, cfg.obs_radius, seed);
  Rng rng = make_rng(seed, 17);
  EncoderState s_fresh = fresh.initial_state();
  EncoderState s_trained = trained.initial_state();
  oracle::Bank bank{cfg.encoder.bank_capacity, !disable_mb, {}, {}};
  std::unique_ptr<Tape> tape = std::make_unique<Tape>(false);
  const Mat& q0 = fresh.params().get("enc.query").value;
  int prev = fresh.start_action();
  for (int t = 0; t < steps; ++t) {
    auto next = std::make_unique<Tape>(false);
    s_fresh.detach_to(*next);
    s_trained.detach_to(*next);
    tape = std::move(next);
    const auto& o = obs[static_cast<std::size_t>(t)];
    const auto a = encode_step(fresh.params(), cfg.encoder, s_fresh, fresh.encode_observation(*tape, o), prev);
    const Var v = trained.encode_observation(*tape, o);
    const auto b = encode_step(trained.params(), cfg.encoder, s_trained, v, prev);
    // Both banks receive the library's tokens, so round-off cannot compound
    // through the recurrence; each step is compared from identical state.
    const Mat stored = b.behavior.value();
    const auto ref = oracle::encode_step(trained.params(), cfg.encoder, bank, v.value(), prev, &stored);

    r.shapes_ok &= a.behavior.rows() == cfg.encoder.n_b && a.behavior.cols() == cfg.d() &&
                   b.behavior.rows() == cfg.encoder.n_b && b.behavior.cols() == cfg.d();
    r.identity_at_init &= a.behavior.value() == q0;  // exact equality
    r.bank_bounded &= s_fresh.bank.size() <= cfg.encoder.bank_capacity && s_trained.bank.size() <= cfg.encoder.bank_capacity;
    const long long absorbed = disable_mb ? std::min<long long>(t + 1, cfg.encoder.bank_capacity) : t + 1;
    r.weights_ok &= s_trained.bank.total_weight() == absorbed && s_fresh.bank.total_weight() == absorbed;
    // Randomized output projections can grow the tokens, so the gap is scaled.
    const double scale = std::max(1.0, ref.behavior.cwiseAbs().maxCoeff());
    const double gap = (b.behavior.value() - ref.behavior).cwiseAbs().maxCoeff() / scale;
    r.oracle_rel = std::max(r.oracle_rel, gap);
    const bool ok = s_trained.bank.weights() == bank.weights && gap < 1e-9;
    if (!ok && r.first_mismatch < 0) r.first_mismatch = t;
    r.matches_oracle_bank &= ok;
    prev = static_cast<int>(uniform_index(rng, 14));
  }
  return r;
}

}  // namespace checks
