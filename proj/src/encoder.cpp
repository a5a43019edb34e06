#include "gridagent/encoder.hpp"

#include <cmath>
#include <numeric>

namespace gridagent {

void add_encoder_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  for (const char* site : {"enc.cp", "enc.ha", "enc.fu"}) {
    const std::string p(site);
    store.add(p + ".wq", normal_mat(cfg.d, cfg.d, s, rng));
    store.add(p + ".wk", normal_mat(cfg.d, cfg.d, s, rng));
    store.add(p + ".wv", normal_mat(cfg.d, cfg.d, s, rng));
    store.add(p + ".wo", Mat::Zero(cfg.d, cfg.d));
  }
  store.add("enc.action_emb", normal_mat(cfg.num_actions + 1, cfg.d, 1.0, rng));
  store.add("enc.query", normal_mat(cfg.n_b, cfg.d, 1.0, rng));
}

Var cross_attend(ParamStore& store, const std::string& site, const Var& queries, const Var& context) {
  Tape& t = *queries.tape();
  const Var q = ad::matmul(queries, t.param(store.get(site + ".wq")));
  const Var k = ad::matmul(context, t.param(store.get(site + ".wk")));
  const Var v = ad::matmul(context, t.param(store.get(site + ".wv")));
  const Var mixed = ad::matmul(ad::attention(q, k, v), t.param(store.get(site + ".wo")));
  return ad::add(queries, mixed);
}

double mean_row_cosine(const Mat& a, const Mat& b) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double na = a.row(r).norm();
    const double nb = b.row(r).norm();
    if (na > 0.0 && nb > 0.0) total += a.row(r).dot(b.row(r)) / (na * nb);
  }
  return a.rows() ? total / static_cast<double>(a.rows()) : 0.0;
}

int most_similar_pair(const std::vector<Mat>& entries) {
  int best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    const double s = mean_row_cosine(entries[i], entries[i + 1]);
    if (s > best_sim) {
      best_sim = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void MemoryBank::insert(const Var& tokens) {
  entries_.push_back(tokens);
  weights_.push_back(1);
  if (static_cast<int>(entries_.size()) <= capacity_) return;
  if (!merge_) {
    entries_.erase(entries_.begin());
    weights_.erase(weights_.begin());
    return;
  }
  std::vector<Mat> values;
  values.reserve(entries_.size());
  for (const auto& e : entries_) values.push_back(e.value());
  const auto i = static_cast<std::size_t>(most_similar_pair(values));
  const int w = weights_[i] + weights_[i + 1];
  entries_[i] = ad::lincomb({entries_[i], entries_[i + 1]},
                            {static_cast<double>(weights_[i]) / w, static_cast<double>(weights_[i + 1]) / w});
  weights_[i] = w;
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i) + 1);
  weights_.erase(weights_.begin() + static_cast<std::ptrdiff_t>(i) + 1);
}

long long MemoryBank::total_weight() const { return std::accumulate(weights_.begin(), weights_.end(), 0LL); }

Var MemoryBank::stacked() const { return ad::concat_rows(entries_); }

void MemoryBank::detach_to(Tape& tape) {
  for (auto& e : entries_) e = tape.constant(e.value());
}

void EncoderState::detach_to(Tape& tape) {
  bank.detach_to(tape);
  if (last_tokens.valid()) last_tokens = tape.constant(last_tokens.value());
}

Var causal_perceive(ParamStore& store, const EncoderConfig& cfg, const Var& v, int a_prev) {
  if (cfg.disable_cp) return v;
  if (a_prev < 0 || a_prev > cfg.num_actions) throw Error("previous action out of range: " + std::to_string(a_prev));
  Tape& t = *v.tape();
  const Var e = ad::gather_rows(t.param(store.get("enc.action_emb")), {a_prev});
  return cross_attend(store, "enc.cp", v, e);
}

Var history_attend(ParamStore& store, const EncoderConfig& cfg, const Var& b_query, const MemoryBank& bank) {
  if (cfg.disable_ha || bank.empty()) return b_query;
  return cross_attend(store, "enc.ha", b_query, bank.stacked());
}

Var fuse_observation(ParamStore& store, const EncoderConfig& /*cfg*/, const Var& b_hat, const Var& v_hat) {
  return cross_attend(store, "enc.fu", b_hat, v_hat);
}

EncodeResult encode_step(ParamStore& store, const EncoderConfig& cfg, EncoderState& state, const Var& v, int a_prev) {
  Tape& t = *v.tape();
  const Var v_hat = causal_perceive(store, cfg, v, a_prev);
  const Var b_hat = history_attend(store, cfg, t.param(store.get("enc.query")), state.bank);
  const Var fused = fuse_observation(store, cfg, b_hat, v_hat);
  state.bank.insert(fused);
  state.steps += 1;
  state.last_tokens = fused;
  return {fused, v_hat};
}

}  // namespace gridagent
