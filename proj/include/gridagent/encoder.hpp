#pragma once

#include <vector>

#include "gridagent/autodiff.hpp"
#include "gridagent/params.hpp"

namespace gridagent {

struct EncoderConfig {
  int d = 64;
  int n_b = 8;              // behavior token count
  int bank_capacity = 16;   // L
  int num_actions = 14;     // START sentinel uses id num_actions
  bool disable_cp = false;  // causal perceiver becomes the identity
  bool disable_ha = false;  // history attend becomes the identity
  bool disable_mb = false;  // bank drops its oldest entry instead of merging
};

// Parameters live under "enc.": per site (cp, ha, fu) wq/wk/wv/wo, plus the
// action embedding and the learned initial query bank. Every wo starts at zero.
void add_encoder_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng);

// queries + softmax(q k^T / sqrt(d)) v W_O with q = queries W_Q, k = context W_K,
// v = context W_V. Parameters "<site>.wq" etc.
Var cross_attend(ParamStore& store, const std::string& site, const Var& queries, const Var& context);

// Mean over row pairs of the cosine similarity; zero-norm rows count as 0.
double mean_row_cosine(const Mat& a, const Mat& b);
// Adjacent pair (i, i+1) with the highest mean row cosine; lowest i on ties.
int most_similar_pair(const std::vector<Mat>& entries);

// Ordered bounded store of past behavior tokens with merge weights.
class MemoryBank {
 public:
  explicit MemoryBank(int capacity = 16, bool merge = true) : capacity_(capacity), merge_(merge) {}

  void insert(const Var& tokens);
  bool empty() const { return entries_.empty(); }
  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  const std::vector<Var>& entries() const { return entries_; }
  const std::vector<int>& weights() const { return weights_; }
  long long total_weight() const;
  // All entries stacked row-wise (size() * n_b rows).
  Var stacked() const;
  // Re-creates every entry as a constant on `tape`, cutting the gradient path.
  void detach_to(Tape& tape);

 private:
  int capacity_;
  bool merge_;
  std::vector<Var> entries_;
  std::vector<int> weights_;
};

struct EncoderState {
  MemoryBank bank;
  long long steps = 0;
  Var last_tokens;  // most recent output, for embedding export

  explicit EncoderState(const EncoderConfig& cfg) : bank(cfg.bank_capacity, !cfg.disable_mb) {}
  void detach_to(Tape& tape);
};

Var causal_perceive(ParamStore& store, const EncoderConfig& cfg, const Var& v, int a_prev);
Var history_attend(ParamStore& store, const EncoderConfig& cfg, const Var& b_query, const MemoryBank& bank);
Var fuse_observation(ParamStore& store, const EncoderConfig& cfg, const Var& b_hat, const Var& v_hat);

struct EncodeResult {
  Var behavior;  // fused tokens, n_b x d
  Var v_hat;     // observation features after the causal perceiver
};

// causal_perceive -> history_attend -> fuse_observation -> memory insert.
// `v` must live on the same tape as the state's bank.
EncodeResult encode_step(ParamStore& store, const EncoderConfig& cfg, EncoderState& state, const Var& v, int a_prev);

}  // namespace gridagent
