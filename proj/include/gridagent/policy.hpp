#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridagent/config.hpp"
#include "gridagent/encoder.hpp"
#include "gridagent/env.hpp"
#include "gridagent/instructions.hpp"

namespace gridagent {

// Word-level vocabulary. Ids 0..2 are reserved; the rest are sorted words.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSentinel = 2;  // the goal-blind teacher's only goal token

  Vocab();
  static Vocab build(const InstructionPool& pool);
  static Vocab from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  int id(const std::string& word) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  bool operator==(const Vocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
};

// Lowercase, strip punctuation, split on whitespace, map to ids, pad/truncate.
std::vector<int> tokenize_goal(const std::string& instruction, const Vocab& vocab, int g_max);

struct ModelConfig {
  EncoderConfig encoder;
  int obs_radius = 3;
  int inv_clip = 15;
  int pool_rows = 8;     // p
  int g_max = 24;
  int layers = 2;
  int heads = 2;
  int ffn_mult = 4;
  int head_hidden = 64;
  std::uint64_t init_seed = 0;

  int d() const { return encoder.d; }
  int patches() const { return (2 * obs_radius + 1) * (2 * obs_radius + 1); }
  int max_sequence() const { return g_max + pool_rows + encoder.n_b + 1; }

  static ModelConfig from_config(const KeyValueConfig& cfg, int num_actions);
  static const std::set<std::string>& known_keys();
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;
};

struct PolicyOutput {
  Var logits;      // 1 x A
  Var act_embed;   // 1 x d, read at the ACT position
};

struct StepOutput {
  PolicyOutput policy;
  Var obs_features;  // raw v, P x d
  Var behavior;      // fused behavior tokens, n_b x d
};

// Student or goal-blind teacher: observation embedder, encoder stack,
// transformer backbone and action head, all in one parameter store.
// Parameter groups: "obs." embedder, "enc." encoder stack, "goal." goal
// embedding, "bb." backbone, "head." action head.
class Model {
 public:
  Model(ModelConfig cfg, Vocab vocab, bool goal_blind);

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  bool goal_blind() const { return goal_blind_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  int num_actions() const { return cfg_.encoder.num_actions; }

  std::vector<int> goal_tokens(const std::string& instruction) const;

  Var encode_observation(Tape& tape, const Observation& obs);
  PolicyOutput forward(Tape& tape, const std::vector<int>& goal, const Var& v, const Var& behavior);
  // Same, from observation features already pooled to pool_rows x d.
  PolicyOutput forward_pooled(Tape& tape, const std::vector<int>& goal, const Var& pooled, const Var& behavior);
  Var act_head(const Var& act_embed);
  // One full step: embed, encode (updates state), predict.
  StepOutput step(Tape& tape, EncoderState& state, const std::vector<int>& goal, const Observation& obs, int a_prev);

  EncoderState initial_state() const { return EncoderState(cfg_.encoder); }
  int start_action() const { return cfg_.encoder.num_actions; }

  void save(const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object()) const;
  static Model load(const std::filesystem::path& path, nlohmann::json* meta = nullptr);
  // Copies every tensor present in both stores (teacher -> student warm start, ablation overrides).
  void copy_params_from(const Model& other, const std::string& prefix = "");

 private:
  Var attention_block(const Var& x, int layer, bool act_only);

  ModelConfig cfg_;
  Vocab vocab_;
  bool goal_blind_;
  ParamStore params_;
};

enum class SelectMode { argmax, sample };

// Argmax breaks ties toward the lowest id; sampling draws from softmax(logits / temperature).
int select_action(const Mat& logits, SelectMode mode, double temperature, Rng& rng);

}  // namespace gridagent
