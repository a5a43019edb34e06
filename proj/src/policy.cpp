#include "gridagent/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace gridagent {

namespace {

const std::vector<std::string> kReserved = {"<pad>", "<unk>", "<goal>"};

std::vector<std::string> split_words(const std::string& text) {
  std::string clean;
  clean.reserve(text.size());
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      clean.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      clean.push_back(' ');
    } else if (c == '_' || c == '-') {
      clean.push_back(' ');
    }
  }
  std::istringstream in(clean);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::string layer_key(int layer, const std::string& name) { return "bb.l" + std::to_string(layer) + "." + name; }

}  // namespace

Vocab::Vocab() : words_(kReserved) {}

Vocab Vocab::build(const InstructionPool& pool) {
  std::set<std::string> words;
  for (const auto& s : pool.all_rendered()) {
    for (auto& w : split_words(s)) words.insert(w);
  }
  Vocab v;
  v.words_.insert(v.words_.end(), words.begin(), words.end());
  return v;
}

Vocab Vocab::from_json(const nlohmann::json& j) {
  Vocab v;
  v.words_ = j.get<std::vector<std::string>>();
  if (v.words_.size() < kReserved.size() || !std::equal(kReserved.begin(), kReserved.end(), v.words_.begin())) {
    throw Error("vocabulary lacks the reserved tokens");
  }
  return v;
}

nlohmann::json Vocab::to_json() const { return words_; }

int Vocab::id(const std::string& word) const {
  for (std::size_t i = 0; i < kReserved.size(); ++i) {
    if (word == kReserved[i]) return static_cast<int>(i);
  }
  auto it = std::lower_bound(words_.begin() + static_cast<std::ptrdiff_t>(kReserved.size()), words_.end(), word);
  if (it != words_.end() && *it == word) return static_cast<int>(it - words_.begin());
  return kUnk;
}

std::vector<int> tokenize_goal(const std::string& instruction, const Vocab& vocab, int g_max) {
  std::vector<int> ids(static_cast<std::size_t>(g_max), Vocab::kPad);
  const auto words = split_words(instruction);
  for (std::size_t i = 0; i < words.size() && i < ids.size(); ++i) ids[i] = vocab.id(words[i]);
  return ids;
}

const std::set<std::string>& ModelConfig::known_keys() {
  static const std::set<std::string> keys = {
      "model.d",         "model.n_b",       "model.bank_capacity", "model.pool_rows", "model.g_max",
      "model.layers",    "model.heads",     "model.ffn_mult",      "model.head_hidden", "model.obs_radius",
      "model.inv_clip",  "model.init_seed", "model.disable_cp",    "model.disable_ha", "model.disable_mb"};
  return keys;
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& cfg, int num_actions) {
  ModelConfig m;
  m.encoder.num_actions = num_actions;
  m.encoder.d = static_cast<int>(cfg.get_int("model.d", m.encoder.d));
  m.encoder.n_b = static_cast<int>(cfg.get_int("model.n_b", m.encoder.n_b));
  m.encoder.bank_capacity = static_cast<int>(cfg.get_int("model.bank_capacity", m.encoder.bank_capacity));
  m.encoder.disable_cp = cfg.get_bool("model.disable_cp", false);
  m.encoder.disable_ha = cfg.get_bool("model.disable_ha", false);
  m.encoder.disable_mb = cfg.get_bool("model.disable_mb", false);
  m.pool_rows = static_cast<int>(cfg.get_int("model.pool_rows", m.pool_rows));
  m.g_max = static_cast<int>(cfg.get_int("model.g_max", m.g_max));
  m.layers = static_cast<int>(cfg.get_int("model.layers", m.layers));
  m.heads = static_cast<int>(cfg.get_int("model.heads", m.heads));
  m.ffn_mult = static_cast<int>(cfg.get_int("model.ffn_mult", m.ffn_mult));
  m.head_hidden = static_cast<int>(cfg.get_int("model.head_hidden", m.head_hidden));
  m.obs_radius = static_cast<int>(cfg.get_int("model.obs_radius", m.obs_radius));
  m.inv_clip = static_cast<int>(cfg.get_int("model.inv_clip", m.inv_clip));
  m.init_seed = static_cast<std::uint64_t>(cfg.get_int("model.init_seed", 0));
  m.validate();
  return m;
}

void ModelConfig::validate() const {
  if (encoder.d < 1 || encoder.n_b < 1 || encoder.bank_capacity < 1) throw ConfigError("model sizes must be positive");
  if (heads < 1 || encoder.d % heads != 0) throw ConfigError("model.d must be divisible by model.heads");
  if (layers < 1) throw ConfigError("model.layers must be >= 1");
  if (pool_rows < 1 || pool_rows > patches()) throw ConfigError("model.pool_rows must lie in [1, patch count]");
  if (g_max < 1) throw ConfigError("model.g_max must be >= 1");
  if (obs_radius < 1) throw ConfigError("model.obs_radius must be >= 1");
  if (inv_clip < 1) throw ConfigError("model.inv_clip must be >= 1");
  if (ffn_mult < 1 || head_hidden < 1) throw ConfigError("model widths must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"d", encoder.d},
          {"n_b", encoder.n_b},
          {"bank_capacity", encoder.bank_capacity},
          {"num_actions", encoder.num_actions},
          {"disable_cp", encoder.disable_cp},
          {"disable_ha", encoder.disable_ha},
          {"disable_mb", encoder.disable_mb},
          {"obs_radius", obs_radius},
          {"inv_clip", inv_clip},
          {"pool_rows", pool_rows},
          {"g_max", g_max},
          {"layers", layers},
          {"heads", heads},
          {"ffn_mult", ffn_mult},
          {"head_hidden", head_hidden},
          {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.encoder.d = j.at("d");
  m.encoder.n_b = j.at("n_b");
  m.encoder.bank_capacity = j.at("bank_capacity");
  m.encoder.num_actions = j.at("num_actions");
  m.encoder.disable_cp = j.at("disable_cp");
  m.encoder.disable_ha = j.at("disable_ha");
  m.encoder.disable_mb = j.at("disable_mb");
  m.obs_radius = j.at("obs_radius");
  m.inv_clip = j.at("inv_clip");
  m.pool_rows = j.at("pool_rows");
  m.g_max = j.at("g_max");
  m.layers = j.at("layers");
  m.heads = j.at("heads");
  m.ffn_mult = j.at("ffn_mult");
  m.head_hidden = j.at("head_hidden");
  m.init_seed = j.at("init_seed");
  m.validate();
  return m;
}

Model::Model(ModelConfig cfg, Vocab vocab, bool goal_blind)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), goal_blind_(goal_blind) {
  cfg_.validate();
  Rng rng = make_rng(cfg_.init_seed, fnv1a(goal_blind_ ? "teacher" : "student"));
  const int d = cfg_.d();
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  params_.add("obs.cell_emb", normal_mat(kCellKindCount, d, 0.5, rng));
  params_.add("obs.pos_emb", normal_mat(cfg_.patches(), d, 0.5, rng));
  params_.add("obs.facing_emb", normal_mat(4, d, 0.5, rng));
  params_.add("obs.inv_proj", normal_mat(kItemCount, d, 0.5, rng));
  params_.add("obs.tool_emb", normal_mat(4, d, 0.5, rng));
  add_encoder_params(params_, cfg_.encoder, rng);
  params_.add("goal.emb", normal_mat(vocab_.size(), d, 1.0, rng));
  params_.add("bb.pos", normal_mat(cfg_.max_sequence(), d, 0.5, rng));
  params_.add("bb.act_query", normal_mat(1, d, 1.0, rng));
  const int f = d * cfg_.ffn_mult;
  for (int l = 0; l < cfg_.layers; ++l) {
    params_.add(layer_key(l, "ln1.g"), Mat::Ones(1, d));
    params_.add(layer_key(l, "ln1.b"), Mat::Zero(1, d));
    params_.add(layer_key(l, "wq"), normal_mat(d, d, s, rng));
    params_.add(layer_key(l, "wk"), normal_mat(d, d, s, rng));
    params_.add(layer_key(l, "wv"), normal_mat(d, d, s, rng));
    params_.add(layer_key(l, "wo"), normal_mat(d, d, s, rng));
    params_.add(layer_key(l, "ln2.g"), Mat::Ones(1, d));
    params_.add(layer_key(l, "ln2.b"), Mat::Zero(1, d));
    params_.add(layer_key(l, "ff1.w"), normal_mat(d, f, s, rng));
    params_.add(layer_key(l, "ff1.b"), Mat::Zero(1, f));
    params_.add(layer_key(l, "ff2.w"), normal_mat(f, d, 1.0 / std::sqrt(static_cast<double>(f)), rng));
    params_.add(layer_key(l, "ff2.b"), Mat::Zero(1, d));
  }
  params_.add("bb.lnf.g", Mat::Ones(1, d));
  params_.add("bb.lnf.b", Mat::Zero(1, d));
  params_.add("head.w1", normal_mat(d, cfg_.head_hidden, s, rng));
  params_.add("head.b1", Mat::Zero(1, cfg_.head_hidden));
  params_.add("head.w2", normal_mat(cfg_.head_hidden, num_actions(), 1.0 / std::sqrt(static_cast<double>(cfg_.head_hidden)), rng));
  params_.add("head.b2", Mat::Zero(1, num_actions()));
}

std::vector<int> Model::goal_tokens(const std::string& instruction) const {
  if (goal_blind_) {
    std::vector<int> ids(static_cast<std::size_t>(cfg_.g_max), Vocab::kPad);
    ids[0] = Vocab::kSentinel;
    return ids;
  }
  return tokenize_goal(instruction, vocab_, cfg_.g_max);
}

Var Model::encode_observation(Tape& tape, const Observation& obs) {
  if (obs.radius != cfg_.obs_radius || static_cast<int>(obs.window.size()) != cfg_.patches()) {
    throw Error("observation window does not match the model config (radius " + std::to_string(obs.radius) + ")");
  }
  if (obs.facing >= 4 || obs.held_tool >= 4) throw Error("observation facing/tool id out of range");
  std::vector<int> ids(obs.window.begin(), obs.window.end());
  for (int id : ids) {
    if (id >= kCellKindCount) throw Error("observation cell id out of range");
  }
  Var cells = ad::add(ad::gather_rows(tape.param(params_.get("obs.cell_emb")), ids), tape.param(params_.get("obs.pos_emb")));
  // The facing embedding marks the patch the agent looks at. Broadcast to
  // every row it would shift all attention logits equally and vanish.
  const Pos front = step_toward(Pos{obs.radius, obs.radius}, static_cast<Facing>(obs.facing));
  Mat marker = Mat::Zero(cfg_.patches(), 1);
  marker(front.row * (2 * obs.radius + 1) + front.col, 0) = 1.0;
  cells = ad::add(cells, ad::matmul(tape.constant(std::move(marker)),
                                    ad::gather_rows(tape.param(params_.get("obs.facing_emb")), {obs.facing})));
  Mat inv(1, kItemCount);
  for (int i = 0; i < kItemCount; ++i) inv(0, i) = obs.inventory[static_cast<std::size_t>(i)] / static_cast<double>(cfg_.inv_clip);
  Var global = ad::add(ad::gather_rows(tape.param(params_.get("obs.tool_emb")), {obs.held_tool}),
                       ad::matmul(tape.constant(std::move(inv)), tape.param(params_.get("obs.inv_proj"))));
  return ad::add_row(cells, global);
}

Var Model::attention_block(const Var& x, int l, bool act_only) {
  Tape& t = *x.tape();
  auto P = [&](const std::string& n) { return t.param(params_.get(layer_key(l, n))); };
  const int d = cfg_.d();
  const int dh = d / cfg_.heads;
  const Var h = ad::layer_norm(x, P("ln1.g"), P("ln1.b"));
  const Var qsrc = act_only ? ad::slice_rows(h, h.rows() - 1, 1) : h;
  const Var q = ad::matmul(qsrc, P("wq"));
  const Var k = ad::matmul(h, P("wk"));
  const Var v = ad::matmul(h, P("wv"));
  std::vector<Var> heads;
  for (int i = 0; i < cfg_.heads; ++i) {
    heads.push_back(ad::attention(ad::slice_cols(q, i * dh, dh), ad::slice_cols(k, i * dh, dh), ad::slice_cols(v, i * dh, dh)));
  }
  const Var mixed = ad::matmul(cfg_.heads == 1 ? heads[0] : ad::concat_cols(heads), P("wo"));
  const Var resid = act_only ? ad::slice_rows(x, x.rows() - 1, 1) : x;
  const Var y = ad::add(resid, mixed);
  const Var ff = ad::add_row(
      ad::matmul(ad::gelu(ad::add_row(ad::matmul(ad::layer_norm(y, P("ln2.g"), P("ln2.b")), P("ff1.w")), P("ff1.b"))),
                 P("ff2.w")),
      P("ff2.b"));
  return ad::add(y, ff);
}

Var Model::act_head(const Var& act_embed) {
  Tape& t = *act_embed.tape();
  const Var hidden =
      ad::gelu(ad::add_row(ad::matmul(act_embed, t.param(params_.get("head.w1"))), t.param(params_.get("head.b1"))));
  return ad::add_row(ad::matmul(hidden, t.param(params_.get("head.w2"))), t.param(params_.get("head.b2")));
}

PolicyOutput Model::forward(Tape& tape, const std::vector<int>& goal, const Var& v, const Var& behavior) {
  if (static_cast<int>(goal.size()) != cfg_.g_max) throw Error("goal token length differs from g_max");
  if (v.rows() != cfg_.patches() || v.cols() != cfg_.d()) throw Error("observation features have the wrong shape");
  return forward_pooled(tape, goal, ad::pool_rows(v, cfg_.pool_rows), behavior);
}

PolicyOutput Model::forward_pooled(Tape& tape, const std::vector<int>& goal, const Var& pooled, const Var& behavior) {
  if (static_cast<int>(goal.size()) != cfg_.g_max) throw Error("goal token length differs from g_max");
  if (pooled.rows() != cfg_.pool_rows || pooled.cols() != cfg_.d()) throw Error("pooled features have the wrong shape");
  if (behavior.rows() != cfg_.encoder.n_b || behavior.cols() != cfg_.d()) throw Error("behavior tokens have the wrong shape");
  std::vector<int> ids;
  std::vector<int> positions;
  const std::vector<int> blind = goal_blind_ ? goal_tokens("") : std::vector<int>{};
  const auto& source = goal_blind_ ? blind : goal;
  for (int i = 0; i < cfg_.g_max; ++i) {
    const int id = source[static_cast<std::size_t>(i)];
    if (id == Vocab::kPad) continue;
    if (id < 0 || id >= vocab_.size()) throw Error("goal token id out of range");
    ids.push_back(id);
    positions.push_back(i);
  }
  std::vector<Var> parts;
  if (!ids.empty()) parts.push_back(ad::gather_rows(tape.param(params_.get("goal.emb")), ids));
  parts.push_back(pooled);
  parts.push_back(behavior);
  parts.push_back(tape.param(params_.get("bb.act_query")));
  for (int j = 0; j < cfg_.pool_rows + cfg_.encoder.n_b + 1; ++j) positions.push_back(cfg_.g_max + j);
  Var x = ad::add(ad::concat_rows(parts), ad::gather_rows(tape.param(params_.get("bb.pos")), positions));
  for (int l = 0; l < cfg_.layers; ++l) x = attention_block(x, l, l == cfg_.layers - 1);
  const Var act = ad::layer_norm(x, tape.param(params_.get("bb.lnf.g")), tape.param(params_.get("bb.lnf.b")));
  PolicyOutput out{act_head(act), act};
  if (!out.logits.value().allFinite()) {
    throw NumericError("non-finite logits in policy forward (parameters finite: " +
                       std::string(params_.all_finite() ? "yes" : "no") + ")");
  }
  return out;
}

StepOutput Model::step(Tape& tape, EncoderState& state, const std::vector<int>& goal, const Observation& obs, int a_prev) {
  const Var v = encode_observation(tape, obs);
  const EncodeResult enc = encode_step(params_, cfg_.encoder, state, v, a_prev);
  return {forward(tape, goal, v, enc.behavior), v, enc.behavior};
}

void Model::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  Archive a;
  a.meta = {{"kind", "gridagent-model"},
            {"model", cfg_.to_json()},
            {"vocab", vocab_.to_json()},
            {"goal_blind", goal_blind_},
            {"action_table_version", action::kActionTableVersion},
            {"extra", extra}};
  for (const auto& [name, p] : params_.all()) a.tensors.emplace(name, p.value);
  save_archive(path, a);
}

Model Model::load(const std::filesystem::path& path, nlohmann::json* meta) {
  Archive a = load_archive(path);
  if (a.meta.value("kind", "") != "gridagent-model") throw CheckpointError(path.string() + " is not a model checkpoint");
  if (a.meta.at("action_table_version") != action::kActionTableVersion) throw CheckpointError("action table version mismatch");
  Model m(ModelConfig::from_json(a.meta.at("model")), Vocab::from_json(a.meta.at("vocab")), a.meta.at("goal_blind"));
  for (auto& [name, p] : m.params_.all()) {
    auto it = a.tensors.find(name);
    if (it == a.tensors.end()) throw CheckpointError("checkpoint lacks tensor " + name);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
      throw CheckpointError("shape mismatch for tensor " + name);
    }
    p.value = it->second;
  }
  if (a.tensors.size() != m.params_.all().size()) throw CheckpointError("checkpoint has unexpected tensors");
  if (meta) *meta = a.meta;
  return m;
}

void Model::copy_params_from(const Model& other, const std::string& prefix) {
  for (auto& [name, p] : params_.all()) {
    if (name.rfind(prefix, 0) != 0 || !other.params().has(name)) continue;
    const Param& src = other.params().get(name);
    if (src.value.rows() == p.value.rows() && src.value.cols() == p.value.cols()) p.value = src.value;
  }
}

int select_action(const Mat& logits, SelectMode mode, double temperature, Rng& rng) {
  if (logits.rows() != 1 || logits.cols() < 1) throw Error("select_action expects a 1 x A logit row");
  if (!logits.allFinite()) throw NumericError("non-finite logits in select_action");
  if (mode == SelectMode::argmax) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.cols(); ++i) {
      if (logits(0, i) > logits(0, best)) best = i;
    }
    return static_cast<int>(best);
  }
  if (!(temperature > 0.0)) throw Error("sampling temperature must be positive");
  const Mat p = softmax_rows(Mat(logits / temperature));
  double u = uniform01(rng);
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    u -= p(0, i);
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(p.cols() - 1);
}

}  // namespace gridagent
