#include "gridagent/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>
#include <zlib.h>

namespace gridagent {

namespace {

constexpr std::uint64_t kDatasetSeedBase = 1'000'000'000ULL;
constexpr std::uint64_t kDatasetSeedStride = 1'000'000ULL;

// Checksum of the shard body, i.e. the value stored in its trailer. (A CRC
// over the whole file including its own trailer is a constant.)
std::uint32_t shard_crc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t body = bytes.size() >= 4 ? bytes.size() - 4 : 0;
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(body)));
}

// Runs fn(i) for i in [0, n) on `workers` threads.
template <typename Fn>
void parallel_for(int n, int workers, Fn fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

const std::set<std::string>& DatasetConfig::known_keys() {
  static const std::set<std::string> keys = {
      "dataset.epsilon",    "dataset.max_len", "dataset.attempt_cap", "dataset.max_target_count",
      "dataset.seed",       "dataset.n_per_goal", "dataset.workers",  "dataset.goals",
      "dataset.noisy",      "dataset.noisy_epsilon", "dataset.tool_grant_prob"};
  return keys;
}

DatasetConfig DatasetConfig::from_config(const KeyValueConfig& cfg) {
  DatasetConfig c;
  c.epsilon = cfg.get_double("dataset.epsilon", c.epsilon);
  c.max_len = static_cast<int>(cfg.get_int("dataset.max_len", c.max_len));
  c.attempt_cap = static_cast<int>(cfg.get_int("dataset.attempt_cap", c.attempt_cap));
  c.max_target_count = static_cast<int>(cfg.get_int("dataset.max_target_count", c.max_target_count));
  c.seed = static_cast<std::uint64_t>(cfg.get_int("dataset.seed", 0));
  c.n_per_goal = static_cast<int>(cfg.get_int("dataset.n_per_goal", c.n_per_goal));
  c.workers = static_cast<int>(cfg.get_int("dataset.workers", c.workers));
  c.noisy = cfg.get_bool("dataset.noisy", c.noisy);
  c.noisy_epsilon = cfg.get_double("dataset.noisy_epsilon", c.noisy_epsilon);
  c.tool_grant_prob = cfg.get_double("dataset.tool_grant_prob", c.tool_grant_prob);
  const std::string goals = cfg.get_string("dataset.goals", "");
  if (!goals.empty() && goals != "all") {
    boost::split(c.goals, goals, boost::is_any_of(", "), boost::token_compress_on);
    c.goals.erase(std::remove(c.goals.begin(), c.goals.end(), ""), c.goals.end());
    for (const auto& g : c.goals) {
      if (!is_known_goal(g)) throw ConfigError("dataset.goals: unknown goal " + g);
    }
  }
  if (c.n_per_goal < 1) throw ConfigError("dataset.n_per_goal must be >= 1");
  if (c.attempt_cap < 1) throw ConfigError("dataset.attempt_cap must be >= 1");
  if (c.max_target_count < 1) throw ConfigError("dataset.max_target_count must be >= 1");
  if (c.workers < 1) throw ConfigError("dataset.workers must be >= 1");
  ExpertConfig{c.epsilon, 0}.validate();
  if (!(c.noisy_epsilon >= 0.0 && c.noisy_epsilon < 0.5)) throw ConfigError("dataset.noisy_epsilon must lie in [0, 0.5)");
  if (!(c.tool_grant_prob >= 0.0 && c.tool_grant_prob <= 1.0)) throw ConfigError("dataset.tool_grant_prob must lie in [0, 1]");
  return c;
}

const std::vector<std::string>& DatasetConfig::goal_list() const {
  static const std::vector<std::string> all = all_goal_ids();
  return goals.empty() ? all : goals;
}

std::uint64_t dataset_seed(std::uint64_t base_seed, std::uint64_t attempt) {
  return kDatasetSeedBase + base_seed * kDatasetSeedStride + attempt;
}

TaskConfig dataset_task(const std::string& goal_id, const DatasetConfig& cfg, const CraftGraph& graph,
                        std::uint64_t seed) {
  TaskConfig task = TaskConfig::builtin(task_for_goal(goal_id), graph);
  task.units_min = 1;
  task.units_max = cfg.max_target_count;
  for (auto& [kind, count] : task.required_cells) count *= cfg.max_target_count;
  if (task.kind == TaskKind::atomic) {
    Rng rng = make_rng(seed, fnv1a("tool-grant:" + goal_id));
    if (uniform01(rng) < cfg.tool_grant_prob) {
      const int lo = std::max(1, gather_tier(task.target));
      const int tier = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(4 - lo)));
      for (int t = 1; t <= 3; ++t) at(task.start_inventory, pickaxe_for_tier(t)) = 0;
      at(task.start_inventory, pickaxe_for_tier(tier)) = 1;
    }
  }
  return task;
}

Episode generate_episode(const std::string& goal_id, std::uint64_t seed, const DatasetConfig& cfg,
                         const CraftGraph& graph, const InstructionPool& pool) {
  const TaskConfig task = dataset_task(goal_id, cfg, graph, seed);
  Env env(graph);
  Observation obs = env.reset(seed, task);

  Episode ep;
  ep.goal_id = goal_id;
  ep.seed = seed;
  Rng text_rng = make_rng(seed, fnv1a("instruction:" + goal_id));
  ep.instruction = sample_instruction(pool, goal_id, Split::train, text_rng);

  const ExpertConfig expert{cfg.effective_epsilon(), cfg.seed};
  expert.validate();
  Rng expert_rng = make_rng(seed ^ (cfg.seed * 0x9E3779B97F4A7C15ULL), fnv1a("expert:" + goal_id));
  const SubGoal goal = subgoal_for_goal(graph, goal_id, env.state().target_count, ep.instruction);
  while (!env.done()) {
    const ActionId a = expert_action(env.state(), goal, graph, expert, expert_rng);
    ep.steps.push_back({obs, a});
    obs = env.step(a).observation;
  }
  ep.success = success(env.state(), task);
  return ep;
}

bool filter_episode(const Episode& ep, const DatasetConfig& cfg) {
  if (cfg.noisy) return ep.length() <= cfg.max_len;
  return ep.success && ep.length() <= cfg.max_len;
}

nlohmann::json build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir, const CraftGraph& graph,
                             const InstructionPool& pool) {
  std::filesystem::create_directories(out_dir);
  std::vector<GoalStats> stats;
  for (const auto& goal : cfg.goal_list()) {
    const int cap = cfg.attempt_cap * cfg.n_per_goal;
    std::vector<Episode> kept;
    GoalStats st;
    st.goal_id = goal;
    // Attempts run in fixed-size blocks; the scan below keeps the first n
    // passing episodes in seed order, whatever the thread count.
    const int block = std::max(cfg.n_per_goal, 16);
    for (int start = 0; start < cap && static_cast<int>(kept.size()) < cfg.n_per_goal; start += block) {
      const int len = std::min(block, cap - start);
      std::vector<Episode> batch(static_cast<std::size_t>(len));
      parallel_for(len, cfg.workers, [&](int i) {
        batch[static_cast<std::size_t>(i)] =
            generate_episode(goal, dataset_seed(cfg.seed, static_cast<std::uint64_t>(start + i)), cfg, graph, pool);
      });
      for (int i = 0; i < len && static_cast<int>(kept.size()) < cfg.n_per_goal; ++i) {
        ++st.attempts;
        auto& ep = batch[static_cast<std::size_t>(i)];
        if (filter_episode(ep, cfg)) kept.push_back(std::move(ep));
      }
    }
    st.kept = static_cast<int>(kept.size());
    st.feasible = st.kept == cfg.n_per_goal;
    for (const auto& ep : kept) st.frames += ep.length();
    st.shard = goal + ".shard";
    write_shard(out_dir / st.shard, kept);
    stats.push_back(std::move(st));
  }

  nlohmann::json m;
  m["format"] = "gridagent-dataset";
  m["version"] = 1;
  m["shard_version"] = kShardVersion;
  m["action_table_version"] = action::kActionTableVersion;
  m["recipe_table_version"] = kRecipeTableVersion;
  m["config"] = {{"seed", cfg.seed},
                 {"epsilon", cfg.effective_epsilon()},
                 {"max_len", cfg.max_len},
                 {"attempt_cap", cfg.attempt_cap},
                 {"max_target_count", cfg.max_target_count},
                 {"n_per_goal", cfg.n_per_goal},
                 {"noisy", cfg.noisy},
                 {"tool_grant_prob", cfg.tool_grant_prob}};
  long long total_frames = 0;
  int total = 0;
  auto goals = nlohmann::json::array();
  auto infeasible = nlohmann::json::array();
  for (const auto& st : stats) {
    const double rejection = st.attempts ? 1.0 - static_cast<double>(st.kept) / st.attempts : 0.0;
    goals.push_back({{"goal_id", st.goal_id},
                     {"shard", st.shard},
                     {"shard_crc32", shard_crc(out_dir / st.shard)},
                     {"kept", st.kept},
                     {"attempts", st.attempts},
                     {"rejection_rate", rejection},
                     {"frames", st.frames},
                     {"mean_length", st.kept ? static_cast<double>(st.frames) / st.kept : 0.0},
                     {"feasible", st.feasible}});
    if (!st.feasible) infeasible.push_back(st.goal_id);
    total_frames += st.frames;
    total += st.kept;
  }
  m["goals"] = goals;
  m["infeasible_goals"] = infeasible;
  m["total_episodes"] = total;
  m["total_frames"] = total_frames;
  std::ofstream out(out_dir / "manifest.json");
  out << std::setw(2) << m << '\n';
  if (!out) throw Error("failed to write manifest in " + out_dir.string());
  return m;
}

bool replay_matches(const Episode& ep, const TaskConfig& task, const CraftGraph& graph) {
  Env env(graph, ObsConfig{ep.steps.empty() ? 3 : ep.steps.front().obs.radius});
  Observation obs = env.reset(ep.seed, task);
  for (const auto& s : ep.steps) {
    if (env.done() || !(obs == s.obs)) return false;
    if (s.action < 0 || s.action >= env.num_actions()) return false;
    obs = env.step(s.action).observation;
  }
  return env.done() && success(env.state(), task) == ep.success;
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("no manifest.json in " + dir.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed manifest in " + dir.string() + ": " + e.what());
  }
}

AuditReport audit_dataset(const std::filesystem::path& dir, const CraftGraph& graph) {
  const auto m = read_manifest(dir);
  DatasetConfig cfg;
  cfg.max_len = m.at("config").at("max_len");
  cfg.max_target_count = m.at("config").at("max_target_count");
  cfg.noisy = m.at("config").at("noisy");
  cfg.tool_grant_prob = m.at("config").at("tool_grant_prob");
  AuditReport report;
  for (const auto& g : m.at("goals")) {
    const std::string goal = g.at("goal_id");
    const auto episodes = read_shard(dir / g.at("shard").get<std::string>());
    if (static_cast<int>(episodes.size()) != g.at("kept").get<int>()) {
      ++report.count_mismatches;
      report.problems.push_back(goal + ": manifest count differs from shard");
    }
    long long frames = 0;
    for (const auto& ep : episodes) {
      const TaskConfig task = dataset_task(goal, cfg, graph, ep.seed);
      ++report.episodes;
      frames += ep.length();
      if (ep.goal_id != goal) {
        ++report.count_mismatches;
        report.problems.push_back(goal + ": foreign episode in shard");
      }
      if (!filter_episode(ep, cfg)) {
        ++report.filter_violations;
        report.problems.push_back(goal + ": seed " + std::to_string(ep.seed) + " violates the filter");
      }
      if (!replay_matches(ep, task, graph)) {
        ++report.replay_mismatches;
        report.problems.push_back(goal + ": seed " + std::to_string(ep.seed) + " does not replay");
      }
    }
    if (frames != g.at("frames").get<long long>()) {
      ++report.count_mismatches;
      report.problems.push_back(goal + ": manifest frame count differs from shard");
    }
  }
  return report;
}

std::vector<Episode> load_corpus(const std::filesystem::path& dir) {
  const auto m = read_manifest(dir);
  std::vector<Episode> out;
  for (const auto& g : m.at("goals")) {
    auto eps = read_shard(dir / g.at("shard").get<std::string>());
    out.insert(out.end(), std::make_move_iterator(eps.begin()), std::make_move_iterator(eps.end()));
  }
  return out;
}

}  // namespace gridagent
