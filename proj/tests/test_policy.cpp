#include "doctest.h"

#include "numeric_checks.hpp"

#include "gridagent/rollout.hpp"

using namespace gridagent;

TEST_SUITE("goap_policy") {

TEST_CASE("vocabulary reserves pad, unk and sentinel and sorts the rest") {
  const Vocab v = Vocab::build(InstructionPool::default_pool());
  CHECK(v.words()[0] == "<pad>");
  CHECK(v.id("<goal>") == Vocab::kSentinel);
  CHECK(v.id("zzzz-not-a-word") == Vocab::kUnk);
  CHECK(std::is_sorted(v.words().begin() + 3, v.words().end()));
  CHECK(Vocab::from_json(v.to_json()) == v);
}

TEST_CASE("tokenizer lowercases, strips punctuation, pads and truncates") {
  const Vocab v = Vocab::build(InstructionPool::default_pool());
  const auto ids = tokenize_goal("Collect LOGS!!", v, 6);
  REQUIRE(ids.size() == 6u);
  CHECK(ids[0] == v.id("collect"));
  CHECK(ids[1] == v.id("logs"));
  CHECK(ids[2] == Vocab::kPad);
  CHECK(tokenize_goal("a b c d e f g h", v, 3).size() == 3u);
}

TEST_CASE("every instruction in the pool tokenizes without unknown words") {
  const auto pool = InstructionPool::default_pool();
  const Vocab v = Vocab::build(pool);
  for (const auto& text : pool.all_rendered()) {
    for (int id : tokenize_goal(text, v, 24)) CHECK(id != Vocab::kUnk);
  }
}

TEST_CASE("goal-blind teacher ignores the instruction") {
  Model teacher(checks::tiny_config(), Vocab::build(InstructionPool::default_pool()), true);
  checks::randomize(teacher.params(), 3);
  const auto obs = checks::random_observations(1, 1, 2);
  auto logits = [&](const std::string& text) {
    Tape t(false);
    auto s = teacher.initial_state();
    return teacher.step(t, s, teacher.goal_tokens(text), obs[0], teacher.start_action()).policy.logits.value();
  };
  CHECK(logits("collect logs") == logits("mine some stone"));
}

TEST_CASE("student output depends on the instruction") {
  Model student(checks::tiny_config(), Vocab::build(InstructionPool::default_pool()), false);
  checks::randomize(student.params(), 3);
  const auto obs = checks::random_observations(1, 1, 2);
  auto logits = [&](const std::string& text) {
    Tape t(false);
    auto s = student.initial_state();
    return student.step(t, s, student.goal_tokens(text), obs[0], student.start_action()).policy.logits.value();
  };
  CHECK(logits("collect logs") != logits("mine some stone"));
}

TEST_CASE("argmax breaks ties toward the lowest action id; sampling is seeded") {
  Rng rng = make_rng(0, 0);
  Mat l = Mat::Zero(1, 5);
  l(0, 2) = 1.0;
  l(0, 4) = 1.0;
  CHECK(select_action(l, SelectMode::argmax, 1.0, rng) == 2);
  Rng a = make_rng(3, 3), b = make_rng(3, 3);
  for (int i = 0; i < 20; ++i) CHECK(select_action(l, SelectMode::sample, 1.0, a) == select_action(l, SelectMode::sample, 1.0, b));
}

TEST_CASE("model policy rollouts are deterministic") {
  auto cfg = checks::tiny_config();
  cfg.obs_radius = 3;
  cfg.pool_rows = 8;
  cfg.g_max = 24;
  Model model(cfg, Vocab::build(InstructionPool::default_pool()), false);
  ModelPolicy policy(model);
  const auto& graph = CraftGraph::default_graph();
  const auto task = TaskConfig::builtin("collect_logs");
  const auto g = subgoal_for_goal(graph, "collect_logs", 1, "collect logs");
  const auto a = rollout(policy, {g}, 4, task, graph, 30);
  const auto b = rollout(policy, {g}, 4, task, graph, 30);
  CHECK(a.episode == b.episode);
  CHECK(policy.last_behavior().rows() == cfg.encoder.n_b);
}

TEST_CASE("model config validation") {
  auto cfg = checks::tiny_config();
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = checks::tiny_config();
  cfg.pool_rows = 100;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(ModelConfig::from_json(checks::tiny_config().to_json()).to_json() == checks::tiny_config().to_json());
}

}
