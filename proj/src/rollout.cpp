#include "gridagent/rollout.hpp"

namespace gridagent {

ModelPolicy::ModelPolicy(Model& model, SelectMode mode, double temperature)
    : model_(model), mode_(mode), temperature_(temperature), state_(model.initial_state()) {}

void ModelPolicy::begin_episode(std::uint64_t seed) {
  rng_ = make_rng(seed, fnv1a("model-policy"));
  state_ = model_.initial_state();
  tape_.reset();
}

ActionId ModelPolicy::act(const WorldState&, const Observation& obs, const SubGoal& goal, int a_prev) {
  auto tape = std::make_unique<Tape>(false);
  state_.detach_to(*tape);
  tape_ = std::move(tape);
  const auto out = model_.step(*tape_, state_, model_.goal_tokens(goal.instruction), obs,
                               a_prev < 0 ? model_.start_action() : a_prev);
  last_behavior_ = out.behavior.value();
  last_obs_ = out.obs_features.value();
  return select_action(out.policy.logits.value(), mode_, temperature_, rng_);
}

Mat ModelPolicy::peek_probs(const Observation& obs, const std::string& instruction, int a_prev) const {
  Tape tape(false);
  EncoderState copy = state_;
  copy.detach_to(tape);
  const auto out = model_.step(tape, copy, model_.goal_tokens(instruction), obs, a_prev < 0 ? model_.start_action() : a_prev);
  return softmax_rows(out.policy.logits.value());
}

std::unique_ptr<Policy> make_policy(const std::string& kind, const CraftGraph& graph, Model* model, SelectMode mode,
                                    double temperature) {
  if (kind == "expert") return std::make_unique<ExpertPolicy>(graph);
  if (kind == "random") return std::make_unique<RandomPolicy>(action_count(graph));
  if (kind == "model") {
    if (!model) throw ConfigError("policy 'model' needs a checkpoint");
    return std::make_unique<ModelPolicy>(*model, mode, temperature);
  }
  throw ConfigError("unknown policy kind: " + kind + " (expected expert, random or model)");
}

RolloutResult rollout(Policy& policy, const std::vector<SubGoal>& plan, std::uint64_t seed, const TaskConfig& task,
                      const CraftGraph& graph, int budget, const ObsConfig& obs_cfg,
                      const std::function<void(const WorldState&, ActionId)>& on_step) {
  Env env(graph, obs_cfg);
  Observation obs = env.reset(seed, task);
  policy.begin_episode(seed);
  RolloutResult r;
  r.episode.goal_id = plan.empty() ? task.name : plan.front().goal_id;
  r.episode.instruction = plan.empty() ? "" : plan.front().instruction;
  r.episode.seed = seed;
  int a_prev = -1;
  bool ok = !plan.empty();
  for (std::size_t i = 0; i < plan.size() && ok; ++i) {
    SubGoalOutcome out{plan[i], false, 0};
    while (!plan[i].satisfied(env.state().inventory) && out.steps < budget && env.state().tick < env.state().step_cap) {
      const ActionId a = policy.act(env.state(), obs, plan[i], a_prev);
      if (on_step) on_step(env.state(), a);
      r.episode.steps.push_back({obs, a});
      obs = env.step(a).observation;
      a_prev = a;
      ++out.steps;
    }
    out.success = plan[i].satisfied(env.state().inventory);
    if (!out.success) {
      ok = false;
      r.first_failed = static_cast<int>(i);
    }
    r.outcomes.push_back(std::move(out));
  }
  r.success = ok;
  r.episode.success = ok;
  r.final_state = env.state();
  return r;
}

}  // namespace gridagent
