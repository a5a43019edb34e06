#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gridagent/episode_io.hpp"
#include "gridagent/expert.hpp"
#include "gridagent/policy.hpp"

namespace gridagent {

// Anything that picks actions in a rollout. The world state is offered for
// scripted policies; learned policies only read the observation.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(std::uint64_t seed) = 0;
  virtual ActionId act(const WorldState& state, const Observation& obs, const SubGoal& goal, int a_prev) = 0;
  virtual std::string name() const = 0;
};

class ExpertPolicy : public Policy {
 public:
  explicit ExpertPolicy(const CraftGraph& graph, double epsilon = 0.0) : graph_(graph), cfg_{epsilon, 0} {}
  void begin_episode(std::uint64_t seed) override { rng_ = make_rng(seed, fnv1a("expert-policy")); }
  ActionId act(const WorldState& state, const Observation&, const SubGoal& goal, int) override {
    return expert_action(state, goal, graph_, cfg_, rng_);
  }
  std::string name() const override { return "expert"; }

 private:
  const CraftGraph& graph_;
  ExpertConfig cfg_;
  Rng rng_;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(int num_actions) : num_actions_(num_actions) {}
  void begin_episode(std::uint64_t seed) override { rng_ = make_rng(seed, fnv1a("random-policy")); }
  ActionId act(const WorldState&, const Observation&, const SubGoal&, int) override {
    return static_cast<ActionId>(uniform_index(rng_, static_cast<std::uint64_t>(num_actions_)));
  }
  std::string name() const override { return "random"; }

 private:
  int num_actions_;
  Rng rng_;
};

// Runs a trained model step by step. The encoder state persists for the
// whole episode, across sub-goals.
class ModelPolicy : public Policy {
 public:
  explicit ModelPolicy(Model& model, SelectMode mode = SelectMode::argmax, double temperature = 1.0);
  void begin_episode(std::uint64_t seed) override;
  ActionId act(const WorldState& state, const Observation& obs, const SubGoal& goal, int a_prev) override;
  std::string name() const override { return model_.goal_blind() ? "teacher" : "model"; }

  // Last behavior tokens and raw observation features (for embedding export).
  const Mat& last_behavior() const { return last_behavior_; }
  const Mat& last_obs_features() const { return last_obs_; }
  // Action distribution for a fixed instruction at the current state, without advancing.
  Mat peek_probs(const Observation& obs, const std::string& instruction, int a_prev) const;

 private:
  Model& model_;
  SelectMode mode_;
  double temperature_;
  Rng rng_;
  std::unique_ptr<Tape> tape_;  // holds the encoder state until the next step
  EncoderState state_;
  Mat last_behavior_;
  Mat last_obs_;
};

std::unique_ptr<Policy> make_policy(const std::string& kind, const CraftGraph& graph, Model* model,
                                    SelectMode mode = SelectMode::argmax, double temperature = 1.0);

struct SubGoalOutcome {
  SubGoal goal;
  bool success = false;
  int steps = 0;
};

struct RolloutResult {
  Episode episode;
  std::vector<SubGoalOutcome> outcomes;
  bool success = false;
  int first_failed = -1;
  WorldState final_state;
};

// Executes `plan` in order in one world. Each sub-goal gets at most `budget`
// steps and the task's step cap bounds the total; any failed sub-goal ends
// the episode. With `on_step`, every pre-action state is reported (for play).
RolloutResult rollout(Policy& policy, const std::vector<SubGoal>& plan, std::uint64_t seed, const TaskConfig& task,
                      const CraftGraph& graph, int budget, const ObsConfig& obs_cfg = {},
                      const std::function<void(const WorldState&, ActionId)>& on_step = {});

}  // namespace gridagent
