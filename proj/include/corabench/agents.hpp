#pragma once

#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "corabench/config.hpp"
#include "corabench/gridenv.hpp"
#include "corabench/losses.hpp"
#include "corabench/network.hpp"

namespace corabench {

enum class ActMode { Train, Eval };

struct Transition {
  Observation obs;
  int action = 0;
  double reward = 0.0;  // clipped to [-1, 1]
  bool done = false;
  VectorXd behavior_probs;
  double behavior_value = 0.0;
  // n-step return target computed when the transition was trained on; replayed
  // items reuse it since single transitions carry no successor trajectory.
  double return_target = 0.0;
};

struct Rollout {
  std::vector<Transition> steps;
  Observation bootstrap_obs;  // observation after the last step
  bool bootstrap_done = true; // last step ended an episode: no bootstrap
};

struct OptimizerState {
  VectorXd square_avg;
  VectorXd momentum;
  bool operator==(const OptimizerState&) const = default;
};

struct EwcState {
  std::vector<EwcAnchor> anchors;
  double lambda = 0.0;
  Step min_task_steps = 0;
  int fisher_samples = 100;
  bool normalize_fisher = false;
};

struct OnlineEwcState {
  VectorXd theta_star;
  VectorXd fisher_running;
  bool has_anchor = false;
  double gamma = 0.99;
  double lambda = 0.0;
  int fisher_samples = 100;
  bool normalize_fisher = true;
};

enum class PcPhase { Progress, Compress };

/// The active column is PolicyState::theta; evaluation always reads `kb`.
struct PcState {
  VectorXd kb;
  OptimizerState kb_opt;
  OnlineEwcState protector;
  double kl_cost = 1.0;
  PcPhase phase = PcPhase::Progress;
  Step visit_budget = 0;
  Step progress_budget = 0;
  Step steps_in_visit = 0;
};

struct ClearState {
  std::vector<Transition> buffer;
  Step capacity = 0;
  Step seen_count = 0;
  double policy_cloning_cost = 0.01;
  double value_cloning_cost = 0.005;
};

using AlgoState = std::variant<std::monostate, EwcState, OnlineEwcState, PcState, ClearState>;

struct PolicyState {
  NetShape shape;
  VectorXd theta;
  OptimizerState opt;
  AlgoState algo;
};

struct UpdateStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double penalty = 0.0;
  double grad_norm = 0.0;
};

/// Action, distribution and value of the acting network at one observation.
struct Behavior {
  int action = 0;
  VectorXd probs;
  double value = 0.0;
};

// --- action selection -------------------------------------------------------

/// Lowest index among the maximal logits.
int argmax_action(const Eigen::Ref<const VectorXd>& logits);
int sample_action(const Eigen::Ref<const VectorXd>& probs, Rng& rng);

Behavior evaluate_network(const NetShape& shape, const VectorXd& theta, const Observation& obs,
                          ActMode mode, Rng& rng);

/// Parameters the policy is evaluated with (the knowledge base for P&C).
const VectorXd& eval_params(const PolicyState& state);
/// Parameters that drive data collection during training (the active column for P&C).
const VectorXd& acting_params(const PolicyState& state);

int act(const PolicyState& state, const Observation& obs, ActMode mode, Rng& rng);

// --- learner ----------------------------------------------------------------

PolicyState make_policy_state(PolicyKind kind, const AgentParams& params, const NetShape& shape,
                              Rng& init_rng);

NetShape default_net_shape(const AgentParams& params);

/// n-step discounted returns bootstrapped from V(bootstrap_obs) under `theta`.
VectorXd nstep_returns(const NetShape& shape, const VectorXd& theta, const Rollout& rollout,
                       double discount);

MatrixXd stack_observations(std::span<const Transition* const> items);

/// One RMSProp step (torch semantics) of `theta` along `grad`.
void rmsprop_step(VectorXd& theta, OptimizerState& opt, const VectorXd& grad,
                  const AgentParams& params);

/// Actor-critic step on `theta`, plus any quadratic penalty held in the state
/// (EWC anchors or online-EWC protector).
UpdateStats a2c_update(PolicyState& state, const Rollout& rollout, const AgentParams& params);

/// Diagonal Fisher of log pi(a|s) over a batch of (state, taken action).
VectorXd fisher_from_batch(const NetShape& shape, const VectorXd& theta, const MatrixXd& inputs,
                           std::span<const int> actions);

/// Rescales to max entry 1; an all-zero vector is returned unchanged.
VectorXd normalize_fisher(const VectorXd& fisher);

/// Empirical diagonal Fisher from `sample_count` fresh on-policy rollouts of
/// `unroll` steps on the task's train contexts.
VectorXd estimate_fisher(const NetShape& shape, const VectorXd& theta, const TaskSpec& task,
                         int sample_count, int unroll, Rng& rng);

void online_ewc_consolidate(OnlineEwcState& state, const VectorXd& theta, const VectorXd& fisher_new);

void reservoir_insert(ClearState& state, Transition item, Rng& rng);

/// Mixed novel/replay step; returns stats. Inserts every novel transition into the buffer.
UpdateStats clear_update(PolicyState& state, const Rollout& novel, const AgentParams& params,
                         Rng& rng);

/// (novel, replay) batch composition for batch size B and current buffer size.
std::pair<Index, Index> clear_batch_split(int batch_size, Index novel_available, Index buffer_size);

UpdateStats pc_progress(PolicyState& state, const Rollout& rollout, const AgentParams& params);
UpdateStats pc_compress(PolicyState& state, const Rollout& rollout, const AgentParams& params);

/// Source of fresh Fisher-estimation rollouts for the task that just ended.
using FisherEstimator = std::function<VectorXd(const VectorXd& theta)>;

void on_task_boundary(PolicyState& state, int ended_task, Step steps_in_task,
                      const FisherEstimator& fisher);

/// Order-sensitive digest over every numeric field of the state.
std::uint64_t state_digest(const PolicyState& state);

// --- policy object driven by the harness -------------------------------------

class Agent {
 public:
  Agent(PolicyKind kind, AgentParams params, std::uint64_t init_seed);

  PolicyKind kind() const { return kind_; }
  const AgentParams& params() const { return params_; }
  const PolicyState& state() const { return state_; }
  PolicyState& mutable_state() { return state_; }

  Behavior behave(const Observation& obs, Rng& rng) const;
  int act(const Observation& obs, ActMode mode, Rng& rng) const;

  void begin_task(int task_id, Step budget);
  /// Steps the harness may collect before the policy needs to change internal phase.
  Step step_limit() const;
  UpdateStats train(const Rollout& rollout, Rng& rng);
  void end_task(const TaskSpec& task, Step steps_in_task, Rng& rng);

 private:
  PolicyKind kind_;
  AgentParams params_;
  PolicyState state_;
};

}  // namespace corabench
