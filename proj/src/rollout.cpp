#include "corabench/rollout.hpp"

namespace corabench {

EpisodeRunner::EpisodeRunner(TaskSpec task, Variant variant, Split split)
    : task_(std::move(task)), variant_(variant), split_(split) {}

void EpisodeRunner::start_episode(Rng& rng) {
  const Context ctx = sample_context(task_, split_, rng);
  auto [state, obs] = reset(task_, ctx, variant_);
  state_ = std::move(state);
  obs_ = std::move(obs);
  dynamics_.seed(rng());
  active_ = true;
}

Rollout EpisodeRunner::collect(const BehaviorFn& behave, Step max_steps, Rng& rng) {
  Rollout rollout;
  rollout.steps.reserve(static_cast<std::size_t>(max_steps));
  for (Step k = 0; k < max_steps; ++k) {
    if (!active_) start_episode(rng);
    Behavior b = behave(obs_, rng);
    StepOutcome out = step(state_, static_cast<Action>(b.action), dynamics_);
    Transition t;
    t.obs = std::move(obs_);
    t.action = b.action;
    t.reward = clip_reward(out.reward);
    t.done = out.done;
    t.behavior_probs = std::move(b.probs);
    t.behavior_value = b.value;
    rollout.steps.push_back(std::move(t));
    obs_ = std::move(out.observation);
    if (out.done) active_ = false;
  }
  rollout.bootstrap_obs = obs_;
  rollout.bootstrap_done = !active_;
  return rollout;
}

double EpisodeRunner::play_episode(const BehaviorFn& behave, Rng& rng) {
  start_episode(rng);
  double total = 0.0;
  while (!state_.done) {
    const Behavior b = behave(obs_, rng);
    StepOutcome out = step(state_, static_cast<Action>(b.action), dynamics_);
    total += out.reward;
    obs_ = std::move(out.observation);
  }
  active_ = false;
  return total;
}

}  // namespace corabench
