#pragma once

#include <functional>

#include "corabench/agents.hpp"

namespace corabench {

using BehaviorFn = std::function<Behavior(const Observation&, Rng&)>;

/// Steps one task's environment on behalf of a learner, resetting episodes as
/// they finish. Contexts and per-episode dynamics streams are drawn from the
/// rng handed to each call.
class EpisodeRunner {
 public:
  EpisodeRunner(TaskSpec task, Variant variant, Split split);

  const TaskSpec& task() const { return task_; }

  /// Discards any episode in progress.
  void restart() { active_ = false; }

  /// Collects up to `max_steps` transitions, continuing the current episode
  /// and auto-resetting inside the rollout whenever one ends.
  Rollout collect(const BehaviorFn& behave, Step max_steps, Rng& rng);

  /// Plays a fresh episode to termination and returns its undiscounted return.
  double play_episode(const BehaviorFn& behave, Rng& rng);

 private:
  void start_episode(Rng& rng);

  TaskSpec task_;
  Variant variant_;
  Split split_;
  GridState state_;
  Observation obs_;
  Rng dynamics_;
  bool active_ = false;
};

}  // namespace corabench
