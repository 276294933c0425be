#pragma once

#include <optional>
#include <string>
#include <vector>

#include "corabench/agents.hpp"
#include "corabench/config.hpp"
#include "corabench/rollout.hpp"
#include "corabench/runlog.hpp"

namespace corabench {

struct CollectResult {
  Step steps = 0;
  UpdateStats stats;
};

/// One rollout of min(unroll_length, max_steps) transitions followed by the
/// agent's update.
CollectResult collect_and_train(Agent& agent, EpisodeRunner& runner, Step max_steps, Rng& rng);

/// Identity fields stamped onto every record of one evaluation pause.
struct EvalStamp {
  std::string run_id;
  std::string policy;
  std::uint64_t seed = 0;
  Step timestep = 0;
  int cycle = 0;
};

/// E argmax episodes per task on train contexts and E on test contexts (the
/// harder variant when the task declares one). Never touches the agent.
std::vector<EvalRecord> evaluate_all(const Agent& agent, const std::vector<TaskSpec>& tasks,
                                     int episodes, Rng& rng, const EvalStamp& stamp);

struct RunOptions {
  /// Directory for `<run_id>.log`; no file is written when empty.
  std::optional<std::string> output_dir;
  std::string start_time;  // header timestamp; filled with the current UTC time when empty
};

/// Trains along the schedule, evaluating at t = 0, every eval_interval steps and
/// at every segment end. On a training error the partial log stays valid and
/// the error is rethrown.
RunLog run_experiment(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options = {});

std::string utc_timestamp();

}  // namespace corabench
