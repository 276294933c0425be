#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corabench/common.hpp"

namespace corabench {

/// Generator factors of one gridworld task family; together with a context
/// seed they fully determine a level.
struct EnvFactors {
  int grid_size = 7;  // interior side length; the border is implicit wall
  double obstacle_density = 0.0;
  double lava_density = 0.0;
  int monster_count = 0;
  std::optional<int> dark_radius;  // absent = fully observed window
  double trap_prob = 0.0;
  int episode_cap = 0;  // 0 = derived from grid_size

  int effective_episode_cap() const { return episode_cap > 0 ? episode_cap : 4 * grid_size; }

  void validate(const std::string& where) const;

  bool operator==(const EnvFactors&) const = default;
};

struct TaskSpec {
  int task_id = 0;
  std::string name;
  EnvFactors factors;
  Step frames_per_visit = 0;
  std::optional<EnvFactors> eval_test_variant;
  int train_context_count = 1;

  bool operator==(const TaskSpec&) const = default;
};

struct Segment {
  int task_id = 0;
  int cycle = 0;
  Step start = 0;  // A, inclusive
  Step end = 0;    // B, exclusive

  Step budget() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

struct Schedule {
  std::vector<Segment> segments;
  Step total_steps = 0;
  int task_count = 0;
  int cycle_count = 0;

  /// Segment for (task, cycle); throws RangeError when absent.
  const Segment& segment(int task_id, int cycle) const;
};

/// Tiles [0, total) with N*M half-open segments in declared task order per cycle.
Schedule build_schedule(const std::vector<TaskSpec>& tasks, int cycles);

/// (task_id, cycle) of the unique segment holding step t.
std::pair<int, int> task_at(const Schedule& schedule, Step t);

}  // namespace corabench
