#include "corabench/schedule.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace corabench {

void EnvFactors::validate(const std::string& where) const {
  if (grid_size < 3) throw ConfigError(fmt::format("{}: grid_size must be >= 3", where));
  if (!(obstacle_density >= 0.0 && obstacle_density < 1.0))
    throw ConfigError(fmt::format("{}: obstacle_density must lie in [0, 1)", where));
  if (!(lava_density >= 0.0 && lava_density < 1.0))
    throw ConfigError(fmt::format("{}: lava_density must lie in [0, 1)", where));
  if (obstacle_density + lava_density >= 1.0)
    throw ConfigError(fmt::format("{}: obstacle_density + lava_density must be < 1", where));
  if (monster_count < 0) throw ConfigError(fmt::format("{}: monster_count must be >= 0", where));
  if (dark_radius && *dark_radius < 1)
    throw ConfigError(fmt::format("{}: dark_radius must be >= 1", where));
  if (!(trap_prob >= 0.0 && trap_prob < 1.0))
    throw ConfigError(fmt::format("{}: trap_prob must lie in [0, 1)", where));
  if (episode_cap < 0) throw ConfigError(fmt::format("{}: episode_cap must be positive", where));
}

const Segment& Schedule::segment(int task_id, int cycle) const {
  for (const auto& s : segments)
    if (s.task_id == task_id && s.cycle == cycle) return s;
  throw RangeError(fmt::format("no segment for task {} cycle {}", task_id, cycle));
}

Schedule build_schedule(const std::vector<TaskSpec>& tasks, int cycles) {
  if (tasks.empty()) throw ConfigError("task sequence is empty");
  if (cycles < 1) throw ConfigError("cycles must be >= 1");

  Schedule schedule;
  schedule.task_count = static_cast<int>(tasks.size());
  schedule.cycle_count = cycles;
  schedule.segments.reserve(tasks.size() * static_cast<std::size_t>(cycles));

  constexpr Step kMax = std::numeric_limits<Step>::max();
  Step cursor = 0;
  for (int c = 0; c < cycles; ++c) {
    for (const auto& task : tasks) {
      if (task.frames_per_visit <= 0)
        throw ConfigError(fmt::format("task {} has non-positive frame budget", task.task_id));
      if (cursor > kMax - task.frames_per_visit)
        throw ConfigError("schedule overflows the step counter");
      schedule.segments.push_back({task.task_id, c, cursor, cursor + task.frames_per_visit});
      cursor += task.frames_per_visit;
    }
  }
  schedule.total_steps = cursor;
  return schedule;
}

std::pair<int, int> task_at(const Schedule& schedule, Step t) {
  if (t < 0 || t >= schedule.total_steps)
    throw RangeError(fmt::format("step {} outside [0, {})", t, schedule.total_steps));
  // Segments are sorted by start; find the last one with start <= t.
  auto it = std::upper_bound(schedule.segments.begin(), schedule.segments.end(), t,
                             [](Step v, const Segment& s) { return v < s.start; });
  --it;
  return {it->task_id, it->cycle};
}

}  // namespace corabench
