#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corabench/common.hpp"
#include "corabench/schedule.hpp"

namespace corabench {

inline constexpr int kViewRadius = 3;
inline constexpr int kViewSide = 2 * kViewRadius + 1;
inline constexpr int kObservationChannels = 4;  // wall, lava, goal, monster
inline constexpr Index kObservationSize = kViewSide * kViewSide * kObservationChannels;
inline constexpr int kActionCount = 4;

enum class Cell : std::uint8_t { Empty, Wall, Lava, Goal };
enum class Split { Train, Test };
enum class Variant { Train, TestVariant };
enum class Action { Up = 0, Down = 1, Left = 2, Right = 3 };

std::string_view split_name(Split split);

struct Context {
  std::uint64_t seed = 0;
  Split split = Split::Train;
};

struct GridPos {
  int row = 0;
  int col = 0;
  bool operator==(const GridPos&) const = default;
};

/// Egocentric one-hot window, flattened row-major as (row, col, channel).
using Observation = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

struct GridState {
  EnvFactors factors;
  int size = 0;
  std::vector<Cell> layout;  // size*size, row-major
  GridPos agent;
  GridPos goal;
  std::vector<GridPos> monsters;
  int steps_taken = 0;
  bool done = false;

  Cell at(GridPos p) const { return layout[static_cast<std::size_t>(p.row * size + p.col)]; }
  bool inside(GridPos p) const { return p.row >= 0 && p.col >= 0 && p.row < size && p.col < size; }
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

/// The K fixed train seeds of a task, derived only from (task_id, k).
std::vector<std::uint64_t> train_context_seeds(const TaskSpec& task);

/// Train: uniform over the fixed set. Test: uniform over all 2^64 seeds minus the train set.
Context sample_context(const TaskSpec& task, Split split, Rng& rng);

const EnvFactors& factors_for(const TaskSpec& task, Variant variant);

/// Deterministic in (factors, seed). Throws EnvironmentError if no solvable
/// layout is found within the retry bound.
GridState generate_level(const EnvFactors& factors, std::uint64_t seed);

std::pair<GridState, Observation> reset(const TaskSpec& task, const Context& ctx, Variant variant);

Observation observe(const GridState& state);

/// Advances `state` in place; `rng` is the per-episode dynamics stream
/// (traps, monster moves). Throws UsageError on a finished episode.
StepOutcome step(GridState& state, Action action, Rng& rng);

/// BFS over non-wall, non-lava cells from the agent to the goal.
bool goal_reachable(const GridState& state);

std::string render_ascii(const GridState& state);

inline double generalization_gap(double train_return, double test_return) {
  return train_return - test_return;
}

inline double clip_reward(double r) { return r < -1.0 ? -1.0 : (r > 1.0 ? 1.0 : r); }

}  // namespace corabench
