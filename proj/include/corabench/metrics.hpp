#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corabench/runlog.hpp"
#include "corabench/schedule.hpp"

namespace corabench {

enum class MetricKind { Forgetting, Transfer };
std::string_view metric_kind_name(MetricKind kind);

/// Denominator floor below which |r_max| makes a cell undefined.
inline constexpr double kReturnFloor = 1e-9;
/// Display scaling applied to every tabulated F / Z value.
inline constexpr double kMetricScale = 10.0;

struct ReturnCurve {
  int task = 0;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  std::vector<Step> timesteps;  // strictly increasing
  std::vector<double> values;

  std::size_t size() const { return timesteps.size(); }
};

/// Trailing moving average with window `w` (shorter at the start). Records
/// must share (task, split, seed) and be time-ordered.
ReturnCurve smooth_curve(std::span<const EvalRecord> records, int w);

/// Piecewise-linear value of `curve` at `t`; throws MetricError outside its span.
double interpolate(const ReturnCurve& curve, double t);

struct AlignedCurve {
  int task = 0;
  Split split = Split::Train;
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> sem;
  int seeds = 0;
};

/// Interpolates each seed's curve onto `grid`, then takes the mean and the
/// sample standard error (0 for a single seed).
AlignedCurve align_curves(std::span<const ReturnCurve> curves, std::span<const double> grid);

/// As above on a regular grid of spacing `grid_interval` spanning the
/// intersection of all curves.
AlignedCurve align_curves(std::span<const ReturnCurve> curves, double grid_interval);

/// r_end(i, j + 1) = r_{i,j,end}; column 0 holds the timestep-0 value (j = -1).
struct BoundaryReturns {
  MatrixXd r_end;  // N x (N + 1)
  VectorXd r_max;  // N

  int task_count() const { return static_cast<int>(r_max.size()); }
  double end(int i, int j) const { return r_end(i, j + 1); }
};

/// `curves[i]` is task i's smoothed curve for one seed; only cycle-0
/// boundaries of `schedule` are read.
BoundaryReturns boundary_returns(std::span<const ReturnCurve> curves, const Schedule& schedule);

/// (r_{i,j-1} - r_{i,j}) / |r_max_i| for i < j; nullopt when |r_max_i| is under the floor.
std::optional<double> forgetting(int i, int j, const BoundaryReturns& br);
/// (r_{i,j} - r_{i,j-1}) / |r_max_i| for i > j.
std::optional<double> transfer(int i, int j, const BoundaryReturns& br);

/// Per-seed matrix of unscaled metric values; NaN marks an absent or undefined cell.
using SeedMetricMatrix = MatrixXd;

std::vector<SeedMetricMatrix> metric_matrices(MetricKind kind, std::span<const BoundaryReturns> per_seed);

struct SemOptions {
  /// Divide aggregate standard deviations by sqrt(task count) instead of
  /// sqrt(number of seeds in the aggregated set).
  bool strict_task_divisor = false;
};

struct SummaryStat {
  MetricKind kind = MetricKind::Forgetting;
  double mean = 0.0;  // scaled
  double sem = 0.0;   // scaled
  int seeds = 0;
  bool defined = false;
  bool single_seed = false;
};

/// Average over every populated (pair, seed) value, scaled; the SEM comes from
/// the per-seed full-table means.
SummaryStat summary_stat(MetricKind kind, std::span<const SeedMetricMatrix> per_seed,
                         const SemOptions& options = {});

struct MetricCell {
  double mean = 0.0;  // scaled
  double sem = 0.0;   // scaled
  int count = 0;
  bool defined = false;
};

struct MetricTable {
  MetricKind kind = MetricKind::Forgetting;
  int tasks = 0;
  std::vector<std::string> task_names;
  std::vector<std::vector<MetricCell>> cells;  // [i][j]
  std::vector<MetricCell> row_avg;
  std::vector<MetricCell> col_avg;
  SummaryStat overall;
  std::vector<SeedMetricMatrix> raw;  // unscaled, one per seed
  std::vector<std::pair<int, int>> undefined_cells;
  bool single_seed = false;
};

/// Whether (i, j) is a populated cell for the metric kind.
bool cell_in_domain(MetricKind kind, int i, int j);

MetricTable diagnostic_table(MetricKind kind, std::span<const BoundaryReturns> per_seed,
                             const SemOptions& options = {});

// --- log-level helpers --------------------------------------------------------

/// Smoothed curves of one run keyed by (task, split).
std::map<std::pair<int, Split>, ReturnCurve> curves_from_log(const RunLog& log, int w);

/// The split metrics read for task i: test when the task has a test variant.
Split metric_split(const LogHeader& header, int task);

BoundaryReturns boundary_returns_for_log(const RunLog& log);

/// Logs grouped by policy name; every log in a group must share the schedule.
std::map<std::string, std::vector<RunLog>> group_by_policy(std::vector<RunLog> logs);

struct FinalCell {
  double mean = 0.0;
  double sem = 0.0;
  int seeds = 0;
  bool single_seed = false;
};

struct FinalPerformance {
  std::vector<std::string> task_names;
  std::vector<FinalCell> train;
  std::vector<FinalCell> test;
};

/// Per task and split: mean and SEM across runs of each run's last smoothed value.
FinalPerformance final_performance(std::span<const RunLog> logs, int w);

std::string format_mean_sem(double mean, double sem, int decimals = 2);

/// Sample SEM with ddof = 1; 0 for fewer than two values.
double sample_sem(std::span<const double> values, double divisor_count = 0.0);

}  // namespace corabench
