#include "corabench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace corabench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Scaled mean and SEM of one aggregated set.
MetricCell aggregate(const std::vector<double>& set, double divisor_count) {
  MetricCell c;
  c.count = static_cast<int>(set.size());
  if (set.empty()) return c;
  c.defined = true;
  c.mean = kMetricScale * mean_of(set);
  c.sem = kMetricScale * sample_sem(set, divisor_count);
  return c;
}

}  // namespace

std::string_view metric_kind_name(MetricKind kind) {
  return kind == MetricKind::Forgetting ? "forgetting" : "transfer";
}

double sample_sem(std::span<const double> values, double divisor_count) {
  const auto n = values.size();
  if (n < 2) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double div = divisor_count > 0.0 ? divisor_count : static_cast<double>(n);
  return sd / std::sqrt(div);
}

ReturnCurve smooth_curve(std::span<const EvalRecord> records, int w) {
  if (w < 1) throw UsageError("smooth_curve: window must be >= 1");
  ReturnCurve curve;
  if (records.empty()) return curve;
  curve.task = records.front().task;
  curve.split = records.front().split;
  curve.seed = records.front().seed;
  curve.timesteps.reserve(records.size());
  curve.values.reserve(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    if (r.task != curve.task || r.split != curve.split || r.seed != curve.seed)
      throw MetricError("smooth_curve: records mix tasks, splits or seeds");
    if (k > 0 && r.timestep <= records[k - 1].timestep)
      throw MetricError(fmt::format("smooth_curve: timestep {} is not increasing", r.timestep));
    // Re-summed per window: a running sum drifts and turns exact zeros into 1e-17.
    const auto len = std::min<std::size_t>(k + 1, static_cast<std::size_t>(w));
    double window_sum = 0.0;
    for (std::size_t q = k + 1 - len; q <= k; ++q) window_sum += records[q].mean_return;
    curve.timesteps.push_back(r.timestep);
    curve.values.push_back(window_sum / static_cast<double>(len));
  }
  return curve;
}

double interpolate(const ReturnCurve& curve, double t) {
  if (curve.timesteps.empty()) throw MetricError("interpolate: empty curve");
  const auto& ts = curve.timesteps;
  if (t < static_cast<double>(ts.front()) || t > static_cast<double>(ts.back()))
    throw MetricError(fmt::format("interpolate: {} outside [{}, {}]", t, ts.front(), ts.back()));
  auto it = std::lower_bound(ts.begin(), ts.end(), t,
                             [](Step a, double b) { return static_cast<double>(a) < b; });
  const auto k = static_cast<std::size_t>(it - ts.begin());
  if (static_cast<double>(ts[k]) == t) return curve.values[k];
  const double t0 = static_cast<double>(ts[k - 1]);
  const double t1 = static_cast<double>(ts[k]);
  const double a = (t - t0) / (t1 - t0);
  return (1.0 - a) * curve.values[k - 1] + a * curve.values[k];
}

AlignedCurve align_curves(std::span<const ReturnCurve> curves, std::span<const double> grid) {
  if (curves.empty()) throw MetricError("align_curves: at least one seed is required");
  AlignedCurve out;
  out.task = curves.front().task;
  out.split = curves.front().split;
  out.seeds = static_cast<int>(curves.size());
  out.grid.assign(grid.begin(), grid.end());
  std::vector<double> at(curves.size());
  for (double g : grid) {
    for (std::size_t s = 0; s < curves.size(); ++s) at[s] = interpolate(curves[s], g);
    out.mean.push_back(mean_of(at));
    out.sem.push_back(sample_sem(at));
  }
  return out;
}

AlignedCurve align_curves(std::span<const ReturnCurve> curves, double grid_interval) {
  if (curves.empty()) throw MetricError("align_curves: at least one seed is required");
  if (!(grid_interval > 0.0)) throw UsageError("align_curves: grid interval must be positive");
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& c : curves) {
    if (c.timesteps.empty()) throw MetricError("align_curves: empty curve");
    lo = std::max(lo, static_cast<double>(c.timesteps.front()));
    hi = std::min(hi, static_cast<double>(c.timesteps.back()));
  }
  std::vector<double> grid;
  for (long k = 0;; ++k) {
    const double g = lo + static_cast<double>(k) * grid_interval;
    if (g > hi) break;
    grid.push_back(g);
  }
  return align_curves(curves, grid);
}

BoundaryReturns boundary_returns(std::span<const ReturnCurve> curves, const Schedule& schedule) {
  const int n = schedule.task_count;
  if (static_cast<int>(curves.size()) != n)
    throw MetricError(fmt::format("boundary_returns: {} curves for {} tasks", curves.size(), n));
  BoundaryReturns br;
  br.r_end = MatrixXd::Constant(n, n + 1, kNaN);
  br.r_max = VectorXd::Constant(n, kNaN);
  const Step first_pass_end = schedule.segment(n - 1, 0).end;

  for (int i = 0; i < n; ++i) {
    const auto& c = curves[static_cast<std::size_t>(i)];
    if (c.timesteps.empty() || c.timesteps.front() != 0)
      throw MetricError(fmt::format("boundary_returns: task {} has no timestep-0 evaluation (j=-1)", i));
    br.r_end(i, 0) = c.values.front();
    for (int j = 0; j < n; ++j) {
      const Step b = schedule.segment(j, 0).end;
      auto it = std::upper_bound(c.timesteps.begin(), c.timesteps.end(), b);
      // timestep 0 precedes every boundary, so `it` is never begin()
      br.r_end(i, j + 1) = c.values[static_cast<std::size_t>(it - c.timesteps.begin()) - 1];
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.size() && c.timesteps[k] <= first_pass_end; ++k)
      m = std::max(m, c.values[k]);
    br.r_max[i] = m;
  }
  return br;
}

std::optional<double> forgetting(int i, int j, const BoundaryReturns& br) {
  const int n = br.task_count();
  if (!(0 <= i && i < j && j < n)) throw RangeError(fmt::format("forgetting({}, {}) needs i < j < N", i, j));
  const double denom = std::fabs(br.r_max[i]);
  if (!(denom > kReturnFloor)) return std::nullopt;
  return (br.end(i, j - 1) - br.end(i, j)) / denom;
}

std::optional<double> transfer(int i, int j, const BoundaryReturns& br) {
  const int n = br.task_count();
  if (!(0 <= j && j < i && i < n)) throw RangeError(fmt::format("transfer({}, {}) needs j < i < N", i, j));
  const double denom = std::fabs(br.r_max[i]);
  if (!(denom > kReturnFloor)) return std::nullopt;
  return (br.end(i, j) - br.end(i, j - 1)) / denom;
}

bool cell_in_domain(MetricKind kind, int i, int j) {
  return kind == MetricKind::Forgetting ? i < j : i > j;
}

std::vector<SeedMetricMatrix> metric_matrices(MetricKind kind, std::span<const BoundaryReturns> per_seed) {
  std::vector<SeedMetricMatrix> out;
  out.reserve(per_seed.size());
  for (const auto& br : per_seed) {
    const int n = br.task_count();
    SeedMetricMatrix m = SeedMetricMatrix::Constant(n, n, kNaN);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (!cell_in_domain(kind, i, j)) continue;
        const auto v = kind == MetricKind::Forgetting ? forgetting(i, j, br) : transfer(i, j, br);
        if (v) m(i, j) = *v;
      }
    out.push_back(std::move(m));
  }
  return out;
}

SummaryStat summary_stat(MetricKind kind, std::span<const SeedMetricMatrix> per_seed,
                         const SemOptions& options) {
  SummaryStat s;
  s.kind = kind;
  double total = 0.0;
  long count = 0;
  std::vector<double> seed_means;
  Index tasks = 0;
  for (const auto& m : per_seed) {
    tasks = std::max(tasks, m.rows());
    double seed_sum = 0.0;
    long seed_count = 0;
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (std::isfinite(m(i, j))) {
          seed_sum += m(i, j);
          ++seed_count;
        }
    if (seed_count == 0) continue;
    total += seed_sum;
    count += seed_count;
    seed_means.push_back(seed_sum / static_cast<double>(seed_count));
  }
  s.seeds = static_cast<int>(seed_means.size());
  s.single_seed = s.seeds == 1;
  if (count == 0) return s;
  s.defined = true;
  s.mean = kMetricScale * total / static_cast<double>(count);
  s.sem = kMetricScale *
          sample_sem(seed_means, options.strict_task_divisor ? static_cast<double>(tasks) : 0.0);
  return s;
}

MetricTable diagnostic_table(MetricKind kind, std::span<const BoundaryReturns> per_seed,
                             const SemOptions& options) {
  if (per_seed.empty()) throw MetricError("diagnostic_table: at least one seed is required");
  MetricTable t;
  t.kind = kind;
  t.tasks = per_seed.front().task_count();
  for (const auto& br : per_seed)
    if (br.task_count() != t.tasks) throw MetricError("diagnostic_table: seeds disagree on task count");
  t.raw = metric_matrices(kind, per_seed);
  t.single_seed = per_seed.size() == 1;
  const int n = t.tasks;
  const double agg_div = options.strict_task_divisor ? static_cast<double>(n) : 0.0;

  t.cells.assign(static_cast<std::size_t>(n), std::vector<MetricCell>(static_cast<std::size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!cell_in_domain(kind, i, j)) continue;
      std::vector<double> set;
      for (const auto& m : t.raw)
        if (std::isfinite(m(i, j))) set.push_back(m(i, j));
      if (set.size() < t.raw.size()) t.undefined_cells.emplace_back(i, j);
      t.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = aggregate(set, 0.0);
    }

  // Row and column aggregates: average each seed over the row/column first.
  auto line_aggregate = [&](int fixed, bool row) {
    std::vector<double> per_seed_means;
    for (const auto& m : t.raw) {
      double sum = 0.0;
      int c = 0;
      for (int k = 0; k < n; ++k) {
        const double v = row ? m(fixed, k) : m(k, fixed);
        if (std::isfinite(v)) {
          sum += v;
          ++c;
        }
      }
      if (c > 0) per_seed_means.push_back(sum / c);
    }
    return aggregate(per_seed_means, agg_div);
  };
  for (int i = 0; i < n; ++i) t.row_avg.push_back(line_aggregate(i, true));
  for (int j = 0; j < n; ++j) t.col_avg.push_back(line_aggregate(j, false));
  t.overall = summary_stat(kind, t.raw, options);
  return t;
}

std::map<std::pair<int, Split>, ReturnCurve> curves_from_log(const RunLog& log, int w) {
  std::map<std::pair<int, Split>, std::vector<EvalRecord>> grouped;
  for (const auto& r : log.records) grouped[{r.task, r.split}].push_back(r);
  std::map<std::pair<int, Split>, ReturnCurve> out;
  for (auto& [key, recs] : grouped) out[key] = smooth_curve(recs, w);
  return out;
}

Split metric_split(const LogHeader& header, int task) {
  return header.test_variant[static_cast<std::size_t>(task)] ? Split::Test : Split::Train;
}

BoundaryReturns boundary_returns_for_log(const RunLog& log) {
  const auto curves = curves_from_log(log, log.header.smoothing_window);
  const int n = static_cast<int>(log.header.frames.size());
  std::vector<ReturnCurve> chosen;
  for (int i = 0; i < n; ++i) {
    auto it = curves.find({i, metric_split(log.header, i)});
    if (it == curves.end())
      throw MetricError(fmt::format("{}: no {} records for task {}", log.header.run_id,
                                    split_name(metric_split(log.header, i)), i));
    chosen.push_back(it->second);
  }
  return boundary_returns(chosen, schedule_from_header(log.header));
}

std::map<std::string, std::vector<RunLog>> group_by_policy(std::vector<RunLog> logs) {
  std::map<std::string, std::vector<RunLog>> out;
  for (auto& log : logs) {
    auto& group = out[log.header.policy];
    if (!group.empty()) {
      const auto& ref = group.front().header;
      if (ref.frames != log.header.frames || ref.cycles != log.header.cycles)
        throw MetricError(fmt::format("runs '{}' and '{}' of policy '{}' use different schedules",
                                      ref.run_id, log.header.run_id, log.header.policy));
    }
    group.push_back(std::move(log));
  }
  return out;
}

FinalPerformance final_performance(std::span<const RunLog> logs, int w) {
  if (logs.empty()) throw MetricError("final_performance: no runs");
  FinalPerformance fp;
  fp.task_names = logs.front().header.task_names;
  const auto n = fp.task_names.size();
  for (const Split split : {Split::Train, Split::Test}) {
    auto& column = split == Split::Train ? fp.train : fp.test;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> finals;
      for (const auto& log : logs) {
        const auto curves = curves_from_log(log, w);
        auto it = curves.find({static_cast<int>(i), split});
        if (it == curves.end() || it->second.values.empty())
          throw MetricError(fmt::format("{}: no {} records for task {}", log.header.run_id,
                                        split_name(split), i));
        finals.push_back(it->second.values.back());
      }
      FinalCell cell;
      cell.seeds = static_cast<int>(finals.size());
      cell.single_seed = finals.size() == 1;
      cell.mean = mean_of(finals);
      cell.sem = sample_sem(finals);
      column.push_back(cell);
    }
  }
  return fp;
}

std::string format_mean_sem(double mean, double sem, int decimals) {
  // Half-away-from-zero rounding first, so "-0.00" never appears.
  const double scale = std::pow(10.0, decimals);
  auto fix = [&](double v) {
    const double r = std::round(v * scale) / scale;
    return r == 0.0 ? 0.0 : r;
  };
  return fmt::format("{:.{}f} ± {:.{}f}", fix(mean), decimals, fix(sem), decimals);
}

}  // namespace corabench
