#pragma once

#include <string>
#include <vector>

#include "corabench/metrics.hpp"

namespace corabench {

enum class Hue { Neutral, Red, Green };
std::string_view hue_name(Hue hue);

struct CellShade {
  Hue hue = Hue::Neutral;
  int intensity = 0;
  bool operator==(const CellShade&) const = default;
};

/// Intensity floor(4 |v|) of an already-scaled value. Forgetting is red when
/// positive, transfer is green when positive; zero intensity is neutral.
CellShade shade(MetricKind kind, double value);

enum class TableFormat { Markdown, Csv, Ansi };

/// One-decimal, half-away-from-zero display of a scaled value.
std::string format_one_decimal(double value);

/// Cells as "v ± sem" with "Avg ± SEM" margins; absent cells render "--".
std::string render_table(const MetricTable& table, TableFormat format);

/// One parsed CSV row: kind,row,col,mean,sem,count,hue,intensity.
struct CsvCell {
  std::string kind;
  std::string row;
  std::string col;
  std::optional<double> mean;
  std::optional<double> sem;
  int count = 0;
  std::string hue;
  int intensity = 0;
};

std::vector<CsvCell> parse_table_csv(std::string_view text);

std::string render_summary(const std::string& policy, const SummaryStat& stat);

std::string render_final_performance(const std::string& policy, const FinalPerformance& fp);

/// Plot-ready CSV: `# boundary` comment rows for every schedule segment, a
/// header `timestep,<task>_<split>_mean,<task>_<split>_sem,...` and one row per
/// grid point. All curves must share the grid.
std::string export_plotdata(std::span<const AlignedCurve> curves, const Schedule& schedule,
                            const std::vector<std::string>& task_names);

}  // namespace corabench
