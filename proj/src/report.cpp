#include "corabench/report.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

namespace corabench {

namespace {

std::string task_label(const MetricTable& t, int i) {
  if (static_cast<std::size_t>(i) < t.task_names.size())
    return fmt::format("{}-{}", i, t.task_names[static_cast<std::size_t>(i)]);
  return std::to_string(i);
}

double displayed(double v) {
  const double r = std::round(v * 10.0) / 10.0;
  return r == 0.0 ? 0.0 : r;
}

std::string cell_text(const MetricCell& c) {
  if (!c.defined) return "--";
  return format_one_decimal(c.mean) + " ± " + format_one_decimal(c.sem);
}

std::string ansi_wrap(const std::string& text, const CellShade& s) {
  if (s.hue == Hue::Neutral) return text;
  const int color = s.hue == Hue::Red ? 31 : 32;
  const char* weight = s.intensity >= 8 ? "1;" : "";
  return fmt::format("\x1b[{}{}m{}\x1b[0m", weight, color, text);
}

std::string csv_number(const MetricCell& c, double v) { return c.defined ? format_real(v) : ""; }

}  // namespace

std::string_view hue_name(Hue hue) {
  switch (hue) {
    case Hue::Red: return "red";
    case Hue::Green: return "green";
    case Hue::Neutral: break;
  }
  return "neutral";
}

CellShade shade(MetricKind kind, double value) {
  // The epsilon absorbs binary representation error in values such as 4 * 2.3.
  const int intensity = static_cast<int>(std::floor(4.0 * std::fabs(value) + 1e-9));
  if (intensity == 0) return {Hue::Neutral, 0};
  const bool bad = kind == MetricKind::Forgetting ? value > 0.0 : value < 0.0;
  return {bad ? Hue::Red : Hue::Green, intensity};
}

std::string format_one_decimal(double value) { return fmt::format("{:.1f}", displayed(value)); }

std::string render_table(const MetricTable& t, TableFormat format) {
  const int n = t.tasks;
  std::ostringstream out;

  if (format == TableFormat::Csv) {
    out << "kind,row,col,mean,sem,count,hue,intensity\n";
    auto emit = [&](const std::string& row, const std::string& col, const MetricCell& c) {
      const CellShade s = c.defined ? shade(t.kind, displayed(c.mean)) : CellShade{};
      out << metric_kind_name(t.kind) << ',' << row << ',' << col << ',' << csv_number(c, c.mean) << ','
          << csv_number(c, c.sem) << ',' << c.count << ',' << hue_name(s.hue) << ',' << s.intensity
          << '\n';
    };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (cell_in_domain(t.kind, i, j))
          emit(std::to_string(i), std::to_string(j), t.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    for (int i = 0; i < n; ++i) emit(std::to_string(i), "avg", t.row_avg[static_cast<std::size_t>(i)]);
    for (int j = 0; j < n; ++j) emit("avg", std::to_string(j), t.col_avg[static_cast<std::size_t>(j)]);
    MetricCell overall{t.overall.mean, t.overall.sem, t.overall.seeds, t.overall.defined};
    emit("avg", "avg", overall);
    return out.str();
  }

  auto render = [&](const MetricCell& c) {
    const std::string text = cell_text(c);
    if (format == TableFormat::Ansi && c.defined) return ansi_wrap(text, shade(t.kind, displayed(c.mean)));
    return text;
  };
  const MetricCell overall{t.overall.mean, t.overall.sem, t.overall.seeds, t.overall.defined};

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{""};
  for (int j = 0; j < n; ++j) header.push_back(task_label(t, j));
  header.push_back("Avg ± SEM");
  grid.push_back(header);
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> row{task_label(t, i)};
    for (int j = 0; j < n; ++j) {
      const auto& c = t.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      row.push_back(cell_in_domain(t.kind, i, j) ? render(c) : "--");
    }
    row.push_back(render(t.row_avg[static_cast<std::size_t>(i)]));
    grid.push_back(std::move(row));
  }
  std::vector<std::string> last{"Avg ± SEM"};
  for (int j = 0; j < n; ++j) last.push_back(render(t.col_avg[static_cast<std::size_t>(j)]));
  last.push_back(render(overall));
  grid.push_back(std::move(last));

  const std::string title = t.kind == MetricKind::Forgetting ? "Isolated Forgetting" : "Zero-Shot Forward Transfer";
  if (format == TableFormat::Markdown) {
    out << "**" << title << "** (x10, mean ± SEM" << (t.single_seed ? ", single seed: SEM is 0" : "")
        << ")\n\n";
    for (std::size_t r = 0; r < grid.size(); ++r) {
      out << '|';
      for (const auto& cell : grid[r]) out << ' ' << cell << " |";
      out << '\n';
      if (r == 0) {
        out << '|';
        for (std::size_t c = 0; c < grid[r].size(); ++c) out << "---|";
        out << '\n';
      }
    }
  } else {
    out << title << " (x10, mean ± SEM)\n";
    for (const auto& row : grid) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "  " : "") << row[c];
      out << '\n';
    }
  }
  if (!t.undefined_cells.empty()) {
    out << "\nundefined cells (|r_max| below floor in some seed):";
    for (const auto& [i, j] : t.undefined_cells) out << fmt::format(" ({},{})", i, j);
    out << '\n';
  }
  return out.str();
}

std::vector<CsvCell> parse_table_csv(std::string_view text) {
  std::vector<CsvCell> cells;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string item;
    while (std::getline(ls, item, ',')) f.push_back(item);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw LogFormatError(fmt::format("table csv line {}: expected 8 fields", line_no));
    CsvCell c;
    c.kind = f[0];
    c.row = f[1];
    c.col = f[2];
    try {
      if (!f[3].empty()) c.mean = std::stod(f[3]);
      if (!f[4].empty()) c.sem = std::stod(f[4]);
      c.count = std::stoi(f[5]);
      c.intensity = std::stoi(f[7]);
    } catch (const std::exception&) {
      throw LogFormatError(fmt::format("table csv line {}: malformed number", line_no));
    }
    c.hue = f[6];
    cells.push_back(std::move(c));
  }
  return cells;
}

std::string render_summary(const std::string& policy, const SummaryStat& s) {
  const std::string symbol = s.kind == MetricKind::Forgetting ? "F" : "Z";
  if (!s.defined) return fmt::format("{}\t{}\t--\n", policy, symbol);
  return fmt::format("{}\t{}\t{} ± {}{}\n", policy, symbol, format_one_decimal(s.mean),
                     format_one_decimal(s.sem), s.single_seed ? "\t(single seed)" : "");
}

std::string render_final_performance(const std::string& policy, const FinalPerformance& fp) {
  std::ostringstream out;
  out << "**" << policy << "** final performance (mean ± SEM)\n\n";
  out << "| Task | Train | Test |\n|---|---|---|\n";
  for (std::size_t i = 0; i < fp.task_names.size(); ++i) {
    auto cell = [](const FinalCell& c) {
      return format_mean_sem(c.mean, c.sem) + (c.single_seed ? " (single seed)" : "");
    };
    out << "| " << i << '-' << fp.task_names[i] << " | " << cell(fp.train[i]) << " | " << cell(fp.test[i])
        << " |\n";
  }
  return out.str();
}

std::string export_plotdata(std::span<const AlignedCurve> curves, const Schedule& schedule,
                            const std::vector<std::string>& task_names) {
  std::ostringstream out;
  out << "# boundary,start,end,task,cycle\n";
  for (const auto& s : schedule.segments)
    out << "# boundary," << s.start << ',' << s.end << ',' << s.task_id << ',' << s.cycle << '\n';
  out << "timestep";
  for (const auto& c : curves) {
    const auto name = static_cast<std::size_t>(c.task) < task_names.size()
                          ? fmt::format("{}-{}", c.task, task_names[static_cast<std::size_t>(c.task)])
                          : std::to_string(c.task);
    out << ',' << name << '_' << split_name(c.split) << "_mean," << name << '_' << split_name(c.split)
        << "_sem";
  }
  out << '\n';
  if (curves.empty()) return out.str();
  const auto& grid = curves.front().grid;
  for (const auto& c : curves)
    if (c.grid != grid) throw MetricError("export_plotdata: curves are not aligned to a common grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out << format_real(grid[k]);
    for (const auto& c : curves) out << ',' << format_real(c.mean[k]) << ',' << format_real(c.sem[k]);
    out << '\n';
  }
  return out.str();
}

}  // namespace corabench
