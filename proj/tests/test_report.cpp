#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include "corabench/cli.hpp"
#include "corabench/report.hpp"
#include "metric_oracle.hpp"
#include "support.hpp"

using namespace corabench;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "corabench");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<BoundaryReturns> boundaries(const std::vector<RunLog>& logs) {
  std::vector<BoundaryReturns> out;
  for (const auto& l : logs) out.push_back(boundary_returns_for_log(l));
  return out;
}

// 2x2 forgetting table over two seeds with hand-picked values.
MetricTable two_by_two() {
  std::vector<BoundaryReturns> seeds;
  for (double drop : {0.2, 0.4}) {
    BoundaryReturns br;
    br.r_end = MatrixXd::Zero(2, 3);
    br.r_max = VectorXd::Ones(2);
    br.r_end(0, 1) = 1.0;
    br.r_end(0, 2) = 1.0 - drop;
    seeds.push_back(br);
  }
  auto t = diagnostic_table(MetricKind::Forgetting, seeds);
  t.task_names = {"open", "lava"};
  return t;
}

}  // namespace

TEST_CASE("shade law on published cells") {
  struct Case {
    MetricKind kind;
    double v;
    Hue hue;
    int intensity;
  };
  const Case cases[] = {
      {MetricKind::Forgetting, 3.8, Hue::Red, 15},   {MetricKind::Forgetting, 2.3, Hue::Red, 9},
      {MetricKind::Forgetting, 1.2, Hue::Red, 4},    {MetricKind::Forgetting, -1.7, Hue::Green, 6},
      {MetricKind::Forgetting, 3.4, Hue::Red, 13},   {MetricKind::Forgetting, 0.1, Hue::Neutral, 0},
      {MetricKind::Forgetting, 0.5, Hue::Red, 2},    {MetricKind::Forgetting, -0.3, Hue::Green, 1},
      {MetricKind::Forgetting, 0.0, Hue::Neutral, 0}, {MetricKind::Transfer, 1.2, Hue::Green, 4},
      {MetricKind::Transfer, -0.5, Hue::Red, 2},
  };
  for (const auto& c : cases) {
    const auto s = shade(c.kind, c.v);
    INFO(c.v);
    CHECK(s.hue == c.hue);
    CHECK(s.intensity == c.intensity);
  }
}

TEST_CASE("shade is odd in hue and even in intensity") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int k = 0; k < 500; ++k) {
    const double v = std::round(u(gen) * 10) / 10;
    for (const auto kind : {MetricKind::Forgetting, MetricKind::Transfer}) {
      const auto a = shade(kind, v);
      const auto b = shade(kind, -v);
      CHECK(a.intensity == b.intensity);
      CHECK((a.hue == Hue::Neutral) == (a.intensity == 0));
      if (a.hue == Hue::Red) CHECK(b.hue == Hue::Green);
      if (a.hue == Hue::Green) CHECK(b.hue == Hue::Red);
      if (a.hue == Hue::Neutral) CHECK(b.hue == Hue::Neutral);
    }
  }
}

TEST_CASE("one-decimal display rounds half away from zero") {
  CHECK(format_one_decimal(0.25) == "0.3");
  CHECK(format_one_decimal(-0.25) == "-0.3");
  CHECK(format_one_decimal(-0.04) == "0.0");
  CHECK(format_one_decimal(2.349) == "2.3");
}

TEST_CASE("markdown table layout") {
  const auto md = render_table(two_by_two(), TableFormat::Markdown);
  CHECK(md.find("**Isolated Forgetting**") != std::string::npos);
  CHECK(md.find("|  | 0-open | 1-lava | Avg ± SEM |") != std::string::npos);
  CHECK(md.find("| 0-open | -- | 3.0 ± 1.0 | 3.0 ± 1.0 |") != std::string::npos);
  CHECK(md.find("| 1-lava | -- | -- | -- |") != std::string::npos);
  CHECK(md.find("| Avg ± SEM | -- | 3.0 ± 1.0 | 3.0 ± 1.0 |") != std::string::npos);
  // last row is the Avg row
  const auto last_row = md.substr(md.rfind("\n|", md.size() - 2) + 1);
  CHECK(last_row.rfind("| Avg ± SEM", 0) == 0);
}

TEST_CASE("undefined cells render as absent and are listed") {
  std::vector<BoundaryReturns> seeds(1);
  seeds[0].r_end = MatrixXd::Zero(2, 3);
  seeds[0].r_max = VectorXd::Zero(2);
  const auto t = diagnostic_table(MetricKind::Forgetting, seeds);
  const auto md = render_table(t, TableFormat::Markdown);
  CHECK(md.find("| 0 | -- | -- | -- |") != std::string::npos);
  CHECK(md.find("undefined cells") != std::string::npos);
  CHECK(md.find("(0,1)") != std::string::npos);
  CHECK(md.find("single seed") != std::string::npos);
  const auto csv = parse_table_csv(render_table(t, TableFormat::Csv));
  CHECK_FALSE(csv.front().mean.has_value());
  CHECK(csv.front().count == 0);
  CHECK(csv.front().hue == "neutral");
}

TEST_CASE("ansi rendering colours shaded cells") {
  const auto ansi = render_table(two_by_two(), TableFormat::Ansi);
  CHECK(ansi.find("\x1b[1;31m3.0 ± 1.0\x1b[0m") != std::string::npos);  // intensity 12
  auto t = two_by_two();
  t.kind = MetricKind::Transfer;
  CHECK(render_table(t, TableFormat::Ansi).find("Zero-Shot Forward Transfer") != std::string::npos);
}

TEST_CASE("csv round trip keeps 9 significant digits") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto logs = cbtest::synthetic_logs(gen, 3);
    for (const auto kind : {MetricKind::Forgetting, MetricKind::Transfer}) {
      const auto t = diagnostic_table(kind, boundaries(logs));
      const auto cells = parse_table_csv(render_table(t, TableFormat::Csv));
      std::size_t k = 0;
      auto check = [&](const MetricCell& c) {
        REQUIRE(k < cells.size());
        const auto& p = cells[k++];
        CHECK(p.kind == metric_kind_name(kind));
        CHECK(p.count == c.count);
        REQUIRE(p.mean.has_value() == c.defined);
        if (!c.defined) return;
        CHECK(*p.mean == doctest::Approx(c.mean).epsilon(5e-9));
        CHECK(*p.sem == doctest::Approx(c.sem).epsilon(5e-9));
        CHECK(format_real(*p.mean) == format_real(c.mean));
        CHECK(format_real(*p.sem) == format_real(c.sem));
        const auto s = shade(kind, std::round(c.mean * 10) / 10);
        CHECK(p.intensity == s.intensity);
        CHECK(p.hue == hue_name(s.hue));
      };
      for (int i = 0; i < t.tasks; ++i)
        for (int j = 0; j < t.tasks; ++j)
          if (cell_in_domain(kind, i, j)) check(t.cells[i][j]);
      for (const auto& c : t.row_avg) check(c);
      for (const auto& c : t.col_avg) check(c);
      check({t.overall.mean, t.overall.sem, t.overall.seeds, t.overall.defined});
      CHECK(k == cells.size());
    }
  }
  CHECK_THROWS_AS(parse_table_csv("header\n1,2,3\n"), LogFormatError);
}

TEST_CASE("summary rendering") {
  SummaryStat s{MetricKind::Forgetting, 2.349, 0.05, 5, true, false};
  CHECK(render_summary("clear", s) == "clear\tF\t2.3 ± 0.1\n");
  s.single_seed = true;
  CHECK(render_summary("clear", s) == "clear\tF\t2.3 ± 0.1\t(single seed)\n");
  s.defined = false;
  s.kind = MetricKind::Transfer;
  CHECK(render_summary("x", s) == "x\tZ\t--\n");
}

TEST_CASE("plot data export") {
  auto c = ReturnCurve{0, Split::Train, 1, {0, 10}, {0.5, 1.5}};
  const std::vector<ReturnCurve> one{c};
  const std::vector<double> grid{0, 10};
  const auto aligned = align_curves(one, grid);
  TaskSpec t;
  t.frames_per_visit = 10;
  const Schedule s = build_schedule({t}, 2);
  const auto csv = export_plotdata(std::vector<AlignedCurve>{aligned}, s, {"open"});

  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> comments, rows;
  while (std::getline(in, line)) (line[0] == '#' ? comments : rows).push_back(line);
  REQUIRE(comments.size() == 3);
  CHECK(comments[1] == "# boundary,0,10,0,0");
  CHECK(comments[2] == "# boundary,10,20,0,1");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "timestep,0-open_train_mean,0-open_train_sem");
  CHECK(rows[1] == "0,0.5,0");
  CHECK(rows[2] == "10,1.5,0");

  auto other = aligned;
  other.grid = {0, 5};
  CHECK_THROWS_AS(export_plotdata(std::vector<AlignedCurve>{aligned, other}, s, {"open"}), MetricError);
}

TEST_CASE("final performance rendering") {
  FinalPerformance fp;
  fp.task_names = {"open"};
  fp.train = {{12.0, 2.0, 2, false}};
  fp.test = {{3.0, 0.0, 1, true}};
  const auto md = render_final_performance("naive", fp);
  CHECK(md.find("| 0-open | 12.00 ± 2.00 | 3.00 ± 0.00 (single seed) |") != std::string::npos);
}

// --- command line ------------------------------------------------------------

TEST_CASE("cli validate") {
  const auto dir = cbtest::scratch_dir("cli-validate");
  cbtest::write_file(dir / "good.cfg", cbtest::kTinyConfig);
  const auto r = cli({"validate", (dir / "good.cfg").string()});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("ok: 2 tasks, 2 cycles, 1600 total steps, policy naive, 3 seeds", 0) == 0);
  const auto layout = cli({"validate", (dir / "good.cfg").string(), "--render-layout"});
  CHECK(layout.code == 0);
  CHECK(layout.out.find("test variant") != std::string::npos);

  cbtest::write_file(dir / "bad.cfg", "policy_name = sgd\neval_interval = 1\nseeds = 1\n[task.0]\nframes = 10\n");
  const auto bad = cli({"validate", (dir / "bad.cfg").string()});
  CHECK(bad.code == exit_code_for(ErrorCategory::Config));
  CHECK(bad.err.find("sgd") != std::string::npos);

  const auto missing = cli({"validate", (dir / "nope.cfg").string()});
  CHECK(missing.code == exit_code_for(ErrorCategory::Io));
}

TEST_CASE("cli usage errors") {
  const auto unknown = cli({"frobnicate"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("unknown subcommand 'frobnicate'") != std::string::npos);
  CHECK(cli({}).code == 2);
  CHECK(cli({"metrics"}).code == 2);
  CHECK(cli({"tables", "x", "--format", "pdf"}).code == 2);
  CHECK(cli({"run", "x.cfg", "--seed", "1", "--all-seeds"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("cli metrics on an empty directory") {
  const auto dir = cbtest::scratch_dir("cli-empty");
  const auto r = cli({"metrics", dir.string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("no logs found") != std::string::npos);
}

TEST_CASE("cli reports the line of a malformed log") {
  const auto dir = cbtest::scratch_dir("cli-bad-log");
  const auto header = format_header(make_header(cbtest::tiny_config(), 1, "bad", "t"));
  cbtest::write_file(dir / "bad.log", header + "\nbad\tnaive\t1\t0\t0\t0\ttrain\t0.5\t3\nbad\tnaive\t1\tzero\n");
  const auto r = cli({"metrics", dir.string()});
  CHECK(r.code == exit_code_for(ErrorCategory::LogFormat));
  CHECK(r.err.find("bad.log:3") != std::string::npos);
}

TEST_CASE("cli run fans out over seeds and downstream commands are deterministic") {
  const auto dir = cbtest::scratch_dir("cli-run");
  cbtest::write_file(dir / "tiny.cfg", cbtest::kTinyConfig);
  const auto out = dir / "logs";
  ::setenv("CORABENCH_OUT", out.string().c_str(), 1);
  const auto r = cli({"run", (dir / "tiny.cfg").string(), "--all-seeds"});
  ::unsetenv("CORABENCH_OUT");
  REQUIRE(r.code == 0);
  int logs = 0;
  for (const auto& e : std::filesystem::directory_iterator(out)) logs += e.path().extension() == ".log";
  CHECK(logs == 3);

  const auto par_dir = dir / "par";
  ::setenv("CORABENCH_OUT", par_dir.string().c_str(), 1);
  const auto p = cli({"run", (dir / "tiny.cfg").string(), "--parallel"});
  const auto single = cli({"run", (dir / "tiny.cfg").string(), "--seed", "2"});
  ::unsetenv("CORABENCH_OUT");
  CHECK(p.code == 0);
  CHECK(single.code == 0);

  for (const char* cmd : {"metrics", "tables", "final", "plotdata"}) {
    const auto a = cli({cmd, out.string()});
    const auto b = cli({cmd, out.string()});
    const auto c = cli({cmd, par_dir.string()});
    INFO(cmd);
    CHECK(a.code == 0);
    CHECK(!a.out.empty());
    CHECK(a.out == b.out);
    CHECK(a.out == c.out);  // parallel runs produce the same records
  }
  const auto csv = cli({"tables", out.string(), "--format", "csv", "--kind", "transfer"});
  CHECK(csv.out.rfind("# policy,naive\nkind,row,col", 0) == 0);
  const auto metrics = cli({"metrics", out.string()});
  CHECK(metrics.out.find("naive\tF\t") != std::string::npos);
  CHECK(metrics.out.find("naive\tZ\t") != std::string::npos);
}
