#include "corabench/cli.hpp"

#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "corabench/harness.hpp"
#include "corabench/metrics.hpp"
#include "corabench/report.hpp"

namespace corabench {

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Usage: return 2;
    case ErrorCategory::Config: return 3;
    case ErrorCategory::Io: return 4;
    case ErrorCategory::LogFormat: return 5;
    case ErrorCategory::Metric: return 6;
    case ErrorCategory::Range: return 7;
    case ErrorCategory::Environment: return 8;
    case ErrorCategory::Training: return 9;
  }
  return 1;
}

namespace {

std::vector<MetricKind> kinds_for(const std::string& kind) {
  if (kind == "forgetting") return {MetricKind::Forgetting};
  if (kind == "transfer") return {MetricKind::Transfer};
  return {MetricKind::Forgetting, MetricKind::Transfer};
}

std::vector<BoundaryReturns> per_seed_boundaries(const std::vector<RunLog>& logs) {
  std::vector<BoundaryReturns> out;
  out.reserve(logs.size());
  for (const auto& log : logs) out.push_back(boundary_returns_for_log(log));
  return out;
}

void command_run(const std::string& path, const std::optional<std::uint64_t>& seed, bool parallel,
                 std::ostream& out) {
  const ExperimentConfig config = load_config(path);
  const std::string dir = effective_output_dir(config);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", dir, ec.message()));

  const std::vector<std::uint64_t> seeds = seed ? std::vector<std::uint64_t>{*seed} : config.seeds;
  RunOptions options;
  options.output_dir = dir;

  if (!parallel || seeds.size() < 2) {
    for (const auto s : seeds) {
      run_experiment(config, s, options);
      out << fmt::format("wrote {}\n", (std::filesystem::path(dir) / (run_id_for(config, s) + ".log")).string());
    }
    return;
  }

  std::vector<std::exception_ptr> failures(seeds.size());
  std::vector<std::thread> workers;
  workers.reserve(seeds.size());
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    workers.emplace_back([&, k] {
      try {
        run_experiment(config, seeds[k], options);
      } catch (...) {
        failures[k] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  for (const auto s : seeds)
    out << fmt::format("wrote {}\n", (std::filesystem::path(dir) / (run_id_for(config, s) + ".log")).string());
}

void command_metrics(const std::string& dir, const std::string& kind, bool strict, std::ostream& out) {
  const auto groups = group_by_policy(read_log_dir(dir));
  const SemOptions options{strict};
  out << "policy\tmetric\tmean ± SEM\n";
  for (const auto& [policy, logs] : groups) {
    const auto boundaries = per_seed_boundaries(logs);
    for (const MetricKind k : kinds_for(kind)) {
      const auto matrices = metric_matrices(k, boundaries);
      out << render_summary(policy, summary_stat(k, matrices, options));
    }
  }
}

void command_tables(const std::string& dir, const std::string& format, const std::string& kind,
                    bool strict, std::ostream& out) {
  const TableFormat f = format == "csv"    ? TableFormat::Csv
                        : format == "ansi" ? TableFormat::Ansi
                                           : TableFormat::Markdown;
  const auto groups = group_by_policy(read_log_dir(dir));
  const SemOptions options{strict};
  bool first = true;
  for (const auto& [policy, logs] : groups) {
    const auto boundaries = per_seed_boundaries(logs);
    for (const MetricKind k : kinds_for(kind)) {
      MetricTable table = diagnostic_table(k, boundaries, options);
      table.task_names = logs.front().header.task_names;
      if (f == TableFormat::Csv) {
        out << "# policy," << policy << '\n';
      } else {
        if (!first) out << '\n';
        out << "## " << policy << "\n\n";
      }
      out << render_table(table, f);
      first = false;
    }
  }
}

void command_final(const std::string& dir, std::ostream& out) {
  const auto groups = group_by_policy(read_log_dir(dir));
  bool first = true;
  for (const auto& [policy, logs] : groups) {
    if (!first) out << '\n';
    out << render_final_performance(policy, final_performance(logs, logs.front().header.smoothing_window));
    first = false;
  }
}

void command_plotdata(const std::string& dir, double interval, std::ostream& out) {
  const auto groups = group_by_policy(read_log_dir(dir));
  for (const auto& [policy, logs] : groups) {
    const LogHeader& header = logs.front().header;
    const Schedule schedule = schedule_from_header(header);
    const double step = interval > 0.0 ? interval : static_cast<double>(header.eval_interval);
    std::vector<AlignedCurve> aligned;
    for (int task = 0; task < static_cast<int>(header.task_names.size()); ++task) {
      for (const Split split : {Split::Train, Split::Test}) {
        std::vector<ReturnCurve> curves;
        for (const auto& log : logs) {
          auto all = curves_from_log(log, header.smoothing_window);
          const auto it = all.find({task, split});
          if (it != all.end()) curves.push_back(std::move(it->second));
        }
        if (!curves.empty()) aligned.push_back(align_curves(curves, step));
      }
    }
    out << "# policy," << policy << '\n';
    out << export_plotdata(aligned, schedule, header.task_names);
  }
}

void command_validate(const std::string& path, bool render_layout, std::ostream& out) {
  const ExperimentConfig config = load_config(path);
  const Schedule schedule = build_schedule(config.tasks, config.cycles);
  out << fmt::format("ok: {} tasks, {} cycles, {} total steps, policy {}, {} seeds, digest {}\n",
                     config.tasks.size(), config.cycles, schedule.total_steps, config.policy_name,
                     config.seeds.size(), config_digest(config));
  if (!render_layout) return;
  for (const auto& task : config.tasks) {
    const auto seeds = train_context_seeds(task);
    const Context ctx{seeds.empty() ? 0 : seeds.front(), Split::Train};
    out << fmt::format("\ntask {} ({}), train context {}:\n", task.task_id, task.name, ctx.seed);
    out << render_ascii(reset(task, ctx, Variant::Train).first);
    if (task.eval_test_variant) {
      out << fmt::format("task {} ({}), test variant, context {}:\n", task.task_id, task.name, ctx.seed);
      out << render_ascii(reset(task, Context{ctx.seed, Split::Test}, Variant::TestVariant).first);
    }
  }
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"corabench: continual RL benchmark on procedural gridworlds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string log_dir;
  std::optional<std::uint64_t> seed;
  bool all_seeds = false;
  bool parallel = false;
  bool render_layout = false;
  bool strict_sem = false;
  std::string kind = "both";
  std::string format = "markdown";
  double interval = 0.0;

  auto* run = app.add_subcommand("run", "train and evaluate one policy on a task sequence");
  run->add_option("config", config_path, "experiment config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "run a single seed");
  run->add_flag("--all-seeds", all_seeds, "run every seed listed in the config (default)")->excludes(seed_opt);
  run->add_flag("--parallel", parallel, "run seeds concurrently");

  auto* metrics = app.add_subcommand("metrics", "summary forgetting / transfer per policy");
  metrics->add_option("logdir", log_dir)->required();
  metrics->add_option("--kind", kind)->check(CLI::IsMember({"forgetting", "transfer", "both"}));
  metrics->add_flag("--strict-sem", strict_sem, "divide aggregate SEMs by sqrt(task count)");

  auto* tables = app.add_subcommand("tables", "per-pair diagnostic tables");
  tables->add_option("logdir", log_dir)->required();
  tables->add_option("--format", format)->check(CLI::IsMember({"markdown", "csv", "ansi"}));
  tables->add_option("--kind", kind)->check(CLI::IsMember({"forgetting", "transfer", "both"}));
  tables->add_flag("--strict-sem", strict_sem);

  auto* final_cmd = app.add_subcommand("final", "final train / test performance per task");
  final_cmd->add_option("logdir", log_dir)->required();

  auto* plot = app.add_subcommand("plotdata", "aligned curves as CSV");
  plot->add_option("logdir", log_dir)->required();
  plot->add_option("--interval", interval, "grid spacing (defaults to the eval interval)");

  auto* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("config", config_path)->required();
  validate->add_flag("--render-layout", render_layout, "print one generated level per task");

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    if (app.get_subcommand_no_throw(name) == nullptr) {
      err << "error [" << category_name(ErrorCategory::Usage) << "]: unknown subcommand '" << name << "'\n";
      return exit_code_for(ErrorCategory::Usage);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error [" << category_name(ErrorCategory::Usage) << "]: " << e.what() << '\n';
    return exit_code_for(ErrorCategory::Usage);
  }

  try {
    if (*run) command_run(config_path, seed, parallel, out);
    else if (*metrics) command_metrics(log_dir, kind, strict_sem, out);
    else if (*tables) command_tables(log_dir, format, kind, strict_sem, out);
    else if (*final_cmd) command_final(log_dir, out);
    else if (*plot) command_plotdata(log_dir, interval, out);
    else if (*validate) command_validate(config_path, render_layout, out);
  } catch (const Error& e) {
    err << "error [" << category_name(e.category()) << "]: " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cli_main(int argc, char** argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace corabench
