#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "corabench/config.hpp"
#include "corabench/gridenv.hpp"

namespace corabench {

struct EvalRecord {
  std::string run_id;
  std::string policy;
  std::uint64_t seed = 0;
  Step timestep = 0;
  int task = 0;
  int cycle = 0;
  Split split = Split::Train;
  double mean_return = 0.0;
  int episodes = 0;

  bool operator==(const EvalRecord&) const = default;
};

/// Everything a metrics pass needs to know about the run that produced a log.
struct LogHeader {
  std::string run_id;
  std::string policy;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string start_time;
  int cycles = 1;
  Step eval_interval = 0;
  int eval_episodes = 0;
  int smoothing_window = 1;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> task_names;
  std::vector<Step> frames;
  std::vector<bool> test_variant;

  bool operator==(const LogHeader&) const = default;
};

struct RunLog {
  LogHeader header;
  std::vector<EvalRecord> records;
};

LogHeader make_header(const ExperimentConfig& config, std::uint64_t seed, std::string run_id,
                      std::string start_time);

std::string run_id_for(const ExperimentConfig& config, std::uint64_t seed);

/// Schedule reconstructed from the per-task budgets recorded in a header.
Schedule schedule_from_header(const LogHeader& header);

std::string format_header(const LogHeader& header);
std::string format_record(const EvalRecord& record);

/// Parses a full log; errors name `source` and the offending line number.
RunLog parse_log(std::string_view text, const std::string& source = "<log>");
RunLog read_log(const std::string& path);

/// Every `*.log` in `dir`, sorted by file name. Throws IoError("no logs found") when empty.
std::vector<RunLog> read_log_dir(const std::string& dir);

/// Single-writer, append-only log file; each record is flushed as it is written.
class RunLogWriter {
 public:
  RunLogWriter(const std::string& path, const LogHeader& header);
  void append(const EvalRecord& record);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace corabench
