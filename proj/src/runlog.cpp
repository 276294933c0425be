#include "corabench/runlog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace corabench {

namespace {

constexpr std::string_view kMagic = "#corabench-log";
constexpr std::string_view kVersion = "v1";

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) out += v[i];
    else out += std::to_string(v[i]);
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view s, const std::string& where) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw LogFormatError(fmt::format("{}: '{}' is not an integer", where, s));
  return v;
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw LogFormatError(fmt::format("{}: '{}' is not a number", where, s));
  return v;
}

LogHeader parse_header(std::string_view line, const std::string& where) {
  const auto fields = split(line, '\t');
  if (fields.size() < 2 || fields[0] != kMagic || fields[1] != kVersion)
    throw LogFormatError(fmt::format("{}: missing '{} {}' header", where, kMagic, kVersion));
  std::map<std::string, std::string, std::less<>> kv;
  for (std::size_t i = 2; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string_view::npos)
      throw LogFormatError(fmt::format("{}: header field '{}' lacks '='", where, fields[i]));
    kv[std::string(fields[i].substr(0, eq))] = std::string(fields[i].substr(eq + 1));
  }
  auto get = [&](std::string_view key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw LogFormatError(fmt::format("{}: header lacks '{}'", where, key));
    return it->second;
  };
  auto list = [&](std::string_view key) {
    const auto& v = get(key);
    return v.empty() ? std::vector<std::string_view>{} : split(v, ',');
  };

  LogHeader h;
  h.run_id = get("run_id");
  h.policy = get("policy");
  h.seed = parse_int<std::uint64_t>(get("seed"), where);
  h.config_digest = get("config_digest");
  h.start_time = get("start_time");
  h.cycles = parse_int<int>(get("cycles"), where);
  h.eval_interval = parse_int<Step>(get("eval_interval"), where);
  h.eval_episodes = parse_int<int>(get("eval_episodes"), where);
  h.smoothing_window = parse_int<int>(get("smoothing_window"), where);
  for (auto s : list("seeds")) h.seeds.push_back(parse_int<std::uint64_t>(s, where));
  for (auto s : list("task_names")) h.task_names.emplace_back(s);
  for (auto s : list("frames")) h.frames.push_back(parse_int<Step>(s, where));
  for (auto s : list("test_variant")) h.test_variant.push_back(parse_int<int>(s, where) != 0);
  if (h.frames.empty() || h.frames.size() != h.task_names.size() ||
      h.frames.size() != h.test_variant.size())
    throw LogFormatError(fmt::format("{}: inconsistent task lists in header", where));
  if (h.cycles < 1 || h.smoothing_window < 1)
    throw LogFormatError(fmt::format("{}: invalid cycles or smoothing_window", where));
  return h;
}

}  // namespace

std::string run_id_for(const ExperimentConfig& config, std::uint64_t seed) {
  return fmt::format("{}-seed{}", config.policy_name, seed);
}

LogHeader make_header(const ExperimentConfig& config, std::uint64_t seed, std::string run_id,
                      std::string start_time) {
  LogHeader h;
  h.run_id = std::move(run_id);
  h.policy = config.policy_name;
  h.seed = seed;
  h.config_digest = config_digest(config);
  h.start_time = std::move(start_time);
  h.cycles = config.cycles;
  h.eval_interval = config.eval_interval;
  h.eval_episodes = config.eval_episodes;
  h.smoothing_window = config.smoothing_window;
  h.seeds = config.seeds;
  for (const auto& t : config.tasks) {
    h.task_names.push_back(t.name);
    h.frames.push_back(t.frames_per_visit);
    h.test_variant.push_back(t.eval_test_variant.has_value());
  }
  return h;
}

Schedule schedule_from_header(const LogHeader& header) {
  std::vector<TaskSpec> tasks;
  for (std::size_t i = 0; i < header.frames.size(); ++i) {
    TaskSpec t;
    t.task_id = static_cast<int>(i);
    t.frames_per_visit = header.frames[i];
    tasks.push_back(t);
  }
  return build_schedule(tasks, header.cycles);
}

std::string format_header(const LogHeader& h) {
  std::vector<int> variant;
  for (bool b : h.test_variant) variant.push_back(b ? 1 : 0);
  return fmt::format(
      "{}\t{}\trun_id={}\tpolicy={}\tseed={}\tconfig_digest={}\tstart_time={}\tcycles={}"
      "\teval_interval={}\teval_episodes={}\tsmoothing_window={}\tseeds={}\ttask_names={}"
      "\tframes={}\ttest_variant={}",
      kMagic, kVersion, h.run_id, h.policy, h.seed, h.config_digest, h.start_time, h.cycles,
      h.eval_interval, h.eval_episodes, h.smoothing_window, join(h.seeds), join(h.task_names),
      join(h.frames), join(variant));
}

std::string format_record(const EvalRecord& r) {
  return fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}", r.run_id, r.policy, r.seed, r.timestep,
                     r.task, r.cycle, split_name(r.split), format_real(r.mean_return), r.episodes);
}

RunLog parse_log(std::string_view text, const std::string& source) {
  RunLog log;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto where = fmt::format("{}:{}", source, line_no);
    if (!have_header) {
      log.header = parse_header(line, where);
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 9)
      throw LogFormatError(fmt::format("{}: expected 9 tab-separated fields, got {}", where, f.size()));
    EvalRecord r;
    r.run_id = std::string(f[0]);
    r.policy = std::string(f[1]);
    r.seed = parse_int<std::uint64_t>(f[2], where);
    r.timestep = parse_int<Step>(f[3], where);
    r.task = parse_int<int>(f[4], where);
    r.cycle = parse_int<int>(f[5], where);
    if (f[6] == "train") r.split = Split::Train;
    else if (f[6] == "test") r.split = Split::Test;
    else throw LogFormatError(fmt::format("{}: unknown split '{}'", where, f[6]));
    r.mean_return = parse_double(f[7], where);
    r.episodes = parse_int<int>(f[8], where);
    if (r.task < 0 || r.task >= static_cast<int>(log.header.frames.size()))
      throw LogFormatError(fmt::format("{}: task index {} out of range", where, r.task));
    if (!log.records.empty() && r.timestep < log.records.back().timestep)
      throw LogFormatError(fmt::format("{}: timestep decreases", where));
    log.records.push_back(std::move(r));
  }
  if (!have_header) throw LogFormatError(fmt::format("{}:1: empty log", source));
  return log;
}

RunLog read_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open log '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_log(buf.str(), path);
}

std::vector<RunLog> read_log_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(fmt::format("'{}' is not a directory", dir));
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".log") paths.push_back(entry.path().string());
  if (paths.empty()) throw IoError(fmt::format("no logs found in '{}'", dir));
  std::sort(paths.begin(), paths.end());
  std::vector<RunLog> logs;
  for (const auto& p : paths) logs.push_back(read_log(p));
  return logs;
}

RunLogWriter::RunLogWriter(const std::string& path, const LogHeader& header) : path_(path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError(fmt::format("cannot write log '{}'", path));
  out_ << format_header(header) << '\n';
  out_.flush();
}

void RunLogWriter::append(const EvalRecord& record) {
  out_ << format_record(record) << '\n';
  out_.flush();
  if (!out_) throw IoError(fmt::format("write failed on '{}'", path_));
}

}  // namespace corabench
