#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "corabench/config.hpp"

namespace cbtest {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("corabench-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline const char* kTinyConfig = R"(# two small tasks
policy_name = naive
cycles = 2
eval_interval = 200
eval_episodes = 3
seeds = 1, 2, 3
[task.0]
name = open
frames = 400
grid_size = 5
[task.1]
name = walls
frames = 400
grid_size = 5
obstacle_density = 0.2
test_variant.monster_count = 1
)";

inline corabench::ExperimentConfig tiny_config(const std::string& policy = "naive") {
  auto c = corabench::parse_config(kTinyConfig);
  c.policy_name = policy;
  c.policy_kind = *corabench::policy_kind_from_name(policy);
  c.agent = corabench::resolve_agent_params(c.policy_kind, c.policy_params);
  return c;
}

}  // namespace cbtest
