#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corabench/schedule.hpp"

namespace corabench {

enum class PolicyKind { Naive, Ewc, OnlineEwc, PnC, Clear };

/// Registry of trainable baselines: naive, ewc, online_ewc, pnc, clear.
std::optional<PolicyKind> policy_kind_from_name(std::string_view name);
std::string_view policy_name(PolicyKind kind);
const std::vector<std::string>& available_policies();

/// Learner and baseline hyperparameters.
struct AgentParams {
  int hidden_width = 64;
  double learning_rate = 4e-4;
  double rmsprop_alpha = 0.99;
  double rmsprop_eps = 0.01;
  double rmsprop_momentum = 0.0;
  double entropy_cost = 0.01;
  double baseline_cost = 0.5;
  double discount = 0.99;
  double grad_clip = 40.0;
  int unroll_length = 20;
  int batch_size = 32;

  double ewc_lambda = 0.0;
  Step ewc_min_task_steps = 200000;
  int fisher_samples = 100;
  bool normalize_fisher = false;
  double online_ewc_gamma = 0.99;

  double kl_cost = 1.0;

  Step replay_buffer_size = 25000000;
  double policy_cloning_cost = 0.01;
  double value_cloning_cost = 0.005;

  bool operator==(const AgentParams&) const = default;
};

/// Per-baseline defaults (EWC lambda 10000 / online EWC 175 / P&C 3000, Fisher
/// normalisation off for EWC and on for the other two).
AgentParams default_agent_params(PolicyKind kind);

/// Defaults overridden by `overrides`; unknown keys or bad values throw ConfigError.
AgentParams resolve_agent_params(PolicyKind kind, const std::map<std::string, std::string>& overrides);

struct ExperimentConfig {
  std::vector<TaskSpec> tasks;
  int cycles = 1;
  Step eval_interval = 0;
  int eval_episodes = 10;
  int smoothing_window = 1;
  std::vector<std::uint64_t> seeds;
  std::string policy_name;
  std::map<std::string, std::string> policy_params;
  std::string output_dir = "runs";

  // Derived from policy_name and policy_params at parse time.
  PolicyKind policy_kind = PolicyKind::Naive;
  AgentParams agent;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses the `key = value` document with `[task.<i>]` and `[policy]` sections.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Serialises to the same document format; parse_config(to_config_text(c)) == c.
std::string to_config_text(const ExperimentConfig& config);

/// Throws ConfigError when cross-field constraints fail (also run by parse_config).
void validate_config(const ExperimentConfig& config);

/// Stable 64-bit digest of the serialised config, rendered as 16 hex digits.
std::string config_digest(const ExperimentConfig& config);

/// Output directory after applying the CORABENCH_OUT override.
std::string effective_output_dir(const ExperimentConfig& config);

}  // namespace corabench
