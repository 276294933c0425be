#include "corabench/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace corabench {

namespace {

const std::vector<std::pair<std::string, PolicyKind>>& registry() {
  static const std::vector<std::pair<std::string, PolicyKind>> entries = {
      {"naive", PolicyKind::Naive},
      {"ewc", PolicyKind::Ewc},
      {"online_ewc", PolicyKind::OnlineEwc},
      {"pnc", PolicyKind::PnC},
      {"clear", PolicyKind::Clear},
  };
  return entries;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    throw ConfigError(fmt::format("key '{}': '{}' is not a number", key, value));
  return out;
}

// Integers accept scientific notation ("5e4") as long as the value is integral.
std::int64_t to_integer(std::string_view key, std::string_view value) {
  std::int64_t direct = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, direct);
  if (ec == std::errc() && ptr == end) return direct;
  const double real = to_real(key, value);
  if (real != std::floor(real) || std::fabs(real) > 9.0e18)
    throw ConfigError(fmt::format("key '{}': '{}' is not an integer", key, value));
  return static_cast<std::int64_t>(real);
}

std::uint64_t to_seed(std::string_view key, std::string_view value) {
  std::uint64_t seed = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, seed);
  if (ec == std::errc() && ptr == end) return seed;
  const auto v = to_integer(key, value);
  if (v < 0) throw ConfigError("seeds must be non-negative");
  return static_cast<std::uint64_t>(v);
}

int to_int(std::string_view key, std::string_view value) {
  const auto v = to_integer(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(fmt::format("key '{}': '{}' out of range", key, value));
  return static_cast<int>(v);
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "no" || value == "0") return false;
  throw ConfigError(fmt::format("key '{}': '{}' is not a boolean", key, value));
}

std::string real_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Applies one factor key; returns false when the key is not a factor key.
bool apply_factor(EnvFactors& f, std::string_view key, std::string_view value) {
  if (key == "grid_size") f.grid_size = to_int(key, value);
  else if (key == "obstacle_density") f.obstacle_density = to_real(key, value);
  else if (key == "lava_density") f.lava_density = to_real(key, value);
  else if (key == "monster_count") f.monster_count = to_int(key, value);
  else if (key == "dark_radius") {
    if (value == "none") f.dark_radius.reset();
    else f.dark_radius = to_int(key, value);
  } else if (key == "trap_prob") f.trap_prob = to_real(key, value);
  else if (key == "episode_cap") f.episode_cap = to_int(key, value);
  else return false;
  return true;
}

void write_factors(std::ostream& out, const EnvFactors& f, std::string_view prefix) {
  out << prefix << "grid_size = " << f.grid_size << '\n';
  out << prefix << "obstacle_density = " << real_text(f.obstacle_density) << '\n';
  out << prefix << "lava_density = " << real_text(f.lava_density) << '\n';
  out << prefix << "monster_count = " << f.monster_count << '\n';
  out << prefix << "dark_radius = " << (f.dark_radius ? std::to_string(*f.dark_radius) : "none")
      << '\n';
  out << prefix << "trap_prob = " << real_text(f.trap_prob) << '\n';
  out << prefix << "episode_cap = " << f.episode_cap << '\n';
}

struct TaskDraft {
  TaskSpec spec;
  std::map<std::string, std::string> variant_overrides;
  bool has_frames = false;
};

}  // namespace

std::optional<PolicyKind> policy_kind_from_name(std::string_view name) {
  for (const auto& [n, k] : registry())
    if (n == name) return k;
  return std::nullopt;
}

std::string_view policy_name(PolicyKind kind) {
  for (const auto& [n, k] : registry())
    if (k == kind) return n;
  return "unknown";
}

const std::vector<std::string>& available_policies() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [n, k] : registry()) v.push_back(n);
    return v;
  }();
  return names;
}

AgentParams default_agent_params(PolicyKind kind) {
  AgentParams p;
  switch (kind) {
    case PolicyKind::Ewc:
      p.ewc_lambda = 10000.0;
      p.normalize_fisher = false;
      break;
    case PolicyKind::OnlineEwc:
      p.ewc_lambda = 175.0;
      p.normalize_fisher = true;
      break;
    case PolicyKind::PnC:
      p.ewc_lambda = 3000.0;
      p.normalize_fisher = true;
      break;
    case PolicyKind::Naive:
    case PolicyKind::Clear:
      break;
  }
  return p;
}

AgentParams resolve_agent_params(PolicyKind kind,
                                 const std::map<std::string, std::string>& overrides) {
  AgentParams p = default_agent_params(kind);
  using Setter = std::function<void(std::string_view, std::string_view)>;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"hidden_width", [&](auto k, auto v) { p.hidden_width = to_int(k, v); }},
      {"learning_rate", [&](auto k, auto v) { p.learning_rate = to_real(k, v); }},
      {"rmsprop_alpha", [&](auto k, auto v) { p.rmsprop_alpha = to_real(k, v); }},
      {"rmsprop_eps", [&](auto k, auto v) { p.rmsprop_eps = to_real(k, v); }},
      {"rmsprop_momentum", [&](auto k, auto v) { p.rmsprop_momentum = to_real(k, v); }},
      {"entropy_cost", [&](auto k, auto v) { p.entropy_cost = to_real(k, v); }},
      {"baseline_cost", [&](auto k, auto v) { p.baseline_cost = to_real(k, v); }},
      {"discount", [&](auto k, auto v) { p.discount = to_real(k, v); }},
      {"grad_clip", [&](auto k, auto v) { p.grad_clip = to_real(k, v); }},
      {"unroll_length", [&](auto k, auto v) { p.unroll_length = to_int(k, v); }},
      {"batch_size", [&](auto k, auto v) { p.batch_size = to_int(k, v); }},
      {"ewc_lambda", [&](auto k, auto v) { p.ewc_lambda = to_real(k, v); }},
      {"ewc_min_task_steps", [&](auto k, auto v) { p.ewc_min_task_steps = to_integer(k, v); }},
      {"fisher_samples", [&](auto k, auto v) { p.fisher_samples = to_int(k, v); }},
      {"normalize_fisher", [&](auto k, auto v) { p.normalize_fisher = to_bool(k, v); }},
      {"online_ewc_gamma", [&](auto k, auto v) { p.online_ewc_gamma = to_real(k, v); }},
      {"kl_cost", [&](auto k, auto v) { p.kl_cost = to_real(k, v); }},
      {"replay_buffer_size", [&](auto k, auto v) { p.replay_buffer_size = to_integer(k, v); }},
      {"policy_cloning_cost", [&](auto k, auto v) { p.policy_cloning_cost = to_real(k, v); }},
      {"value_cloning_cost", [&](auto k, auto v) { p.value_cloning_cost = to_real(k, v); }},
  };
  for (const auto& [key, value] : overrides) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(fmt::format("unknown policy parameter '{}'", key));
    it->second(key, value);
  }

  if (p.hidden_width < 1) throw ConfigError("hidden_width must be >= 1");
  if (!(p.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(p.rmsprop_alpha >= 0.0 && p.rmsprop_alpha < 1.0))
    throw ConfigError("rmsprop_alpha must lie in [0, 1)");
  if (!(p.rmsprop_eps > 0.0)) throw ConfigError("rmsprop_eps must be positive");
  if (!(p.rmsprop_momentum >= 0.0 && p.rmsprop_momentum < 1.0))
    throw ConfigError("rmsprop_momentum must lie in [0, 1)");
  if (!(p.discount >= 0.0 && p.discount <= 1.0)) throw ConfigError("discount must lie in [0, 1]");
  if (!(p.grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  if (p.unroll_length < 1) throw ConfigError("unroll_length must be >= 1");
  if (p.batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (p.ewc_lambda < 0.0) throw ConfigError("ewc_lambda must be >= 0");
  if (p.fisher_samples < 1) throw ConfigError("fisher_samples must be >= 1");
  if (!(p.online_ewc_gamma >= 0.0 && p.online_ewc_gamma <= 1.0))
    throw ConfigError("online_ewc_gamma must lie in [0, 1]");
  if (p.replay_buffer_size < 1) throw ConfigError("replay_buffer_size must be >= 1");
  return p;
}

void validate_config(const ExperimentConfig& c) {
  if (c.tasks.empty()) throw ConfigError("missing required section: at least one [task.<i>]");
  if (c.cycles < 1) throw ConfigError("cycles must be >= 1");
  if (c.eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
  if (c.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (c.smoothing_window < 1) throw ConfigError("smoothing_window must be >= 1");
  if (c.seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (!policy_kind_from_name(c.policy_name))
    throw ConfigError(fmt::format("unknown policy '{}'", c.policy_name));

  for (std::size_t i = 0; i < c.tasks.size(); ++i) {
    const auto& t = c.tasks[i];
    const auto where = fmt::format("task.{}", i);
    if (t.task_id != static_cast<int>(i))
      throw ConfigError(fmt::format("{}: task ids must be 0..N-1 in order", where));
    if (t.name.empty()) throw ConfigError(fmt::format("{}: name must be non-empty", where));
    if (t.name.find_first_of(",\t\n= ") != std::string::npos)
      throw ConfigError(fmt::format("{}: name may not contain spaces, commas, tabs or '='", where));
    if (t.frames_per_visit <= 0) throw ConfigError(fmt::format("{}: frames must be > 0", where));
    if (t.train_context_count < 1)
      throw ConfigError(fmt::format("{}: train_contexts must be >= 1", where));
    t.factors.validate(where);
    if (t.eval_test_variant) t.eval_test_variant->validate(where + ".test_variant");
    if (c.eval_interval > t.frames_per_visit)
      throw ConfigError(fmt::format("eval_interval {} exceeds frames {} of {}", c.eval_interval,
                                    t.frames_per_visit, where));
  }
  const auto kind = *policy_kind_from_name(c.policy_name);
  if (!(c.agent == resolve_agent_params(kind, c.policy_params)))
    throw ConfigError("resolved agent parameters disagree with [policy] section");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<int, TaskDraft> drafts;
  std::set<std::string> seen_top;
  enum class Section { Top, Task, Policy } section = Section::Top;
  int task_index = -1;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("line {}: malformed section", line_no));
      const auto name = trim(line.substr(1, line.size() - 2));
      if (name == "policy") {
        section = Section::Policy;
      } else if (name.substr(0, 5) == "task.") {
        section = Section::Task;
        task_index = to_int("task index", name.substr(5));
        if (task_index < 0) throw ConfigError(fmt::format("line {}: negative task index", line_no));
        if (drafts.count(task_index))
          throw ConfigError(fmt::format("line {}: duplicate section [task.{}]", line_no, task_index));
        drafts[task_index].spec.task_id = task_index;
      } else {
        throw ConfigError(fmt::format("line {}: unknown section [{}]", line_no, name));
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));

    switch (section) {
      case Section::Top: {
        if (!seen_top.insert(std::string(key)).second)
          throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_no, key));
        if (key == "cycles") cfg.cycles = to_int(key, value);
        else if (key == "eval_interval") cfg.eval_interval = to_integer(key, value);
        else if (key == "eval_episodes") cfg.eval_episodes = to_int(key, value);
        else if (key == "smoothing_window") cfg.smoothing_window = to_int(key, value);
        else if (key == "policy_name") cfg.policy_name = std::string(value);
        else if (key == "output_dir") cfg.output_dir = std::string(value);
        else if (key == "seeds") {
          std::string_view rest = value;
          while (!rest.empty()) {
            const auto comma = rest.find(',');
            const auto item = trim(rest.substr(0, comma));
            cfg.seeds.push_back(to_seed(key, item));
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
          }
        } else {
          throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
        }
        break;
      }
      case Section::Task: {
        auto& d = drafts[task_index];
        if (key == "name") d.spec.name = std::string(value);
        else if (key == "frames") {
          d.spec.frames_per_visit = to_integer(key, value);
          d.has_frames = true;
        } else if (key == "train_contexts") d.spec.train_context_count = to_int(key, value);
        else if (key.substr(0, 13) == "test_variant.") {
          const auto sub = key.substr(13);
          EnvFactors probe;
          if (!apply_factor(probe, sub, value))
            throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
          d.variant_overrides[std::string(sub)] = std::string(value);
        } else if (!apply_factor(d.spec.factors, key, value)) {
          throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
        }
        break;
      }
      case Section::Policy:
        cfg.policy_params[std::string(key)] = std::string(value);
        break;
    }
  }

  for (const char* required : {"policy_name", "eval_interval", "seeds"})
    if (!seen_top.count(required))
      throw ConfigError(fmt::format("missing required key '{}'", required));

  int expected = 0;
  for (auto& [index, d] : drafts) {
    if (index != expected)
      throw ConfigError(fmt::format("task sections must be numbered 0..N-1 (missing task.{})", expected));
    ++expected;
    if (!d.has_frames) throw ConfigError(fmt::format("task.{}: missing required key 'frames'", index));
    if (d.spec.name.empty()) d.spec.name = fmt::format("task{}", index);
    if (!d.variant_overrides.empty()) {
      EnvFactors variant = d.spec.factors;
      for (const auto& [k, v] : d.variant_overrides) apply_factor(variant, k, v);
      d.spec.eval_test_variant = variant;
    }
    cfg.tasks.push_back(d.spec);
  }

  const auto kind = policy_kind_from_name(cfg.policy_name);
  if (!kind) throw ConfigError(fmt::format("unknown policy '{}'", cfg.policy_name));
  cfg.policy_kind = *kind;
  cfg.agent = resolve_agent_params(*kind, cfg.policy_params);
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "cycles = " << c.cycles << '\n';
  out << "eval_interval = " << c.eval_interval << '\n';
  out << "eval_episodes = " << c.eval_episodes << '\n';
  out << "smoothing_window = " << c.smoothing_window << '\n';
  out << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) out << (i ? "," : "") << c.seeds[i];
  out << '\n';
  out << "policy_name = " << c.policy_name << '\n';
  out << "output_dir = " << c.output_dir << '\n';
  for (const auto& t : c.tasks) {
    out << "\n[task." << t.task_id << "]\n";
    out << "name = " << t.name << '\n';
    out << "frames = " << t.frames_per_visit << '\n';
    out << "train_contexts = " << t.train_context_count << '\n';
    write_factors(out, t.factors, "");
    if (t.eval_test_variant) write_factors(out, *t.eval_test_variant, "test_variant.");
  }
  if (!c.policy_params.empty()) {
    out << "\n[policy]\n";
    for (const auto& [k, v] : c.policy_params) out << k << " = " << v << '\n';
  }
  return out.str();
}

std::string config_digest(const ExperimentConfig& config) {
  return fmt::format("{:016x}", fnv1a(to_config_text(config)));
}

std::string effective_output_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv("CORABENCH_OUT"); env && *env) return env;
  return config.output_dir;
}

}  // namespace corabench
