#include "corabench/harness.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <memory>

#include <fmt/format.h>

namespace corabench {

namespace {

constexpr std::uint64_t kTrainStream = 0x7a11;
constexpr std::uint64_t kEvalStream = 0xe7a1;

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CollectResult collect_and_train(Agent& agent, EpisodeRunner& runner, Step max_steps, Rng& rng) {
  if (max_steps < 1) throw UsageError("collect_and_train: max_steps must be >= 1");
  const Step length = std::min<Step>(agent.params().unroll_length, max_steps);
  const BehaviorFn behave = [&](const Observation& obs, Rng& r) { return agent.behave(obs, r); };
  const Rollout rollout = runner.collect(behave, length, rng);
  CollectResult result;
  result.steps = static_cast<Step>(rollout.steps.size());
  result.stats = agent.train(rollout, rng);
  return result;
}

std::vector<EvalRecord> evaluate_all(const Agent& agent, const std::vector<TaskSpec>& tasks,
                                     int episodes, Rng& rng, const EvalStamp& stamp) {
  if (episodes < 1) throw UsageError("evaluate_all: episodes must be >= 1");
  const PolicyState& state = agent.state();
  const BehaviorFn greedy = [&](const Observation& obs, Rng& r) {
    return evaluate_network(state.shape, eval_params(state), obs, ActMode::Eval, r);
  };
  std::vector<EvalRecord> out;
  out.reserve(tasks.size() * 2);
  for (const auto& task : tasks) {
    for (const Split split : {Split::Train, Split::Test}) {
      const Variant variant =
          split == Split::Test && task.eval_test_variant ? Variant::TestVariant : Variant::Train;
      EpisodeRunner runner(task, variant, split);
      double total = 0.0;
      for (int e = 0; e < episodes; ++e) total += runner.play_episode(greedy, rng);
      EvalRecord r;
      r.run_id = stamp.run_id;
      r.policy = stamp.policy;
      r.seed = stamp.seed;
      r.timestep = stamp.timestep;
      r.task = task.task_id;
      r.cycle = stamp.cycle;
      r.split = split;
      r.mean_return = total / episodes;
      r.episodes = episodes;
      out.push_back(std::move(r));
    }
  }
  return out;
}

RunLog run_experiment(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options) {
  validate_config(config);
  const Schedule schedule = build_schedule(config.tasks, config.cycles);

  RunLog log;
  log.header = make_header(config, seed, run_id_for(config, seed),
                           options.start_time.empty() ? utc_timestamp() : options.start_time);
  std::unique_ptr<RunLogWriter> writer;
  if (options.output_dir) {
    const auto path = std::filesystem::path(*options.output_dir) / (log.header.run_id + ".log");
    writer = std::make_unique<RunLogWriter>(path.string(), log.header);
  }

  Agent agent(config.policy_kind, config.agent, seed);
  Rng train_rng(mix64(seed, kTrainStream));
  std::vector<EpisodeRunner> runners;
  runners.reserve(config.tasks.size());
  for (const auto& t : config.tasks) runners.emplace_back(t, Variant::Train, Split::Train);

  auto evaluate = [&](Step t, int cycle) {
    Rng eval_rng(mix64(mix64(seed, kEvalStream), static_cast<std::uint64_t>(t)));
    const EvalStamp stamp{log.header.run_id, config.policy_name, seed, t, cycle};
    for (auto& r : evaluate_all(agent, config.tasks, config.eval_episodes, eval_rng, stamp)) {
      if (writer) writer->append(r);
      log.records.push_back(std::move(r));
    }
  };

  evaluate(0, 0);
  Step t = 0;
  Step next_pause = config.eval_interval;
  for (const auto& seg : schedule.segments) {
    const auto& task = config.tasks[static_cast<std::size_t>(seg.task_id)];
    auto& runner = runners[static_cast<std::size_t>(seg.task_id)];
    runner.restart();
    agent.begin_task(seg.task_id, seg.budget());

    Step done_in_segment = 0;
    while (done_in_segment < seg.budget()) {
      const Step limit = std::min({seg.budget() - done_in_segment, next_pause - t, agent.step_limit()});
      const CollectResult result = collect_and_train(agent, runner, limit, train_rng);
      done_in_segment += result.steps;
      t += result.steps;
      if (t == next_pause) {
        next_pause += config.eval_interval;
        // A pause landing on the boundary is recorded once, as the segment-end evaluation.
        if (t != seg.end) evaluate(t, seg.cycle);
      }
    }
    evaluate(seg.end, seg.cycle);
    agent.end_task(task, seg.budget(), train_rng);
  }
  return log;
}

}  // namespace corabench
