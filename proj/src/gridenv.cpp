#include "corabench/gridenv.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <deque>

#include <fmt/format.h>

namespace corabench {

namespace {

constexpr int kMaxLayoutAttempts = 200;
constexpr std::array<GridPos, 4> kMoves = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

GridPos moved(GridPos p, int action) {
  return {p.row + kMoves[static_cast<std::size_t>(action)].row,
          p.col + kMoves[static_cast<std::size_t>(action)].col};
}

std::uint64_t layout_key(const EnvFactors& f) {
  std::uint64_t h = fnv1a(&f.grid_size, sizeof f.grid_size);
  h = fnv1a(&f.obstacle_density, sizeof f.obstacle_density, h);
  h = fnv1a(&f.lava_density, sizeof f.lava_density, h);
  h = fnv1a(&f.monster_count, sizeof f.monster_count, h);
  return h;
}

bool has_monster(const GridState& s, GridPos p) {
  return std::find(s.monsters.begin(), s.monsters.end(), p) != s.monsters.end();
}

GridPos random_cell(const GridState& s, Rng& rng) {
  const auto idx = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(s.size * s.size)));
  return {idx / s.size, idx % s.size};
}

}  // namespace

std::string_view split_name(Split split) { return split == Split::Train ? "train" : "test"; }

std::vector<std::uint64_t> train_context_seeds(const TaskSpec& task) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(task.train_context_count));
  for (int k = 0; k < task.train_context_count; ++k)
    seeds.push_back(mix64(static_cast<std::uint64_t>(task.task_id) + 1, static_cast<std::uint64_t>(k)));
  return seeds;
}

Context sample_context(const TaskSpec& task, Split split, Rng& rng) {
  const auto train = train_context_seeds(task);
  if (split == Split::Train) {
    return {train[uniform_below(rng, train.size())], Split::Train};
  }
  for (;;) {
    const std::uint64_t seed = rng();
    if (std::find(train.begin(), train.end(), seed) == train.end()) return {seed, Split::Test};
  }
}

const EnvFactors& factors_for(const TaskSpec& task, Variant variant) {
  if (variant == Variant::TestVariant) {
    if (!task.eval_test_variant)
      throw UsageError(fmt::format("task {} has no test variant", task.task_id));
    return *task.eval_test_variant;
  }
  return task.factors;
}

bool goal_reachable(const GridState& s) {
  std::vector<char> seen(s.layout.size(), 0);
  std::deque<GridPos> frontier{s.agent};
  seen[static_cast<std::size_t>(s.agent.row * s.size + s.agent.col)] = 1;
  while (!frontier.empty()) {
    const GridPos p = frontier.front();
    frontier.pop_front();
    if (p == s.goal) return true;
    for (int a = 0; a < kActionCount; ++a) {
      const GridPos q = moved(p, a);
      if (!s.inside(q)) continue;
      const auto qi = static_cast<std::size_t>(q.row * s.size + q.col);
      const Cell c = s.layout[qi];
      if (seen[qi] || c == Cell::Wall || c == Cell::Lava) continue;
      seen[qi] = 1;
      frontier.push_back(q);
    }
  }
  return false;
}

GridState generate_level(const EnvFactors& factors, std::uint64_t seed) {
  Rng rng(mix64(seed, layout_key(factors)));
  GridState s;
  s.factors = factors;
  s.size = factors.grid_size;
  const int cells = s.size * s.size;

  for (int attempt = 0; attempt < kMaxLayoutAttempts; ++attempt) {
    s.layout.assign(static_cast<std::size_t>(cells), Cell::Empty);
    s.monsters.clear();
    for (auto& c : s.layout) {
      const double u = uniform01(rng);
      if (u < factors.obstacle_density) c = Cell::Wall;
      else if (u < factors.obstacle_density + factors.lava_density) c = Cell::Lava;
    }
    s.agent = random_cell(s, rng);
    s.goal = random_cell(s, rng);
    if (s.agent == s.goal) continue;
    // Start and goal are forced open so the density only shapes the rest of the room.
    s.layout[static_cast<std::size_t>(s.agent.row * s.size + s.agent.col)] = Cell::Empty;
    s.layout[static_cast<std::size_t>(s.goal.row * s.size + s.goal.col)] = Cell::Goal;
    if (!goal_reachable(s)) continue;

    std::vector<GridPos> free;
    for (int r = 0; r < s.size; ++r)
      for (int c = 0; c < s.size; ++c) {
        const GridPos p{r, c};
        if (s.at(p) == Cell::Empty && !(p == s.agent) &&
            std::abs(p.row - s.agent.row) + std::abs(p.col - s.agent.col) > 1)
          free.push_back(p);
      }
    if (static_cast<int>(free.size()) < factors.monster_count) continue;
    for (int m = 0; m < factors.monster_count; ++m) {
      const auto pick = uniform_below(rng, free.size() - static_cast<std::size_t>(m));
      std::swap(free[pick], free[free.size() - 1 - static_cast<std::size_t>(m)]);
      s.monsters.push_back(free[free.size() - 1 - static_cast<std::size_t>(m)]);
    }
    s.steps_taken = 0;
    s.done = false;
    return s;
  }
  throw EnvironmentError(fmt::format(
      "no solvable layout for grid_size={} obstacle_density={} lava_density={} seed={} after {} attempts",
      factors.grid_size, factors.obstacle_density, factors.lava_density, seed, kMaxLayoutAttempts));
}

Observation observe(const GridState& s) {
  Observation obs = Observation::Zero(kObservationSize);
  const int radius = s.factors.dark_radius ? *s.factors.dark_radius : kViewRadius;
  for (int dr = -kViewRadius; dr <= kViewRadius; ++dr) {
    for (int dc = -kViewRadius; dc <= kViewRadius; ++dc) {
      if (std::max(std::abs(dr), std::abs(dc)) > radius) continue;
      const GridPos p{s.agent.row + dr, s.agent.col + dc};
      const Index base = ((dr + kViewRadius) * kViewSide + (dc + kViewRadius)) * kObservationChannels;
      if (!s.inside(p)) {
        obs[base + 0] = 1;
        continue;
      }
      switch (s.at(p)) {
        case Cell::Wall: obs[base + 0] = 1; break;
        case Cell::Lava: obs[base + 1] = 1; break;
        case Cell::Goal: obs[base + 2] = 1; break;
        case Cell::Empty: break;
      }
      if (has_monster(s, p)) obs[base + 3] = 1;
    }
  }
  return obs;
}

std::pair<GridState, Observation> reset(const TaskSpec& task, const Context& ctx, Variant variant) {
  GridState s = generate_level(factors_for(task, variant), ctx.seed);
  Observation obs = observe(s);
  return {std::move(s), std::move(obs)};
}

StepOutcome step(GridState& s, Action action, Rng& rng) {
  if (s.done) throw UsageError("step called on a finished episode");
  StepOutcome out;

  const GridPos target = moved(s.agent, static_cast<int>(action));
  if (s.inside(target) && s.at(target) != Cell::Wall) s.agent = target;
  ++s.steps_taken;

  const Cell here = s.at(s.agent);
  if (here == Cell::Goal) {
    out.reward = 1.0;
    s.done = true;
  } else if (here == Cell::Lava || has_monster(s, s.agent)) {
    out.reward = -1.0;
    s.done = true;
  } else {
    if (s.factors.trap_prob > 0.0 && uniform01(rng) < s.factors.trap_prob) {
      // Teleport to a uniformly chosen safe empty cell.
      for (;;) {
        const GridPos p = random_cell(s, rng);
        if (s.at(p) == Cell::Empty && !has_monster(s, p)) {
          s.agent = p;
          break;
        }
      }
    }
    for (auto& m : s.monsters) {
      const GridPos q = moved(m, static_cast<int>(uniform_below(rng, kActionCount)));
      if (s.inside(q) && s.at(q) == Cell::Empty && !has_monster(s, q)) m = q;
    }
    if (has_monster(s, s.agent)) {
      out.reward = -1.0;
      s.done = true;
    }
  }
  if (!s.done && s.steps_taken >= s.factors.effective_episode_cap()) s.done = true;

  out.done = s.done;
  out.observation = observe(s);
  return out;
}

std::string render_ascii(const GridState& s) {
  std::string out;
  const std::string border(static_cast<std::size_t>(s.size + 2), '#');
  out += border + '\n';
  for (int r = 0; r < s.size; ++r) {
    out += '#';
    for (int c = 0; c < s.size; ++c) {
      const GridPos p{r, c};
      char ch = '.';
      switch (s.at(p)) {
        case Cell::Wall: ch = '#'; break;
        case Cell::Lava: ch = '~'; break;
        case Cell::Goal: ch = 'G'; break;
        case Cell::Empty: break;
      }
      if (has_monster(s, p)) ch = 'M';
      if (p == s.agent) ch = 'A';
      out += ch;
    }
    out += "#\n";
  }
  out += border + '\n';
  return out;
}

}  // namespace corabench
