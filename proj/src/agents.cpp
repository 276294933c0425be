#include "corabench/agents.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "corabench/rollout.hpp"

namespace corabench {

namespace {

std::uint64_t hash_vec(const VectorXd& v, std::uint64_t h) {
  const Index n = v.size();
  h = fnv1a(&n, sizeof n, h);
  return v.size() ? fnv1a(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()), h) : h;
}

std::uint64_t hash_pod(const auto& value, std::uint64_t h) { return fnv1a(&value, sizeof value, h); }

void check_finite(double loss, const VectorXd& grad, const UpdateStats& stats, std::string_view what) {
  if (std::isfinite(loss) && grad.allFinite()) return;
  throw TrainingError(fmt::format(
      "{}: non-finite loss (loss={}, policy_loss={}, penalty={}, grad_finite={}, param_count={})",
      what, stats.loss, stats.policy_loss, stats.penalty, grad.allFinite(), grad.size()));
}

std::vector<int> actions_of(const std::vector<const Transition*>& items) {
  std::vector<int> a;
  a.reserve(items.size());
  for (const auto* t : items) a.push_back(t->action);
  return a;
}

std::vector<const Transition*> pointers(const Rollout& rollout, Index count) {
  std::vector<const Transition*> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) out.push_back(&rollout.steps[static_cast<std::size_t>(k)]);
  return out;
}

// Quadratic penalty the learner's own parameters carry (EWC family only).
std::pair<double, VectorXd> own_penalty(const PolicyState& state) {
  if (const auto* ewc = std::get_if<EwcState>(&state.algo)) {
    return ewc_penalty<double>(state.theta, ewc->anchors, ewc->lambda);
  }
  if (const auto* online = std::get_if<OnlineEwcState>(&state.algo); online && online->has_anchor) {
    const EwcAnchor anchor{online->theta_star, online->fisher_running};
    return ewc_penalty<double>(state.theta, std::span(&anchor, 1), online->lambda);
  }
  return {0.0, VectorXd::Zero(state.theta.size())};
}

}  // namespace

int argmax_action(const Eigen::Ref<const VectorXd>& logits) {
  int best = 0;
  for (Index k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[best]) best = static_cast<int>(k);
  return best;
}

int sample_action(const Eigen::Ref<const VectorXd>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Index k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size() - 1);
}

Behavior evaluate_network(const NetShape& shape, const VectorXd& theta, const Observation& obs,
                          ActMode mode, Rng& rng) {
  const auto fc = forward<double>(shape, theta, obs);
  Behavior b;
  b.probs = fc.probs.col(0);
  b.value = fc.values[0];
  b.action = mode == ActMode::Eval ? argmax_action(fc.logits.col(0)) : sample_action(b.probs, rng);
  return b;
}

const VectorXd& eval_params(const PolicyState& state) {
  if (const auto* pc = std::get_if<PcState>(&state.algo)) return pc->kb;
  return state.theta;
}

const VectorXd& acting_params(const PolicyState& state) { return state.theta; }

int act(const PolicyState& state, const Observation& obs, ActMode mode, Rng& rng) {
  const auto& theta = mode == ActMode::Eval ? eval_params(state) : acting_params(state);
  return evaluate_network(state.shape, theta, obs, mode, rng).action;
}

NetShape default_net_shape(const AgentParams& params) {
  return {kObservationSize, params.hidden_width, kActionCount};
}

PolicyState make_policy_state(PolicyKind kind, const AgentParams& params, const NetShape& shape,
                              Rng& init_rng) {
  PolicyState s;
  s.shape = shape;
  s.theta = init_params<double>(shape, init_rng);
  const Index n = shape.param_count();
  s.opt.square_avg = VectorXd::Zero(n);
  s.opt.momentum = VectorXd::Zero(n);

  auto online = [&] {
    OnlineEwcState o;
    o.theta_star = VectorXd::Zero(n);
    o.fisher_running = VectorXd::Zero(n);
    o.gamma = params.online_ewc_gamma;
    o.lambda = params.ewc_lambda;
    o.fisher_samples = params.fisher_samples;
    o.normalize_fisher = params.normalize_fisher;
    return o;
  };

  switch (kind) {
    case PolicyKind::Naive:
      s.algo = std::monostate{};
      break;
    case PolicyKind::Ewc:
      s.algo = EwcState{{}, params.ewc_lambda, params.ewc_min_task_steps, params.fisher_samples,
                        params.normalize_fisher};
      break;
    case PolicyKind::OnlineEwc:
      s.algo = online();
      break;
    case PolicyKind::PnC: {
      PcState pc;
      pc.kb = s.theta;
      pc.kb_opt = s.opt;
      pc.protector = online();
      pc.kl_cost = params.kl_cost;
      s.algo = std::move(pc);
      break;
    }
    case PolicyKind::Clear: {
      ClearState c;
      c.capacity = params.replay_buffer_size;
      c.policy_cloning_cost = params.policy_cloning_cost;
      c.value_cloning_cost = params.value_cloning_cost;
      s.algo = std::move(c);
      break;
    }
  }
  return s;
}

MatrixXd stack_observations(std::span<const Transition* const> items) {
  MatrixXd x(kObservationSize, static_cast<Index>(items.size()));
  for (std::size_t k = 0; k < items.size(); ++k) x.col(static_cast<Index>(k)) = items[k]->obs.cast<double>();
  return x;
}

VectorXd nstep_returns(const NetShape& shape, const VectorXd& theta, const Rollout& rollout,
                       double discount) {
  const auto T = static_cast<Index>(rollout.steps.size());
  VectorXd g(T);
  double running = 0.0;
  if (!rollout.bootstrap_done) running = forward<double>(shape, theta, rollout.bootstrap_obs).values[0];
  for (Index t = T - 1; t >= 0; --t) {
    const auto& tr = rollout.steps[static_cast<std::size_t>(t)];
    running = tr.reward + (tr.done ? 0.0 : discount * running);
    g[t] = running;
  }
  return g;
}

void rmsprop_step(VectorXd& theta, OptimizerState& opt, const VectorXd& grad,
                  const AgentParams& p) {
  opt.square_avg = p.rmsprop_alpha * opt.square_avg + (1.0 - p.rmsprop_alpha) * grad.array().square().matrix();
  const VectorXd scaled = (grad.array() / (opt.square_avg.array().sqrt() + p.rmsprop_eps)).matrix();
  if (p.rmsprop_momentum > 0.0) {
    opt.momentum = p.rmsprop_momentum * opt.momentum + scaled;
    theta -= p.learning_rate * opt.momentum;
  } else {
    theta -= p.learning_rate * scaled;
  }
}

UpdateStats a2c_update(PolicyState& state, const Rollout& rollout, const AgentParams& params) {
  if (rollout.steps.empty()) throw UsageError("a2c_update: empty rollout");
  const auto T = static_cast<Index>(rollout.steps.size());
  const auto items = pointers(rollout, T);
  const auto actions = actions_of(items);

  const VectorXd returns = nstep_returns(state.shape, state.theta, rollout, params.discount);
  const auto fc = forward<double>(state.shape, state.theta, stack_observations(items));
  const VectorXd advantages = returns - fc.values;

  auto og = OutputGrad<double>::zero(state.shape, T);
  UpdateStats stats;
  stats.policy_loss = add_actor_critic_loss<double>(fc, actions, returns, advantages,
                                                    params.baseline_cost, params.entropy_cost, 0,
                                                    static_cast<double>(T), og);
  VectorXd grad = backward<double>(state.shape, state.theta, fc, og);
  auto [pen, pen_grad] = own_penalty(state);
  stats.penalty = pen;
  stats.loss = stats.policy_loss + pen;
  grad += pen_grad;
  check_finite(stats.loss, grad, stats, "a2c_update");
  stats.grad_norm = clip_by_global_norm(grad, params.grad_clip);
  rmsprop_step(state.theta, state.opt, grad, params);
  return stats;
}

VectorXd fisher_from_batch(const NetShape& shape, const VectorXd& theta, const MatrixXd& inputs,
                           std::span<const int> actions) {
  const auto fc = forward<double>(shape, theta, inputs);
  MatrixXd dlogp = -fc.probs;  // d log pi(a) / d logits = onehot(a) - p
  for (Index t = 0; t < dlogp.cols(); ++t) dlogp(actions[static_cast<std::size_t>(t)], t) += 1.0;
  return per_sample_squared_grad_sum<double>(shape, theta, fc, dlogp) /
         static_cast<double>(inputs.cols());
}

VectorXd normalize_fisher(const VectorXd& fisher) {
  const double m = fisher.size() ? fisher.maxCoeff() : 0.0;
  if (!(m > 0.0)) return fisher;
  return fisher / m;
}

VectorXd estimate_fisher(const NetShape& shape, const VectorXd& theta, const TaskSpec& task,
                         int sample_count, int unroll, Rng& rng) {
  if (sample_count < 1) throw UsageError("estimate_fisher: sample_count must be >= 1");
  EpisodeRunner runner(task, Variant::Train, Split::Train);
  const BehaviorFn behave = [&](const Observation& obs, Rng& r) {
    return evaluate_network(shape, theta, obs, ActMode::Train, r);
  };
  std::vector<Rollout> rollouts;
  rollouts.reserve(static_cast<std::size_t>(sample_count));
  Index total = 0;
  for (int s = 0; s < sample_count; ++s) {
    rollouts.push_back(runner.collect(behave, unroll, rng));
    total += static_cast<Index>(rollouts.back().steps.size());
  }
  std::vector<const Transition*> items;
  items.reserve(static_cast<std::size_t>(total));
  for (const auto& r : rollouts)
    for (const auto& t : r.steps) items.push_back(&t);
  const auto actions = actions_of(items);
  return fisher_from_batch(shape, theta, stack_observations(items), actions);
}

void online_ewc_consolidate(OnlineEwcState& state, const VectorXd& theta, const VectorXd& fisher_new) {
  if (state.fisher_running.size() != fisher_new.size()) state.fisher_running = VectorXd::Zero(fisher_new.size());
  state.fisher_running = state.gamma * state.fisher_running + fisher_new;
  state.theta_star = theta;
  state.has_anchor = true;
}

void reservoir_insert(ClearState& state, Transition item, Rng& rng) {
  ++state.seen_count;
  if (static_cast<Step>(state.buffer.size()) < state.capacity) {
    state.buffer.push_back(std::move(item));
    return;
  }
  const auto u = static_cast<Step>(uniform_below(rng, static_cast<std::uint64_t>(state.seen_count)));
  if (u < state.capacity) state.buffer[static_cast<std::size_t>(u)] = std::move(item);
}

std::pair<Index, Index> clear_batch_split(int batch_size, Index novel_available, Index buffer_size) {
  if (buffer_size == 0) return {novel_available, 0};
  const Index novel = std::min<Index>(novel_available, (batch_size + 1) / 2);
  return {novel, batch_size / 2};
}

UpdateStats clear_update(PolicyState& state, const Rollout& novel, const AgentParams& params,
                         Rng& rng) {
  auto& clear = std::get<ClearState>(state.algo);
  if (novel.steps.empty()) throw UsageError("clear_update: empty rollout");

  const VectorXd novel_returns = nstep_returns(state.shape, state.theta, novel, params.discount);
  const auto [n_novel, n_replay] = clear_batch_split(params.batch_size,
                                                     static_cast<Index>(novel.steps.size()),
                                                     static_cast<Index>(clear.buffer.size()));
  auto items = pointers(novel, n_novel);
  for (Index k = 0; k < n_replay; ++k)
    items.push_back(&clear.buffer[uniform_below(rng, clear.buffer.size())]);
  const auto actions = actions_of(items);
  const Index total = n_novel + n_replay;

  VectorXd returns(total);
  returns.head(n_novel) = novel_returns.head(n_novel);
  MatrixXd behavior_probs(state.shape.actions, n_replay);
  VectorXd behavior_values(n_replay);
  for (Index k = 0; k < n_replay; ++k) {
    const auto* t = items[static_cast<std::size_t>(n_novel + k)];
    returns[n_novel + k] = t->return_target;
    behavior_probs.col(k) = t->behavior_probs;
    behavior_values[k] = t->behavior_value;
  }

  const auto fc = forward<double>(state.shape, state.theta, stack_observations(items));
  const VectorXd advantages = returns - fc.values;
  auto og = OutputGrad<double>::zero(state.shape, total);
  UpdateStats stats;
  stats.policy_loss = add_actor_critic_loss<double>(fc, actions, returns, advantages,
                                                    params.baseline_cost, params.entropy_cost, 0,
                                                    static_cast<double>(total), og);
  if (n_replay > 0) {
    const auto norm = static_cast<double>(n_replay);
    stats.penalty += add_kl_to_target<double>(fc, behavior_probs, clear.policy_cloning_cost, n_novel,
                                              norm, og);
    stats.penalty += add_value_cloning<double>(fc, behavior_values, clear.value_cloning_cost, n_novel,
                                               norm, og);
  }
  stats.loss = stats.policy_loss + stats.penalty;
  VectorXd grad = backward<double>(state.shape, state.theta, fc, og);
  check_finite(stats.loss, grad, stats, "clear_update");
  stats.grad_norm = clip_by_global_norm(grad, params.grad_clip);
  rmsprop_step(state.theta, state.opt, grad, params);

  for (std::size_t k = 0; k < novel.steps.size(); ++k) {
    Transition t = novel.steps[k];
    t.return_target = novel_returns[static_cast<Index>(k)];
    reservoir_insert(clear, std::move(t), rng);
  }
  return stats;
}

UpdateStats pc_progress(PolicyState& state, const Rollout& rollout, const AgentParams& params) {
  auto& pc = std::get<PcState>(state.algo);
  if (pc.phase != PcPhase::Progress) throw UsageError("pc_progress called outside the progress phase");
  const UpdateStats stats = a2c_update(state, rollout, params);
  pc.steps_in_visit += static_cast<Step>(rollout.steps.size());
  if (pc.steps_in_visit >= pc.progress_budget) pc.phase = PcPhase::Compress;
  return stats;
}

UpdateStats pc_compress(PolicyState& state, const Rollout& rollout, const AgentParams& params) {
  auto& pc = std::get<PcState>(state.algo);
  if (pc.phase != PcPhase::Compress) throw UsageError("pc_compress called outside the compress phase");
  if (rollout.steps.empty()) throw UsageError("pc_compress: empty rollout");
  const auto T = static_cast<Index>(rollout.steps.size());
  const auto items = pointers(rollout, T);
  const MatrixXd x = stack_observations(items);

  const MatrixXd teacher = forward<double>(state.shape, state.theta, x).probs;
  const auto fc = forward<double>(state.shape, pc.kb, x);
  auto og = OutputGrad<double>::zero(state.shape, T);
  UpdateStats stats;
  stats.policy_loss = add_kl_to_target<double>(fc, teacher, pc.kl_cost, 0, static_cast<double>(T), og);
  VectorXd grad = backward<double>(state.shape, pc.kb, fc, og);
  if (pc.protector.has_anchor) {
    const EwcAnchor anchor{pc.protector.theta_star, pc.protector.fisher_running};
    auto [pen, pen_grad] = ewc_penalty<double>(pc.kb, std::span(&anchor, 1), pc.protector.lambda);
    stats.penalty = pen;
    grad += pen_grad;
  }
  stats.loss = stats.policy_loss + stats.penalty;
  check_finite(stats.loss, grad, stats, "pc_compress");
  stats.grad_norm = clip_by_global_norm(grad, params.grad_clip);
  rmsprop_step(pc.kb, pc.kb_opt, grad, params);
  pc.steps_in_visit += T;
  return stats;
}

void on_task_boundary(PolicyState& state, int ended_task, Step steps_in_task,
                      const FisherEstimator& fisher) {
  (void)ended_task;
  if (auto* ewc = std::get_if<EwcState>(&state.algo)) {
    if (steps_in_task < ewc->min_task_steps) return;
    VectorXd f = fisher(state.theta);
    if (ewc->normalize_fisher) f = normalize_fisher(f);
    ewc->anchors.push_back({state.theta, std::move(f)});
  } else if (auto* online = std::get_if<OnlineEwcState>(&state.algo)) {
    VectorXd f = fisher(state.theta);
    if (online->normalize_fisher) f = normalize_fisher(f);
    online_ewc_consolidate(*online, state.theta, f);
  } else if (auto* pc = std::get_if<PcState>(&state.algo)) {
    VectorXd f = fisher(pc->kb);
    if (pc->protector.normalize_fisher) f = normalize_fisher(f);
    online_ewc_consolidate(pc->protector, pc->kb, f);
  }
}

std::uint64_t state_digest(const PolicyState& s) {
  std::uint64_t h = hash_pod(s.shape, 0xcbf29ce484222325ULL);
  h = hash_vec(s.theta, h);
  h = hash_vec(s.opt.square_avg, h);
  h = hash_vec(s.opt.momentum, h);
  h = hash_pod(s.algo.index(), h);
  auto online = [&](const OnlineEwcState& o) {
    h = hash_vec(o.theta_star, h);
    h = hash_vec(o.fisher_running, h);
    h = hash_pod(o.has_anchor, h);
  };
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, EwcState>) {
          for (const auto& anchor : a.anchors) {
            h = hash_vec(anchor.theta_star, h);
            h = hash_vec(anchor.fisher, h);
          }
        } else if constexpr (std::is_same_v<T, OnlineEwcState>) {
          online(a);
        } else if constexpr (std::is_same_v<T, PcState>) {
          h = hash_vec(a.kb, h);
          h = hash_vec(a.kb_opt.square_avg, h);
          online(a.protector);
          h = hash_pod(a.phase, h);
          h = hash_pod(a.steps_in_visit, h);
        } else if constexpr (std::is_same_v<T, ClearState>) {
          h = hash_pod(a.seen_count, h);
          for (const auto& t : a.buffer) {
            h = fnv1a(t.obs.data(), static_cast<std::size_t>(t.obs.size()), h);
            h = hash_pod(t.action, h);
            h = hash_pod(t.reward, h);
            h = hash_vec(t.behavior_probs, h);
            h = hash_pod(t.behavior_value, h);
          }
        }
      },
      s.algo);
  return h;
}

Agent::Agent(PolicyKind kind, AgentParams params, std::uint64_t init_seed)
    : kind_(kind), params_(std::move(params)) {
  Rng init(mix64(init_seed, 0x1417));
  state_ = make_policy_state(kind_, params_, default_net_shape(params_), init);
}

Behavior Agent::behave(const Observation& obs, Rng& rng) const {
  return evaluate_network(state_.shape, acting_params(state_), obs, ActMode::Train, rng);
}

int Agent::act(const Observation& obs, ActMode mode, Rng& rng) const {
  return corabench::act(state_, obs, mode, rng);
}

void Agent::begin_task(int task_id, Step budget) {
  (void)task_id;
  if (auto* pc = std::get_if<PcState>(&state_.algo)) {
    pc->visit_budget = budget;
    pc->progress_budget = (budget + 1) / 2;
    pc->steps_in_visit = 0;
    pc->phase = PcPhase::Progress;
  }
}

Step Agent::step_limit() const {
  if (const auto* pc = std::get_if<PcState>(&state_.algo)) {
    const Step limit = pc->phase == PcPhase::Progress ? pc->progress_budget : pc->visit_budget;
    return std::max<Step>(1, limit - pc->steps_in_visit);
  }
  return std::numeric_limits<Step>::max();
}

UpdateStats Agent::train(const Rollout& rollout, Rng& rng) {
  switch (kind_) {
    case PolicyKind::Clear:
      return clear_update(state_, rollout, params_, rng);
    case PolicyKind::PnC:
      return std::get<PcState>(state_.algo).phase == PcPhase::Progress
                 ? pc_progress(state_, rollout, params_)
                 : pc_compress(state_, rollout, params_);
    case PolicyKind::Naive:
    case PolicyKind::Ewc:
    case PolicyKind::OnlineEwc:
      break;
  }
  return a2c_update(state_, rollout, params_);
}

void Agent::end_task(const TaskSpec& task, Step steps_in_task, Rng& rng) {
  const FisherEstimator fisher = [&](const VectorXd& theta) {
    return estimate_fisher(state_.shape, theta, task, params_.fisher_samples, params_.unroll_length, rng);
  };
  on_task_boundary(state_, task.task_id, steps_in_task, fisher);
}

}  // namespace corabench
