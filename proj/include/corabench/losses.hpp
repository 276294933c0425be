#pragma once

#include <span>
#include <utility>
#include <vector>

#include "corabench/network.hpp"

namespace corabench {

// Loss terms below evaluate on a slice [begin, begin + count) of a forward
// batch, add their value divided by `norm` to the returned scalar, and
// accumulate the matching output gradient into `og`.

/// Policy-gradient + baseline + entropy terms of the actor-critic loss:
///   -adv * log pi(a) + baseline_cost * 0.5 * (G - V)^2 + entropy_cost * sum p log p.
/// `advantages` are treated as constants (no gradient through them).
template <typename Scalar>
Scalar add_actor_critic_loss(const ForwardCache<Scalar>& fc, std::span<const int> actions,
                             const VectorX<Scalar>& returns, const VectorX<Scalar>& advantages,
                             Scalar baseline_cost, Scalar entropy_cost, Index begin, Scalar norm,
                             OutputGrad<Scalar>& og) {
  Scalar loss = 0;
  const auto count = static_cast<Index>(actions.size());
  for (Index k = 0; k < count; ++k) {
    const Index t = begin + k;
    const int a = actions[static_cast<std::size_t>(k)];
    const auto p = fc.probs.col(t);
    const auto logp = fc.log_probs.col(t);
    const Scalar neg_entropy = p.dot(logp);
    const Scalar dv = fc.values[t] - returns[k];

    loss += (-advantages[k] * logp[a] + baseline_cost * Scalar(0.5) * dv * dv +
             entropy_cost * neg_entropy) / norm;

    auto g = og.logits.col(t);
    g += (advantages[k] * p) / norm;
    g[a] -= advantages[k] / norm;
    g.array() += entropy_cost * p.array() * (logp.array() - neg_entropy) / norm;
    og.values[t] += baseline_cost * dv / norm;
  }
  return loss;
}

/// cost * KL(target || pi) per column; `targets` is actions x count.
/// Serves behavioural cloning (stored behaviour policy) and distillation (teacher).
template <typename Scalar>
Scalar add_kl_to_target(const ForwardCache<Scalar>& fc, const MatrixX<Scalar>& targets, Scalar cost,
                        Index begin, Scalar norm, OutputGrad<Scalar>& og) {
  Scalar loss = 0;
  for (Index k = 0; k < targets.cols(); ++k) {
    const Index t = begin + k;
    loss += cost * kl_divergence(targets.col(k), fc.log_probs.col(t)) / norm;
    og.logits.col(t) += cost * (fc.probs.col(t) - targets.col(k)) / norm;
  }
  return loss;
}

/// cost * (target - V)^2 per column.
template <typename Scalar>
Scalar add_value_cloning(const ForwardCache<Scalar>& fc, const VectorX<Scalar>& targets, Scalar cost,
                         Index begin, Scalar norm, OutputGrad<Scalar>& og) {
  Scalar loss = 0;
  for (Index k = 0; k < targets.size(); ++k) {
    const Index t = begin + k;
    const Scalar diff = targets[k] - fc.values[t];
    loss += cost * diff * diff / norm;
    og.values[t] += Scalar(-2) * cost * diff / norm;
  }
  return loss;
}

template <typename Scalar>
struct Anchor {
  VectorX<Scalar> theta_star;
  VectorX<Scalar> fisher;
};
using EwcAnchor = Anchor<double>;

/// sum over anchors of (lambda/2) * sum_k F_k (theta_k - theta*_k)^2, with its gradient.
template <typename Scalar>
std::pair<Scalar, VectorX<Scalar>> ewc_penalty(const VectorX<Scalar>& theta,
                                               std::span<const Anchor<Scalar>> anchors,
                                               Scalar lambda) {
  Scalar loss = 0;
  VectorX<Scalar> grad = VectorX<Scalar>::Zero(theta.size());
  for (const auto& anchor : anchors) {
    const VectorX<Scalar> delta = theta - anchor.theta_star;
    loss += Scalar(0.5) * lambda * (anchor.fisher.array() * delta.array().square()).sum();
    grad.array() += lambda * anchor.fisher.array() * delta.array();
  }
  return {loss, grad};
}

/// Sum over the batch of squared per-sample parameter gradients for output
/// gradients `dlogits` (one column per sample). The outer-product structure of
/// a dense layer lets the per-sample squares be summed with two matrix products.
template <typename Scalar>
VectorX<Scalar> per_sample_squared_grad_sum(const NetShape& shape, const VectorX<Scalar>& theta,
                                            const ForwardCache<Scalar>& fc,
                                            const MatrixX<Scalar>& dlogits) {
  VectorX<Scalar> out = VectorX<Scalar>::Zero(shape.param_count());
  const auto Wp = detail::wp<Scalar>(shape, theta);
  MatrixX<Scalar> dpre = Wp.transpose() * dlogits;
  dpre.array() *= (Scalar(1) - fc.hidden.array().square());

  const MatrixX<Scalar> dl2 = dlogits.array().square();
  const MatrixX<Scalar> h2 = fc.hidden.array().square();
  const MatrixX<Scalar> dp2 = dpre.array().square();
  const MatrixX<Scalar> x2 = fc.inputs.array().square();

  detail::w1<Scalar>(shape, out) = dp2 * x2.transpose();
  out.segment(shape.b1_offset(), shape.hidden) = dp2.rowwise().sum();
  detail::wp<Scalar>(shape, out) = dl2 * h2.transpose();
  out.segment(shape.bp_offset(), shape.actions) = dl2.rowwise().sum();
  return out;
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`; returns the pre-clip norm.
template <typename Scalar>
Scalar clip_by_global_norm(VectorX<Scalar>& grad, Scalar max_norm) {
  const Scalar norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / norm;
  return norm;
}

}  // namespace corabench
