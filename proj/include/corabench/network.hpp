#pragma once

#include <cmath>

#include "corabench/common.hpp"

namespace corabench {

/// Dense actor-critic: one tanh hidden layer feeding a linear policy head and
/// a linear value head. All parameters live in one flat vector, ordered
/// W1 (hidden x inputs, column-major), b1, Wp (actions x hidden), bp, wv, bv.
struct NetShape {
  Index inputs = 0;
  Index hidden = 0;
  Index actions = 0;

  Index w1_offset() const { return 0; }
  Index b1_offset() const { return hidden * inputs; }
  Index wp_offset() const { return b1_offset() + hidden; }
  Index bp_offset() const { return wp_offset() + actions * hidden; }
  Index wv_offset() const { return bp_offset() + actions; }
  Index bv_offset() const { return wv_offset() + hidden; }
  Index param_count() const { return bv_offset() + 1; }

  bool operator==(const NetShape&) const = default;
};

template <typename Scalar>
struct ForwardCache {
  MatrixX<Scalar> inputs;     // inputs x batch
  MatrixX<Scalar> hidden;     // tanh activations, hidden x batch
  MatrixX<Scalar> logits;     // actions x batch
  MatrixX<Scalar> log_probs;  // actions x batch
  MatrixX<Scalar> probs;      // actions x batch
  VectorX<Scalar> values;     // batch

  Index batch() const { return inputs.cols(); }
};

/// Loss gradient with respect to the network outputs.
template <typename Scalar>
struct OutputGrad {
  MatrixX<Scalar> logits;
  VectorX<Scalar> values;

  static OutputGrad zero(const NetShape& shape, Index batch) {
    return {MatrixX<Scalar>::Zero(shape.actions, batch), VectorX<Scalar>::Zero(batch)};
  }
};

namespace detail {

template <typename Scalar, typename Vec>
auto w1(const NetShape& s, Vec& theta) {
  using M = std::conditional_t<std::is_const_v<Vec>, const MatrixX<Scalar>, MatrixX<Scalar>>;
  return Eigen::Map<M>(theta.data() + s.w1_offset(), s.hidden, s.inputs);
}
template <typename Scalar, typename Vec>
auto wp(const NetShape& s, Vec& theta) {
  using M = std::conditional_t<std::is_const_v<Vec>, const MatrixX<Scalar>, MatrixX<Scalar>>;
  return Eigen::Map<M>(theta.data() + s.wp_offset(), s.actions, s.hidden);
}

}  // namespace detail

/// Column-wise log-softmax, stable against large logits.
template <typename Derived>
MatrixX<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = logits;
  for (Index c = 0; c < out.cols(); ++c) {
    const Scalar m = out.col(c).maxCoeff();
    const Scalar lse = m + std::log((out.col(c).array() - m).exp().sum());
    out.col(c).array() -= lse;
  }
  return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  return log_softmax(logits).array().exp().matrix();
}

/// KL(p || q) for two distributions given as columns; terms with p_k = 0 vanish.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& log_q) {
  using Scalar = typename DerivedP::Scalar;
  Scalar kl = 0;
  for (Index k = 0; k < p.size(); ++k)
    if (p[k] > Scalar(0)) kl += p[k] * (std::log(p[k]) - log_q[k]);
  return kl;
}

template <typename Scalar, typename Derived>
ForwardCache<Scalar> forward(const NetShape& shape, const VectorX<Scalar>& theta,
                             const Eigen::MatrixBase<Derived>& inputs) {
  ForwardCache<Scalar> fc;
  fc.inputs = inputs.template cast<Scalar>();
  const auto W1 = detail::w1<Scalar>(shape, theta);
  const auto Wp = detail::wp<Scalar>(shape, theta);
  const auto b1 = theta.segment(shape.b1_offset(), shape.hidden);
  const auto bp = theta.segment(shape.bp_offset(), shape.actions);
  const auto wv = theta.segment(shape.wv_offset(), shape.hidden);
  const Scalar bv = theta[shape.bv_offset()];

  fc.hidden = ((W1 * fc.inputs).colwise() + b1).array().tanh().matrix();
  fc.logits = (Wp * fc.hidden).colwise() + bp;
  fc.values = (fc.hidden.transpose() * wv).array() + bv;
  fc.log_probs = log_softmax(fc.logits);
  fc.probs = fc.log_probs.array().exp().matrix();
  return fc;
}

/// Back-propagates output gradients to a flat parameter gradient.
template <typename Scalar>
VectorX<Scalar> backward(const NetShape& shape, const VectorX<Scalar>& theta,
                         const ForwardCache<Scalar>& fc, const OutputGrad<Scalar>& og) {
  VectorX<Scalar> grad = VectorX<Scalar>::Zero(shape.param_count());
  const auto Wp = detail::wp<Scalar>(shape, theta);
  const auto wv = theta.segment(shape.wv_offset(), shape.hidden);

  detail::wp<Scalar>(shape, grad) = og.logits * fc.hidden.transpose();
  grad.segment(shape.bp_offset(), shape.actions) = og.logits.rowwise().sum();
  grad.segment(shape.wv_offset(), shape.hidden) = fc.hidden * og.values;
  grad[shape.bv_offset()] = og.values.sum();

  MatrixX<Scalar> dpre = Wp.transpose() * og.logits + wv * og.values.transpose();
  dpre.array() *= (Scalar(1) - fc.hidden.array().square());
  detail::w1<Scalar>(shape, grad) = dpre * fc.inputs.transpose();
  grad.segment(shape.b1_offset(), shape.hidden) = dpre.rowwise().sum();
  return grad;
}

/// Uniform fan-in initialisation; the policy head is scaled down so the
/// initial policy is close to uniform.
template <typename Scalar>
VectorX<Scalar> init_params(const NetShape& shape, Rng& rng) {
  VectorX<Scalar> theta(shape.param_count());
  auto fill = [&](Index offset, Index count, double bound) {
    for (Index k = 0; k < count; ++k)
      theta[offset + k] = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * bound);
  };
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(shape.inputs));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  fill(shape.w1_offset(), shape.hidden * shape.inputs, in_bound);
  fill(shape.b1_offset(), shape.hidden, in_bound);
  fill(shape.wp_offset(), shape.actions * shape.hidden, 0.1 * hid_bound);
  theta.segment(shape.bp_offset(), shape.actions).setZero();
  fill(shape.wv_offset(), shape.hidden, hid_bound);
  theta[shape.bv_offset()] = Scalar(0);
  return theta;
}

}  // namespace corabench
