#pragma once

#include <algorithm>
#include <cmath>

#include "corabench/network.hpp"

using LD = long double;

namespace gradcheck {

inline corabench::MatrixX<LD> random_inputs(corabench::Index rows, corabench::Index cols, corabench::Rng& rng) {
  corabench::MatrixX<LD> x(rows, cols);
  for (corabench::Index k = 0; k < x.size(); ++k) x.data()[k] = LD(2.0 * corabench::uniform01(rng) - 1.0);
  return x;
}

inline corabench::VectorX<LD> random_vector(corabench::Index n, corabench::Rng& rng) {
  corabench::VectorX<LD> v(n);
  for (auto& e : v) e = LD(4.0 * corabench::uniform01(rng) - 2.0);
  return v;
}

/// Largest elementwise |analytic - numeric| / max(|analytic| + |numeric|, 1e-10)
/// over central differences of `loss(theta, grad_out)`.
template <typename Loss>
double max_relative_error(Loss&& loss, const corabench::VectorX<LD>& theta, LD h = LD(1e-6)) {
  corabench::VectorX<LD> analytic;
  loss(theta, &analytic);
  double worst = 0.0;
  corabench::VectorX<LD> probe = theta;
  for (corabench::Index k = 0; k < theta.size(); ++k) {
    probe[k] = theta[k] + h;
    const LD up = loss(probe, nullptr);
    probe[k] = theta[k] - h;
    const LD down = loss(probe, nullptr);
    probe[k] = theta[k];
    const LD numeric = (up - down) / (LD(2) * h);
    const LD denom = std::max(std::fabs(analytic[k]) + std::fabs(numeric), LD(1e-10));
    worst = std::max(worst, static_cast<double>(std::fabs(analytic[k] - numeric) / denom));
  }
  return worst;
}

}  // namespace gradcheck
