#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Core>

#include "waterwave/volume.hpp"

namespace waterwave::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moments kept in double regardless of parameter precision.
struct AdamState {
  AdamConfig config;
  Eigen::ArrayXd m;
  Eigen::ArrayXd v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(Index size, AdamConfig cfg = {})
      : config(cfg), m(Eigen::ArrayXd::Zero(size)), v(Eigen::ArrayXd::Zero(size)) {}
};

/// Step-decay schedule: lr0 before `breakpoint`, lr0 / 2 from it on.
inline double learning_rate_at(long iteration, double lr0, long breakpoint) {
  return iteration < breakpoint ? lr0 : 0.5 * lr0;
}

/// One bias-corrected Adam update. A non-finite gradient, or an update that
/// would leave a parameter non-finite, aborts the step before anything is
/// modified.
template <typename Derived, typename DerivedG>
void adam_step(AdamState& state, Eigen::ArrayBase<Derived>& params, const Eigen::ArrayBase<DerivedG>& grads, double lr) {
  if (params.size() != state.m.size() || grads.size() != params.size())
    throw ShapeError("adam_step: parameter, gradient and moment lengths differ");
  if (!grads.allFinite()) {
    Index bad = 0;
    for (; bad < grads.size(); ++bad)
      if (!std::isfinite(static_cast<double>(grads[bad]))) break;
    throw NumericalError("adam_step: non-finite gradient at parameter " + std::to_string(bad));
  }
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.step + 1));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.step + 1));
  using Scalar = typename Derived::Scalar;
  auto moments = [&](Index i) {
    const double g = static_cast<double>(grads[i]);
    return std::pair{c.beta1 * state.m[i] + (1.0 - c.beta1) * g, c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g};
  };
  auto next = [&](Index i, double m, double v) {
    const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + c.epsilon);
    return static_cast<Scalar>(static_cast<double>(params[i]) - update);
  };
  for (Index i = 0; i < params.size(); ++i) {
    const auto [m, v] = moments(i);
    if (!std::isfinite(static_cast<double>(next(i, m, v))))
      throw NumericalError("adam_step: update overflows parameter " + std::to_string(i));
  }
  ++state.step;
  for (Index i = 0; i < params.size(); ++i) {
    const auto [m, v] = moments(i);
    params[i] = next(i, m, v);
    state.m[i] = m;
    state.v[i] = v;
  }
}

}  // namespace waterwave::nn
