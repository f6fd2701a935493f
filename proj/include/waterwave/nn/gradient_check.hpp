#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "waterwave/nn/params.hpp"

namespace waterwave::nn {

/// Loss value plus the branch signature of the evaluation (see Tape).
struct LossProbe {
  double value = 0.0;
  std::uint64_t signature = 0;
};

/// Evaluates the loss at the store's current values. With `with_grad` the
/// function must also leave d loss / d params in store.grads().
using LossFunction = std::function<LossProbe(ParamStore<double>&, bool with_grad)>;

struct GradientCheckResult {
  double max_rel_error = 0.0;
  int probes = 0;
  int resampled = 0;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradientCheckOptions {
  int probe_count = 100;
  double step = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-7;
  std::uint64_t seed = 7;
  int max_resample = 50;
};

/// Compares analytic gradients with central differences on randomly drawn
/// parameters. Half of the probes come from parameters with a nonzero
/// analytic gradient, the rest uniformly from all parameters. A probe whose
/// +/- step evaluation changes the branch signature straddles a kink and is
/// redrawn.
inline GradientCheckResult gradient_check(const LossFunction& loss, ParamStore<double>& params,
                                          const GradientCheckOptions& opt = {}) {
  params.zero_grad();
  const LossProbe base = loss(params, true);
  const Eigen::ArrayXd analytic = params.grads();

  std::vector<Index> active;
  for (Index i = 0; i < analytic.size(); ++i)
    if (analytic[i] != 0.0) active.push_back(i);

  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<Index> any(0, params.size() - 1);
  GradientCheckResult result;
  for (int p = 0; p < opt.probe_count; ++p) {
    for (int attempt = 0; attempt <= opt.max_resample; ++attempt) {
      Index idx;
      if (p % 2 == 0 && !active.empty()) {
        idx = active[std::uniform_int_distribution<std::size_t>(0, active.size() - 1)(rng)];
      } else {
        idx = any(rng);
      }
      const double saved = params.values()[idx];
      params.values()[idx] = saved + opt.step;
      const LossProbe plus = loss(params, false);
      params.values()[idx] = saved - opt.step;
      const LossProbe minus = loss(params, false);
      params.values()[idx] = saved;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++result.resampled;
        if (attempt == opt.max_resample)
          throw NumericalError("gradient_check: no kink-free probe after " + std::to_string(opt.max_resample) + " draws");
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * opt.step);
      const double a = analytic[idx];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.abs_floor});
      if (result.worst_index < 0 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
      ++result.probes;
      break;
    }
  }
  return result;
}

}  // namespace waterwave::nn
