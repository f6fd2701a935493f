#pragma once

#include <vector>

#include <Eigen/Core>

#include "waterwave/flow.hpp"
#include "waterwave/volume.hpp"

namespace waterwave {

/// How a DFT bin (kx, ky) maps to the squared spatial frequency v^2.
enum class FrequencyConvention {
  /// 4 sin^2(pi k / N) per axis: the symbol of the periodic 5-point Laplacian.
  Discrete,
  /// (2 pi k / N)^2 per axis with k folded into [-N/2, N/2].
  Continuous,
};

struct FilterParams {
  double w = 1.0;
  FrequencyConvention convention = FrequencyConvention::Discrete;

  void validate() const {
    if (!(w > 0)) throw InvalidArgument("filter weight w must be positive");
  }
};

/// v^2 on an H x W grid, rows = ky, cols = kx.
Eigen::ArrayXXd frequency_squared(Index height, Index width, FrequencyConvention convention);

/// Per-bin blend v^2/(v^2+w) * V_t + w/(v^2+w) * warped_prev, per channel.
Frame consistency_filter_step(const Frame& v_t, const Frame& warped_prev, const FilterParams& params = {});

struct JacobiResult {
  Frame solution;
  int iterations = 0;
  double last_update = 0.0;
};

/// Solves -lap F + w F = -lap V_t + w warped_prev with a periodic 5-point
/// Laplacian by Jacobi sweeps until the largest update is below `tol`.
/// Throws ConvergenceError (carrying the last update) after `max_iters`.
JacobiResult screened_poisson_solve(const Frame& v_t, const Frame& warped_prev, const FilterParams& params = {},
                                    int max_iters = 10000, double tol = 1e-12);

/// F_0 = V_0, F_t = consistency_filter_step(V_t, warp(F_{t-1}, f_{t -> t-1})).
/// Pixels whose warp leaves the frame take V_t before filtering.
VideoVolume filter_video(const VideoVolume& video, const std::vector<FlowField>& flows, const FilterParams& params = {});

}  // namespace waterwave
