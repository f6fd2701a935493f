#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "waterwave/core.hpp"
#include "waterwave/flow.hpp"
#include "waterwave/nn/ops.hpp"
#include "waterwave/wavelet.hpp"

namespace waterwave {

struct MaskThresholds {
  double beta0 = 0.001;  // temporal gate
  double beta1 = 0.01;   // spatial gate

  void validate() const {
    if (!(beta0 > 0) || !(beta1 > 0)) throw InvalidArgument("mask thresholds must be positive");
  }
};

enum class MaskSource { Output, Enhanced };

/// Binary flicker labels on the temporal-band grid: floor(T/2) x H' x W' x 1
/// with H' = 2 floor(H/2), W' = 2 floor(W/2).
struct InconsistencyMask {
  Volume<double> values;
  MaskThresholds thresholds;
  MaskSource source = MaskSource::Output;

  double coverage() const { return values.empty() ? 0.0 : values.data().mean(); }
};

enum class BasicMaskMode { AsWritten, Complement };

BasicMaskMode parse_mask_mode(const std::string& name);
std::string to_string(BasicMaskMode mode);

/// Window frames warped onto the grid of the window's last frame.
struct AlignedWindow {
  Index reference = 0;     // absolute frame index
  VideoVolume frames;      // W_t x H x W x C
  Volume<double> validity; // W_t x H x W x 1
};

/// `flows` holds the backward flows f_{t+1 -> t} of the whole video.
AlignedWindow align_window(const VideoVolume& video, const FrameWindow& window, const std::vector<FlowField>& flows);

/// Bands of one window: temporal DWT of the aligned stack, spatial DWT of
/// the native frames. Spatial bands are valid everywhere; `temporal_validity`
/// (floor(W_t/2) x H x W x 1) is the product of the aligned validity of each
/// Haar pair.
struct VcWaveBands {
  WaveletBands<double> bands;
  Volume<double> temporal_validity;
};

VcWaveBands vcwave_decompose(const VideoVolume& video, const FrameWindow& window, const std::vector<FlowField>& flows);

template <typename Scalar>
InconsistencyMask inconsistency_mask(const Volume<Scalar>& high_t, const Volume<Scalar>& lh, const Volume<Scalar>& hl,
                                     const Volume<Scalar>& hh, const MaskThresholds& thresholds);

InconsistencyMask inconsistency_mask(const VcWaveBands& bands, const MaskThresholds& thresholds = {});

/// Mask resampled (nearest) to a band grid of shape `grid` (channels ignored).
Volume<double> resample_mask(const Volume<double>& mask, const Shape4& grid);

/// Writes mask_%05d.png per temporal band index (0 black, 1 white).
void save_mask_pngs(const InconsistencyMask& mask, const std::filesystem::path& directory);

double loss_tc(const InconsistencyMask& mask_f, const Volume<double>& high_t_f, const Volume<double>& temporal_validity);
double loss_tc(const InconsistencyMask& mask_f, const Volume<double>& high_t_f);
double loss_detail(const SpatialBands<double>& f, const SpatialBands<double>& v);
double loss_basic(const Volume<double>& low_t_f, const Volume<double>& low_t_v, const Volume<double>& ll_f,
                  const Volume<double>& ll_v, const InconsistencyMask& mask_v, BasicMaskMode mode,
                  const Volume<double>* temporal_validity = nullptr);

// ---------------------------------------------------------------------------
// Differentiable forms

namespace nn {

template <typename Scalar>
struct AlignedVars {
  Var frames;                // W_t x H x W x C
  Volume<Scalar> validity;   // W_t x H x W x 1
};

/// Warps each frame of `window` (W_t x H x W x C) onto the last frame's grid
/// through composed backward flows; flows[i] (1 x H x W x 2) is f_{i+1 -> i}
/// inside the window.
template <typename Scalar>
AlignedVars<Scalar> align_frames(Tape<Scalar>& tape, Var window, const std::vector<Var>& flows) {
  const Shape4 s = tape.shape(window);
  const Index n = s.t;
  if (static_cast<Index>(flows.size()) != n - 1)
    throw InvalidArgument("align_frames: need " + std::to_string(n - 1) + " flows, got " + std::to_string(flows.size()));
  Shape4 vs = s;
  vs.c = 1;
  Volume<Scalar> validity(vs, Scalar(1));
  std::vector<Var> aligned(static_cast<std::size_t>(n));
  aligned[n - 1] = slice_frames(tape, window, n - 1, n);
  Var composed{};
  Volume<Scalar> composed_valid(1, s.h, s.w, 1, Scalar(1));
  for (Index tau = n - 2; tau >= 0; --tau) {
    if (!composed.valid()) {
      composed = flows[tau];
    } else {
      auto sampled = warp(tape, flows[tau], composed);
      composed_valid.data() *= sampled.validity.data();
      composed = add(tape, composed, sampled.image);
    }
    auto w = warp(tape, slice_frames(tape, window, tau, tau + 1), composed);
    aligned[tau] = w.image;
    validity.data().segment(tau * s.pixels(), s.pixels()) = composed_valid.data() * w.validity.data();
  }
  return {stack_frames(tape, aligned), std::move(validity)};
}

template <typename Scalar>
struct VcBandVars {
  TemporalBandVars<Scalar> temporal;
  SpatialBandVars<Scalar> spatial;
  Volume<Scalar> temporal_validity;  // floor(W_t/2) x H x W x 1
};

template <typename Scalar>
Volume<Scalar> pair_validity(const Volume<Scalar>& validity) {
  Shape4 s = validity.shape();
  s.t /= 2;
  Volume<Scalar> out(s);
  for (Index tau = 0; tau < s.t; ++tau)
    out.data().segment(tau * s.frame_size(), s.frame_size()) =
        validity.data().segment(2 * tau * s.frame_size(), s.frame_size()) *
        validity.data().segment((2 * tau + 1) * s.frame_size(), s.frame_size());
  return out;
}

template <typename Scalar>
VcBandVars<Scalar> vcwave_bands(Tape<Scalar>& tape, Var window, const std::vector<Var>& flows) {
  auto aligned = align_frames(tape, window, flows);
  VcBandVars<Scalar> out;
  out.temporal = dwt_temporal(tape, aligned.frames);
  out.spatial = dwt_spatial(tape, window);
  out.temporal_validity = pair_validity(aligned.validity);
  return out;
}

/// Per-entry weights of the mask on a band grid, broadcast over channels and
/// multiplied by an optional per-pixel validity of the same grid.
template <typename Scalar>
Volume<Scalar> broadcast_weights(const Volume<double>& per_pixel, const Shape4& grid, const Volume<Scalar>* validity,
                                 bool complement) {
  Volume<Scalar> w(grid);
  const Index px = grid.t * grid.h * grid.w;
  for (Index i = 0; i < px; ++i) {
    Scalar m = Scalar(per_pixel.data()[i]);
    if (complement) m = Scalar(1) - m;
    if (validity) m *= validity->data()[i];
    for (Index c = 0; c < grid.c; ++c) w.data()[i * grid.c + c] = m;
  }
  return w;
}

/// Mean of |mask * H_t| over valid entries.
template <typename Scalar>
Var loss_tc(Tape<Scalar>& tape, const InconsistencyMask& mask_f, Var high_t, const Volume<Scalar>& temporal_validity) {
  const Shape4 g = tape.shape(high_t);
  const Volume<double> m = resample_mask(mask_f.values, g);
  const Volume<Scalar> w = broadcast_weights<Scalar>(m, g, &temporal_validity, false);
  const Scalar valid = temporal_validity.data().sum() * Scalar(g.c);
  const Volume<Scalar> zero(g);
  if (!(valid > 0)) return tape.constant(Volume<Scalar>(1, 1, 1, 1));
  return weighted_l1(tape, high_t, zero, w, valid);
}

/// Mean L1 between output and enhanced detail subbands.
template <typename Scalar>
Var loss_detail(Tape<Scalar>& tape, const SpatialBandVars<Scalar>& f, const SpatialBands<Scalar>& v) {
  const Shape4 g = tape.shape(f.lh);
  if (v.lh.shape() != g || v.hl.shape() != g || v.hh.shape() != g) throw ShapeError("loss_detail: band grids differ");
  const Volume<Scalar> ones(g, Scalar(1));
  const Scalar denom = Scalar(3 * g.size());
  std::vector<Var> terms{weighted_l1(tape, f.lh, v.lh, ones, denom), weighted_l1(tape, f.hl, v.hl, ones, denom),
                         weighted_l1(tape, f.hh, v.hh, ones, denom)};
  return weighted_sum(tape, terms, std::vector<Scalar>(3, Scalar(1)));
}

/// Masked L1 between low bands: temporal part over valid entries, spatial
/// part over all entries. Complement mode weights by 1 - M.
template <typename Scalar>
Var loss_basic(Tape<Scalar>& tape, Var low_t_f, const Volume<Scalar>& low_t_v, Var ll_f, const Volume<Scalar>& ll_v,
               const InconsistencyMask& mask_v, BasicMaskMode mode, const Volume<Scalar>& temporal_validity) {
  const Shape4 gt = tape.shape(low_t_f), gs = tape.shape(ll_f);
  if (low_t_v.shape() != gt || ll_v.shape() != gs) throw ShapeError("loss_basic: band grids differ");
  const bool complement = mode == BasicMaskMode::Complement;
  const Volume<Scalar> wt = broadcast_weights<Scalar>(resample_mask(mask_v.values, gt), gt, &temporal_validity, complement);
  const Volume<Scalar> ws = broadcast_weights<Scalar>(resample_mask(mask_v.values, gs), gs, nullptr, complement);
  const Scalar valid_t = temporal_validity.data().sum() * Scalar(gt.c);
  std::vector<Var> terms;
  if (valid_t > 0) terms.push_back(weighted_l1(tape, low_t_f, low_t_v, wt, valid_t));
  terms.push_back(weighted_l1(tape, ll_f, ll_v, ws, Scalar(gs.size())));
  return weighted_sum(tape, terms, std::vector<Scalar>(terms.size(), Scalar(1)));
}

}  // namespace nn

// ---------------------------------------------------------------------------

template <typename Scalar>
InconsistencyMask inconsistency_mask(const Volume<Scalar>& high_t, const Volume<Scalar>& lh, const Volume<Scalar>& hl,
                                     const Volume<Scalar>& hh, const MaskThresholds& thresholds) {
  thresholds.validate();
  const Shape4 ts = high_t.shape(), ss = lh.shape();
  if (hl.shape() != ss || hh.shape() != ss) throw ShapeError("inconsistency_mask: spatial band shapes differ");
  if (ss.t < 2 * ts.t || ss.h != ts.h / 2 || ss.w != ts.w / 2 || ss.c != ts.c)
    throw ShapeError("inconsistency_mask: temporal " + ts.str() + " and spatial " + ss.str() + " grids disagree");
  const Index H2 = 2 * ss.h, W2 = 2 * ss.w, C = ts.c;

  // Detail magnitude, collapsed over subbands and channels, upsampled x2.
  Volume<double> detail(ss.t, H2, W2, 1);
  for (Index t = 0; t < ss.t; ++t)
    for (Index y = 0; y < ss.h; ++y)
      for (Index x = 0; x < ss.w; ++x) {
        double m = 0.0;
        for (Index c = 0; c < C; ++c)
          m = std::max({m, std::abs(double(lh(t, y, x, c))), std::abs(double(hl(t, y, x, c))),
                        std::abs(double(hh(t, y, x, c)))});
        for (Index dy = 0; dy < 2; ++dy)
          for (Index dx = 0; dx < 2; ++dx) detail(t, 2 * y + dy, 2 * x + dx, 0) = m;
      }
  const Volume<double> aggregated = box_mean3(detail);

  InconsistencyMask mask{Volume<double>(ts.t, H2, W2, 1), thresholds, MaskSource::Output};
  for (Index tau = 0; tau < ts.t; ++tau)
    for (Index y = 0; y < H2; ++y)
      for (Index x = 0; x < W2; ++x) {
        double ht = 0.0;
        for (Index c = 0; c < C; ++c) ht = std::max(ht, std::abs(double(high_t(tau, y, x, c))));
        const double s = 0.5 * (aggregated(2 * tau, y, x, 0) + aggregated(2 * tau + 1, y, x, 0));
        const double gate_t = std::max(ht - thresholds.beta0, 0.0);
        const double gate_s = std::max(thresholds.beta1 - s, 0.0);
        mask.values(tau, y, x, 0) = (gate_t > 0.0 && gate_s > 0.0) ? 1.0 : 0.0;
      }
  return mask;
}

}  // namespace waterwave
