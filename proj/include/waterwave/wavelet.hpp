#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "waterwave/volume.hpp"

namespace waterwave {

/// Predict / update taps of a one-level lifting step.
///
///   high[i] = odd[i]  - sum_k predict[k] * even[i + k]
///   low[i]  = even[i] + sum_k update[k]  * high[i - k]
///
/// Out-of-range neighbours are clamped to the nearest valid index. The Haar
/// instance is predict = {1}, update = {0.5}: high is the difference of the
/// pair and low its mean (unnormalized).
struct LiftingFilters {
  std::vector<double> predict{1.0};
  std::vector<double> update{0.5};
  std::string name = "haar";

  static LiftingFilters haar() { return {}; }

  bool is_haar() const {
    return predict.size() == 1 && predict[0] == 1.0 && update.size() == 1 && update[0] == 0.5;
  }

  void validate() const {
    if (predict.empty() || update.empty()) throw InvalidArgument("lifting filters must be non-empty");
    for (double v : predict)
      if (!std::isfinite(v)) throw InvalidArgument("non-finite predict coefficient");
    for (double v : update)
      if (!std::isfinite(v)) throw InvalidArgument("non-finite update coefficient");
  }
};

template <typename Scalar>
using Signal = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct SplitSignal {
  Signal<Scalar> even;
  Signal<Scalar> odd;
};

template <typename Scalar>
struct LiftedSignal {
  Signal<Scalar> low;
  Signal<Scalar> high;
};

namespace detail {

inline Index clamp_index(Index i, Index n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// One lifting step over `half` pairs read from in[0], in[stride], ...
template <typename Scalar>
void lift_forward_strided(const Scalar* in, Index stride, Index half, Scalar* low, Scalar* high,
                          Index out_stride, const LiftingFilters& f) {
  if (f.is_haar()) {
    for (Index i = 0; i < half; ++i) {
      const Scalar e = in[2 * i * stride];
      const Scalar h = in[(2 * i + 1) * stride] - e;
      high[i * out_stride] = h;
      low[i * out_stride] = e + Scalar(0.5) * h;
    }
    return;
  }
  std::vector<Scalar> even(half), hi(half);
  for (Index i = 0; i < half; ++i) even[i] = in[2 * i * stride];
  for (Index i = 0; i < half; ++i) {
    Scalar p = 0;
    for (std::size_t k = 0; k < f.predict.size(); ++k)
      p += Scalar(f.predict[k]) * even[clamp_index(i + Index(k), half)];
    hi[i] = in[(2 * i + 1) * stride] - p;
  }
  for (Index i = 0; i < half; ++i) {
    Scalar u = 0;
    for (std::size_t k = 0; k < f.update.size(); ++k) u += Scalar(f.update[k]) * hi[clamp_index(i - Index(k), half)];
    low[i * out_stride] = even[i] + u;
    high[i * out_stride] = hi[i];
  }
}

template <typename Scalar>
void lift_inverse_strided(const Scalar* low, const Scalar* high, Index in_stride, Index half, Scalar* out,
                          Index stride, const LiftingFilters& f) {
  if (f.is_haar()) {
    for (Index i = 0; i < half; ++i) {
      const Scalar h = high[i * in_stride];
      const Scalar e = low[i * in_stride] - Scalar(0.5) * h;
      out[2 * i * stride] = e;
      out[(2 * i + 1) * stride] = h + e;
    }
    return;
  }
  std::vector<Scalar> even(half);
  for (Index i = 0; i < half; ++i) {
    Scalar u = 0;
    for (std::size_t k = 0; k < f.update.size(); ++k)
      u += Scalar(f.update[k]) * high[clamp_index(i - Index(k), half) * in_stride];
    even[i] = low[i * in_stride] - u;
  }
  for (Index i = 0; i < half; ++i) {
    Scalar p = 0;
    for (std::size_t k = 0; k < f.predict.size(); ++k)
      p += Scalar(f.predict[k]) * even[clamp_index(i + Index(k), half)];
    out[2 * i * stride] = even[i];
    out[(2 * i + 1) * stride] = high[i * in_stride] + p;
  }
}

// Transpose of lift_forward_strided: accumulates into d_in.
template <typename Scalar>
void lift_adjoint_strided(const Scalar* d_low, const Scalar* d_high, Index in_stride, Index half, Scalar* d_in,
                          Index stride, const LiftingFilters& f) {
  if (f.is_haar()) {
    for (Index i = 0; i < half; ++i) {
      const Scalar gh = d_high[i * in_stride] + Scalar(0.5) * d_low[i * in_stride];
      d_in[2 * i * stride] += d_low[i * in_stride] - gh;
      d_in[(2 * i + 1) * stride] += gh;
    }
    return;
  }
  std::vector<Scalar> gh(half), ge(half);
  for (Index i = 0; i < half; ++i) gh[i] = d_high[i * in_stride];
  for (Index i = 0; i < half; ++i)
    for (std::size_t k = 0; k < f.update.size(); ++k)
      gh[clamp_index(i - Index(k), half)] += Scalar(f.update[k]) * d_low[i * in_stride];
  for (Index i = 0; i < half; ++i) ge[i] = d_low[i * in_stride];
  for (Index i = 0; i < half; ++i)
    for (std::size_t k = 0; k < f.predict.size(); ++k)
      ge[clamp_index(i + Index(k), half)] -= Scalar(f.predict[k]) * gh[i];
  for (Index i = 0; i < half; ++i) {
    d_in[2 * i * stride] += ge[i];
    d_in[(2 * i + 1) * stride] += gh[i];
  }
}

}  // namespace detail

template <typename Derived>
SplitSignal<typename Derived::Scalar> lift_split(const Eigen::ArrayBase<Derived>& signal) {
  using Scalar = typename Derived::Scalar;
  const Index n = signal.size();
  if (n < 2) throw ShapeError("lifting needs at least 2 samples");
  if (n % 2 != 0) throw ShapeError("lifting needs an even number of samples; pad or truncate first");
  SplitSignal<Scalar> out{Signal<Scalar>(n / 2), Signal<Scalar>(n / 2)};
  for (Index i = 0; i < n / 2; ++i) {
    out.even[i] = signal[2 * i];
    out.odd[i] = signal[2 * i + 1];
  }
  return out;
}

template <typename Derived>
LiftedSignal<typename Derived::Scalar> lift_forward(const Eigen::ArrayBase<Derived>& signal,
                                                    const LiftingFilters& filters = LiftingFilters::haar()) {
  using Scalar = typename Derived::Scalar;
  filters.validate();
  const Signal<Scalar> s = signal;
  lift_split(s);  // precondition checks
  const Index half = s.size() / 2;
  LiftedSignal<Scalar> out{Signal<Scalar>(half), Signal<Scalar>(half)};
  detail::lift_forward_strided(s.data(), 1, half, out.low.data(), out.high.data(), 1, filters);
  return out;
}

template <typename DerivedL, typename DerivedH>
Signal<typename DerivedL::Scalar> lift_inverse(const Eigen::ArrayBase<DerivedL>& low,
                                               const Eigen::ArrayBase<DerivedH>& high,
                                               const LiftingFilters& filters = LiftingFilters::haar()) {
  using Scalar = typename DerivedL::Scalar;
  filters.validate();
  if (low.size() != high.size()) throw ShapeError("lift_inverse: band lengths differ");
  if (low.size() < 1) throw ShapeError("lift_inverse: empty bands");
  const Signal<Scalar> l = low, h = high;
  Signal<Scalar> out(2 * l.size());
  detail::lift_inverse_strided(l.data(), h.data(), 1, l.size(), out.data(), 1, filters);
  return out;
}

// ---------------------------------------------------------------------------
// Volume transforms

template <typename Scalar>
struct TemporalBands {
  Volume<Scalar> low;   // floor(T/2) x H x W x C
  Volume<Scalar> high;  // floor(T/2) x H x W x C
  bool truncated = false;  // last frame dropped (odd T)
};

/// Quadrants follow first-letter = horizontal (x) filter, second = vertical
/// (y): HL is high-pass across columns, low-pass across rows.
template <typename Scalar>
struct SpatialBands {
  Volume<Scalar> ll;
  Volume<Scalar> lh;
  Volume<Scalar> hl;
  Volume<Scalar> hh;
  bool truncated_h = false;
  bool truncated_w = false;
};

template <typename Scalar>
struct WaveletBands {
  TemporalBands<Scalar> temporal;
  SpatialBands<Scalar> spatial;
  Shape4 source;
};

/// One-level lifting along t at every (y, x, c). Odd T drops the last frame.
template <typename Scalar>
TemporalBands<Scalar> dwt_temporal(const Volume<Scalar>& video, const LiftingFilters& f = LiftingFilters::haar()) {
  f.validate();
  const Shape4 s = video.shape();
  if (s.t < 2) throw ShapeError("temporal DWT needs at least 2 frames, got " + s.str());
  Shape4 bs = s;
  bs.t = s.t / 2;
  TemporalBands<Scalar> out{Volume<Scalar>(bs), Volume<Scalar>(bs), s.t % 2 != 0};
  const Index fs = s.frame_size();
  if (f.is_haar()) {
    for (Index tau = 0; tau < bs.t; ++tau) {
      Eigen::Map<const Signal<Scalar>> e(video.frame_data(2 * tau), fs), o(video.frame_data(2 * tau + 1), fs);
      Eigen::Map<Signal<Scalar>> lo(out.low.frame_data(tau), fs), hi(out.high.frame_data(tau), fs);
      hi = o - e;
      lo = e + Scalar(0.5) * hi;
    }
    return out;
  }
  for (Index i = 0; i < fs; ++i)
    detail::lift_forward_strided(video.data().data() + i, fs, bs.t, out.low.data().data() + i,
                                 out.high.data().data() + i, fs, f);
  return out;
}

template <typename Scalar>
Volume<Scalar> idwt_temporal(const Volume<Scalar>& low, const Volume<Scalar>& high,
                             const LiftingFilters& f = LiftingFilters::haar()) {
  f.validate();
  if (low.shape() != high.shape()) throw ShapeError("idwt_temporal: band shapes differ");
  Shape4 s = low.shape();
  const Index half = s.t;
  s.t *= 2;
  Volume<Scalar> out(s);
  const Index fs = s.frame_size();
  for (Index i = 0; i < fs; ++i)
    detail::lift_inverse_strided(low.data().data() + i, high.data().data() + i, fs, half, out.data().data() + i, fs, f);
  return out;
}

/// Gradient of dwt_temporal: maps band gradients back to the input grid.
template <typename Scalar>
Volume<Scalar> dwt_temporal_adjoint(const Volume<Scalar>& d_low, const Volume<Scalar>& d_high, const Shape4& input,
                                    const LiftingFilters& f = LiftingFilters::haar()) {
  Volume<Scalar> d_in(input);
  const Index fs = input.frame_size();
  for (Index i = 0; i < fs; ++i)
    detail::lift_adjoint_strided(d_low.data().data() + i, d_high.data().data() + i, fs, d_low.frames(),
                                 d_in.data().data() + i, fs, f);
  return d_in;
}

namespace detail {

// Row pass then column pass over one frame; H, W already even-truncated to
// 2*hh, 2*hw. `src_w` is the source row length.
template <typename Scalar>
void spatial_forward_frame(const Scalar* src, Index src_w, Index c, Index hh, Index hw, Scalar* ll, Scalar* lh,
                           Scalar* hl, Scalar* hh_out, const LiftingFilters& f) {
  // Row pass: Lx, Hx are (2*hh) x hw x c.
  std::vector<Scalar> lx(2 * hh * hw * c), hx(2 * hh * hw * c);
  for (Index y = 0; y < 2 * hh; ++y)
    for (Index ch = 0; ch < c; ++ch)
      lift_forward_strided(src + y * src_w * c + ch, c, hw, lx.data() + y * hw * c + ch, hx.data() + y * hw * c + ch,
                           c, f);
  // Column pass.
  const Index row = hw * c;
  for (Index i = 0; i < row; ++i) {
    lift_forward_strided(lx.data() + i, row, hh, ll + i, lh + i, row, f);
    lift_forward_strided(hx.data() + i, row, hh, hl + i, hh_out + i, row, f);
  }
}

}  // namespace detail

/// Separable one-level lifting on every frame: rows (x) first, then columns (y).
template <typename Scalar>
SpatialBands<Scalar> dwt_spatial(const Volume<Scalar>& video, const LiftingFilters& f = LiftingFilters::haar()) {
  f.validate();
  const Shape4 s = video.shape();
  if (s.h < 2 || s.w < 2) throw ShapeError("spatial DWT needs frames of at least 2x2, got " + s.str());
  const Shape4 bs{s.t, s.h / 2, s.w / 2, s.c};
  SpatialBands<Scalar> out{Volume<Scalar>(bs), Volume<Scalar>(bs), Volume<Scalar>(bs), Volume<Scalar>(bs),
                           s.h % 2 != 0, s.w % 2 != 0};
  for (Index t = 0; t < s.t; ++t)
    detail::spatial_forward_frame(video.frame_data(t), s.w, s.c, bs.h, bs.w, out.ll.frame_data(t),
                                  out.lh.frame_data(t), out.hl.frame_data(t), out.hh.frame_data(t), f);
  return out;
}

template <typename Scalar>
Volume<Scalar> idwt_spatial(const SpatialBands<Scalar>& b, const LiftingFilters& f = LiftingFilters::haar()) {
  f.validate();
  const Shape4 bs = b.ll.shape();
  if (b.lh.shape() != bs || b.hl.shape() != bs || b.hh.shape() != bs) throw ShapeError("idwt_spatial: band shapes differ");
  const Shape4 s{bs.t, 2 * bs.h, 2 * bs.w, bs.c};
  Volume<Scalar> out(s);
  const Index row = bs.w * bs.c;
  std::vector<Scalar> lx(s.h * row), hx(s.h * row);
  for (Index t = 0; t < s.t; ++t) {
    for (Index i = 0; i < row; ++i) {
      detail::lift_inverse_strided(b.ll.frame_data(t) + i, b.lh.frame_data(t) + i, row, bs.h, lx.data() + i, row, f);
      detail::lift_inverse_strided(b.hl.frame_data(t) + i, b.hh.frame_data(t) + i, row, bs.h, hx.data() + i, row, f);
    }
    Scalar* dst = out.frame_data(t);
    for (Index y = 0; y < s.h; ++y)
      for (Index ch = 0; ch < s.c; ++ch)
        detail::lift_inverse_strided(lx.data() + y * row + ch, hx.data() + y * row + ch, s.c, bs.w,
                                     dst + y * s.w * s.c + ch, s.c, f);
  }
  return out;
}

/// Gradient of dwt_spatial with respect to its input of shape `input`.
template <typename Scalar>
Volume<Scalar> dwt_spatial_adjoint(const Volume<Scalar>& d_ll, const Volume<Scalar>& d_lh, const Volume<Scalar>& d_hl,
                                   const Volume<Scalar>& d_hh, const Shape4& input,
                                   const LiftingFilters& f = LiftingFilters::haar()) {
  const Shape4 bs = d_ll.shape();
  Volume<Scalar> d_in(input);
  const Index row = bs.w * bs.c;
  std::vector<Scalar> dlx(2 * bs.h * row), dhx(2 * bs.h * row);
  for (Index t = 0; t < bs.t; ++t) {
    std::fill(dlx.begin(), dlx.end(), Scalar(0));
    std::fill(dhx.begin(), dhx.end(), Scalar(0));
    for (Index i = 0; i < row; ++i) {
      detail::lift_adjoint_strided(d_ll.frame_data(t) + i, d_lh.frame_data(t) + i, row, bs.h, dlx.data() + i, row, f);
      detail::lift_adjoint_strided(d_hl.frame_data(t) + i, d_hh.frame_data(t) + i, row, bs.h, dhx.data() + i, row, f);
    }
    Scalar* dst = d_in.frame_data(t);
    for (Index y = 0; y < 2 * bs.h; ++y)
      for (Index ch = 0; ch < bs.c; ++ch)
        detail::lift_adjoint_strided(dlx.data() + y * row + ch, dhx.data() + y * row + ch, bs.c, bs.w,
                                     dst + y * input.w * bs.c + ch, bs.c, f);
  }
  return d_in;
}

template <typename Scalar>
WaveletBands<Scalar> dwt(const Volume<Scalar>& video, const LiftingFilters& f = LiftingFilters::haar()) {
  return {dwt_temporal(video, f), dwt_spatial(video, f), video.shape()};
}

// ---------------------------------------------------------------------------
// Haar analysis on [0,1]

/// Wavelet coefficient b(j,k) = 2^{j/2} * integral F(t) psi(2^j t - k) dt of the
/// piecewise-constant function whose 2^m samples are `samples`, with the Haar
/// mother wavelet psi = +1 on [0,1/2), -1 on [1/2,1). Summation is exact
/// because every sample interval lies inside one half of the support.
double haar_coefficient(std::span<const double> samples, int level, long shift);

/// Multi-level Haar lifting cascade. highs[l-1] is the high band after l
/// steps (length n / 2^l); `low` is the remaining coarse band.
struct HaarCascade {
  std::vector<Signal<double>> highs;
  Signal<double> low;
};
HaarCascade haar_cascade(const Signal<double>& signal, int levels);

/// Factor relating the unnormalized lifting high band to the orthonormal
/// coefficient: b(j, k) = haar_lifting_scale(j) * highs[m - j - 1][k] for a
/// signal of 2^m samples. The lifting band is (second-half mean) - (first-half
/// mean) of a dyadic block of 2^{m-j} samples; the orthonormal coefficient is
/// 2^{j/2} 2^{-m} (first-half sum - second-half sum), which gives -2^{-j/2-1}.
inline double haar_lifting_scale(int level) { return -std::exp2(-0.5 * level - 1.0); }

}  // namespace waterwave
