#pragma once

#include <cmath>
#include <vector>

#include "waterwave/nn/tape.hpp"
#include "waterwave/warp.hpp"
#include "waterwave/wavelet.hpp"

namespace waterwave::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Shape of a batch of n feature vectors of width f.
inline Shape4 batch_shape(Index n, Index f) { return {1, 1, n, f}; }

template <typename Scalar>
Var add(Tape<Scalar>& tape, Var a, Var b) {
  if (tape.shape(a) != tape.shape(b)) throw ShapeError("add: " + tape.shape(a).str() + " vs " + tape.shape(b).str());
  Volume<Scalar> out(tape.shape(a), tape.value(a).data() + tape.value(b).data());
  return tape.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const auto& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) += g;
  });
}

template <typename Scalar>
Var scale(Tape<Scalar>& tape, Var a, Scalar s) {
  Volume<Scalar> out(tape.shape(a), tape.value(a).data() * s);
  return tape.record(std::move(out), {a}, [a, s](Tape<Scalar>& t, const auto& g) { t.grad_buffer(a) += s * g; });
}

/// sum_i weights[i] * terms[i] of scalar vars.
template <typename Scalar>
Var weighted_sum(Tape<Scalar>& tape, const std::vector<Var>& terms, const std::vector<Scalar>& weights) {
  Scalar total = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) total += weights[i] * tape.scalar(terms[i]);
  return tape.record(Volume<Scalar>(1, 1, 1, 1, total), terms, [terms, weights](Tape<Scalar>& t, const auto& g) {
    for (std::size_t i = 0; i < terms.size(); ++i)
      if (t.requires_grad(terms[i])) t.grad_buffer(terms[i])[0] += weights[i] * g[0];
  });
}

/// y = W x + b on a batch: x is (1,1,n,in), weight (1,1,in,out) read as an
/// out x in column-major matrix, bias (1,1,1,out).
template <typename Scalar>
Var linear(Tape<Scalar>& tape, Var x, Var weight, Var bias) {
  const Shape4& xs = tape.shape(x);
  const Shape4& ws = tape.shape(weight);
  const Index in = xs.c, n = xs.t * xs.h * xs.w, out_w = ws.c;
  if (ws.w != in || tape.shape(bias).size() != out_w)
    throw ShapeError("linear: input width " + std::to_string(in) + " vs weight " + ws.str());
  using Map = Eigen::Map<const Matrix<Scalar>>;
  Map X(tape.value(x).data().data(), in, n);
  Map Wm(tape.value(weight).data().data(), out_w, in);
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> b(tape.value(bias).data().data(), out_w);
  Volume<Scalar> out(batch_shape(n, out_w));
  Eigen::Map<Matrix<Scalar>> Y(out.data().data(), out_w, n);
  Y.noalias() = Wm * X;
  Y.colwise() += b;
  return tape.record(std::move(out), {x, weight, bias}, [x, weight, bias, in, n, out_w](Tape<Scalar>& t, const auto& g) {
    Eigen::Map<const Matrix<Scalar>> dY(g.data(), out_w, n);
    Eigen::Map<const Matrix<Scalar>> X(t.value(x).data().data(), in, n);
    Eigen::Map<const Matrix<Scalar>> Wm(t.value(weight).data().data(), out_w, in);
    if (t.requires_grad(x)) {
      Eigen::Map<Matrix<Scalar>> dX(t.grad_buffer(x).data(), in, n);
      dX.noalias() += Wm.transpose() * dY;
    }
    if (t.requires_grad(weight)) {
      Eigen::Map<Matrix<Scalar>> dW(t.grad_buffer(weight).data(), out_w, in);
      dW.noalias() += dY * X.transpose();
    }
    if (t.requires_grad(bias)) t.grad_buffer(bias) += dY.rowwise().sum().array();
  });
}

template <typename Scalar>
Var relu(Tape<Scalar>& tape, Var x) {
  const auto& xv = tape.value(x).data();
  Volume<Scalar> out(tape.shape(x), xv.max(Scalar(0)));
  if (tape.tracking_branches())
    for (Index i = 0; i < xv.size(); ++i) tape.note_branch((static_cast<std::uint64_t>(i) << 1) | (xv[i] > 0));
  return tape.record(std::move(out), {x}, [x](Tape<Scalar>& t, const auto& g) {
    t.grad_buffer(x) += (t.value(x).data() > Scalar(0)).select(g, Scalar(0));
  });
}

template <typename Scalar>
Var sigmoid(Tape<Scalar>& tape, Var x) {
  Eigen::Array<Scalar, Eigen::Dynamic, 1> s = Scalar(1) / (Scalar(1) + (-tape.value(x).data()).exp());
  Volume<Scalar> out(tape.shape(x), s);
  return tape.record(std::move(out), {x}, [x, s = std::move(s)](Tape<Scalar>& t, const auto& g) {
    t.grad_buffer(x) += g * s * (Scalar(1) - s);
  });
}

/// Per-point concatenation of feature vectors: (n, fa) ++ (n, fb) -> (n, fa+fb).
template <typename Scalar>
Var concat_features(Tape<Scalar>& tape, Var a, Var b) {
  const Shape4 &as = tape.shape(a), &bs = tape.shape(b);
  const Index n = as.t * as.h * as.w;
  if (bs.t * bs.h * bs.w != n) throw ShapeError("concat_features: batch sizes differ");
  Volume<Scalar> out(batch_shape(n, as.c + bs.c));
  Eigen::Map<Matrix<Scalar>> O(out.data().data(), as.c + bs.c, n);
  O.topRows(as.c) = tape.value(a).as_matrix();
  O.bottomRows(bs.c) = tape.value(b).as_matrix();
  const Index fa = as.c, fb = bs.c;
  return tape.record(std::move(out), {a, b}, [a, b, fa, fb, n](Tape<Scalar>& t, const auto& g) {
    Eigen::Map<const Matrix<Scalar>> G(g.data(), fa + fb, n);
    if (t.requires_grad(a)) Eigen::Map<Matrix<Scalar>>(t.grad_buffer(a).data(), fa, n) += G.topRows(fa);
    if (t.requires_grad(b)) Eigen::Map<Matrix<Scalar>>(t.grad_buffer(b).data(), fb, n) += G.bottomRows(fb);
  });
}

template <typename Scalar>
Var reshape(Tape<Scalar>& tape, Var a, const Shape4& shape) {
  Volume<Scalar> out = tape.value(a).reshaped(shape);
  return tape.record(std::move(out), {a}, [a](Tape<Scalar>& t, const auto& g) { t.grad_buffer(a) += g; });
}

/// Frames [begin, end) of a volume.
template <typename Scalar>
Var slice_frames(Tape<Scalar>& tape, Var a, Index begin, Index end) {
  Volume<Scalar> out = tape.value(a).frames_range(begin, end);
  const Index offset = begin * tape.shape(a).frame_size(), len = out.size();
  return tape.record(std::move(out), {a}, [a, offset, len](Tape<Scalar>& t, const auto& g) {
    t.grad_buffer(a).segment(offset, len) += g;
  });
}

/// Concatenates volumes of equal frame shape along t.
template <typename Scalar>
Var stack_frames(Tape<Scalar>& tape, const std::vector<Var>& parts) {
  Shape4 s = tape.shape(parts.front());
  Index total = 0;
  for (Var p : parts) {
    const Shape4& ps = tape.shape(p);
    if (ps.h != s.h || ps.w != s.w || ps.c != s.c) throw ShapeError("stack_frames: frame shapes differ");
    total += ps.t;
  }
  s.t = total;
  Volume<Scalar> out(s);
  Index offset = 0;
  for (Var p : parts) {
    const auto& v = tape.value(p).data();
    out.data().segment(offset, v.size()) = v;
    offset += v.size();
  }
  return tape.record(std::move(out), parts, [parts](Tape<Scalar>& t, const auto& g) {
    Index off = 0;
    for (Var p : parts) {
      const Index len = t.value(p).size();
      if (t.requires_grad(p)) t.grad_buffer(p) += g.segment(off, len);
      off += len;
    }
  });
}

template <typename Scalar>
struct WarpVar {
  Var image;
  Volume<Scalar> validity;
};

/// Differentiable bilinear warp (see warp_image); gradients reach both the
/// image and the flow. Clamped (out-of-frame) coordinates pass no gradient to
/// the flow along the clamped axis.
template <typename Scalar>
WarpVar<Scalar> warp(Tape<Scalar>& tape, Var image, Var flow) {
  auto result = warp_image(tape.value(image), tape.value(flow));
  if (tape.tracking_branches()) {
    const auto& fv = tape.value(flow);
    const Index H = fv.height(), W = fv.width();
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        const auto fp = bilinear_footprint(Scalar(x) + fv(0, y, x, 0), Scalar(y) + fv(0, y, x, 1), H, W);
        tape.note_branch((static_cast<std::uint64_t>(fp.x0) << 40) ^ (static_cast<std::uint64_t>(fp.y0) << 20) ^
                         (fp.inside_x ? 1u : 0u) ^ (fp.inside_y ? 2u : 0u) ^ (static_cast<std::uint64_t>(y * W + x) << 2));
      }
  }
  Var out = tape.record(std::move(result.image), {image, flow}, [image, flow](Tape<Scalar>& t, const auto& g) {
    const auto& img = t.value(image);
    const auto& fv = t.value(flow);
    const Index H = img.height(), W = img.width(), C = img.channels();
    const bool want_img = t.requires_grad(image), want_flow = t.requires_grad(flow);
    auto* d_img = want_img ? t.grad_buffer(image).data() : nullptr;
    auto* d_flow = want_flow ? t.grad_buffer(flow).data() : nullptr;
    for (Index y = 0; y < H; ++y) {
      for (Index x = 0; x < W; ++x) {
        const auto fp = bilinear_footprint(Scalar(x) + fv(0, y, x, 0), Scalar(y) + fv(0, y, x, 1), H, W);
        const Scalar fx = fp.fx, fy = fp.fy;
        Scalar dsx = 0, dsy = 0;
        for (Index c = 0; c < C; ++c) {
          const Scalar go = g[(y * W + x) * C + c];
          if (go == Scalar(0)) continue;
          const Scalar i00 = img(0, fp.y0, fp.x0, c), i01 = img(0, fp.y0, fp.x0 + 1, c);
          const Scalar i10 = img(0, fp.y0 + 1, fp.x0, c), i11 = img(0, fp.y0 + 1, fp.x0 + 1, c);
          if (d_img) {
            d_img[img.index(0, fp.y0, fp.x0, c)] += go * (1 - fx) * (1 - fy);
            d_img[img.index(0, fp.y0, fp.x0 + 1, c)] += go * fx * (1 - fy);
            d_img[img.index(0, fp.y0 + 1, fp.x0, c)] += go * (1 - fx) * fy;
            d_img[img.index(0, fp.y0 + 1, fp.x0 + 1, c)] += go * fx * fy;
          }
          dsx += go * ((1 - fy) * (i01 - i00) + fy * (i11 - i10));
          dsy += go * ((1 - fx) * (i10 - i00) + fx * (i11 - i01));
        }
        if (d_flow) {
          if (fp.inside_x) d_flow[(y * W + x) * 2] += dsx;
          if (fp.inside_y) d_flow[(y * W + x) * 2 + 1] += dsy;
        }
      }
    }
  });
  return {out, std::move(result.validity)};
}

template <typename Scalar>
struct TemporalBandVars {
  Var low;
  Var high;
  bool truncated = false;
};

template <typename Scalar>
TemporalBandVars<Scalar> dwt_temporal(Tape<Scalar>& tape, Var video, const LiftingFilters& f = LiftingFilters::haar()) {
  auto bands = waterwave::dwt_temporal(tape.value(video), f);
  const Shape4 in = tape.shape(video);
  const Shape4 bs = bands.low.shape();
  Var low = tape.record(std::move(bands.low), {video}, [video, in, bs, f](Tape<Scalar>& t, const auto& g) {
    Volume<Scalar> zero(bs);
    t.grad_buffer(video) += dwt_temporal_adjoint(Volume<Scalar>(bs, g), zero, in, f).data();
  });
  Var high = tape.record(std::move(bands.high), {video}, [video, in, bs, f](Tape<Scalar>& t, const auto& g) {
    Volume<Scalar> zero(bs);
    t.grad_buffer(video) += dwt_temporal_adjoint(zero, Volume<Scalar>(bs, g), in, f).data();
  });
  return {low, high, bands.truncated};
}

template <typename Scalar>
struct SpatialBandVars {
  Var ll;
  Var lh;
  Var hl;
  Var hh;
};

template <typename Scalar>
SpatialBandVars<Scalar> dwt_spatial(Tape<Scalar>& tape, Var video, const LiftingFilters& f = LiftingFilters::haar()) {
  auto bands = waterwave::dwt_spatial(tape.value(video), f);
  const Shape4 in = tape.shape(video);
  const Shape4 bs = bands.ll.shape();
  auto make = [&](Volume<Scalar> value, int which) {
    return tape.record(std::move(value), {video}, [video, in, bs, f, which](Tape<Scalar>& t, const auto& g) {
      Volume<Scalar> zero(bs), grad(bs, g);
      const Volume<Scalar>* parts[4] = {&zero, &zero, &zero, &zero};
      parts[which] = &grad;
      t.grad_buffer(video) += dwt_spatial_adjoint(*parts[0], *parts[1], *parts[2], *parts[3], in, f).data();
    });
  };
  SpatialBandVars<Scalar> out;
  out.ll = make(std::move(bands.ll), 0);
  out.lh = make(std::move(bands.lh), 1);
  out.hl = make(std::move(bands.hl), 2);
  out.hh = make(std::move(bands.hh), 3);
  return out;
}

/// sum_i weights[i] * |a[i] - target[i]| / denominator, with sign(0) = 0 as the
/// subgradient of |.|. `target` and `weights` are constants of a's size.
template <typename Scalar>
Var weighted_l1(Tape<Scalar>& tape, Var a, const Volume<Scalar>& target, const Volume<Scalar>& weights,
                Scalar denominator) {
  const auto& av = tape.value(a).data();
  if (target.size() != av.size() || weights.size() != av.size())
    throw ShapeError("weighted_l1: operand sizes differ (" + tape.shape(a).str() + ")");
  if (!(denominator > 0)) throw InvalidArgument("weighted_l1: denominator must be positive");
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> diff = av - target.data();
  const Scalar value = (weights.data() * diff.abs()).sum() / denominator;
  if (tape.tracking_branches())
    for (Index i = 0; i < diff.size(); ++i)
      if (weights.data()[i] != 0)
        tape.note_branch((static_cast<std::uint64_t>(i) << 2) | (diff[i] > 0 ? 1u : 0u) | (diff[i] < 0 ? 2u : 0u));
  Eigen::Array<Scalar, Eigen::Dynamic, 1> slope = weights.data() * diff.sign() / denominator;
  return tape.record(Volume<Scalar>(1, 1, 1, 1, value), {a}, [a, slope = std::move(slope)](Tape<Scalar>& t, const auto& g) {
    t.grad_buffer(a) += g[0] * slope;
  });
}

}  // namespace waterwave::nn
