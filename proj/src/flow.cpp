#include "waterwave/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace waterwave {

namespace {

using Plane = Eigen::ArrayXXd;  // rows = y, cols = x

Plane plane_of(const Frame& f, Index c = 0) {
  Plane p(f.height(), f.width());
  for (Index y = 0; y < f.height(); ++y)
    for (Index x = 0; x < f.width(); ++x) p(y, x) = f(0, y, x, c);
  return p;
}

double sample(const Plane& p, double sx, double sy) {
  const auto fp = bilinear_footprint(sx, sy, p.rows(), p.cols());
  return (1 - fp.fx) * (1 - fp.fy) * p(fp.y0, fp.x0) + fp.fx * (1 - fp.fy) * p(fp.y0, fp.x0 + 1) +
         (1 - fp.fx) * fp.fy * p(fp.y0 + 1, fp.x0) + fp.fx * fp.fy * p(fp.y0 + 1, fp.x0 + 1);
}

Plane downsample2(const Plane& p) {
  const Index h = p.rows() / 2, w = p.cols() / 2;
  Plane out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      out(y, x) = 0.25 * (p(2 * y, 2 * x) + p(2 * y, 2 * x + 1) + p(2 * y + 1, 2 * x) + p(2 * y + 1, 2 * x + 1));
  return out;
}

/// Pixel-centre-aligned bilinear resize.
Plane resize(const Plane& p, Index h, Index w) {
  Plane out(h, w);
  const double sy = double(p.rows()) / double(h), sx = double(p.cols()) / double(w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) out(y, x) = sample(p, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

Plane warp_plane(const Plane& p, const Plane& u, const Plane& v) {
  Plane out(p.rows(), p.cols());
  for (Index y = 0; y < p.rows(); ++y)
    for (Index x = 0; x < p.cols(); ++x) out(y, x) = sample(p, x + u(y, x), y + v(y, x));
  return out;
}

Plane grad_x(const Plane& p) {
  Plane g(p.rows(), p.cols());
  const Index w = p.cols();
  for (Index x = 0; x < w; ++x) {
    const Index l = std::max<Index>(x - 1, 0), r = std::min<Index>(x + 1, w - 1);
    g.col(x) = (p.col(r) - p.col(l)) / double(r - l);
  }
  return g;
}

Plane grad_y(const Plane& p) {
  Plane g(p.rows(), p.cols());
  const Index h = p.rows();
  for (Index y = 0; y < h; ++y) {
    const Index a = std::max<Index>(y - 1, 0), b = std::min<Index>(y + 1, h - 1);
    g.row(y) = (p.row(b) - p.row(a)) / double(b - a);
  }
  return g;
}

/// 4-neighbour mean with replicated borders.
Plane neighbour_mean(const Plane& p) {
  const Index h = p.rows(), w = p.cols();
  Plane out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      out(y, x) = 0.25 * (p(std::max<Index>(y - 1, 0), x) + p(std::min<Index>(y + 1, h - 1), x) +
                          p(y, std::max<Index>(x - 1, 0)) + p(y, std::min<Index>(x + 1, w - 1)));
  return out;
}

}  // namespace

void update_validity(FlowField& flow) {
  const Index H = flow.height(), W = flow.width();
  flow.validity = Volume<double>(1, H, W, 1);
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x) {
      const double dx = flow.dx(y, x), dy = flow.dy(y, x);
      const bool ok = std::isfinite(dx) && std::isfinite(dy) && bilinear_footprint(x + dx, y + dy, H, W).valid();
      flow.validity(0, y, x, 0) = ok ? 1.0 : 0.0;
    }
}

FlowField zero_flow(Index height, Index width, Index from, Index to) {
  FlowField f(height, width);
  f.from = from;
  f.to = to;
  return f;
}

FlowField uniform_flow(Index height, Index width, double dx, double dy) {
  FlowField f(height, width);
  for (Index i = 0; i < height * width; ++i) {
    f.vectors.data()[2 * i] = dx;
    f.vectors.data()[2 * i + 1] = dy;
  }
  update_validity(f);
  return f;
}

FlowField compose_flows(const FlowField& f_ab, const FlowField& f_bc) {
  const Index H = f_bc.height(), W = f_bc.width();
  if (f_ab.height() != H || f_ab.width() != W) throw ShapeError("compose_flows: flow sizes differ");
  const Plane ux = plane_of(f_ab.vectors, 0), uy = plane_of(f_ab.vectors, 1), va = plane_of(f_ab.validity, 0);
  FlowField out(H, W);
  out.from = f_ab.from;
  out.to = f_bc.to;
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x) {
      const double sx = x + f_bc.dx(y, x), sy = y + f_bc.dy(y, x);
      const auto fp = bilinear_footprint(sx, sy, H, W);
      out.vectors(0, y, x, 0) = f_bc.dx(y, x) + sample(ux, sx, sy);
      out.vectors(0, y, x, 1) = f_bc.dy(y, x) + sample(uy, sx, sy);
      // validity of f_ab at a fractional position: every contributing corner valid
      bool ab_ok = true;
      const double wts[4] = {(1 - fp.fx) * (1 - fp.fy), fp.fx * (1 - fp.fy), (1 - fp.fx) * fp.fy, fp.fx * fp.fy};
      const double vals[4] = {va(fp.y0, fp.x0), va(fp.y0, fp.x0 + 1), va(fp.y0 + 1, fp.x0), va(fp.y0 + 1, fp.x0 + 1)};
      for (int k = 0; k < 4; ++k) ab_ok = ab_ok && (wts[k] == 0.0 || vals[k] > 0.5);
      out.validity(0, y, x, 0) = (fp.valid() && ab_ok && f_bc.validity(0, y, x, 0) > 0.5) ? 1.0 : 0.0;
    }
  return out;
}

WarpResult<double> warp_frame(const Frame& image, const FlowField& flow) { return warp_image(image, flow.vectors); }

double endpoint_error(const FlowField& estimate, const FlowField& truth, const Volume<double>* mask) {
  const Index H = truth.height(), W = truth.width();
  if (estimate.height() != H || estimate.width() != W) throw ShapeError("endpoint_error: flow sizes differ");
  double sum = 0.0;
  Index count = 0;
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x) {
      if (mask && (*mask)(0, y, x, 0) == 0.0) continue;
      sum += std::hypot(estimate.dx(y, x) - truth.dx(y, x), estimate.dy(y, x) - truth.dy(y, x));
      ++count;
    }
  if (count == 0) throw DataError("endpoint_error: empty mask");
  return sum / double(count);
}

Frame to_gray(const Frame& frame) {
  if (frame.channels() == 1) return frame;
  if (frame.channels() != 3) throw ShapeError("to_gray expects 1 or 3 channels, got " + frame.shape().str());
  Frame out(frame.frames(), frame.height(), frame.width(), 1);
  for (Index i = 0; i < out.size(); ++i) {
    const double* p = frame.data().data() + 3 * i;
    out.data()[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

FlowField estimate_flow_hs(const Frame& i1, const Frame& i2, const HornSchunckParams& params) {
  if (i1.shape() != i2.shape() || i1.frames() != 1) throw ShapeError("estimate_flow_hs: frames must match, one each");
  if (i1.height() < 8 || i1.width() < 8) throw ShapeError("estimate_flow_hs: frames smaller than 8x8");
  if (!(params.lambda > 0) || params.iterations < 1 || params.levels < 1)
    throw InvalidArgument("estimate_flow_hs: lambda > 0, iterations >= 1 and levels >= 1 required");

  // Data term in 8-bit units keeps lambda on the scale of typical image gradients.
  std::vector<Plane> p1{plane_of(to_gray(i1)) * 255.0}, p2{plane_of(to_gray(i2)) * 255.0};
  for (int l = 1; l < params.levels && p1.back().rows() >= 4 && p1.back().cols() >= 4; ++l) {
    p1.push_back(downsample2(p1.back()));
    p2.push_back(downsample2(p2.back()));
  }

  Plane u, v;
  for (int l = static_cast<int>(p1.size()) - 1; l >= 0; --l) {
    const Index h = p1[l].rows(), w = p1[l].cols();
    if (u.size() == 0) {
      u = Plane::Zero(h, w);
      v = Plane::Zero(h, w);
    } else {
      const double sx = double(w) / double(u.cols()), sy = double(h) / double(u.rows());
      u = resize(u, h, w) * sx;
      v = resize(v, h, w) * sy;
    }
    const Plane warped = warp_plane(p1[l], u, v);
    const Plane ix = 0.5 * (grad_x(warped) + grad_x(p2[l]));
    const Plane iy = 0.5 * (grad_y(warped) + grad_y(p2[l]));
    const Plane it = warped - p2[l];
    const Plane u0 = u, v0 = v;
    const Plane denom = params.lambda + ix.square() + iy.square();
    for (int k = 0; k < params.iterations; ++k) {
      const Plane ub = neighbour_mean(u), vb = neighbour_mean(v);
      const Plane r = (ix * (ub - u0) + iy * (vb - v0) + it) / denom;
      u = ub - ix * r;
      v = vb - iy * r;
    }
  }

  FlowField out(i1.height(), i1.width());
  for (Index y = 0; y < out.height(); ++y)
    for (Index x = 0; x < out.width(); ++x) {
      out.vectors(0, y, x, 0) = u(y, x);
      out.vectors(0, y, x, 1) = v(y, x);
    }
  update_validity(out);
  return out;
}

std::vector<FlowField> estimate_video_flows(const VideoVolume& video, const HornSchunckParams& params) {
  std::vector<FlowField> flows;
  for (Index t = 0; t + 1 < video.frames(); ++t) {
    flows.push_back(estimate_flow_hs(video.frame(t), video.frame(t + 1), params));
    flows.back().from = t;
    flows.back().to = t + 1;
  }
  return flows;
}

TransmissionMap estimate_transmission(const Frame& frame, const TransmissionParams& params) {
  if (frame.channels() != 3 || frame.frames() != 1)
    throw ShapeError("estimate_transmission expects one 3-channel frame, got " + frame.shape().str());
  if (params.patch_radius < 0 || !(params.omega >= 0 && params.omega <= 1) || !(params.t_min > 0 && params.t_min <= 1))
    throw InvalidArgument("estimate_transmission: invalid parameters");
  const Index H = frame.height(), W = frame.width(), r = params.patch_radius;

  auto dark_channel = [&](const Eigen::Vector3d& scale) {
    Plane pixel_min(H, W);
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x)
        pixel_min(y, x) = std::min({frame(0, y, x, 0) / scale[0], frame(0, y, x, 1) / scale[1],
                                    frame(0, y, x, 2) / scale[2]});
    // separable min filter
    Plane rows(H, W), dark(H, W);
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x)
        rows(y, x) = pixel_min.row(y).segment(std::max<Index>(x - r, 0), std::min<Index>(x + r, W - 1) - std::max<Index>(x - r, 0) + 1).minCoeff();
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x)
        dark(y, x) = rows.col(x).segment(std::max<Index>(y - r, 0), std::min<Index>(y + r, H - 1) - std::max<Index>(y - r, 0) + 1).minCoeff();
    return dark;
  };

  const Plane raw_dark = dark_channel(Eigen::Vector3d::Ones());
  // Brightest dark-channel pixels; ties go to the brighter pixel, then scan order.
  std::vector<Index> order(std::size_t(H * W));
  std::iota(order.begin(), order.end(), 0);
  auto brightness = [&](Index i) {
    const double* p = frame.data().data() + 3 * i;
    return p[0] + p[1] + p[2];
  };
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double da = raw_dark(a / W, a % W), db = raw_dark(b / W, b % W);
    if (da != db) return da > db;
    return brightness(a) > brightness(b);
  });
  const Index top = std::max<Index>(1, static_cast<Index>(std::floor(params.top_fraction * double(H * W))));
  TransmissionMap out;
  for (Index k = 0; k < top; ++k)
    for (int c = 0; c < 3; ++c) out.background[c] += frame.data()[3 * order[k] + c];
  out.background /= double(top);

  const Eigen::Vector3d safe = out.background.cwiseMax(1e-6);
  const Plane dark = dark_channel(safe);
  out.t = Volume<double>(1, H, W, 1);
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x)
      out.t(0, y, x, 0) = std::clamp(1.0 - params.omega * dark(y, x), params.t_min, 1.0);
  return out;
}

Volume<double> box_mean3(const Volume<double>& image) {
  const Index T = image.frames(), H = image.height(), W = image.width(), C = image.channels();
  Volume<double> out(image.shape());
  for (Index t = 0; t < T; ++t)
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x)
        for (Index c = 0; c < C; ++c) {
          double s = 0.0;
          for (Index dy = -1; dy <= 1; ++dy)
            for (Index dx = -1; dx <= 1; ++dx)
              s += image(t, std::clamp<Index>(y + dy, 0, H - 1), std::clamp<Index>(x + dx, 0, W - 1), c);
          out(t, y, x, c) = s / 9.0;
        }
  return out;
}

Volume<double> transmission_guidance(const Volume<double>& t_now, const Volume<double>& t_next, const FlowField& base) {
  if (t_now.shape() != t_next.shape() || t_now.channels() != 1 || t_now.frames() != 1)
    throw ShapeError("transmission_guidance: maps must be 1 x H x W x 1 and equal");
  const Volume<double> warped = warp_frame(t_next, base).image;
  const Volume<double> m_now = box_mean3(t_now), m_next = box_mean3(warped);
  const Index H = t_now.height(), W = t_now.width();
  Volume<double> out(1, H, W, 4);
  for (Index i = 0; i < H * W; ++i) {
    out.data()[4 * i] = t_now.data()[i];
    out.data()[4 * i + 1] = warped.data()[i];
    out.data()[4 * i + 2] = m_now.data()[i];
    out.data()[4 * i + 3] = m_next.data()[i];
  }
  return out;
}

}  // namespace waterwave
