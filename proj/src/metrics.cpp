#include <cmath>

#include "waterwave/pipeline.hpp"

namespace waterwave {

double warping_error(const VideoVolume& video, const std::vector<FlowField>& flows) {
  const Index T = video.frames(), C = video.channels(), P = video.shape().pixels();
  if (T < 2) throw InvalidArgument("warping_error needs at least 2 frames");
  if (static_cast<Index>(flows.size()) < T - 1)
    throw InvalidArgument("warping_error: need " + std::to_string(T - 1) + " flows, got " + std::to_string(flows.size()));
  double total = 0.0;
  Index pairs = 0;
  for (Index t = 1; t < T; ++t) {
    const auto warped = warp_frame(video.frame(t - 1), flows[t - 1]);
    const double* cur = video.frame_data(t);
    double sum = 0.0;
    Index valid = 0;
    for (Index i = 0; i < P; ++i) {
      if (warped.validity.data()[i] == 0.0) continue;
      for (Index c = 0; c < C; ++c) sum += std::abs(cur[i * C + c] - warped.image.data()[i * C + c]);
      valid += C;
    }
    if (valid == 0) continue;
    total += sum / double(valid);
    ++pairs;
  }
  if (pairs == 0) throw DataError("warping_error: every warped pixel is invalid");
  return total / double(pairs);
}

double flicker_energy(const VideoVolume& video) {
  const Index T = video.frames();
  if (T < 2) throw InvalidArgument("flicker_energy needs at least 2 frames");
  Eigen::ArrayXd mean(T), t = Eigen::ArrayXd::LinSpaced(T, 0.0, double(T - 1));
  const Index fs = video.shape().frame_size();
  for (Index k = 0; k < T; ++k) mean[k] = video.data().segment(k * fs, fs).mean();
  const Eigen::ArrayXd tc = t - t.mean();
  const double slope = (tc * (mean - mean.mean())).sum() / tc.square().sum();
  const Eigen::ArrayXd residual = mean - mean.mean() - slope * tc;
  return residual.square().mean();
}

Frame temporal_profile(const VideoVolume& video, Index row) {
  if (row < 0 || row >= video.height())
    throw InvalidArgument("profile row " + std::to_string(row) + " outside [0, " + std::to_string(video.height()) + ")");
  const Index T = video.frames(), W = video.width(), C = video.channels();
  Frame out(1, T, W, C);
  for (Index t = 0; t < T; ++t)
    for (Index x = 0; x < W; ++x)
      for (Index c = 0; c < C; ++c) out(0, t, x, c) = video(t, row, x, c);
  return out;
}

double detail_difference(const VideoVolume& a, const VideoVolume& b) {
  if (a.shape() != b.shape()) throw ShapeError("detail_difference: shapes differ");
  return loss_detail(dwt_spatial(a), dwt_spatial(b));
}

namespace {

double sample_clamped(const VideoVolume& v, Index t, double sy, double sx, Index c) {
  const auto fp = bilinear_footprint(sx, sy, v.height(), v.width());
  return (1 - fp.fx) * (1 - fp.fy) * v(t, fp.y0, fp.x0, c) + fp.fx * (1 - fp.fy) * v(t, fp.y0, fp.x0 + 1, c) +
         (1 - fp.fx) * fp.fy * v(t, fp.y0 + 1, fp.x0, c) + fp.fx * fp.fy * v(t, fp.y0 + 1, fp.x0 + 1, c);
}

}  // namespace

VideoVolume resize_video(const VideoVolume& video, Index height, Index width) {
  const Index T = video.frames(), H = video.height(), W = video.width(), C = video.channels();
  if (height == H && width == W) return video;
  if (height < 2 || width < 2) throw InvalidArgument("resize_video: target must be at least 2x2");
  VideoVolume out(T, height, width, C);
  const double ry = double(H) / double(height), rx = double(W) / double(width);
  if (ry >= 1.0 && rx >= 1.0) {
    // Box filter over each target pixel's footprint, with fractional coverage.
    for (Index t = 0; t < T; ++t)
      for (Index y = 0; y < height; ++y)
        for (Index x = 0; x < width; ++x) {
          const double y0 = y * ry, y1 = (y + 1) * ry, x0 = x * rx, x1 = (x + 1) * rx;
          for (Index c = 0; c < C; ++c) {
            double sum = 0.0, area = 0.0;
            for (Index yy = static_cast<Index>(std::floor(y0)); yy < std::min<Index>(H, Index(std::ceil(y1))); ++yy) {
              const double wy = std::min(y1, double(yy + 1)) - std::max(y0, double(yy));
              for (Index xx = static_cast<Index>(std::floor(x0)); xx < std::min<Index>(W, Index(std::ceil(x1))); ++xx) {
                const double wx = std::min(x1, double(xx + 1)) - std::max(x0, double(xx));
                sum += wy * wx * video(t, yy, xx, c);
                area += wy * wx;
              }
            }
            out(t, y, x, c) = sum / area;
          }
        }
    return out;
  }
  for (Index t = 0; t < T; ++t)
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x)
        for (Index c = 0; c < C; ++c) out(t, y, x, c) = sample_clamped(video, t, (y + 0.5) * ry - 0.5, (x + 0.5) * rx - 0.5, c);
  return out;
}

FlowField resize_flow(const FlowField& flow, Index height, Index width) {
  if (height == flow.height() && width == flow.width()) return flow;
  VideoVolume v = resize_video(flow.vectors, height, width);
  const double sx = double(width) / double(flow.width()), sy = double(height) / double(flow.height());
  FlowField out(height, width);
  for (Index i = 0; i < height * width; ++i) {
    out.vectors.data()[2 * i] = v.data()[2 * i] * sx;
    out.vectors.data()[2 * i + 1] = v.data()[2 * i + 1] * sy;
  }
  out.from = flow.from;
  out.to = flow.to;
  update_validity(out);
  return out;
}

}  // namespace waterwave
