#include "waterwave/prior.hpp"

#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

namespace waterwave {

namespace {

using Complex = std::complex<double>;
using Spectrum = Eigen::Array<Complex, Eigen::Dynamic, Eigen::Dynamic>;

/// Separable 2-D DFT of one channel (rows = y).
Spectrum fft2(const Eigen::ArrayXXd& plane) {
  Eigen::FFT<double> fft;
  const Index H = plane.rows(), W = plane.cols();
  Spectrum rows(H, W), out(H, W);
  Eigen::VectorXd in_row(W);
  Eigen::VectorXcd tmp;
  for (Index y = 0; y < H; ++y) {
    in_row = plane.row(y).transpose().matrix();
    fft.fwd(tmp, in_row);
    rows.row(y) = tmp.transpose().array();
  }
  Eigen::VectorXcd col(H);
  for (Index x = 0; x < W; ++x) {
    col = rows.col(x).matrix();
    fft.fwd(tmp, col);
    out.col(x) = tmp.array();
  }
  return out;
}

Eigen::ArrayXXd ifft2_real(const Spectrum& spec, double* max_imag) {
  Eigen::FFT<double> fft;
  const Index H = spec.rows(), W = spec.cols();
  Spectrum cols(H, W);
  Eigen::VectorXcd in, tmp;
  for (Index x = 0; x < W; ++x) {
    in = spec.col(x).matrix();
    fft.inv(tmp, in);
    cols.col(x) = tmp.array();
  }
  Eigen::ArrayXXd out(H, W);
  double imag = 0.0;
  for (Index y = 0; y < H; ++y) {
    in = cols.row(y).transpose().matrix();
    fft.inv(tmp, in);
    out.row(y) = tmp.real().transpose().array();
    imag = std::max(imag, tmp.imag().cwiseAbs().maxCoeff());
  }
  if (max_imag) *max_imag = imag;
  return out;
}

Eigen::ArrayXXd channel(const Frame& f, Index c) {
  Eigen::ArrayXXd p(f.height(), f.width());
  for (Index y = 0; y < f.height(); ++y)
    for (Index x = 0; x < f.width(); ++x) p(y, x) = f(0, y, x, c);
  return p;
}

void check_pair(const Frame& a, const Frame& b) {
  if (a.shape() != b.shape() || a.frames() != 1)
    throw ShapeError("prior: frames " + a.shape().str() + " and " + b.shape().str() + " must match, one frame each");
}

double axis_term(Index k, Index n, FrequencyConvention convention) {
  if (convention == FrequencyConvention::Discrete) {
    const double s = std::sin(M_PI * double(k) / double(n));
    return 4.0 * s * s;
  }
  const Index folded = std::min(k, n - k);
  const double v = 2.0 * M_PI * double(folded) / double(n);
  return v * v;
}

}  // namespace

Eigen::ArrayXXd frequency_squared(Index height, Index width, FrequencyConvention convention) {
  Eigen::ArrayXXd v2(height, width);
  for (Index ky = 0; ky < height; ++ky)
    for (Index kx = 0; kx < width; ++kx) v2(ky, kx) = axis_term(kx, width, convention) + axis_term(ky, height, convention);
  return v2;
}

Frame consistency_filter_step(const Frame& v_t, const Frame& warped_prev, const FilterParams& params) {
  check_pair(v_t, warped_prev);
  params.validate();
  const Index H = v_t.height(), W = v_t.width();
  const Eigen::ArrayXXd v2 = frequency_squared(H, W, params.convention);
  const Eigen::ArrayXXd keep = v2 / (v2 + params.w);
  Frame out(v_t.shape());
  for (Index c = 0; c < v_t.channels(); ++c) {
    const Spectrum blended = keep * fft2(channel(v_t, c)) + (1.0 - keep) * fft2(channel(warped_prev, c));
    double imag = 0.0;
    const Eigen::ArrayXXd plane = ifft2_real(blended, &imag);
    if (!(imag < 1e-9 * std::max(1.0, plane.abs().maxCoeff())))
      throw NumericalError("consistency_filter_step: imaginary residue " + std::to_string(imag));
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) out(0, y, x, c) = plane(y, x);
  }
  return out;
}

JacobiResult screened_poisson_solve(const Frame& v_t, const Frame& warped_prev, const FilterParams& params,
                                    int max_iters, double tol) {
  check_pair(v_t, warped_prev);
  params.validate();
  const Index H = v_t.height(), W = v_t.width();
  auto neighbours = [H, W](const Eigen::ArrayXXd& p, Index y, Index x) {
    return p((y + H - 1) % H, x) + p((y + 1) % H, x) + p(y, (x + W - 1) % W) + p(y, (x + 1) % W);
  };
  JacobiResult result{Frame(v_t.shape()), 0, 0.0};
  for (Index c = 0; c < v_t.channels(); ++c) {
    const Eigen::ArrayXXd v = channel(v_t, c), prev = channel(warped_prev, c);
    Eigen::ArrayXXd rhs(H, W);
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) rhs(y, x) = 4.0 * v(y, x) - neighbours(v, y, x) + params.w * prev(y, x);
    Eigen::ArrayXXd f = v, next(H, W);
    int it = 0;
    double update = 0.0;
    for (;;) {
      if (it >= max_iters)
        throw ConvergenceError("screened_poisson_solve: no convergence after " + std::to_string(max_iters) +
                                   " iterations, last update " + std::to_string(update),
                               update);
      for (Index y = 0; y < H; ++y)
        for (Index x = 0; x < W; ++x) next(y, x) = (rhs(y, x) + neighbours(f, y, x)) / (4.0 + params.w);
      update = (next - f).abs().maxCoeff();
      f.swap(next);
      ++it;
      if (update < tol) break;
    }
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) result.solution(0, y, x, c) = f(y, x);
    result.iterations = std::max(result.iterations, it);
    result.last_update = std::max(result.last_update, update);
  }
  return result;
}

VideoVolume filter_video(const VideoVolume& video, const std::vector<FlowField>& flows, const FilterParams& params) {
  const Index T = video.frames();
  if (static_cast<Index>(flows.size()) < T - 1)
    throw InvalidArgument("filter_video: need " + std::to_string(T - 1) + " flows, got " + std::to_string(flows.size()));
  VideoVolume out(video.shape());
  out.data().segment(0, video.shape().frame_size()) = video.frame(0).data();
  Frame prev = video.frame(0);
  for (Index t = 1; t < T; ++t) {
    const Frame current = video.frame(t);
    auto warped = warp_frame(prev, flows[t - 1]);
    const Index C = video.channels();
    for (Index i = 0; i < video.shape().pixels(); ++i)
      if (warped.validity.data()[i] == 0.0)
        for (Index c = 0; c < C; ++c) warped.image.data()[i * C + c] = current.data()[i * C + c];
    prev = consistency_filter_step(current, warped.image, params);
    out.data().segment(t * video.shape().frame_size(), prev.size()) = prev.data();
  }
  return out;
}

}  // namespace waterwave
