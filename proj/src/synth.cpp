#include <cmath>
#include <random>

#include "waterwave/pipeline.hpp"

namespace waterwave {

void SynthSpec::validate() const {
  if (frames < 2) throw InvalidArgument("synthetic scene needs at least 2 frames");
  if (height < 16 || width < 16) throw InvalidArgument("synthetic scene needs frames of at least 16x16");
  if (discs < 0) throw InvalidArgument("disc count must be >= 0");
  if (!(motion >= 0) || !(flicker >= 0) || !(background_amplitude >= 0))
    throw InvalidArgument("motion, flicker and background amplitude must be >= 0");
}

namespace {

struct Disc {
  Eigen::Vector2d start;
  Eigen::Vector2d velocity;
  double radius = 0;
  Eigen::Vector3d color;
  Eigen::Vector2d dir_a, dir_b;
  double period_a = 0, period_b = 0;

  Eigen::Vector2d center(double t) const { return start + velocity * t; }
  double alpha(const Eigen::Vector2d& p, double t) const {
    return std::clamp(radius - (p - center(t)).norm() + 0.5, 0.0, 1.0);
  }
  double texture(const Eigen::Vector2d& p, double t) const {
    const Eigen::Vector2d l = p - center(t);
    return std::sin(2 * M_PI * l.dot(dir_a) / period_a) * std::cos(2 * M_PI * l.dot(dir_b) / period_b);
  }
};

}  // namespace

SynthScene synth_benchmark(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const Index T = spec.frames, H = spec.height, W = spec.width;
  const double scale = double(std::min(H, W)) / 64.0;

  const Eigen::Vector3d bg_color(0.30, 0.45, 0.50);
  const double drift = 0.3 * spec.motion;
  const double phase_x = 2 * M_PI * uni(rng), phase_y = 2 * M_PI * uni(rng);

  std::vector<Disc> discs;
  for (int k = 0; k < spec.discs; ++k) {
    Disc d;
    d.radius = (6.0 + 3.0 * uni(rng)) * scale;
    const double theta = 2 * M_PI * uni(rng);
    d.velocity = spec.motion * Eigen::Vector2d(std::cos(theta), std::sin(theta));
    const Eigen::Vector2d travel = d.velocity * double(T - 1);
    // Keep the whole trajectory inside the frame with a 2 px margin.
    for (int a = 0; a < 2; ++a) {
      const double extent = a == 0 ? double(W - 1) : double(H - 1);
      double lo = d.radius + 2.0 - std::min(0.0, travel[a]);
      double hi = extent - d.radius - 2.0 - std::max(0.0, travel[a]);
      if (hi < lo) hi = lo = 0.5 * extent - 0.5 * travel[a];
      d.start[a] = lo + (hi - lo) * uni(rng);
    }
    d.color = Eigen::Vector3d(0.25 + 0.35 * uni(rng), 0.25 + 0.35 * uni(rng), 0.25 + 0.35 * uni(rng));
    const double ang = M_PI * uni(rng);
    d.dir_a = Eigen::Vector2d(std::cos(ang), std::sin(ang));
    d.dir_b = Eigen::Vector2d(-std::sin(ang), std::cos(ang));
    d.period_a = (3.5 + 2.0 * uni(rng)) * scale;
    d.period_b = (5.0 + 3.0 * uni(rng)) * scale;
    discs.push_back(d);
  }

  SynthScene scene;
  scene.clean = VideoVolume(T, H, W, 3);
  scene.transmission = Volume<double>(1, H, W, 1);
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x) scene.transmission(0, y, x, 0) = 0.9 - 0.5 * double(y) / double(H - 1);

  for (Index t = 0; t < T; ++t)
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        const Eigen::Vector2d p{double(x), double(y)};
        const double wave = spec.background_amplitude *
                            (std::sin(2 * M_PI * (double(x) - drift * double(t)) / double(W) + phase_x) +
                             0.5 * std::sin(2 * M_PI * double(y) / double(H) + phase_y));
        Eigen::Vector3d c = bg_color + Eigen::Vector3d::Constant(wave);
        for (const Disc& d : discs) {
          const double a = d.alpha(p, double(t));
          if (a <= 0.0) continue;
          const Eigen::Vector3d tex = d.color + Eigen::Vector3d::Constant(0.2 * d.texture(p, double(t)));
          c = (1 - a) * c + a * tex;
        }
        for (int ch = 0; ch < 3; ++ch) scene.clean(t, y, x, ch) = std::clamp(c[ch], 0.0, 1.0);
      }

  // Ground-truth backward flow f_{t+1 -> t}: top-most disc covering the pixel, else the background drift.
  for (Index t = 0; t + 1 < T; ++t) {
    FlowField f(H, W);
    f.from = t;
    f.to = t + 1;
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        Eigen::Vector2d v(drift, 0.0);
        for (const Disc& d : discs)
          if (d.alpha(Eigen::Vector2d(double(x), double(y)), double(t + 1)) >= 0.5) v = d.velocity;
        f.vectors(0, y, x, 0) = -v.x();
        f.vectors(0, y, x, 1) = -v.y();
      }
    update_validity(f);
    scene.flows.push_back(std::move(f));
  }

  const Eigen::Vector3d light(0.3, 0.5, 0.7);
  scene.degraded = VideoVolume(scene.clean.shape());
  for (Index t = 0; t < T; ++t)
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        const double tr = scene.transmission(0, y, x, 0);
        for (int ch = 0; ch < 3; ++ch)
          scene.degraded(t, y, x, ch) = scene.clean(t, y, x, ch) * tr + light[ch] * (1 - tr);
      }

  // Idealized enhancement (exact inverse of the scattering model) followed by
  // independent per-frame gain, gamma and white-balance jitter.
  std::normal_distribution<double> gauss(0.0, 1.0);
  scene.flickered = VideoVolume(scene.clean.shape());
  for (Index t = 0; t < T; ++t) {
    const double gain = 1.0 + spec.flicker * gauss(rng);
    const double gamma = std::exp(0.5 * spec.flicker * gauss(rng));
    Eigen::Vector3d wb;
    for (int ch = 0; ch < 3; ++ch) wb[ch] = 1.0 + (spec.flicker / 3.0) * gauss(rng);
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        const double tr = scene.transmission(0, y, x, 0);
        for (int ch = 0; ch < 3; ++ch) {
          const double restored = (scene.degraded(t, y, x, ch) - light[ch] * (1 - tr)) / tr;
          const double v = spec.flicker > 0 ? gain * wb[ch] * std::pow(std::max(restored, 0.0), gamma) : restored;
          scene.flickered(t, y, x, ch) = std::clamp(v, 0.0, 1.0);
        }
      }
  }
  return scene;
}

}  // namespace waterwave
