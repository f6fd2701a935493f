#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "waterwave/volume.hpp"
#include "waterwave/warp.hpp"

namespace waterwave {

/// Per-pixel displacement (dx, dy) in pixels from frame `to` onto frame
/// `from`'s grid: the backward flow f_{to -> from} samples frame `from` at
/// (x + dx, y + dy) to predict frame `to` at (x, y).
struct FlowField {
  Volume<double> vectors;   // 1 x H x W x 2
  Volume<double> validity;  // 1 x H x W x 1
  Index from = 0;
  Index to = 0;

  FlowField() = default;
  FlowField(Index height, Index width)
      : vectors(1, height, width, 2), validity(1, height, width, 1, 1.0) {}

  Index height() const { return vectors.height(); }
  Index width() const { return vectors.width(); }
  double dx(Index y, Index x) const { return vectors(0, y, x, 0); }
  double dy(Index y, Index x) const { return vectors(0, y, x, 1); }
};

/// Marks pixels whose displaced position leaves the frame.
void update_validity(FlowField& flow);

FlowField zero_flow(Index height, Index width, Index from = 0, Index to = 1);
FlowField uniform_flow(Index height, Index width, double dx, double dy);

/// f_ac(x) = f_bc(x) + f_ab sampled bilinearly at x + f_bc(x); validity ANDed.
FlowField compose_flows(const FlowField& f_ab, const FlowField& f_bc);

/// Bilinear warp of a 1 x H x W x C frame by a flow field.
WarpResult<double> warp_frame(const Frame& image, const FlowField& flow);

/// Mean endpoint error over pixels where `mask` (1 x H x W x 1) is nonzero,
/// or over all pixels when `mask` is empty.
double endpoint_error(const FlowField& estimate, const FlowField& truth, const Volume<double>* mask = nullptr);

struct HornSchunckParams {
  double lambda = 0.1;   // smoothness weight, in 8-bit intensity units squared
  int iterations = 100;  // Jacobi sweeps per pyramid level
  int levels = 3;
};

/// Coarse-to-fine Horn-Schunck estimate of the backward flow f_{2 -> 1}:
/// I1(x + dx, y + dy) ~ I2(x, y). Colour frames are reduced to luma
/// 0.299 R + 0.587 G + 0.114 B.
FlowField estimate_flow_hs(const Frame& i1, const Frame& i2, const HornSchunckParams& params = {});

/// Backward flows f_{t+1 -> t} for t = 0..T-2.
std::vector<FlowField> estimate_video_flows(const VideoVolume& video, const HornSchunckParams& params = {});

Frame to_gray(const Frame& frame);

/// Dark-channel transmission estimate under I = J t + A (1 - t).
struct TransmissionMap {
  Volume<double> t;  // 1 x H x W x 1, in [t_min, 1]
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
};

struct TransmissionParams {
  double omega = 0.95;
  int patch_radius = 3;
  double t_min = 0.1;
  double top_fraction = 0.001;
};

TransmissionMap estimate_transmission(const Frame& frame, const TransmissionParams& params = {});

/// Per-pixel guidance [T_t, warp(T_{t+1}, flow), box3(T_t), box3(warp(T_{t+1}))]
/// as a 1 x H x W x 4 volume.
Volume<double> transmission_guidance(const Volume<double>& t_now, const Volume<double>& t_next, const FlowField& base);

/// 3 x 3 mean with replicated borders, per channel.
Volume<double> box_mean3(const Volume<double>& image);

/// Middlebury .flo files ("PIEH", int32 width, int32 height, float32 (dx, dy) rows).
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

/// flow_%05d.flo holds f_{i+1 -> i}.
std::vector<FlowField> load_flow_dir(const std::filesystem::path& directory, Index expected, Index height, Index width);
void save_flow_dir(const std::vector<FlowField>& flows, const std::filesystem::path& directory);

}  // namespace waterwave
