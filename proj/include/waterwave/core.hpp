#pragma once

#include <filesystem>
#include <limits>

#include <Eigen/Core>

#include "waterwave/volume.hpp"

namespace waterwave {

/// Throws ShapeError / InvalidArgument unless `video` is a valid frame
/// sequence: T >= 1, H,W >= 2, C in {1,3}, every sample finite in [0,1].
void validate_video(const VideoVolume& video);

/// Half-open range of absolute frame indices inside a video of `total` frames.
struct FrameWindow {
  Index begin = 0;
  Index end = 0;
  Index total = 0;

  Index length() const { return end - begin; }
};

/// Normalized (x, y, t) coordinates for every voxel of a window.
///
/// Coordinates are affine in the voxel index: x / (W-1), y / (H-1), and t over
/// the full video length, t / (total-1), so a window's embedding agrees with
/// the same frames seen through any other window. Singleton axes map to 0.
struct CoordGrid {
  FrameWindow window;
  Index height = 0;
  Index width = 0;
  /// 3 x (frames*H*W), voxels ordered (t, y, x).
  Eigen::Matrix<double, 3, Eigen::Dynamic> xyz;

  Index voxels() const { return xyz.cols(); }
};

CoordGrid normalized_coords(const FrameWindow& window, Index height, Index width);

/// Normalized coordinate of integer index i on an axis of n samples.
inline double axis_coord(Index i, Index n) {
  return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
}

/// 10 log10(1 / MSE); +infinity when the volumes are identical.
double psnr(const VideoVolume& a, const VideoVolume& b);

/// Reads frame_%05d.png / frame_%05d.ppm numbered consecutively from 0.
VideoVolume load_frames(const std::filesystem::path& directory);

/// Writes frame_%05d.png, 8-bit, round(v*255) clamped to [0,255].
void save_frames(const VideoVolume& video, const std::filesystem::path& directory);

/// Single 8-bit image I/O (PNG or binary PPM chosen by extension).
Frame read_image(const std::filesystem::path& path);
void write_png(const Frame& image, const std::filesystem::path& path);

std::uint8_t quantize_u8(double v);

}  // namespace waterwave
