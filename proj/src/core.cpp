#include "waterwave/core.hpp"

#include <algorithm>
#include <cmath>

namespace waterwave {

void validate_video(const VideoVolume& video) {
  const Shape4& s = video.shape();
  if (s.t < 1) throw ShapeError("video must have at least one frame");
  if (s.h < 2 || s.w < 2) throw ShapeError("frames must be at least 2x2, got " + s.str());
  if (s.c != 1 && s.c != 3) throw ShapeError("video must have 1 or 3 channels, got " + s.str());
  const auto& d = video.data();
  if (!d.isFinite().all()) throw DataError("video contains non-finite samples");
  if ((d < 0.0).any() || (d > 1.0).any()) throw DataError("video samples must lie in [0,1]");
}

CoordGrid normalized_coords(const FrameWindow& window, Index height, Index width) {
  if (window.length() < 1) throw InvalidArgument("window must contain at least one frame");
  if (window.begin < 0 || window.end > window.total)
    throw InvalidArgument("window [" + std::to_string(window.begin) + "," + std::to_string(window.end) +
                          ") outside video of " + std::to_string(window.total) + " frames");
  if (height < 1 || width < 1) throw InvalidArgument("empty frame extent");

  CoordGrid grid;
  grid.window = window;
  grid.height = height;
  grid.width = width;
  grid.xyz.resize(3, window.length() * height * width);
  Index col = 0;
  for (Index t = window.begin; t < window.end; ++t) {
    const double tn = axis_coord(t, window.total);
    for (Index y = 0; y < height; ++y) {
      const double yn = axis_coord(y, height);
      for (Index x = 0; x < width; ++x, ++col) {
        grid.xyz(0, col) = axis_coord(x, width);
        grid.xyz(1, col) = yn;
        grid.xyz(2, col) = tn;
      }
    }
  }
  return grid;
}

double psnr(const VideoVolume& a, const VideoVolume& b) {
  if (a.shape() != b.shape()) throw ShapeError("psnr shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  if (a.empty()) throw ShapeError("psnr of empty volumes");
  const double mse = (a.data() - b.data()).square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::uint8_t quantize_u8(double v) {
  const double q = std::round(v * 255.0);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

}  // namespace waterwave
