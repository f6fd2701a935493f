#pragma once

#include <cmath>

#include "waterwave/volume.hpp"

namespace waterwave {

/// Bilinear footprint of a sample position on an H x W grid.
///
/// The sample is valid when it lies in [0, W-1] x [0, H-1]; invalid
/// positions are clamped onto the frame so the sampled value stays defined.
/// The cell origin is capped at W-2 / H-2, so a sample exactly on the last
/// column interpolates the last cell with weight 1 on its right corners.
template <typename Scalar>
struct Footprint {
  Index x0 = 0;
  Index y0 = 0;
  Scalar fx = 0;
  Scalar fy = 0;
  bool inside_x = false;
  bool inside_y = false;
  bool valid() const { return inside_x && inside_y; }
};

template <typename Scalar>
Footprint<Scalar> bilinear_footprint(Scalar sx, Scalar sy, Index height, Index width) {
  Footprint<Scalar> fp;
  const Scalar max_x = Scalar(width - 1), max_y = Scalar(height - 1);
  fp.inside_x = sx >= Scalar(0) && sx <= max_x;
  fp.inside_y = sy >= Scalar(0) && sy <= max_y;
  if (!std::isfinite(sx)) sx = Scalar(0);
  if (!std::isfinite(sy)) sy = Scalar(0);
  sx = std::min(std::max(sx, Scalar(0)), max_x);
  sy = std::min(std::max(sy, Scalar(0)), max_y);
  fp.x0 = std::min<Index>(static_cast<Index>(std::floor(sx)), width - 2);
  fp.y0 = std::min<Index>(static_cast<Index>(std::floor(sy)), height - 2);
  fp.fx = sx - Scalar(fp.x0);
  fp.fy = sy - Scalar(fp.y0);
  return fp;
}

template <typename Scalar>
struct WarpResult {
  Volume<Scalar> image;     // 1 x H x W x C
  Volume<Scalar> validity;  // 1 x H x W x 1, entries 0 or 1
};

/// output(x, y) = image sampled bilinearly at (x + dx, y + dy).
///
/// `image` is 1 x H x W x C and `flow` is 1 x H x W x 2 holding (dx, dy) in
/// pixels. Warping frame t with the backward flow f_{t+1 -> t} resamples it
/// onto frame t+1's grid.
template <typename Scalar>
WarpResult<Scalar> warp_image(const Volume<Scalar>& image, const Volume<Scalar>& flow) {
  const Index H = image.height(), W = image.width(), C = image.channels();
  if (image.frames() != 1 || flow.frames() != 1 || flow.height() != H || flow.width() != W || flow.channels() != 2)
    throw ShapeError("warp: image " + image.shape().str() + " and flow " + flow.shape().str() + " disagree");
  if (H < 2 || W < 2) throw ShapeError("warp needs frames of at least 2x2");
  WarpResult<Scalar> out{Volume<Scalar>(image.shape()), Volume<Scalar>(1, H, W, 1)};
  for (Index y = 0; y < H; ++y) {
    for (Index x = 0; x < W; ++x) {
      const auto fp = bilinear_footprint(Scalar(x) + flow(0, y, x, 0), Scalar(y) + flow(0, y, x, 1), H, W);
      out.validity(0, y, x, 0) = fp.valid() ? Scalar(1) : Scalar(0);
      const Scalar w00 = (1 - fp.fx) * (1 - fp.fy), w01 = fp.fx * (1 - fp.fy);
      const Scalar w10 = (1 - fp.fx) * fp.fy, w11 = fp.fx * fp.fy;
      for (Index c = 0; c < C; ++c) {
        out.image(0, y, x, c) = w00 * image(0, fp.y0, fp.x0, c) + w01 * image(0, fp.y0, fp.x0 + 1, c) +
                                w10 * image(0, fp.y0 + 1, fp.x0, c) + w11 * image(0, fp.y0 + 1, fp.x0 + 1, c);
      }
    }
  }
  return out;
}

}  // namespace waterwave
