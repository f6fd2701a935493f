#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cstdint>
#include <string>

#include "waterwave/error.hpp"

namespace waterwave {

using Index = Eigen::Index;

/// Extent of a dense T x H x W x C array.
struct Shape4 {
  Index t = 0;
  Index h = 0;
  Index w = 0;
  Index c = 0;

  Index size() const { return t * h * w * c; }
  Index frame_size() const { return h * w * c; }
  Index pixels() const { return h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return std::to_string(t) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" +
           std::to_string(c);
  }
};

/// Dense 4-D array, row-major in (t, y, x, c): channels are innermost.
///
/// The same layout doubles as a batch of feature vectors: a Volume of shape
/// (1, 1, n, f) is an f x n column-major matrix, which is how network
/// activations are stored.
template <typename Scalar_>
class Volume {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Volume() = default;
  Volume(Index t, Index h, Index w, Index c, Scalar fill = Scalar(0))
      : Volume(Shape4{t, h, w, c}, fill) {}
  explicit Volume(const Shape4& shape, Scalar fill = Scalar(0))
      : shape_(shape), data_(Array::Constant(shape.size(), fill)) {}
  Volume(const Shape4& shape, Array data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) throw ShapeError("volume data does not match shape " + shape_.str());
  }

  const Shape4& shape() const { return shape_; }
  Index frames() const { return shape_.t; }
  Index height() const { return shape_.h; }
  Index width() const { return shape_.w; }
  Index channels() const { return shape_.c; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Index index(Index t, Index y, Index x, Index c) const {
    return ((t * shape_.h + y) * shape_.w + x) * shape_.c + c;
  }
  Scalar& operator()(Index t, Index y, Index x, Index c) { return data_[index(t, y, x, c)]; }
  Scalar operator()(Index t, Index y, Index x, Index c) const { return data_[index(t, y, x, c)]; }

  Array& data() { return data_; }
  const Array& data() const { return data_; }

  Scalar* frame_data(Index t) { return data_.data() + t * shape_.frame_size(); }
  const Scalar* frame_data(Index t) const { return data_.data() + t * shape_.frame_size(); }

  /// Copy of frames [begin, end).
  Volume frames_range(Index begin, Index end) const {
    assert(begin >= 0 && end <= shape_.t && begin < end);
    Shape4 s = shape_;
    s.t = end - begin;
    return Volume(s, data_.segment(begin * shape_.frame_size(), s.size()));
  }
  Volume frame(Index t) const { return frames_range(t, t + 1); }

  /// Channels-by-voxels view.
  Eigen::Map<Matrix> as_matrix() { return {data_.data(), shape_.c, shape_.t * shape_.h * shape_.w}; }
  Eigen::Map<const Matrix> as_matrix() const {
    return {data_.data(), shape_.c, shape_.t * shape_.h * shape_.w};
  }

  template <typename Other>
  Volume<Other> cast() const {
    return Volume<Other>(shape_, data_.template cast<Other>());
  }

  Volume reshaped(const Shape4& s) const {
    if (s.size() != shape_.size()) throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
    return Volume(s, data_);
  }

 private:
  Shape4 shape_;
  Array data_;
};

using VideoVolume = Volume<double>;
using Frame = Volume<double>;

}  // namespace waterwave
