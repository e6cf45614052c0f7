#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "vmscope/error.hpp"

namespace vmscope {

/// Row-major 2-D array; the storage type behind every image plane.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PlaneF = Plane<float>;
using PlaneD = Plane<double>;

/// Axis-aligned pixel rectangle. x/y may be negative (canvas coordinates).
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  long long area() const { return static_cast<long long>(width) * height; }
  bool empty() const { return width <= 0 || height <= 0; }
  int right() const { return x + width; }
  int bottom() const { return y + height; }

  bool contains(const Rect& other) const {
    return other.x >= x && other.y >= y && other.right() <= right() && other.bottom() <= bottom();
  }

  Rect translated(int dx, int dy) const { return {x + dx, y + dy, width, height}; }
  Rect inflated(int margin) const { return {x - margin, y - margin, width + 2 * margin, height + 2 * margin}; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Intersection; empty rects come back with zero width/height.
inline Rect intersect(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
  return {x0, y0, x1 - x0, y1 - y0};
}

/// Smallest rect covering both (empty operands are ignored).
inline Rect bounding_union(const Rect& a, const Rect& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  return {x0, y0, std::max(a.right(), b.right()) - x0, std::max(a.bottom(), b.bottom()) - y0};
}

/// Interleaved multi-channel image. Samples live in a height x (width*channels)
/// row-major plane so a 1-channel image can be handed to Eigen expressions
/// directly through samples().
template <typename Scalar>
class Image {
 public:
  using scalar_type = Scalar;

  Image() = default;

  Image(int width, int height, int channels, Scalar fill = Scalar{0}) : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image dims must be >= 1");
    if (channels < 1) throw Error(ErrorCode::UnsupportedChannels, "channel count must be >= 1");
    samples_.setConstant(height, static_cast<Eigen::Index>(width) * channels, fill);
  }

  /// Wraps a single-channel plane (rows = height).
  explicit Image(Plane<Scalar> plane)
      : width_(static_cast<int>(plane.cols())), height_(static_cast<int>(plane.rows())), channels_(1), samples_(std::move(plane)) {
    if (width_ < 1 || height_ < 1) throw Error(ErrorCode::InvalidArgument, "image dims must be >= 1");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return width_ == 0; }
  Rect rect() const { return {0, 0, width_, height_}; }
  long long pixel_count() const { return static_cast<long long>(width_) * height_; }

  Scalar& operator()(int x, int y, int c = 0) { return samples_(y, static_cast<Eigen::Index>(x) * channels_ + c); }
  const Scalar& operator()(int x, int y, int c = 0) const { return samples_(y, static_cast<Eigen::Index>(x) * channels_ + c); }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Plane<Scalar>& samples() { return samples_; }
  const Plane<Scalar>& samples() const { return samples_; }

  Scalar* data() { return samples_.data(); }
  const Scalar* data() const { return samples_.data(); }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
           (a.samples_.size() == 0 || (a.samples_ == b.samples_).all());
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  Plane<Scalar> samples_;
};

/// The 8-bit container used at every module boundary.
using Raster = Image<std::uint8_t>;

/// BT.601 luma with round-half-to-even. 1-channel input is returned unchanged.
Raster to_luminance(const Raster& image);

/// Luminance as a floating-point plane (rows = height).
PlaneD luminance_plane(const Raster& image);

/// Bilinear resampling with pixel-centre alignment and edge clamping.
Raster resample(const Raster& image, int target_width, int target_height);

Raster crop_region(const Raster& image, const Rect& region);

/// Rounds and clamps a plane into a 1-channel raster.
Raster to_raster(const PlaneD& plane);

/// Copies `channels` identical planes for 1ch input, passes 3ch through.
Raster to_rgb(const Raster& image);

}  // namespace vmscope
