#pragma once

#include <cstdint>

#include "vmscope/image.hpp"

namespace vmscope {

enum Label : std::uint8_t {
  kBackground = 0,
  kHydrops = 1,
  // Reserved for future multi-class models.
  kHyperplasia = 2,
  kVillus = 3,
};

/// Per-pixel lesion labels aligned to a frame or canvas.
class LesionMask {
 public:
  LesionMask() = default;
  LesionMask(int width, int height, std::uint8_t fill = kBackground) : labels_(Plane<std::uint8_t>::Constant(height, width, fill)) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "mask dims must be >= 1");
  }
  explicit LesionMask(Plane<std::uint8_t> labels) : labels_(std::move(labels)) {}

  int width() const { return static_cast<int>(labels_.cols()); }
  int height() const { return static_cast<int>(labels_.rows()); }
  Rect rect() const { return {0, 0, width(), height()}; }

  std::uint8_t& operator()(int x, int y) { return labels_(y, x); }
  std::uint8_t operator()(int x, int y) const { return labels_(y, x); }

  bool is_lesion(int x, int y) const { return labels_(y, x) == kHydrops; }
  long long lesion_count() const { return (labels_ == kHydrops).count(); }

  Plane<std::uint8_t>& labels() { return labels_; }
  const Plane<std::uint8_t>& labels() const { return labels_; }

  friend bool operator==(const LesionMask& a, const LesionMask& b) {
    return a.labels_.rows() == b.labels_.rows() && a.labels_.cols() == b.labels_.cols() &&
           (a.labels_.size() == 0 || (a.labels_ == b.labels_).all());
  }

 private:
  Plane<std::uint8_t> labels_;
};

/// Crop of a mask; region must lie inside.
LesionMask crop_mask(const LesionMask& mask, const Rect& region);

/// Nearest-neighbour rescale (labels are never interpolated).
LesionMask resample_nearest(const LesionMask& mask, int target_width, int target_height);

/// 0/255 raster, handy for PNG export and thresholded model outputs.
Raster mask_to_raster(const LesionMask& mask, std::uint8_t lesion_value = 255);

/// Any non-zero sample becomes a hydrops label.
LesionMask mask_from_binary(const Raster& image);

/// Palette PNG semantics: sample values are labels directly (0..3).
LesionMask mask_from_labels(const Raster& image);

}  // namespace vmscope
