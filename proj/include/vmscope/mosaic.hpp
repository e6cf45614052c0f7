#pragma once

#include <filesystem>

#include "vmscope/image.hpp"
#include "vmscope/lesion_mask.hpp"
#include "vmscope/registration.hpp"

namespace vmscope {

/// Growable composite in global coordinates. Global (0,0) is the first
/// frame's top-left; storage pixel (0,0) sits at global `origin()`.
class MosaicCanvas {
 public:
  static constexpr int kDefaultMaxSide = 16384;

  explicit MosaicCanvas(int channels = 3, int max_width = kDefaultMaxSide, int max_height = kDefaultMaxSide);

  int channels() const { return channels_; }
  bool empty() const { return pixels_.empty(); }

  /// Global rect covered by storage (including never-written slack).
  Rect storage_bounds() const;
  /// Bounding rect of everything ever written.
  Rect written_bounds() const { return written_; }
  long long valid_count() const;

  /// True when painting `rect` would keep storage within the size cap.
  bool can_cover(const Rect& rect) const;

  /// Overwrites `rect` (global coordinates) with `image` and marks it valid.
  void paint(const Rect& rect, const Raster& image);

  bool is_valid(int gx, int gy) const;
  std::uint8_t at(int gx, int gy, int c = 0) const;

  const Raster& storage() const { return pixels_; }
  const Plane<std::uint8_t>& validity() const { return valid_; }
  int origin_x() const { return origin_x_; }
  int origin_y() const { return origin_y_; }

  friend bool operator==(const MosaicCanvas& a, const MosaicCanvas& b);

 private:
  void ensure_covers(const Rect& rect);
  Rect grown_bounds(const Rect& rect) const;

  int channels_;
  int max_width_;
  int max_height_;
  int origin_x_ = 0;
  int origin_y_ = 0;
  Raster pixels_;
  Plane<std::uint8_t> valid_;
  Rect written_;
};

struct Placement {
  Rect rect;
  int frame_index = 0;

  friend bool operator==(const Placement&, const Placement&) = default;
};

/// First frame of a session: global (0,0).
Placement place_first_frame(MosaicCanvas& canvas, const Raster& frame);

/// Places `frame` at prev_placement shifted by `relative`; current frame wins
/// over existing content.
Placement place_frame(MosaicCanvas& canvas, const Raster& frame, Displacement relative, const Placement& prev_placement);

/// Overlap ratio |a n b| / |a u b|; two empty rects score 1.
double placement_iou(const Rect& a, const Rect& b);

struct MosaicWindow {
  Raster pixels;
  Plane<std::uint8_t> valid;  // 1 where a frame has written the pixel

  long long valid_count() const { return (valid != 0).count(); }
};

/// Region-sized read; pixels outside the canvas or never written are 0/invalid.
MosaicWindow mosaic_window(const MosaicCanvas& canvas, const Rect& region);

/// Writes the mask at the placement rect with the same overwrite policy.
void compose_lesion_map(MosaicCanvas& lesion_canvas, const LesionMask& mask, const Placement& placement);

/// Written region as PNG plus a 0/255 validity sidecar.
void export_canvas(const MosaicCanvas& canvas, const std::filesystem::path& image_path,
                   const std::filesystem::path& validity_path);

/// Written region of a canvas (invalid pixels 0); empty canvas gives 1x1.
Raster canvas_snapshot(const MosaicCanvas& canvas);

}  // namespace vmscope
