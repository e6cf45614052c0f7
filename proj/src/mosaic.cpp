#include "vmscope/mosaic.hpp"

#include <string>

#include "vmscope/png_io.hpp"

namespace vmscope {

MosaicCanvas::MosaicCanvas(int channels, int max_width, int max_height)
    : channels_(channels), max_width_(max_width), max_height_(max_height) {
  if (channels < 1) throw Error(ErrorCode::UnsupportedChannels, "canvas needs at least one channel");
  if (max_width < 1 || max_height < 1) throw Error(ErrorCode::InvalidArgument, "canvas cap must be positive");
}

Rect MosaicCanvas::storage_bounds() const {
  if (pixels_.empty()) return {0, 0, 0, 0};
  return {origin_x_, origin_y_, pixels_.width(), pixels_.height()};
}

long long MosaicCanvas::valid_count() const { return valid_.size() == 0 ? 0 : (valid_ != 0).count(); }

namespace {

// Doubles one axis (capped) when the target sticks out of [lo, lo+len).
// Slack goes to the side(s) that needed growth.
bool grow_axis(int lo, int len, int need_lo, int need_hi, int cap, int& out_lo, int& out_len) {
  const int union_lo = std::min(lo, need_lo);
  const int union_hi = std::max(lo + len, need_hi);
  const int needed = union_hi - union_lo;
  if (needed > cap) return false;
  if (union_lo == lo && union_hi == lo + len) {
    out_lo = lo;
    out_len = len;
    return true;
  }
  const int target = std::max(needed, std::min(2 * len, cap));
  const int slack = target - needed;
  const bool grow_low = union_lo < lo;
  const bool grow_high = union_hi > lo + len;
  int low_slack = 0;
  if (grow_low && grow_high) {
    low_slack = slack / 2;
  } else if (grow_low) {
    low_slack = slack;
  }
  out_lo = union_lo - low_slack;
  out_len = target;
  return true;
}

}  // namespace

Rect MosaicCanvas::grown_bounds(const Rect& rect) const {
  if (pixels_.empty()) {
    if (rect.width > max_width_ || rect.height > max_height_) {
      throw Error(ErrorCode::CanvasLimitExceeded, "frame larger than canvas cap");
    }
    return rect;
  }
  Rect out;
  if (!grow_axis(origin_x_, pixels_.width(), rect.x, rect.right(), max_width_, out.x, out.width) ||
      !grow_axis(origin_y_, pixels_.height(), rect.y, rect.bottom(), max_height_, out.y, out.height)) {
    throw Error(ErrorCode::CanvasLimitExceeded,
                "placement would grow canvas past " + std::to_string(max_width_) + "x" + std::to_string(max_height_));
  }
  return out;
}

bool MosaicCanvas::can_cover(const Rect& rect) const {
  try {
    (void)grown_bounds(rect);
    return true;
  } catch (const Error&) {
    return false;
  }
}

void MosaicCanvas::ensure_covers(const Rect& rect) {
  const Rect target = grown_bounds(rect);
  if (target == storage_bounds()) return;

  Raster pixels(target.width, target.height, channels_, 0);
  Plane<std::uint8_t> valid = Plane<std::uint8_t>::Zero(target.height, target.width);
  if (!pixels_.empty()) {
    const int ox = origin_x_ - target.x;
    const int oy = origin_y_ - target.y;
    pixels.samples().block(oy, static_cast<Eigen::Index>(ox) * channels_, pixels_.height(),
                           static_cast<Eigen::Index>(pixels_.width()) * channels_) = pixels_.samples();
    valid.block(oy, ox, valid_.rows(), valid_.cols()) = valid_;
  }
  pixels_ = std::move(pixels);
  valid_ = std::move(valid);
  origin_x_ = target.x;
  origin_y_ = target.y;
}

void MosaicCanvas::paint(const Rect& rect, const Raster& image) {
  if (image.width() != rect.width || image.height() != rect.height) {
    throw Error(ErrorCode::DimensionMismatch, "painted image dims differ from its rect");
  }
  if (image.channels() != channels_) throw Error(ErrorCode::UnsupportedChannels, "channel count differs from canvas");
  ensure_covers(rect);
  const int sx = rect.x - origin_x_;
  const int sy = rect.y - origin_y_;
  pixels_.samples().block(sy, static_cast<Eigen::Index>(sx) * channels_, rect.height,
                          static_cast<Eigen::Index>(rect.width) * channels_) = image.samples();
  valid_.block(sy, sx, rect.height, rect.width).setConstant(1);
  written_ = bounding_union(written_, rect);
}

bool MosaicCanvas::is_valid(int gx, int gy) const {
  const int sx = gx - origin_x_;
  const int sy = gy - origin_y_;
  if (pixels_.empty() || !pixels_.in_bounds(sx, sy)) return false;
  return valid_(sy, sx) != 0;
}

std::uint8_t MosaicCanvas::at(int gx, int gy, int c) const {
  if (!is_valid(gx, gy)) return 0;
  return pixels_(gx - origin_x_, gy - origin_y_, c);
}

bool operator==(const MosaicCanvas& a, const MosaicCanvas& b) {
  return a.channels_ == b.channels_ && a.origin_x_ == b.origin_x_ && a.origin_y_ == b.origin_y_ && a.pixels_ == b.pixels_ &&
         a.written_ == b.written_ && (a.valid_.size() == 0 ? b.valid_.size() == 0 : (a.valid_ == b.valid_).all());
}

Placement place_first_frame(MosaicCanvas& canvas, const Raster& frame) {
  Placement p{{0, 0, frame.width(), frame.height()}, 0};
  canvas.paint(p.rect, frame);
  return p;
}

Placement place_frame(MosaicCanvas& canvas, const Raster& frame, Displacement relative, const Placement& prev_placement) {
  Placement p{{prev_placement.rect.x + relative.dx, prev_placement.rect.y + relative.dy, frame.width(), frame.height()},
              prev_placement.frame_index + 1};
  canvas.paint(p.rect, frame);
  return p;
}

double placement_iou(const Rect& a, const Rect& b) {
  if (a.width < 0 || a.height < 0 || b.width < 0 || b.height < 0) {
    throw Error(ErrorCode::InvalidArgument, "negative rect dims");
  }
  const long long inter = intersect(a, b).area();
  const long long uni = a.area() + b.area() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MosaicWindow mosaic_window(const MosaicCanvas& canvas, const Rect& region) {
  if (region.empty()) throw Error(ErrorCode::InvalidArgument, "empty window");
  MosaicWindow win{Raster(region.width, region.height, canvas.channels(), 0),
                   Plane<std::uint8_t>::Zero(region.height, region.width)};
  const Rect overlap = intersect(region, canvas.storage_bounds());
  if (overlap.empty()) return win;

  const int ch = canvas.channels();
  const int sx = overlap.x - canvas.origin_x();
  const int sy = overlap.y - canvas.origin_y();
  const int wx = overlap.x - region.x;
  const int wy = overlap.y - region.y;
  const auto valid = canvas.validity().block(sy, sx, overlap.height, overlap.width);
  win.valid.block(wy, wx, overlap.height, overlap.width) = valid;
  const auto src = canvas.storage().samples().block(sy, static_cast<Eigen::Index>(sx) * ch, overlap.height,
                                                    static_cast<Eigen::Index>(overlap.width) * ch);
  for (int y = 0; y < overlap.height; ++y) {
    for (int x = 0; x < overlap.width; ++x) {
      if (valid(y, x) == 0) continue;
      for (int c = 0; c < ch; ++c) win.pixels(wx + x, wy + y, c) = src(y, static_cast<Eigen::Index>(x) * ch + c);
    }
  }
  return win;
}

void compose_lesion_map(MosaicCanvas& lesion_canvas, const LesionMask& mask, const Placement& placement) {
  if (mask.width() != placement.rect.width || mask.height() != placement.rect.height) {
    throw Error(ErrorCode::DimensionMismatch, "mask dims differ from placement");
  }
  lesion_canvas.paint(placement.rect, Raster(Plane<std::uint8_t>(mask.labels())));
}

Raster canvas_snapshot(const MosaicCanvas& canvas) {
  const Rect bounds = canvas.written_bounds();
  if (bounds.empty()) return Raster(1, 1, canvas.channels(), 0);
  return mosaic_window(canvas, bounds).pixels;
}

void export_canvas(const MosaicCanvas& canvas, const std::filesystem::path& image_path,
                   const std::filesystem::path& validity_path) {
  const Rect bounds = canvas.written_bounds();
  if (bounds.empty()) {
    write_png(image_path, Raster(1, 1, canvas.channels(), 0));
    write_png(validity_path, Raster(1, 1, 1, 0));
    return;
  }
  const MosaicWindow win = mosaic_window(canvas, bounds);
  write_png(image_path, win.pixels);
  write_png(validity_path, Raster(Plane<std::uint8_t>((win.valid != 0).cast<std::uint8_t>() * std::uint8_t{255})));
}

}  // namespace vmscope
