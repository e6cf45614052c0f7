#include "vmscope/image.hpp"

#include <cfenv>
#include <cmath>
#include <string>

namespace vmscope {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnsupportedChannels: return "UnsupportedChannels";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::DidNotConverge: return "DidNotConverge";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::CanvasLimitExceeded: return "CanvasLimitExceeded";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::ViewportLargerThanSlide: return "ViewportLargerThanSlide";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ProtocolError: return "ProtocolError";
  }
  return "Unknown";
}

namespace {

// nearbyint honours the current rounding mode; pin it to ties-to-even.
inline std::uint8_t round_to_u8(double v) {
  const double r = std::nearbyint(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

struct RoundingGuard {
  int saved = std::fegetround();
  RoundingGuard() { std::fesetround(FE_TONEAREST); }
  ~RoundingGuard() { std::fesetround(saved); }
};

}  // namespace

Raster to_luminance(const Raster& image) {
  if (image.channels() == 1) return image;
  if (image.channels() != 3) {
    throw Error(ErrorCode::UnsupportedChannels, "to_luminance expects 1 or 3 channels, got " + std::to_string(image.channels()));
  }
  RoundingGuard guard;
  Raster out(image.width(), image.height(), 1);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double v = 0.299 * image(x, y, 0) + 0.587 * image(x, y, 1) + 0.114 * image(x, y, 2);
      out(x, y) = round_to_u8(v);
    }
  }
  return out;
}

PlaneD luminance_plane(const Raster& image) {
  return to_luminance(image).samples().cast<double>();
}

Raster to_raster(const PlaneD& plane) {
  RoundingGuard guard;
  Raster out(static_cast<int>(plane.cols()), static_cast<int>(plane.rows()), 1);
  for (Eigen::Index y = 0; y < plane.rows(); ++y)
    for (Eigen::Index x = 0; x < plane.cols(); ++x) out.samples()(y, x) = round_to_u8(plane(y, x));
  return out;
}

Raster to_rgb(const Raster& image) {
  if (image.channels() == 3) return image;
  if (image.channels() != 1) throw Error(ErrorCode::UnsupportedChannels, "to_rgb expects 1 or 3 channels");
  Raster out(image.width(), image.height(), 3);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c) out(x, y, c) = image(x, y);
  return out;
}

Raster resample(const Raster& image, int target_width, int target_height) {
  if (target_width < 1 || target_height < 1) throw Error(ErrorCode::InvalidArgument, "resample target dims must be >= 1");
  if (target_width == image.width() && target_height == image.height()) return image;

  const int w = image.width();
  const int h = image.height();
  const int ch = image.channels();
  const double sx = static_cast<double>(w) / target_width;
  const double sy = static_cast<double>(h) / target_height;

  // Per-column source taps are shared by every row.
  std::vector<int> x0(target_width), x1(target_width);
  std::vector<double> fx(target_width);
  for (int x = 0; x < target_width; ++x) {
    const double src = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
    x0[x] = static_cast<int>(std::floor(src));
    x1[x] = std::min(x0[x] + 1, w - 1);
    fx[x] = src - x0[x];
  }

  RoundingGuard guard;
  Raster out(target_width, target_height, ch);
  for (int y = 0; y < target_height; ++y) {
    const double src = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(std::floor(src));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = src - y0;
    for (int x = 0; x < target_width; ++x) {
      for (int c = 0; c < ch; ++c) {
        const double top = image(x0[x], y0, c) * (1.0 - fx[x]) + image(x1[x], y0, c) * fx[x];
        const double bottom = image(x0[x], y1, c) * (1.0 - fx[x]) + image(x1[x], y1, c) * fx[x];
        out(x, y, c) = round_to_u8(top * (1.0 - fy) + bottom * fy);
      }
    }
  }
  return out;
}

Raster crop_region(const Raster& image, const Rect& region) {
  if (region.empty() || !image.rect().contains(region)) {
    throw Error(ErrorCode::OutOfBounds, "crop region exceeds image bounds");
  }
  Raster out(region.width, region.height, image.channels());
  const int ch = image.channels();
  out.samples() = image.samples().block(region.y, static_cast<Eigen::Index>(region.x) * ch, region.height,
                                        static_cast<Eigen::Index>(region.width) * ch);
  return out;
}

}  // namespace vmscope
