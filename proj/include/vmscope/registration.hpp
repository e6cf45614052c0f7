#pragma once

#include "vmscope/image.hpp"

namespace vmscope {

/// Integer offset of the current frame's top-left corner in the previous
/// frame's coordinates: prev(x, y) ~ cur(x - dx, y - dy) over the overlap.
struct Displacement {
  int dx = 0;
  int dy = 0;

  Displacement operator-() const { return {-dx, -dy}; }
  friend bool operator==(const Displacement&, const Displacement&) = default;
};

/// Real part of the inverse transform of the normalised cross-power spectrum.
struct CorrelationSurface {
  PlaneD values;  // rows = frame height
  int peak_x = 0;
  int peak_y = 0;
  double peak_value = 0.0;

  int width() const { return static_cast<int>(values.cols()); }
  int height() const { return static_cast<int>(values.rows()); }
};

enum class RegistrationStatus { Ok, Degraded };

struct RegistrationResult {
  Displacement displacement;
  double peak_value = 0.0;
  double overlap_mad = 0.0;
  long long overlap_area = 0;
  RegistrationStatus status = RegistrationStatus::Ok;
};

struct TranslationConfig {
  double min_overlap_fraction = 0.05;
  /// Below this correlation peak the result is flagged Degraded.
  double peak_threshold = 0.05;
  /// Above this mean gray difference the result is flagged Degraded.
  double mad_threshold = 40.0;
};

/// Smallest frame side accepted by the phase correlator.
inline constexpr int kMinCorrelationSide = 16;

CorrelationSurface cross_power_surface(const Raster& prev, const Raster& cur);

struct OverlapScore {
  double mad = 0.0;
  long long area = 0;
};

/// Mean |prev(x,y) - cur(x-dx, y-dy)| over the intersection of both frames.
OverlapScore overlap_mad(const Raster& prev, const Raster& cur, Displacement d);

/// Unwraps the correlation peak into the four signed candidates and keeps
/// the one with the smallest overlap gray difference.
RegistrationResult resolve_translation(const Raster& prev, const Raster& cur, const CorrelationSurface& surface,
                                       const TranslationConfig& cfg = {});

/// cross_power_surface followed by resolve_translation.
RegistrationResult register_translation(const Raster& prev, const Raster& cur, const TranslationConfig& cfg = {});

}  // namespace vmscope
