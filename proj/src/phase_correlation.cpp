#include "vmscope/registration.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "vmscope/fft.hpp"

namespace vmscope {

namespace {

constexpr double kSpectrumFloor = 1e-9;

void require_same_dims(const Raster& a, const Raster& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::DimensionMismatch, "frames must have equal dims");
  }
}

}  // namespace

CorrelationSurface cross_power_surface(const Raster& prev, const Raster& cur) {
  require_same_dims(prev, cur);
  if (prev.width() < kMinCorrelationSide || prev.height() < kMinCorrelationSide) {
    throw Error(ErrorCode::TooSmall, "phase correlation needs at least 16x16 frames");
  }

  PlaneD f_prev = luminance_plane(prev);
  PlaneD f_cur = luminance_plane(cur);
  f_prev -= f_prev.mean();
  f_cur -= f_cur.mean();

  const PlaneC spec_prev = fft2(f_prev);
  const PlaneC spec_cur = fft2(f_cur);

  PlaneC cross = spec_prev * spec_cur.conjugate();
  const PlaneD magnitude = cross.abs().max(kSpectrumFloor);
  cross /= magnitude.cast<std::complex<double>>();

  CorrelationSurface surface;
  surface.values = ifft2(cross).real();

  // Row-major scan keeps the first maximum on ties.
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index y = 0; y < surface.values.rows(); ++y) {
    for (Eigen::Index x = 0; x < surface.values.cols(); ++x) {
      if (surface.values(y, x) > best) {
        best = surface.values(y, x);
        surface.peak_x = static_cast<int>(x);
        surface.peak_y = static_cast<int>(y);
      }
    }
  }
  surface.peak_value = best;
  return surface;
}

OverlapScore overlap_mad(const Raster& prev, const Raster& cur, Displacement d) {
  require_same_dims(prev, cur);
  const Rect overlap = intersect(prev.rect(), cur.rect().translated(d.dx, d.dy));
  if (overlap.empty()) throw Error(ErrorCode::NoOverlap, "frames do not intersect");

  const Raster lp = to_luminance(prev);
  const Raster lc = to_luminance(cur);
  const auto a = lp.samples().block(overlap.y, overlap.x, overlap.height, overlap.width).cast<int>();
  const auto b = lc.samples().block(overlap.y - d.dy, overlap.x - d.dx, overlap.height, overlap.width).cast<int>();
  const long long total = (a - b).abs().cast<long long>().sum();
  return {static_cast<double>(total) / static_cast<double>(overlap.area()), overlap.area()};
}

RegistrationResult resolve_translation(const Raster& prev, const Raster& cur, const CorrelationSurface& surface,
                                       const TranslationConfig& cfg) {
  require_same_dims(prev, cur);
  const int w = prev.width();
  const int h = prev.height();
  if (surface.width() != w || surface.height() != h) {
    throw Error(ErrorCode::DimensionMismatch, "surface dims do not match frames");
  }

  const std::array<Displacement, 4> candidates{{
      {surface.peak_x, surface.peak_y},
      {surface.peak_x - w, surface.peak_y},
      {surface.peak_x, surface.peak_y - h},
      {surface.peak_x - w, surface.peak_y - h},
  }};

  const double min_area = cfg.min_overlap_fraction * static_cast<double>(prev.pixel_count());
  const Raster lp = to_luminance(prev);
  const Raster lc = to_luminance(cur);

  bool found = false;
  RegistrationResult best;
  for (const Displacement& d : candidates) {
    const Rect overlap = intersect(prev.rect(), prev.rect().translated(d.dx, d.dy));
    if (overlap.empty() || static_cast<double>(overlap.area()) < min_area) continue;
    const OverlapScore score = overlap_mad(lp, lc, d);
    if (!found || score.mad < best.overlap_mad) {
      found = true;
      best.displacement = d;
      best.overlap_mad = score.mad;
      best.overlap_area = score.area;
    }
  }
  if (!found) {
    throw Error(ErrorCode::NoOverlap, "no candidate keeps the minimum overlap (peak at " + std::to_string(surface.peak_x) +
                                          "," + std::to_string(surface.peak_y) + ")");
  }

  best.peak_value = surface.peak_value;
  const bool weak_peak = surface.peak_value < cfg.peak_threshold;
  const bool poor_match = best.overlap_mad > cfg.mad_threshold;
  best.status = (weak_peak || poor_match) ? RegistrationStatus::Degraded : RegistrationStatus::Ok;
  return best;
}

RegistrationResult register_translation(const Raster& prev, const Raster& cur, const TranslationConfig& cfg) {
  return resolve_translation(prev, cur, cross_power_surface(prev, cur), cfg);
}

}  // namespace vmscope
