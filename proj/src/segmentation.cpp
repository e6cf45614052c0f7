#include "vmscope/segmentation.hpp"

#include <string>

#include "vmscope/metrics.hpp"

namespace vmscope {

LesionMask crop_mask(const LesionMask& mask, const Rect& region) {
  if (region.empty() || !mask.rect().contains(region)) throw Error(ErrorCode::OutOfBounds, "mask crop exceeds bounds");
  return LesionMask(Plane<std::uint8_t>(mask.labels().block(region.y, region.x, region.height, region.width)));
}

LesionMask resample_nearest(const LesionMask& mask, int target_width, int target_height) {
  if (target_width < 1 || target_height < 1) throw Error(ErrorCode::InvalidArgument, "target dims must be >= 1");
  if (target_width == mask.width() && target_height == mask.height()) return mask;
  LesionMask out(target_width, target_height);
  for (int y = 0; y < target_height; ++y) {
    const int sy = std::min(static_cast<int>((static_cast<long long>(2 * y + 1) * mask.height()) / (2LL * target_height)),
                            mask.height() - 1);
    for (int x = 0; x < target_width; ++x) {
      const int sx = std::min(static_cast<int>((static_cast<long long>(2 * x + 1) * mask.width()) / (2LL * target_width)),
                              mask.width() - 1);
      out(x, y) = mask(sx, sy);
    }
  }
  return out;
}

Raster mask_to_raster(const LesionMask& mask, std::uint8_t lesion_value) {
  return Raster(Plane<std::uint8_t>((mask.labels() == kHydrops).cast<std::uint8_t>() * lesion_value));
}

LesionMask mask_from_binary(const Raster& image) {
  const Raster lum = to_luminance(image);
  return LesionMask(Plane<std::uint8_t>((lum.samples() != 0).cast<std::uint8_t>()));
}

LesionMask mask_from_labels(const Raster& image) {
  const Raster lum = to_luminance(image);
  if ((lum.samples() > kVillus).any()) throw Error(ErrorCode::InvalidArgument, "label image holds values outside {0,1,2,3}");
  return LesionMask(Plane<std::uint8_t>(lum.samples()));
}

LesionMask segment(const SegmenterBackend& backend, const Raster& image, const std::optional<Rect>& slide_region) {
  const int iw = backend.input_width();
  const int ih = backend.input_height();
  if ((iw != 0 || ih != 0) && (image.width() != iw || image.height() != ih)) {
    throw Error(ErrorCode::DimensionMismatch, backend.name() + " expects " + std::to_string(iw) + "x" + std::to_string(ih));
  }
  LesionMask mask = backend.infer(image, slide_region);
  if (mask.width() != image.width() || mask.height() != image.height()) {
    throw Error(ErrorCode::BackendFailure, backend.name() + " returned a mask of the wrong size");
  }
  if ((mask.labels() > kVillus).any()) throw Error(ErrorCode::BackendFailure, backend.name() + " returned undefined labels");
  return mask;
}

LesionMask threshold_segment(const Raster& image, const ThresholdParams& params) {
  const Raster lum = to_luminance(image);
  const auto& s = lum.samples();
  const int t = params.threshold;
  LesionMask mask(params.polarity == Polarity::Bright ? Plane<std::uint8_t>((s.cast<int>() >= t).cast<std::uint8_t>())
                                                      : Plane<std::uint8_t>((s.cast<int>() <= t).cast<std::uint8_t>()));
  if (params.min_component_area <= 1) return mask;

  const ComponentSet cc = connected_components(mask, Connectivity::Eight);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const int id = cc.labels(y, x);
      if (id > 0 && cc.areas[static_cast<std::size_t>(id - 1)] < params.min_component_area) mask(x, y) = kBackground;
    }
  }
  return mask;
}

LesionMask oracle_segment(const LesionMask& slide_mask, const Rect& placement) {
  return crop_mask(slide_mask, placement);
}

LesionMask OracleBackend::infer(const Raster& image, const std::optional<Rect>& slide_region) const {
  LesionMask out(image.width(), image.height());
  if (!slide_region || !slide_mask_) return out;
  if (slide_region->width != image.width() || slide_region->height != image.height()) {
    throw Error(ErrorCode::BackendFailure, "oracle region dims differ from the image");
  }
  const Rect inside = intersect(*slide_region, slide_mask_->rect());
  if (inside.empty()) return out;
  out.labels().block(inside.y - slide_region->y, inside.x - slide_region->x, inside.height, inside.width) =
      slide_mask_->labels().block(inside.y, inside.x, inside.height, inside.width);
  return out;
}

LesionMask segment_extended(const SegmenterBackend& backend, const ExtendedFrame& extended,
                            const std::optional<Rect>& frame_slide_region) {
  const Raster& input = extended.pixels;
  std::optional<Rect> region;
  if (frame_slide_region) region = frame_slide_region->inflated(extended.width_used);

  const int iw = backend.input_width();
  const int ih = backend.input_height();
  LesionMask mask;
  if (iw > 0 && ih > 0) {
    mask = resample_nearest(segment(backend, resample(input, iw, ih), region), input.width(), input.height());
  } else {
    mask = segment(backend, input, region);
  }
  return crop_back(mask, extended.width_used);
}

LesionMask segment_extended(const SegmenterBackend& backend, const Raster& frame, const MosaicWindow& context, int width,
                            FillStrategy strategy, const std::optional<Rect>& frame_slide_region) {
  return segment_extended(backend, extend_frame(frame, context, width, strategy), frame_slide_region);
}

Raster render_overlay(const Raster& frame, const LesionMask& mask, const OverlayStyle& style) {
  if (frame.width() != mask.width() || frame.height() != mask.height()) {
    throw Error(ErrorCode::DimensionMismatch, "overlay mask dims differ from frame");
  }
  Raster out = to_rgb(frame);
  const int w = mask.width();
  const int h = mask.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.is_lesion(x, y)) continue;
      bool contour = false;
      for (int dy = -1; dy <= 1 && !contour; ++dy) {
        for (int dx = -1; dx <= 1 && !contour; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          contour = nx < 0 || ny < 0 || nx >= w || ny >= h || !mask.is_lesion(nx, ny);
        }
      }
      if (!contour) continue;
      for (int c = 0; c < 3; ++c) out(x, y, c) = style.color[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

#ifndef VMSCOPE_WITH_DNN
std::unique_ptr<SegmenterBackend> make_dnn_backend(const std::filesystem::path&, int, int) {
  throw Error(ErrorCode::BackendFailure, "this build has no DNN runtime");
}
bool dnn_backend_available() { return false; }
#endif

}  // namespace vmscope
