#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "vmscope/edge_extension.hpp"
#include "vmscope/image.hpp"
#include "vmscope/lesion_mask.hpp"
#include "vmscope/mosaic.hpp"

namespace vmscope {

/// A lesion segmenter. Inference must be deterministic and stateless; one
/// caller at a time per instance.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;

  virtual std::string name() const = 0;

  /// Required input dims; (0, 0) means any size is accepted as-is.
  virtual int input_width() const { return 0; }
  virtual int input_height() const { return 0; }

  /// `slide_region` is where `image` sits in slide coordinates when the
  /// caller knows it (only ground-truth lookups use it).
  virtual LesionMask infer(const Raster& image, const std::optional<Rect>& slide_region) const = 0;
};

/// Checks input dims, runs the backend and validates its output.
LesionMask segment(const SegmenterBackend& backend, const Raster& image, const std::optional<Rect>& slide_region = {});

enum class Polarity { Bright, Dark };

struct ThresholdParams {
  int threshold = 200;
  Polarity polarity = Polarity::Bright;
  int min_component_area = 0;
};

/// Luminance threshold (bright: Y >= t, dark: Y <= t), then removal of
/// 8-connected components smaller than min_component_area.
LesionMask threshold_segment(const Raster& image, const ThresholdParams& params);

/// Ground-truth crop at `placement`; OutOfBounds unless it lies in the slide.
LesionMask oracle_segment(const LesionMask& slide_mask, const Rect& placement);

class ThresholdBackend final : public SegmenterBackend {
 public:
  explicit ThresholdBackend(ThresholdParams params = {}, int input_width = 0, int input_height = 0)
      : params_(params), input_width_(input_width), input_height_(input_height) {}

  std::string name() const override { return "threshold"; }
  int input_width() const override { return input_width_; }
  int input_height() const override { return input_height_; }
  LesionMask infer(const Raster& image, const std::optional<Rect>&) const override { return threshold_segment(image, params_); }

  const ThresholdParams& params() const { return params_; }

 private:
  ThresholdParams params_;
  int input_width_;
  int input_height_;
};

/// Looks labels up in a slide ground-truth mask. Parts of the requested
/// region outside the slide read as background; without a region the
/// answer is an empty mask.
class OracleBackend final : public SegmenterBackend {
 public:
  explicit OracleBackend(std::shared_ptr<const LesionMask> slide_mask) : slide_mask_(std::move(slide_mask)) {}

  std::string name() const override { return "oracle"; }
  LesionMask infer(const Raster& image, const std::optional<Rect>& slide_region) const override;

 private:
  std::shared_ptr<const LesionMask> slide_mask_;
};

/// Serialized-model backend (ONNX through OpenCV DNN).
///
/// Adapter contract: input is a 1x3xHxW float32 blob, RGB order, samples
/// scaled to [0, 1], no mean subtraction, resized to the model input dims.
/// Output is either 1x1xHxW logits (hydrops where logit > 0) or 1xCxHxW
/// scores (hydrops where argmax == 1).
std::unique_ptr<SegmenterBackend> make_dnn_backend(const std::filesystem::path& model_path, int input_width = 512,
                                                   int input_height = 512);

/// True when the build includes the DNN backend.
bool dnn_backend_available();

/// Resample to backend dims -> segment -> nearest-neighbour back -> crop_back.
LesionMask segment_extended(const SegmenterBackend& backend, const ExtendedFrame& extended,
                            const std::optional<Rect>& frame_slide_region = {});

/// extend_frame followed by the overload above.
LesionMask segment_extended(const SegmenterBackend& backend, const Raster& frame, const MosaicWindow& context, int width,
                            FillStrategy strategy, const std::optional<Rect>& frame_slide_region = {});

struct OverlayStyle {
  std::array<std::uint8_t, 3> color{0, 255, 0};
};

/// Lesion pixels 8-adjacent to background (or the image border) are drawn
/// in the style colour; everything else is the frame promoted to RGB.
Raster render_overlay(const Raster& frame, const LesionMask& mask, const OverlayStyle& style = {});

}  // namespace vmscope
