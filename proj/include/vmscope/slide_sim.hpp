#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vmscope/image.hpp"
#include "vmscope/lesion_mask.hpp"

namespace vmscope {

struct VirtualSlide {
  Raster image;
  std::optional<LesionMask> gt_mask;
  std::string id;
};

struct FrameEvent {
  int index = 0;
  long long timestamp_ms = 0;
  Raster pixels;
  Rect true_placement;  // slide coordinates; evaluation only
};

inline constexpr int kDefaultViewportWidth = 640;
inline constexpr int kDefaultViewportHeight = 480;
inline constexpr double kDefaultFps = 2.0;

/// Viewport rect for a centre, clamped so it stays inside the slide.
Rect viewport_rect(const VirtualSlide& slide, Eigen::Vector2d center, int vw, int vh);

struct Viewport {
  Raster pixels;
  Rect rect;
};

Viewport viewport_frame(const VirtualSlide& slide, Eigen::Vector2d center, int vw, int vh);

/// Linear rolling-shutter skew: row r is shifted right by round(vx*r/H) and
/// read from row r + round(vy*r/H), edge-clamped.
Raster rolling_shutter_distort(const Raster& frame, double vx, double vy);

struct PathOptions {
  int viewport_width = kDefaultViewportWidth;
  int viewport_height = kDefaultViewportHeight;
  double fps = kDefaultFps;
  bool distort = false;
};

/// One frame per path point, timestamps 1000/fps apart. With distortion on,
/// each frame is skewed by the delta between consecutive viewport origins.
std::vector<FrameEvent> generate_path_frames(const VirtualSlide& slide, const std::vector<Eigen::Vector2d>& path,
                                             const PathOptions& options = {});

struct SynthSlideParams {
  int width = 2048;
  int height = 2048;
  int blobs = 40;
  std::uint64_t seed = 1;
  double min_radius = 18.0;
  double max_radius = 60.0;
  /// Optional edge-straddling construction: this fraction of blobs gets one
  /// centre coordinate snapped onto k*straddle_period + one of the offsets.
  double straddle_fraction = 0.0;
  int straddle_period = 0;
  std::vector<int> straddle_offsets;
};

/// Textured tissue background plus bright elliptical hydrops blobs, with a
/// matching ground-truth mask. Fully determined by the seed.
VirtualSlide synthesize_slide(const SynthSlideParams& params);

struct PanPathParams {
  int frames = 259;
  double min_step = 5.0;
  double max_step = 30.0;
  std::uint64_t seed = 7;
};

/// Smooth pan across the slide: heading drifts slowly, speed is drawn per
/// frame from [min_step, max_step], and the heading reflects off the margins
/// so every viewport stays unclamped.
std::vector<Eigen::Vector2d> make_pan_path(const VirtualSlide& slide, int vw, int vh, const PanPathParams& params);

VirtualSlide load_slide(const std::filesystem::path& image_png, const std::optional<std::filesystem::path>& mask_png,
                        std::string id = {});
void save_slide(const VirtualSlide& slide, const std::filesystem::path& dir);

/// JSON list of [x, y] centres.
std::vector<Eigen::Vector2d> load_path_json(const std::filesystem::path& path);
void save_path_json(const std::filesystem::path& path, const std::vector<Eigen::Vector2d>& centers);

/// Frame sequence on disk: <dir>/frame_NNNN.png plus a truth JSON list of
/// {index, timestamp_ms, file, x, y, w, h}; file is relative to the JSON.
void save_frame_sequence(const std::filesystem::path& frames_dir, const std::filesystem::path& truth_json,
                         const std::vector<FrameEvent>& frames);
std::vector<FrameEvent> load_frame_sequence(const std::filesystem::path& frames_dir, const std::filesystem::path& truth_json);

/// Separable Gaussian blur of a real plane (edge-clamped).
PlaneD gaussian_blur(const PlaneD& plane, double sigma);

}  // namespace vmscope
