#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmscope/edge_extension.hpp"
#include "vmscope/mosaic.hpp"
#include "vmscope/registration.hpp"
#include "vmscope/segmentation.hpp"

namespace vmscope {

struct SessionConfig {
  TranslationConfig registration;
  int edge_width = kDefaultEdgeWidth;
  FillStrategy strategy = FillStrategy::Mirror;
  std::string backend = "threshold";
  double fps = 2.0;
  int max_canvas_side = MosaicCanvas::kDefaultMaxSide;
  int snapshot_max_side = 1024;
  std::optional<std::string> slide_id;
  /// Slide position of the first frame's top-left; lets ground-truth
  /// lookups follow the dead-reckoned placement.
  std::optional<std::array<int, 2>> slide_origin;
  ThresholdParams threshold{200, Polarity::Bright, 150};
  std::string model_path;
  int model_input_width = 512;
  int model_input_height = 512;
};

/// Reads the create_session "config" object; absent keys keep `base` values.
SessionConfig parse_session_config(const nlohmann::json& j, SessionConfig base = {});
nlohmann::json to_json(const SessionConfig& cfg);

std::string to_string(FillStrategy s);
FillStrategy parse_strategy(const std::string& s);

struct StageTimings {
  double register_ms = 0.0;
  double extend_ms = 0.0;
  double segment_ms = 0.0;
  double compose_ms = 0.0;

  double total_ms() const { return register_ms + extend_ms + segment_ms + compose_ms; }
};

struct PipelineOutputs {
  int index = 0;
  Raster labeled_view;
  LesionMask mask;
  Rect placement;
  Raster mosaic_view;
  Raster lesion_map_view;
  StageTimings timings;
  RegistrationStatus status = RegistrationStatus::Ok;
  std::optional<RegistrationResult> registration;
};

/// Per-session state for the live workflow: register against the last good
/// frame, place, extend with history, segment, compose, render.
///
/// A step either completes or throws with the state untouched. Degraded
/// registration freezes both canvases; the following frame registers again
/// against the last good frame.
class Session {
 public:
  Session(std::string id, SessionConfig config, std::shared_ptr<const SegmenterBackend> backend);

  PipelineOutputs step(const Raster& frame);

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }
  const MosaicCanvas& mosaic() const { return mosaic_; }
  const MosaicCanvas& lesion_map() const { return lesion_map_; }
  int frames_processed() const { return frames_processed_; }
  const std::optional<Placement>& last_placement() const { return last_placement_; }
  const std::vector<StageTimings>& timing_log() const { return timing_log_; }

  /// Writes mosaic.png, mosaic_valid.png, lesion_map.png, lesion_map_valid.png.
  void export_canvases(const std::filesystem::path& dir) const;

 private:
  std::string id_;
  SessionConfig config_;
  std::shared_ptr<const SegmenterBackend> backend_;
  MosaicCanvas mosaic_;
  MosaicCanvas lesion_map_;
  std::optional<Raster> last_good_frame_;
  std::optional<Placement> last_placement_;
  int frames_processed_ = 0;
  int frame_width_ = 0;
  int frame_height_ = 0;
  int frame_channels_ = 0;
  std::vector<StageTimings> timing_log_;
};

/// Free-function form of Session::step.
inline PipelineOutputs session_step(Session& session, const Raster& frame) { return session.step(frame); }

/// Builds the backend a config names. `slide_mask` feeds the oracle.
std::shared_ptr<const SegmenterBackend> make_backend(const SessionConfig& cfg, std::shared_ptr<const LesionMask> slide_mask);

/// Bilinear thumbnail whose long side is at most `max_side`.
Raster downscale_to(const Raster& image, int max_side);

/// RGB rendering of a lesion canvas: unwritten black, background dark gray,
/// hydrops green.
Raster render_lesion_map(const MosaicCanvas& lesion_canvas);

}  // namespace vmscope
