#include "vmscope/pipeline.hpp"

#include <chrono>
#include <iostream>

#include "vmscope/png_io.hpp"

namespace vmscope {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

std::string to_string(FillStrategy s) { return s == FillStrategy::Zero ? "zero" : "mirror"; }

FillStrategy parse_strategy(const std::string& s) {
  if (s == "zero") return FillStrategy::Zero;
  if (s == "mirror") return FillStrategy::Mirror;
  throw Error(ErrorCode::InvalidArgument, "strategy must be zero or mirror, got '" + s + "'");
}

SessionConfig parse_session_config(const nlohmann::json& j, SessionConfig cfg) {
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw Error(ErrorCode::ProtocolError, "config must be an object");
  try {
    if (j.contains("edge_width")) cfg.edge_width = j.at("edge_width").get<int>();
    if (j.contains("strategy")) cfg.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("backend")) cfg.backend = j.at("backend").get<std::string>();
    if (j.contains("fps")) cfg.fps = j.at("fps").get<double>();
    if (j.contains("slide_id") && !j.at("slide_id").is_null()) cfg.slide_id = j.at("slide_id").get<std::string>();
    if (j.contains("slide_origin")) cfg.slide_origin = j.at("slide_origin").get<std::array<int, 2>>();
    if (j.contains("max_canvas_side")) cfg.max_canvas_side = j.at("max_canvas_side").get<int>();
    if (j.contains("snapshot_max_side")) cfg.snapshot_max_side = j.at("snapshot_max_side").get<int>();
    if (j.contains("model_path")) cfg.model_path = j.at("model_path").get<std::string>();
    if (j.contains("model_input")) {
      const auto dims = j.at("model_input").get<std::array<int, 2>>();
      cfg.model_input_width = dims[0];
      cfg.model_input_height = dims[1];
    }
    if (j.contains("registration")) {
      const auto& r = j.at("registration");
      if (r.contains("min_overlap_fraction")) cfg.registration.min_overlap_fraction = r.at("min_overlap_fraction").get<double>();
      if (r.contains("peak_threshold")) cfg.registration.peak_threshold = r.at("peak_threshold").get<double>();
      if (r.contains("mad_threshold")) cfg.registration.mad_threshold = r.at("mad_threshold").get<double>();
    }
    if (j.contains("threshold")) {
      const auto& t = j.at("threshold");
      if (t.contains("level")) cfg.threshold.threshold = t.at("level").get<int>();
      if (t.contains("polarity")) {
        const auto p = t.at("polarity").get<std::string>();
        if (p != "bright" && p != "dark") throw Error(ErrorCode::InvalidArgument, "polarity must be bright or dark");
        cfg.threshold.polarity = p == "bright" ? Polarity::Bright : Polarity::Dark;
      }
      if (t.contains("min_component_area")) cfg.threshold.min_component_area = t.at("min_component_area").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("bad config: ") + e.what());
  }
  if (cfg.edge_width < 0 || cfg.edge_width > kMaxEdgeWidth) {
    throw Error(ErrorCode::InvalidArgument, "edge_width must be within 0.." + std::to_string(kMaxEdgeWidth));
  }
  if (cfg.backend != "oracle" && cfg.backend != "threshold" && cfg.backend != "external") {
    throw Error(ErrorCode::InvalidArgument, "unknown backend '" + cfg.backend + "'");
  }
  if (!(cfg.fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "fps must be positive");
  return cfg;
}

nlohmann::json to_json(const SessionConfig& cfg) {
  nlohmann::json j;
  j["edge_width"] = cfg.edge_width;
  j["strategy"] = to_string(cfg.strategy);
  j["backend"] = cfg.backend;
  j["fps"] = cfg.fps;
  j["registration"] = {{"min_overlap_fraction", cfg.registration.min_overlap_fraction},
                       {"peak_threshold", cfg.registration.peak_threshold},
                       {"mad_threshold", cfg.registration.mad_threshold}};
  j["threshold"] = {{"level", cfg.threshold.threshold},
                    {"polarity", cfg.threshold.polarity == Polarity::Bright ? "bright" : "dark"},
                    {"min_component_area", cfg.threshold.min_component_area}};
  if (cfg.slide_id) j["slide_id"] = *cfg.slide_id;
  if (cfg.slide_origin) j["slide_origin"] = *cfg.slide_origin;
  return j;
}

std::shared_ptr<const SegmenterBackend> make_backend(const SessionConfig& cfg, std::shared_ptr<const LesionMask> slide_mask) {
  if (cfg.backend == "threshold") return std::make_shared<ThresholdBackend>(cfg.threshold);
  if (cfg.backend == "oracle") {
    if (!slide_mask) throw Error(ErrorCode::MissingGroundTruth, "oracle backend needs a slide with a ground-truth mask");
    return std::make_shared<OracleBackend>(std::move(slide_mask));
  }
  if (cfg.backend == "external") {
    if (cfg.model_path.empty()) throw Error(ErrorCode::BackendFailure, "external backend needs model_path");
    return std::shared_ptr<const SegmenterBackend>(make_dnn_backend(cfg.model_path, cfg.model_input_width, cfg.model_input_height));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + cfg.backend + "'");
}

Raster downscale_to(const Raster& image, int max_side) {
  const int long_side = std::max(image.width(), image.height());
  if (long_side <= max_side) return image;
  const double s = static_cast<double>(max_side) / long_side;
  return resample(image, std::max(1, static_cast<int>(std::lround(image.width() * s))),
                  std::max(1, static_cast<int>(std::lround(image.height() * s))));
}

Raster render_lesion_map(const MosaicCanvas& lesion_canvas) {
  const Rect bounds = lesion_canvas.written_bounds();
  if (bounds.empty()) return Raster(1, 1, 3, 0);
  const MosaicWindow win = mosaic_window(lesion_canvas, bounds);
  Raster out(bounds.width, bounds.height, 3, 0);
  for (int y = 0; y < bounds.height; ++y) {
    for (int x = 0; x < bounds.width; ++x) {
      if (win.valid(y, x) == 0) continue;
      if (win.pixels(x, y) == kHydrops) {
        out(x, y, 1) = 255;
      } else {
        out(x, y, 0) = out(x, y, 1) = out(x, y, 2) = 48;
      }
    }
  }
  return out;
}

Session::Session(std::string id, SessionConfig config, std::shared_ptr<const SegmenterBackend> backend)
    : id_(std::move(id)),
      config_(std::move(config)),
      backend_(std::move(backend)),
      mosaic_(3, config_.max_canvas_side, config_.max_canvas_side),
      lesion_map_(1, config_.max_canvas_side, config_.max_canvas_side) {
  if (!backend_) throw Error(ErrorCode::BackendFailure, "session needs a segmentation backend");
}

PipelineOutputs Session::step(const Raster& input) {
  if (input.channels() != 1 && input.channels() != 3) throw Error(ErrorCode::UnsupportedChannels, "frames must be 1 or 3 channels");
  if (frames_processed_ > 0 && (input.width() != frame_width_ || input.height() != frame_height_)) {
    throw Error(ErrorCode::DimensionMismatch, "frame dims changed within the session");
  }
  const Raster frame = to_rgb(input);
  const int w = config_.edge_width;

  PipelineOutputs out;
  out.index = frames_processed_;

  // (1) registration
  auto t = Clock::now();
  std::optional<Placement> placement;
  if (!last_placement_) {
    placement = Placement{{0, 0, frame.width(), frame.height()}, 0};
  } else {
    try {
      RegistrationResult reg = register_translation(*last_good_frame_, frame, config_.registration);
      out.registration = reg;
      if (reg.status == RegistrationStatus::Ok) {
        placement = Placement{last_placement_->rect.translated(reg.displacement.dx, reg.displacement.dy), frames_processed_};
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoOverlap) throw;
    }
  }
  out.timings.register_ms = elapsed_ms(t);
  out.status = placement ? RegistrationStatus::Ok : RegistrationStatus::Degraded;

  if (placement && (!mosaic_.can_cover(placement->rect) || !lesion_map_.can_cover(placement->rect))) {
    throw Error(ErrorCode::CanvasLimitExceeded, "placement would exceed the canvas cap");
  }

  // (2)-(3) history window and extension; canvases are still untouched.
  t = Clock::now();
  ExtendedFrame extended = placement ? extend_frame(frame, mosaic_window(mosaic_, placement->rect.inflated(w)), w, config_.strategy)
                                     : extend_frame(frame, w, config_.strategy);
  out.timings.extend_ms = elapsed_ms(t);

  // (4) segmentation
  t = Clock::now();
  std::optional<Rect> slide_region;
  if (placement && config_.slide_origin) {
    slide_region = placement->rect.translated((*config_.slide_origin)[0], (*config_.slide_origin)[1]);
  }
  out.mask = segment_extended(*backend_, extended, slide_region);
  out.timings.segment_ms = elapsed_ms(t);

  // (5)-(7) commit, overlay, snapshots
  t = Clock::now();
  if (placement) {
    mosaic_.paint(placement->rect, frame);
    compose_lesion_map(lesion_map_, out.mask, *placement);
    last_good_frame_ = frame;
    last_placement_ = placement;
    out.placement = placement->rect;
  } else {
    out.placement = last_placement_->rect;
  }
  if (frames_processed_ == 0) {
    frame_width_ = input.width();
    frame_height_ = input.height();
    frame_channels_ = input.channels();
  }
  ++frames_processed_;

  out.labeled_view = render_overlay(frame, out.mask);
  out.mosaic_view = downscale_to(canvas_snapshot(mosaic_), config_.snapshot_max_side);
  out.lesion_map_view = downscale_to(render_lesion_map(lesion_map_), config_.snapshot_max_side);
  out.timings.compose_ms = elapsed_ms(t);
  timing_log_.push_back(out.timings);

  const double budget_ms = 1000.0 / config_.fps;
  if (out.timings.total_ms() > 2.0 * budget_ms) {
    std::clog << "vmscope: session " << id_ << " frame " << out.index << " took " << out.timings.total_ms()
              << " ms (budget " << budget_ms << " ms)\n";
  }
  return out;
}

void Session::export_canvases(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  export_canvas(mosaic_, dir / "mosaic.png", dir / "mosaic_valid.png");
  export_canvas(lesion_map_, dir / "lesion_map.png", dir / "lesion_map_valid.png");
}

}  // namespace vmscope
