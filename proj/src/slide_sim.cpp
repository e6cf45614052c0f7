#include "vmscope/slide_sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "vmscope/png_io.hpp"

namespace vmscope {

Rect viewport_rect(const VirtualSlide& slide, Eigen::Vector2d center, int vw, int vh) {
  if (vw < 1 || vh < 1 || vw > slide.image.width() || vh > slide.image.height()) {
    throw Error(ErrorCode::ViewportLargerThanSlide, "viewport " + std::to_string(vw) + "x" + std::to_string(vh) +
                                                        " does not fit the slide");
  }
  const int x = static_cast<int>(std::lround(center.x())) - vw / 2;
  const int y = static_cast<int>(std::lround(center.y())) - vh / 2;
  return {std::clamp(x, 0, slide.image.width() - vw), std::clamp(y, 0, slide.image.height() - vh), vw, vh};
}

Viewport viewport_frame(const VirtualSlide& slide, Eigen::Vector2d center, int vw, int vh) {
  const Rect rect = viewport_rect(slide, center, vw, vh);
  return {crop_region(slide.image, rect), rect};
}

Raster rolling_shutter_distort(const Raster& frame, double vx, double vy) {
  const int w = frame.width();
  const int h = frame.height();
  const int ch = frame.channels();
  Raster out(w, h, ch);
  for (int r = 0; r < h; ++r) {
    const int sx = static_cast<int>(std::lround(vx * r / h));
    const int sy = static_cast<int>(std::lround(vy * r / h));
    const int src_row = std::clamp(r + sy, 0, h - 1);
    for (int x = 0; x < w; ++x) {
      const int src_x = std::clamp(x - sx, 0, w - 1);
      for (int c = 0; c < ch; ++c) out(x, r, c) = frame(src_x, src_row, c);
    }
  }
  return out;
}

std::vector<FrameEvent> generate_path_frames(const VirtualSlide& slide, const std::vector<Eigen::Vector2d>& path,
                                             const PathOptions& options) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, "path must not be empty");
  if (!(options.fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "fps must be positive");
  std::vector<FrameEvent> frames;
  frames.reserve(path.size());
  const double interval_ms = 1000.0 / options.fps;
  for (std::size_t i = 0; i < path.size(); ++i) {
    Viewport vp = viewport_frame(slide, path[i], options.viewport_width, options.viewport_height);
    FrameEvent ev;
    ev.index = static_cast<int>(i);
    ev.timestamp_ms = std::llround(static_cast<double>(i) * interval_ms);
    ev.true_placement = vp.rect;
    if (options.distort && i > 0) {
      const Rect& prev = frames.back().true_placement;
      ev.pixels = rolling_shutter_distort(vp.pixels, vp.rect.x - prev.x, vp.rect.y - prev.y);
    } else {
      ev.pixels = std::move(vp.pixels);
    }
    frames.push_back(std::move(ev));
  }
  return frames;
}

PlaneD gaussian_blur(const PlaneD& plane, double sigma) {
  if (sigma <= 0.0) return plane;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= total;

  const Eigen::Index rows = plane.rows();
  const Eigen::Index cols = plane.cols();
  PlaneD tmp(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * plane(y, std::clamp<Eigen::Index>(x + i, 0, cols - 1));
      tmp(y, x) = acc;
    }
  PlaneD out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp(std::clamp<Eigen::Index>(y + i, 0, rows - 1), x);
      out(y, x) = acc;
    }
  return out;
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Band-limited noise with unit standard deviation at roughly `scale` pixels.
PlaneD octave_noise(int width, int height, int scale, std::mt19937_64& rng) {
  const int cw = std::max(2, width / scale + 2);
  const int ch = std::max(2, height / scale + 2);
  PlaneD coarse(ch, cw);
  for (Eigen::Index i = 0; i < coarse.size(); ++i) coarse.data()[i] = 2.0 * uniform01(rng) - 1.0;
  coarse = gaussian_blur(coarse, 1.0);
  coarse -= coarse.mean();
  const double sd = std::sqrt(coarse.square().mean());
  if (sd > 0) coarse /= sd;

  PlaneD out(height, width);
  for (int y = 0; y < height; ++y) {
    const double fy = std::min((y + 0.5) / scale, static_cast<double>(ch - 1));
    const int y0 = std::min(static_cast<int>(fy), ch - 2);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::min((x + 0.5) / scale, static_cast<double>(cw - 1));
      const int x0 = std::min(static_cast<int>(fx), cw - 2);
      const double tx = fx - x0;
      out(y, x) = (coarse(y0, x0) * (1 - tx) + coarse(y0, x0 + 1) * tx) * (1 - ty) +
                  (coarse(y0 + 1, x0) * (1 - tx) + coarse(y0 + 1, x0 + 1) * tx) * ty;
    }
  }
  return out;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

VirtualSlide synthesize_slide(const SynthSlideParams& p) {
  if (p.width < 1 || p.height < 1 || p.blobs < 0) throw Error(ErrorCode::InvalidArgument, "bad synthetic slide params");
  std::mt19937_64 rng(p.seed);
  const int w = p.width;
  const int h = p.height;

  PlaneD tissue = 30.0 * octave_noise(w, h, 24, rng) + 16.0 * octave_noise(w, h, 6, rng) + 10.0 * octave_noise(w, h, 1, rng);
  tissue += 110.0;
  const PlaneD fluid = 6.0 * octave_noise(w, h, 3, rng);

  const bool snapping = p.straddle_fraction > 0.0 && p.straddle_period > 0 && !p.straddle_offsets.empty();
  LesionMask mask(w, h);
  for (int b = 0; b < p.blobs; ++b) {
    double cx = uniform01(rng) * w;
    double cy = uniform01(rng) * h;
    if (snapping && uniform01(rng) < p.straddle_fraction) {
      const bool along_x = uniform01(rng) < 0.5;
      const int offset = p.straddle_offsets[static_cast<std::size_t>(rng() % p.straddle_offsets.size())];
      double& c = along_x ? cx : cy;
      c = std::floor(c / p.straddle_period) * p.straddle_period + offset;
    }
    const double ra = p.min_radius + uniform01(rng) * (p.max_radius - p.min_radius);
    const double rb = std::max(p.min_radius * 0.6, ra * (0.55 + 0.45 * uniform01(rng)));
    const double theta = uniform01(rng) * std::numbers::pi;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const int reach = static_cast<int>(std::ceil(std::max(ra, rb))) + 1;
    for (int y = std::max(0, static_cast<int>(cy) - reach); y < std::min(h, static_cast<int>(cy) + reach + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(cx) - reach); x < std::min(w, static_cast<int>(cx) + reach + 1); ++x) {
        const double u = (x - cx) * ct + (y - cy) * st;
        const double v = -(x - cx) * st + (y - cy) * ct;
        if ((u * u) / (ra * ra) + (v * v) / (rb * rb) <= 1.0) mask(x, y) = kHydrops;
      }
    }
  }

  VirtualSlide slide;
  slide.id = "synth-" + std::to_string(p.seed);
  slide.image = Raster(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Tissue stays below ~185 luminance; hydrops fluid is pale.
      const double lum = mask(x, y) == kHydrops ? std::clamp(228.0 + fluid(y, x), 210.0, 250.0) : std::clamp(tissue(y, x), 25.0, 185.0);
      slide.image(x, y, 0) = to_u8(lum + 18.0);
      slide.image(x, y, 1) = to_u8(lum - 14.0);
      slide.image(x, y, 2) = to_u8(lum + 14.0);
    }
  }
  slide.gt_mask = std::move(mask);
  return slide;
}

std::vector<Eigen::Vector2d> make_pan_path(const VirtualSlide& slide, int vw, int vh, const PanPathParams& params) {
  const double min_x = vw / 2.0 + 1.0;
  const double max_x = slide.image.width() - vw / 2.0 - 1.0;
  const double min_y = vh / 2.0 + 1.0;
  const double max_y = slide.image.height() - vh / 2.0 - 1.0;
  if (max_x <= min_x || max_y <= min_y) throw Error(ErrorCode::ViewportLargerThanSlide, "slide too small for a pan path");

  std::mt19937_64 rng(params.seed);
  Eigen::Vector2d pos(min_x + (max_x - min_x) * uniform01(rng), min_y + (max_y - min_y) * uniform01(rng));
  double heading = 2.0 * std::numbers::pi * uniform01(rng);
  std::vector<Eigen::Vector2d> path{pos};
  for (int i = 1; i < params.frames; ++i) {
    heading += (uniform01(rng) - 0.5) * 0.6;
    const double speed = params.min_step + (params.max_step - params.min_step) * uniform01(rng);
    Eigen::Vector2d next = pos + speed * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    if (next.x() < min_x || next.x() > max_x) {
      heading = std::numbers::pi - heading;
      next.x() = pos.x() + speed * std::cos(heading);
    }
    if (next.y() < min_y || next.y() > max_y) {
      heading = -heading;
      next.y() = pos.y() + speed * std::sin(heading);
    }
    next.x() = std::clamp(next.x(), min_x, max_x);
    next.y() = std::clamp(next.y(), min_y, max_y);
    pos = next;
    path.push_back(pos);
  }
  return path;
}

VirtualSlide load_slide(const std::filesystem::path& image_png, const std::optional<std::filesystem::path>& mask_png,
                        std::string id) {
  VirtualSlide slide;
  slide.image = read_png(image_png);
  slide.id = id.empty() ? image_png.stem().string() : std::move(id);
  if (mask_png) {
    LesionMask mask = read_mask_png(*mask_png);
    if (mask.width() != slide.image.width() || mask.height() != slide.image.height()) {
      throw Error(ErrorCode::DimensionMismatch, "slide mask dims differ from slide image");
    }
    slide.gt_mask = std::move(mask);
  }
  return slide;
}

void save_slide(const VirtualSlide& slide, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_png(dir / "slide.png", slide.image);
  if (slide.gt_mask) write_mask_png(dir / "mask.png", *slide.gt_mask);
}

std::vector<Eigen::Vector2d> load_path_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, "bad path JSON: " + std::string(e.what()));
  }
  if (!j.is_array()) throw Error(ErrorCode::IoError, "path JSON must be a list of [x, y]");
  std::vector<Eigen::Vector2d> centers;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::IoError, "path entries must be [x, y]");
    centers.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return centers;
}

void save_path_json(const std::filesystem::path& path, const std::vector<Eigen::Vector2d>& centers) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : centers) j.push_back({c.x(), c.y()});
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump() << '\n';
}

namespace {

std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.png", index);
  return buf;
}

}  // namespace

void save_frame_sequence(const std::filesystem::path& frames_dir, const std::filesystem::path& truth_json,
                         const std::vector<FrameEvent>& frames) {
  std::filesystem::create_directories(frames_dir);
  nlohmann::json j = nlohmann::json::array();
  const auto base = truth_json.parent_path().empty() ? std::filesystem::path(".") : truth_json.parent_path();
  for (const auto& f : frames) {
    const auto file = frames_dir / frame_file_name(f.index);
    write_png(file, f.pixels);
    j.push_back({{"index", f.index},
                 {"timestamp_ms", f.timestamp_ms},
                 {"file", std::filesystem::relative(file, base).generic_string()},
                 {"x", f.true_placement.x},
                 {"y", f.true_placement.y},
                 {"w", f.true_placement.width},
                 {"h", f.true_placement.height}});
  }
  std::ofstream out(truth_json);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + truth_json.string());
  out << j.dump(1) << '\n';
}

std::vector<FrameEvent> load_frame_sequence(const std::filesystem::path& frames_dir, const std::filesystem::path& truth_json) {
  std::ifstream in(truth_json);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + truth_json.string());
  std::vector<FrameEvent> frames;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    const auto base = truth_json.parent_path();
    for (const auto& e : j) {
      FrameEvent f;
      f.index = e.at("index").get<int>();
      f.timestamp_ms = e.value("timestamp_ms", 0LL);
      f.true_placement = {e.at("x").get<int>(), e.at("y").get<int>(), e.at("w").get<int>(), e.at("h").get<int>()};
      // prefer the frames dir given on the command line, fall back to the recorded path
      auto file = frames_dir / frame_file_name(f.index);
      if (!std::filesystem::exists(file) && e.contains("file")) file = base / e.at("file").get<std::string>();
      f.pixels = read_png(file);
      frames.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, "bad truth JSON: " + std::string(e.what()));
  }
  return frames;
}

}  // namespace vmscope
