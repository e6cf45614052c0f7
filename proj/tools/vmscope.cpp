// vmscope command line: offline simulation, benchmarks and the streaming server.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <regex>

#include <CLI11.hpp>
#include <json.hpp>

#include "vmscope/experiments.hpp"
#include "vmscope/pipeline.hpp"
#include "vmscope/png_io.hpp"
#include "vmscope/server.hpp"
#include "vmscope/slide_sim.hpp"

namespace fs = std::filesystem;
using namespace vmscope;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

// "40..160:20", "40..160" (step 1) or a single number
std::vector<int> parse_widths(const std::string& spec) {
  static const std::regex range(R"((\d+)\.\.(\d+)(?::(\d+))?)");
  std::smatch m;
  if (std::regex_match(spec, m, range)) {
    const int a = std::stoi(m[1]), b = std::stoi(m[2]);
    const int step = m[3].matched ? std::stoi(m[3]) : 1;
    if (step < 1 || b < a) throw Error(ErrorCode::InvalidArgument, "bad width range '" + spec + "'");
    std::vector<int> out;
    for (int w = a; w <= b; w += step) out.push_back(w);
    return out;
  }
  if (std::regex_match(spec, std::regex(R"(\d+)"))) return {std::stoi(spec)};
  throw Error(ErrorCode::InvalidArgument, "widths must look like a..b:step, got '" + spec + "'");
}

std::pair<int, int> parse_dims(const std::string& spec) {
  std::smatch m;
  if (!std::regex_match(spec, m, std::regex(R"((\d+)[xX](\d+))"))) {
    throw Error(ErrorCode::InvalidArgument, "dims must look like WxH, got '" + spec + "'");
  }
  return {std::stoi(m[1]), std::stoi(m[2])};
}

struct SimulateArgs {
  std::string slide, mask, path, backend, strategy, out, config, model;
  int edge_width = -1;
  bool distort = false;
};

int run_simulate(const SimulateArgs& a) {
  nlohmann::json cfg_json = a.config.empty() ? nlohmann::json::object() : read_json_file(a.config);
  if (!a.backend.empty()) cfg_json["backend"] = a.backend;
  if (!a.strategy.empty()) cfg_json["strategy"] = a.strategy;
  if (a.edge_width >= 0) cfg_json["edge_width"] = a.edge_width;
  if (!a.model.empty()) cfg_json["model_path"] = a.model;

  VirtualSlide slide = load_slide(a.slide, a.mask.empty() ? std::nullopt : std::optional<fs::path>(a.mask));
  SessionConfig cfg = parse_session_config(cfg_json);

  PathOptions opts;
  opts.fps = cfg.fps;
  opts.distort = a.distort;
  const std::vector<FrameEvent> frames = generate_path_frames(slide, load_path_json(a.path), opts);
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "path has no points");
  cfg.slide_origin = std::array<int, 2>{frames.front().true_placement.x, frames.front().true_placement.y};

  std::shared_ptr<const LesionMask> mask;
  if (slide.gt_mask) mask = std::make_shared<const LesionMask>(*slide.gt_mask);
  Session session(slide.id, cfg, make_backend(cfg, mask));

  const fs::path out(a.out);
  fs::create_directories(out / "overlays");
  save_frame_sequence(out / "frames", out / "truth.json", frames);
  std::ofstream timings = open_out(out / "timings.csv");
  timings << "index,status,x,y,register_ms,extend_ms,segment_ms,compose_ms,total_ms\n";
  int degraded = 0;
  for (const FrameEvent& f : frames) {
    const PipelineOutputs r = session.step(f.pixels);
    char name[32];
    std::snprintf(name, sizeof name, "overlay_%04d.png", r.index);
    write_png(out / "overlays" / name, r.labeled_view);
    const bool ok = r.status == RegistrationStatus::Ok;
    degraded += ok ? 0 : 1;
    timings << r.index << ',' << (ok ? "ok" : "degraded") << ',' << r.placement.x << ',' << r.placement.y << ','
            << r.timings.register_ms << ',' << r.timings.extend_ms << ',' << r.timings.segment_ms << ','
            << r.timings.compose_ms << ',' << r.timings.total_ms() << '\n';
  }
  session.export_canvases(out);
  write_png(out / "lesion_map_view.png", render_lesion_map(session.lesion_map()));

  double total = 0;
  for (const auto& t : session.timing_log()) total += t.total_ms();
  std::cout << "frames " << frames.size() << ", degraded " << degraded << ", mean step " << total / frames.size()
            << " ms\n";
  return 0;
}

int run_mosaic_bench(const std::string& frames_dir, const std::string& truth, int stride, const std::string& algo,
                     const std::string& out_csv) {
  const auto frames = load_frame_sequence(frames_dir, truth);
  const auto report = run_mosaic_experiment(frames, stride, parse_algorithm(algo));

  std::ofstream out = open_out(out_csv);
  out << "algo,stride,pairs,error_count,na_count,mean_ms\n"
      << algo << ',' << stride << ',' << report.pairs << ',' << report.error_count << ',' << report.na_count << ','
      << report.mean_ms << '\n';
  fs::path pairs_path(out_csv);
  pairs_path.replace_filename(pairs_path.stem().string() + "_pairs.csv");
  std::ofstream pairs = open_out(pairs_path);
  pairs << "prev,cur,iou,error,failure,ms\n";
  for (const auto& p : report.outcomes) {
    pairs << p.prev_index << ',' << p.cur_index << ',' << p.iou << ',' << (p.failed || p.iou < kMosaicErrorIou ? 1 : 0)
          << ',' << p.failure << ',' << p.ms << '\n';
  }
  std::cout << algo << " stride " << stride << ": " << report.error_count << " errors (" << report.na_count << " N/A) / "
            << report.pairs << " pairs, " << report.mean_ms << " ms/pair\n";
  return 0;
}

int run_edge_sweep_cmd(const std::string& slide_png, const std::string& mask_png, const std::string& widths,
                       const std::string& backend_name, const std::string& config, int tile, const std::string& out_csv) {
  VirtualSlide slide = load_slide(slide_png, fs::path(mask_png));
  nlohmann::json cfg_json = config.empty() ? nlohmann::json::object() : read_json_file(config);
  cfg_json["backend"] = backend_name;
  const SessionConfig cfg = parse_session_config(cfg_json);
  const auto backend = make_backend(cfg, std::make_shared<const LesionMask>(*slide.gt_mask));

  EdgeSweepConfig sweep;
  sweep.tile_size = tile;
  const auto rows = run_edge_sweep(slide, *backend, parse_widths(widths),
                                   {EdgeStrategy::Deleted, EdgeStrategy::Unchanged, EdgeStrategy::Zero, EdgeStrategy::Mirror},
                                   sweep);
  std::ofstream out = open_out(out_csv);
  out << "width,strategy," << csv_header() << '\n';
  for (const auto& r : rows) {
    out << r.width << ',' << to_string(r.strategy) << ',' << to_csv_row(r.pixel, "pixel") << '\n';
    out << r.width << ',' << to_string(r.strategy) << ',' << to_csv_row(r.lesion, "lesion") << '\n';
  }
  std::cout << "wrote " << rows.size() << " (width, strategy) rows to " << out_csv << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vmscope: virtual-microscope mosaicking and lesion segmentation"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run the live pipeline over a scripted pan of a slide");
  simulate->add_option("--slide", sim.slide, "slide PNG")->required()->check(CLI::ExistingFile);
  simulate->add_option("--mask", sim.mask, "ground-truth mask PNG")->check(CLI::ExistingFile);
  simulate->add_option("--path", sim.path, "JSON list of [x, y] viewport centres")->required()->check(CLI::ExistingFile);
  simulate->add_option("--backend", sim.backend, "oracle | threshold | external");
  simulate->add_option("--edge-width", sim.edge_width, "edge extension width in pixels");
  simulate->add_option("--strategy", sim.strategy, "zero | mirror");
  simulate->add_option("--model", sim.model, "ONNX model for the external backend");
  simulate->add_option("--config", sim.config, "session config JSON; flags override it")->check(CLI::ExistingFile);
  simulate->add_flag("--distort", sim.distort, "apply rolling-shutter skew");
  simulate->add_option("--out", sim.out, "output directory")->required();

  std::string frames_dir, truth, algo = "m3", bench_out;
  int stride = 1;
  auto* bench = app.add_subcommand("mosaic-bench", "pairwise placement errors of one registration algorithm");
  bench->add_option("--frames", frames_dir, "directory of frame_NNNN.png")->required();
  bench->add_option("--truth", truth, "truth JSON written by simulate")->required()->check(CLI::ExistingFile);
  bench->add_option("--stride", stride, "frame stride")->check(CLI::PositiveNumber);
  bench->add_option("--algo", algo, "m1 | m2 | m3")->check(CLI::IsMember({"m1", "m2", "m3"}));
  bench->add_option("--out", bench_out, "summary CSV (per-pair rows go next to it)")->required();

  std::string sw_slide, sw_mask, sw_widths = "0..160:20", sw_backend = "threshold", sw_config, sw_out;
  int sw_tile = 512;
  auto* sweep = app.add_subcommand("edge-sweep", "segmentation IoU against edge width and fill strategy");
  sweep->add_option("--slide", sw_slide, "slide PNG")->required()->check(CLI::ExistingFile);
  sweep->add_option("--mask", sw_mask, "ground-truth mask PNG")->required()->check(CLI::ExistingFile);
  sweep->add_option("--widths", sw_widths, "a..b:step");
  sweep->add_option("--backend", sw_backend, "oracle | threshold | external");
  sweep->add_option("--config", sw_config, "backend config JSON")->check(CLI::ExistingFile);
  sweep->add_option("--tile", sw_tile, "tile side in pixels");
  sweep->add_option("--out", sw_out, "CSV")->required();

  SynthSlideParams synth;
  std::string synth_dims = "2048x2048", synth_out;
  auto* synth_cmd = app.add_subcommand("synth-slide", "write a synthetic slide and its ground-truth mask");
  synth_cmd->add_option("--seed", synth.seed, "RNG seed");
  synth_cmd->add_option("--dims", synth_dims, "WxH");
  synth_cmd->add_option("--blobs", synth.blobs, "number of lesion blobs");
  synth_cmd->add_option("--out", synth_out, "output directory (slide.png, mask.png)")->required();
  int synth_path_frames = 0;
  synth_cmd->add_option("--path-frames", synth_path_frames, "also write path.json with this many pan steps");

  int port = 8765;
  std::string slide_dir, export_dir = "vmscope_exports", bind = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "streaming API over WebSocket");
  serve->add_option("--port", port, "TCP port (0 picks one)");
  serve->add_option("--bind", bind, "listen address");
  serve->add_option("--slide-dir", slide_dir, "directory of slides addressable by slide_id")->check(CLI::ExistingDirectory);
  serve->add_option("--export-dir", export_dir, "where close_session writes full canvases");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(sim);
    if (*bench) return run_mosaic_bench(frames_dir, truth, stride, algo, bench_out);
    if (*sweep) return run_edge_sweep_cmd(sw_slide, sw_mask, sw_widths, sw_backend, sw_config, sw_tile, sw_out);
    if (*synth_cmd) {
      std::tie(synth.width, synth.height) = parse_dims(synth_dims);
      const VirtualSlide slide = synthesize_slide(synth);
      save_slide(slide, synth_out);
      if (synth_path_frames > 0) {
        PanPathParams pp;
        pp.frames = synth_path_frames;
        pp.seed = synth.seed + 1;
        save_path_json(fs::path(synth_out) / "path.json",
                       make_pan_path(slide, kDefaultViewportWidth, kDefaultViewportHeight, pp));
      }
      std::cout << "wrote " << synth_out << '\n';
      return 0;
    }
    if (*serve) {
      ProtocolOptions opts;
      if (!slide_dir.empty()) opts.slide_dir = slide_dir;
      opts.export_dir = export_dir;
      StreamingServer server(opts);
      const auto bound = server.start(static_cast<std::uint16_t>(port), bind);
      std::cout << "listening on ws://" << bind << ':' << bound << std::endl;
      server.wait();
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "vmscope: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
