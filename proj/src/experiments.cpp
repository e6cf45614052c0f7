#include "vmscope/experiments.hpp"

#include <chrono>
#include <cmath>

#include <Eigen/Geometry>

namespace vmscope {

std::string to_string(MosaicAlgorithm algo) {
  switch (algo) {
    case MosaicAlgorithm::FeatureMatching: return "m1";
    case MosaicAlgorithm::Affine: return "m2";
    case MosaicAlgorithm::PhaseCorrelation: return "m3";
  }
  return "?";
}

MosaicAlgorithm parse_algorithm(const std::string& s) {
  if (s == "m1") return MosaicAlgorithm::FeatureMatching;
  if (s == "m2") return MosaicAlgorithm::Affine;
  if (s == "m3") return MosaicAlgorithm::PhaseCorrelation;
  throw Error(ErrorCode::InvalidArgument, "algorithm must be m1, m2 or m3");
}

std::string to_string(EdgeStrategy s) {
  switch (s) {
    case EdgeStrategy::Deleted: return "deleted";
    case EdgeStrategy::Unchanged: return "unchanged";
    case EdgeStrategy::Zero: return "zero";
    case EdgeStrategy::Mirror: return "mirror";
  }
  return "?";
}

namespace {

// Where the current frame's centre lands in the previous frame, minus the
// centre itself, rounded to whole pixels.
Displacement centre_shift(const Eigen::Vector2d& mapped_centre, int w, int h) {
  return {static_cast<int>(std::lround(mapped_centre.x() - w / 2.0)),
          static_cast<int>(std::lround(mapped_centre.y() - h / 2.0))};
}

}  // namespace

Displacement estimate_displacement(const Raster& prev, const Raster& cur, MosaicAlgorithm algo, const MosaicExperimentConfig& cfg) {
  const Eigen::Vector2d centre(cur.width() / 2.0, cur.height() / 2.0);
  switch (algo) {
    case MosaicAlgorithm::PhaseCorrelation:
      return register_translation(prev, cur, cfg.translation).displacement;
    case MosaicAlgorithm::Affine: {
      const AffineResult r = affine_register(prev, cur, cfg.affine);
      return centre_shift(r.transform.leftCols<2>() * centre + r.transform.col(2), cur.width(), cur.height());
    }
    case MosaicAlgorithm::FeatureMatching: {
      const Raster gp = to_luminance(prev);
      const Raster gc = to_luminance(cur);
      const HomographyEstimate est = match_and_estimate(detect_and_describe(gp, cfg.features), detect_and_describe(gc, cfg.features),
                                                        cfg.matching);
      const Eigen::Vector3d mapped = est.homography * centre.homogeneous();
      if (std::abs(mapped.z()) < 1e-12) throw Error(ErrorCode::Degenerate, "homography sends the centre to infinity");
      return centre_shift(mapped.hnormalized(), cur.width(), cur.height());
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm");
}

MosaicExperimentReport run_mosaic_experiment(const std::vector<FrameEvent>& frames, int stride, MosaicAlgorithm algo,
                                             const MosaicExperimentConfig& cfg) {
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (frames.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two frames");

  MosaicExperimentReport report;
  report.algorithm = algo;
  report.stride = stride;
  double total_ms = 0.0;
  for (std::size_t i = static_cast<std::size_t>(stride); i < frames.size(); i += static_cast<std::size_t>(stride)) {
    const FrameEvent& prev = frames[i - static_cast<std::size_t>(stride)];
    const FrameEvent& cur = frames[i];
    PairOutcome outcome;
    outcome.prev_index = prev.index;
    outcome.cur_index = cur.index;

    const auto start = std::chrono::steady_clock::now();
    try {
      const Displacement d = estimate_displacement(prev.pixels, cur.pixels, algo, cfg);
      outcome.iou = placement_iou(prev.true_placement.translated(d.dx, d.dy), cur.true_placement);
    } catch (const Error& e) {
      outcome.failed = true;
      outcome.failure = std::string(to_string(e.code()));
    }
    outcome.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    total_ms += outcome.ms;
    ++report.pairs;
    if (outcome.failed) ++report.na_count;
    if (outcome.failed || outcome.iou < kMosaicErrorIou) ++report.error_count;
    report.outcomes.push_back(std::move(outcome));
  }
  report.mean_ms = report.pairs > 0 ? total_ms / report.pairs : 0.0;
  return report;
}

LesionMask segment_any_size(const SegmenterBackend& backend, const Raster& image) {
  const int iw = backend.input_width();
  const int ih = backend.input_height();
  if (iw > 0 && ih > 0 && (iw != image.width() || ih != image.height())) {
    return resample_nearest(segment(backend, resample(image, iw, ih)), image.width(), image.height());
  }
  return segment(backend, image);
}

std::vector<EdgeSweepRow> run_edge_sweep(const VirtualSlide& slide, const SegmenterBackend& backend,
                                         const std::vector<int>& widths, const std::vector<EdgeStrategy>& strategies,
                                         const EdgeSweepConfig& cfg) {
  if (!slide.gt_mask) throw Error(ErrorCode::MissingGroundTruth, "edge sweep needs a ground-truth mask");
  const int t = cfg.tile_size;
  if (t < 1 || t > slide.image.width() || t > slide.image.height()) {
    throw Error(ErrorCode::InvalidArgument, "tile size does not fit the slide");
  }
  for (int w : widths) {
    if (w < 0 || 2 * w >= t) throw Error(ErrorCode::InvalidArgument, "edge width " + std::to_string(w) + " leaves no middle");
  }

  std::vector<EdgeSweepRow> rows;
  for (int w : widths)
    for (EdgeStrategy s : strategies) rows.push_back({w, s, report_from_counts(0, 0, 0), report_from_counts(0, 0, 0)});

  for (int ty = 0; ty + t <= slide.image.height(); ty += t) {
    for (int tx = 0; tx + t <= slide.image.width(); tx += t) {
      const Rect tile_rect{tx, ty, t, t};
      const Raster tile = crop_region(slide.image, tile_rect);
      const LesionMask tile_gt = crop_mask(*slide.gt_mask, tile_rect);
      std::optional<LesionMask> unchanged;

      for (EdgeSweepRow& row : rows) {
        const int w = row.width;
        const Rect middle{w, w, t - 2 * w, t - 2 * w};
        const LesionMask gt_mid = crop_mask(tile_gt, middle);
        LesionMask pred;
        switch (row.strategy) {
          case EdgeStrategy::Unchanged:
            if (!unchanged) unchanged = segment_any_size(backend, tile);
            pred = crop_mask(*unchanged, middle);
            break;
          case EdgeStrategy::Deleted: {
            const Raster grown = resample(crop_region(tile, middle), t, t);
            pred = resample_nearest(segment_any_size(backend, grown), middle.width, middle.height);
            break;
          }
          case EdgeStrategy::Zero:
          case EdgeStrategy::Mirror: {
            const FillStrategy fill = row.strategy == EdgeStrategy::Zero ? FillStrategy::Zero : FillStrategy::Mirror;
            const ExtendedFrame ext = extend_frame(crop_region(tile, middle), w, fill);
            pred = crop_back(segment_any_size(backend, ext.pixels), w);
            break;
          }
        }
        row.pixel = accumulate(row.pixel, pixel_metrics(pred, gt_mid));
        row.lesion = accumulate(row.lesion, lesion_metrics(pred, gt_mid, cfg.lesion_tau));
      }
    }
  }
  return rows;
}

}  // namespace vmscope
