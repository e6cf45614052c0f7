#pragma once

#include <string>
#include <vector>

#include "vmscope/affine.hpp"
#include "vmscope/features.hpp"
#include "vmscope/metrics.hpp"
#include "vmscope/registration.hpp"
#include "vmscope/segmentation.hpp"
#include "vmscope/slide_sim.hpp"

namespace vmscope {

enum class MosaicAlgorithm { FeatureMatching, Affine, PhaseCorrelation };

std::string to_string(MosaicAlgorithm algo);
/// Accepts m1 / m2 / m3.
MosaicAlgorithm parse_algorithm(const std::string& s);

/// Placement error threshold on the predicted-vs-true IoU.
inline constexpr double kMosaicErrorIou = 0.9;

struct PairOutcome {
  int prev_index = 0;
  int cur_index = 0;
  double iou = 0.0;    // 0 when the algorithm failed
  bool failed = false; // algorithm raised an error (reported as N/A)
  std::string failure;
  double ms = 0.0;
};

struct MosaicExperimentReport {
  MosaicAlgorithm algorithm = MosaicAlgorithm::PhaseCorrelation;
  int stride = 1;
  int pairs = 0;
  int error_count = 0;  // IoU < 0.9 or algorithm failure
  int na_count = 0;     // algorithm failures only
  double mean_ms = 0.0;
  std::vector<PairOutcome> outcomes;
};

struct MosaicExperimentConfig {
  TranslationConfig translation;
  AffineConfig affine;
  FeatureConfig features;
  MatchConfig matching;
};

/// Registers each consecutive pair after striding, places the second frame
/// relative to the first frame's true rect and scores it against truth.
MosaicExperimentReport run_mosaic_experiment(const std::vector<FrameEvent>& frames, int stride, MosaicAlgorithm algo,
                                             const MosaicExperimentConfig& cfg = {});

/// Relative displacement predicted by one algorithm (throws on failure).
Displacement estimate_displacement(const Raster& prev, const Raster& cur, MosaicAlgorithm algo,
                                   const MosaicExperimentConfig& cfg = {});

enum class EdgeStrategy { Deleted, Unchanged, Zero, Mirror };

std::string to_string(EdgeStrategy s);

struct EdgeSweepRow {
  int width = 0;
  EdgeStrategy strategy = EdgeStrategy::Unchanged;
  MetricsReport pixel;
  MetricsReport lesion;
};

struct EdgeSweepConfig {
  int tile_size = 512;
  double lesion_tau = 0.5;
};

/// Tiles on a fixed grid; per tile and width:
///   Deleted   - drop a w-wide border, upscale to tile size, segment, scale back, score the whole result
///   Unchanged - segment the whole tile, score the middle
///   Zero/Mirror - take the middle, extend it by w with fill only, segment, score the middle
/// Scores sum tp/fp/fn over tiles.
std::vector<EdgeSweepRow> run_edge_sweep(const VirtualSlide& slide, const SegmenterBackend& backend,
                                         const std::vector<int>& widths, const std::vector<EdgeStrategy>& strategies,
                                         const EdgeSweepConfig& cfg = {});

/// Resamples to the backend input dims when it has fixed ones.
LesionMask segment_any_size(const SegmenterBackend& backend, const Raster& image);

}  // namespace vmscope
