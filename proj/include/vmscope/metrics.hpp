#pragma once

#include <string>
#include <vector>

#include "vmscope/image.hpp"
#include "vmscope/lesion_mask.hpp"

namespace vmscope {

struct MetricsReport {
  double iou = 1.0;
  double recall = 1.0;
  double precision = 1.0;
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
};

/// Fills iou/recall/precision from counts. Empty denominators score 1.
MetricsReport report_from_counts(long long tp, long long fp, long long fn);

MetricsReport pixel_metrics(const LesionMask& pred, const LesionMask& gt);

enum class Connectivity { Four = 4, Eight = 8 };

struct ComponentSet {
  /// 0 = background, k = component id (dense, 1..n in first-pixel order).
  Plane<int> labels;
  std::vector<long long> areas;  // index k-1
  std::vector<Rect> bounds;      // index k-1

  int count() const { return static_cast<int>(areas.size()); }
};

/// Union-find labelling of hydrops pixels.
ComponentSet connected_components(const LesionMask& mask, Connectivity connectivity = Connectivity::Eight);

struct LesionMatch {
  int pred_id = 0;
  int gt_id = 0;
  double iou = 0.0;
};

struct LesionMatchReport {
  std::vector<LesionMatch> matches;
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;
};

/// Greedy one-to-one matching by descending pair IoU (ties: lower pred id,
/// then lower gt id); only pairs with IoU >= tau are kept.
LesionMatchReport match_lesions(const ComponentSet& pred, const ComponentSet& gt, double tau = 0.5);

MetricsReport lesion_metrics(const LesionMask& pred, const LesionMask& gt, double tau = 0.5);

/// Counts summed across tiles, scores recomputed from the totals.
MetricsReport accumulate(const MetricsReport& a, const MetricsReport& b);

/// JSON object {"level", "iou", "recall", "precision", "tp", "fp", "fn"}.
std::string to_json(const MetricsReport& report, const std::string& level);
std::string csv_header();
/// level,iou,recall,precision,tp,fp,fn
std::string to_csv_row(const MetricsReport& report, const std::string& level);

}  // namespace vmscope
