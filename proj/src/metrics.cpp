#include "vmscope/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace vmscope {

namespace {

void require_same_dims(const LesionMask& a, const LesionMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw Error(ErrorCode::DimensionMismatch, "mask dims differ");
}

double ratio_or_one(long long num, long long den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int v) {
    while (parent_[static_cast<std::size_t>(v)] != v) {
      parent_[static_cast<std::size_t>(v)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(v)])];
      v = parent_[static_cast<std::size_t>(v)];
    }
    return v;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller root wins so roots stay the earliest provisional label.
    if (b < a) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

MetricsReport report_from_counts(long long tp, long long fp, long long fn) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.iou = ratio_or_one(tp, tp + fp + fn);
  r.recall = ratio_or_one(tp, tp + fn);
  r.precision = ratio_or_one(tp, tp + fp);
  return r;
}

MetricsReport pixel_metrics(const LesionMask& pred, const LesionMask& gt) {
  require_same_dims(pred, gt);
  const auto p = pred.labels() == kHydrops;
  const auto g = gt.labels() == kHydrops;
  const long long tp = (p && g).count();
  const long long fp = (p && !g).count();
  const long long fn = (!p && g).count();
  return report_from_counts(tp, fp, fn);
}

ComponentSet connected_components(const LesionMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  Plane<int> provisional = Plane<int>::Constant(h, w, -1);
  DisjointSet sets;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.is_lesion(x, y)) continue;
      int label = -1;
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w) return;
        const int other = provisional(ny, nx);
        if (other < 0) return;
        if (label < 0) {
          label = other;
        } else {
          sets.unite(label, other);
        }
      };
      visit(x - 1, y);
      visit(x, y - 1);
      if (connectivity == Connectivity::Eight) {
        visit(x - 1, y - 1);
        visit(x + 1, y - 1);
      }
      provisional(y, x) = label < 0 ? sets.make() : label;
    }
  }

  // Dense ids in order of each component's first pixel (row-major).
  ComponentSet out;
  out.labels = Plane<int>::Zero(h, w);
  std::unordered_map<int, int> root_to_id;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (provisional(y, x) < 0) continue;
      const int root = sets.find(provisional(y, x));
      auto [it, inserted] = root_to_id.emplace(root, static_cast<int>(root_to_id.size()) + 1);
      const int id = it->second;
      if (inserted) {
        out.areas.push_back(0);
        out.bounds.push_back({x, y, 1, 1});
      }
      out.labels(y, x) = id;
      const auto k = static_cast<std::size_t>(id - 1);
      ++out.areas[k];
      out.bounds[k] = bounding_union(out.bounds[k], {x, y, 1, 1});
    }
  }
  return out;
}

LesionMatchReport match_lesions(const ComponentSet& pred, const ComponentSet& gt, double tau) {
  if (pred.labels.rows() != gt.labels.rows() || pred.labels.cols() != gt.labels.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "component sets cover different dims");
  }
  // Intersections keyed by (pred, gt).
  std::unordered_map<long long, long long> inter;
  const long long stride = static_cast<long long>(gt.count()) + 1;
  for (Eigen::Index i = 0; i < pred.labels.size(); ++i) {
    const int p = pred.labels.data()[i];
    const int g = gt.labels.data()[i];
    if (p > 0 && g > 0) ++inter[static_cast<long long>(p) * stride + g];
  }

  std::vector<LesionMatch> pairs;
  pairs.reserve(inter.size());
  for (const auto& [key, n] : inter) {
    const int p = static_cast<int>(key / stride);
    const int g = static_cast<int>(key % stride);
    const long long uni = pred.areas[static_cast<std::size_t>(p - 1)] + gt.areas[static_cast<std::size_t>(g - 1)] - n;
    pairs.push_back({p, g, static_cast<double>(n) / static_cast<double>(uni)});
  }
  std::sort(pairs.begin(), pairs.end(), [](const LesionMatch& a, const LesionMatch& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred_id != b.pred_id) return a.pred_id < b.pred_id;
    return a.gt_id < b.gt_id;
  });

  LesionMatchReport report;
  std::vector<bool> pred_used(static_cast<std::size_t>(pred.count()) + 1, false);
  std::vector<bool> gt_used(static_cast<std::size_t>(gt.count()) + 1, false);
  for (const LesionMatch& m : pairs) {
    if (m.iou < tau) break;
    if (pred_used[static_cast<std::size_t>(m.pred_id)] || gt_used[static_cast<std::size_t>(m.gt_id)]) continue;
    pred_used[static_cast<std::size_t>(m.pred_id)] = true;
    gt_used[static_cast<std::size_t>(m.gt_id)] = true;
    report.matches.push_back(m);
  }
  for (int p = 1; p <= pred.count(); ++p)
    if (!pred_used[static_cast<std::size_t>(p)]) report.unmatched_pred.push_back(p);
  for (int g = 1; g <= gt.count(); ++g)
    if (!gt_used[static_cast<std::size_t>(g)]) report.unmatched_gt.push_back(g);
  return report;
}

MetricsReport lesion_metrics(const LesionMask& pred, const LesionMask& gt, double tau) {
  require_same_dims(pred, gt);
  const LesionMatchReport m = match_lesions(connected_components(pred), connected_components(gt), tau);
  return report_from_counts(static_cast<long long>(m.matches.size()), static_cast<long long>(m.unmatched_pred.size()),
                            static_cast<long long>(m.unmatched_gt.size()));
}

MetricsReport accumulate(const MetricsReport& a, const MetricsReport& b) {
  return report_from_counts(a.tp + b.tp, a.fp + b.fp, a.fn + b.fn);
}

std::string to_json(const MetricsReport& r, const std::string& level) {
  nlohmann::ordered_json j;
  j["level"] = level;
  j["iou"] = r.iou;
  j["recall"] = r.recall;
  j["precision"] = r.precision;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  return j.dump();
}

std::string csv_header() { return "level,iou,recall,precision,tp,fp,fn"; }

std::string to_csv_row(const MetricsReport& r, const std::string& level) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << level << ',' << r.iou << ',' << r.recall << ',' << r.precision << ',' << r.tp << ',' << r.fp << ','
      << r.fn;
  return out.str();
}

}  // namespace vmscope
