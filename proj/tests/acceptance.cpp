// Acceptance run: one PASS/FAIL line per primary criterion, exit 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "support.hpp"
#include "vmscope/experiments.hpp"
#include "vmscope/metrics.hpp"
#include "vmscope/mosaic.hpp"
#include "vmscope/pipeline.hpp"
#include "vmscope/registration.hpp"
#include "vmscope/slide_sim.hpp"

using namespace vmscope;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Pinned tolerances.
constexpr double kShiftRecoveryRate = 0.99;
constexpr double kShiftSuiteSeconds = 60.0;
constexpr double kDistortedErrorRate = 0.05;
constexpr double kStepBudgetMs = 500.0;
constexpr double kMirrorDeletedGap = 0.02;
constexpr double kStraddleFraction = 0.30;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& run) {
  const auto t = Clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t));
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool overlap_ok(int n, int dx, int dy) {
  return static_cast<double>(n - std::abs(dx)) * (n - std::abs(dy)) >= 0.4 * n * n;
}

// ---------------------------------------------------------------- shift recovery

double brute_mad(const Raster& prev, const Raster& cur, int dx, int dy) {
  long long sum = 0, area = 0;
  for (int y = 0; y < prev.height(); ++y)
    for (int x = 0; x < prev.width(); ++x) {
      const int cx = x - dx, cy = y - dy;
      if (cx < 0 || cy < 0 || cx >= cur.width() || cy >= cur.height()) continue;
      sum += std::abs(prev(x, y) - cur(cx, cy));
      ++area;
    }
  return static_cast<double>(sum) / static_cast<double>(area);
}

Outcome shift_recovery() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);

  // One crop-shift pair: two 256x256 windows of the same source, offset by a
  // random shift with at least 40% overlap.
  auto run_pairs = [&](const Raster& src, int count) {
    std::uniform_int_distribution<int> shift(-153, 153), pos(160, src.width() - 256 - 160);
    int hits = 0;
    for (int i = 0; i < count;) {
      const int dx = shift(rng), dy = shift(rng);
      if (!overlap_ok(256, dx, dy)) continue;
      const int x = pos(rng), y = pos(rng);
      const RegistrationResult r =
          register_translation(crop_region(src, {x, y, 256, 256}), crop_region(src, {x + dx, y + dy, 256, 256}));
      const bool hit = r.displacement == Displacement{dx, dy};
      hits += hit;
      if (!hit && std::getenv("VMSCOPE_ACCEPTANCE_VERBOSE"))
        std::printf("  miss: true (%d,%d) got (%d,%d) peak %.3f mad %.1f\n", dx, dy, r.displacement.dx, r.displacement.dy, r.peak_value,
                    r.overlap_mad);
      ++i;
    }
    return hits;
  };

  // 1000 pairs over ten seeded band-limited textures
  int exact = 0;
  const int pairs = 1000;
  for (std::uint64_t s = 0; s < 10; ++s) exact += run_pairs(testing::random_texture(1024, 1024, 100 + s, 2.5), pairs / 10);

  // informational: same protocol on the blob slide generator (low-frequency tissue)
  int slide_exact = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    SynthSlideParams p;
    p.width = 1024;
    p.height = 1024;
    p.blobs = 30;
    p.seed = 100 + s;
    slide_exact += run_pairs(synthesize_slide(p).image, 100);
  }

  // 100 64x64 instances against the exhaustive MAD search
  int agree = 0;
  std::uniform_int_distribution<int> small(-25, 25);
  for (int i = 0; i < 100;) {
    const int dx = small(rng), dy = small(rng);
    if (!overlap_ok(64, dx, dy)) continue;
    const Raster big = testing::random_texture(128, 128, 7000 + static_cast<std::uint64_t>(i), 1.0);
    const Raster prev = crop_region(big, {32, 32, 64, 64});
    const Raster cur = crop_region(big, {32 + dx, 32 + dy, 64, 64});
    double best = 1e300;
    Displacement oracle;
    for (int oy = -38; oy <= 38; ++oy)
      for (int ox = -38; ox <= 38; ++ox) {
        if (!overlap_ok(64, ox, oy)) continue;
        const double mad = brute_mad(prev, cur, ox, oy);
        if (mad < best) {
          best = mad;
          oracle = {ox, oy};
        }
      }
    agree += register_translation(prev, cur).displacement == oracle;
    ++i;
  }

  const double secs = seconds_since(start);
  const double rate = static_cast<double>(exact) / pairs;
  return {rate >= kShiftRecoveryRate && agree == 100 && secs < kShiftSuiteSeconds,
          fmt("256x256 exact %d/%d (%.1f%%, need >= %.0f%%); 64x64 oracle agreement %d/100; %.1f s (< %.0f s); blob-slide texture %d/500 "
              "(informational)",
              exact, pairs, 100 * rate, 100 * kShiftRecoveryRate, agree, secs, kShiftSuiteSeconds, slide_exact)};
}

// ---------------------------------------------------------------- mosaic experiment

Outcome mosaic_experiment() {
  SynthSlideParams p;  // 2048x2048 default slide
  p.seed = 1;
  const VirtualSlide slide = synthesize_slide(p);
  PathOptions po;
  const auto path = make_pan_path(slide, po.viewport_width, po.viewport_height, {259, 5.0, 30.0, 7});
  const auto frames = generate_path_frames(slide, path, po);

  const auto s1 = run_mosaic_experiment(frames, 1, MosaicAlgorithm::PhaseCorrelation);
  const auto s5 = run_mosaic_experiment(frames, 5, MosaicAlgorithm::PhaseCorrelation);

  // rolling shutter with per-frame motion |v| <= 10 px
  PathOptions dpo = po;
  dpo.distort = true;
  const auto slow = make_pan_path(slide, po.viewport_width, po.viewport_height, {259, 2.0, 10.0, 8});
  const auto distorted = generate_path_frames(slide, slow, dpo);
  int max_v = 0;
  for (std::size_t i = 1; i < distorted.size(); ++i) {
    max_v = std::max({max_v, std::abs(distorted[i].true_placement.x - distorted[i - 1].true_placement.x),
                      std::abs(distorted[i].true_placement.y - distorted[i - 1].true_placement.y)});
  }
  const auto sd = run_mosaic_experiment(distorted, 1, MosaicAlgorithm::PhaseCorrelation);
  const double distorted_rate = static_cast<double>(sd.error_count) / sd.pairs;

  // large motion: 30-60 px per frame, sampled every fifth frame
  const auto fast = make_pan_path(slide, po.viewport_width, po.viewport_height, {101, 30.0, 60.0, 9});
  const auto fast_frames = generate_path_frames(slide, fast, po);
  const auto m2 = run_mosaic_experiment(fast_frames, 5, MosaicAlgorithm::Affine);
  int did_not_converge = 0;
  for (const auto& o : m2.outcomes) did_not_converge += o.failure == "DidNotConverge";

  const bool pass = s1.error_count == 0 && s5.error_count == 0 && max_v <= 10 && distorted_rate <= kDistortedErrorRate &&
                    did_not_converge >= 1;
  return {pass, fmt("M3 stride1 %d/%d errors (%.0f ms/pair), stride5 %d/%d errors; distorted |v|<=%d: %d/%d errors (%.1f%%, need <= "
                    "%.0f%%); M2 fast stride5 DidNotConverge %d/%d (need >= 1)",
                    s1.error_count, s1.pairs, s1.mean_ms, s5.error_count, s5.pairs, max_v, sd.error_count, sd.pairs,
                    100 * distorted_rate, 100 * kDistortedErrorRate, did_not_converge, m2.pairs)};
}

// ---------------------------------------------------------------- throughput

Outcome throughput() {
  SynthSlideParams p;
  p.seed = 3;
  const VirtualSlide slide = synthesize_slide(p);
  PathOptions po;
  const auto frames = generate_path_frames(slide, make_pan_path(slide, 640, 480, {60, 5.0, 30.0, 4}), po);
  SessionConfig cfg;  // threshold backend, w = 120, mirror
  Session s("bench", cfg, make_backend(cfg, nullptr));
  double total = 0, reg = 0;
  for (const auto& f : frames) {
    const auto t = Clock::now();
    const PipelineOutputs out = s.step(f.pixels);
    total += seconds_since(t) * 1000.0;
    reg += out.timings.register_ms;
  }
  const double mean = total / static_cast<double>(frames.size());
  return {mean < kStepBudgetMs, fmt("mean step %.1f ms over %zu frames at 640x480 (budget %.0f ms); registration %.1f ms/frame (informational)",
                                    mean, frames.size(), kStepBudgetMs, reg / static_cast<double>(frames.size()))};
}

// ---------------------------------------------------------------- edge ordering

Outcome edge_ordering() {
  const std::vector<int> widths{0, 40, 80, 120, 160};
  const int tile = 512;
  SynthSlideParams p;
  p.width = 4096;
  p.height = 4096;
  p.blobs = 2500;
  p.min_radius = 6;
  p.max_radius = 18;
  p.seed = 1;
  p.straddle_fraction = 0.3;
  p.straddle_period = tile;
  for (int w : widths) {
    p.straddle_offsets.push_back(w);
    if (w > 0) p.straddle_offsets.push_back(tile - w);
  }
  const VirtualSlide slide = synthesize_slide(p);

  // A lesion straddles when some tile or middle-region cut passes through its box.
  const ComponentSet blobs = connected_components(*slide.gt_mask);
  auto crosses = [&](int lo, int hi) {
    for (int o : p.straddle_offsets)
      for (int base = 0; base <= 4096; base += tile)
        if (lo < base + o && base + o < hi) return true;
    return false;
  };
  int straddling = 0;
  for (const Rect& b : blobs.bounds) straddling += crosses(b.x, b.right()) || crosses(b.y, b.bottom());
  const double straddle = static_cast<double>(straddling) / blobs.count();

  const ThresholdBackend backend({200, Polarity::Bright, 60});
  EdgeSweepConfig cfg;
  cfg.tile_size = tile;
  const auto rows = run_edge_sweep(slide, backend, widths,
                                   {EdgeStrategy::Deleted, EdgeStrategy::Unchanged, EdgeStrategy::Zero, EdgeStrategy::Mirror}, cfg);
  std::map<std::pair<int, EdgeStrategy>, double> lesion;
  for (const auto& r : rows) lesion[{r.width, r.strategy}] = r.lesion.iou;

  bool mirror_ge_zero = true;
  std::string curve;
  for (int w : widths) {
    mirror_ge_zero &= lesion[{w, EdgeStrategy::Mirror}] >= lesion[{w, EdgeStrategy::Zero}];
    curve += fmt(" w%d M%.4f/Z%.4f/D%.4f", w, lesion[{w, EdgeStrategy::Mirror}], lesion[{w, EdgeStrategy::Zero}],
                 lesion[{w, EdgeStrategy::Deleted}]);
  }
  bool zero_decreasing = true;
  for (std::size_t i = 2; i < widths.size(); ++i)
    zero_decreasing &= lesion[{widths[i], EdgeStrategy::Zero}] < lesion[{widths[i - 1], EdgeStrategy::Zero}];
  const double gap = std::abs(lesion[{120, EdgeStrategy::Mirror}] - lesion[{120, EdgeStrategy::Deleted}]);

  const bool pass = straddle >= kStraddleFraction && mirror_ge_zero && zero_decreasing && gap <= kMirrorDeletedGap;
  return {pass, fmt("straddling %.1f%% of %d lesions; mirror>=zero %s; zero strictly decreasing 40..160 %s; |mirror-deleted| at 120 = "
                    "%.2f pts (<= %.0f);",
                    100 * straddle, blobs.count(), mirror_ge_zero ? "yes" : "no", zero_decreasing ? "yes" : "no", 100 * gap,
                    100 * kMirrorDeletedGap) +
                    curve};
}

// ---------------------------------------------------------------- metrics oracle

Plane<int> flood_fill(const LesionMask& m) {
  Plane<int> lab = Plane<int>::Zero(m.height(), m.width());
  int next = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m.is_lesion(x, y) || lab(y, x)) continue;
      lab(y, x) = ++next;
      std::vector<std::pair<int, int>> stack{{x, y}};
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height() || !m.is_lesion(nx, ny) || lab(ny, nx)) continue;
            lab(ny, nx) = next;
            stack.emplace_back(nx, ny);
          }
      }
    }
  return lab;
}

bool same_partition(const Plane<int>& a, const Plane<int>& b) {
  std::map<int, int> ab, ba;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const int x = a.data()[i], y = b.data()[i];
    if ((x == 0) != (y == 0)) return false;
    if (x == 0) continue;
    if (ab.emplace(x, y).first->second != y || ba.emplace(y, x).first->second != x) return false;
  }
  return true;
}

MetricsReport ratio_oracle(long long tp, long long fp, long long fn) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.iou = tp + fp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
  r.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  return r;
}

bool same_report(const MetricsReport& a, const MetricsReport& b) {
  return a.tp == b.tp && a.fp == b.fp && a.fn == b.fn && a.iou == b.iou && a.recall == b.recall && a.precision == b.precision;
}

// Largest one-to-one matching among pairs with IoU >= tau, by trying every
// assignment of pred components to distinct gt components (or none).
int exhaustive_matches(const Plane<int>& pred, int np, const Plane<int>& gt, int ng, double tau) {
  std::vector<std::vector<double>> iou(static_cast<std::size_t>(np), std::vector<double>(static_cast<std::size_t>(ng), 0.0));
  for (int i = 1; i <= np; ++i)
    for (int j = 1; j <= ng; ++j) {
      const long long inter = ((pred == i) && (gt == j)).count();
      const long long uni = ((pred == i) || (gt == j)).count();
      iou[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] = static_cast<double>(inter) / static_cast<double>(uni);
    }
  int best = 0;
  std::vector<bool> used(static_cast<std::size_t>(ng), false);
  std::function<void(int, int)> go = [&](int i, int count) {
    if (i == np) {
      best = std::max(best, count);
      return;
    }
    go(i + 1, count);
    for (int j = 0; j < ng; ++j) {
      if (used[static_cast<std::size_t>(j)] || iou[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] < tau) continue;
      used[static_cast<std::size_t>(j)] = true;
      go(i + 1, count + 1);
      used[static_cast<std::size_t>(j)] = false;
    }
  };
  go(0, 0);
  return best;
}

LesionMask random_boxes(int w, int h, std::mt19937_64& rng) {
  LesionMask m(w, h);
  std::uniform_int_distribution<int> n(0, 4);
  const int count = n(rng);
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1), sz(1, 5);
    const int x0 = px(rng), y0 = py(rng), bw = sz(rng), bh = sz(rng);
    for (int y = y0; y < std::min(h, y0 + bh); ++y)
      for (int x = x0; x < std::min(w, x0 + bw); ++x) m(x, y) = kHydrops;
  }
  return m;
}

// Copy with random one-pixel edits so many components still match.
LesionMask jitter(const LesionMask& m, std::mt19937_64& rng) {
  LesionMask out = m;
  std::bernoulli_distribution flip(0.06);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (flip(rng)) out(x, y) = out.is_lesion(x, y) ? kBackground : kHydrops;
  return out;
}

Outcome metrics_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 16);
  std::uniform_real_distribution<double> dens(0.0, 0.8);
  int pixel_ok = 0, cc_ok = 0, lesion_ok = 0, lesion_cases = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const int w = dim(rng), h = dim(rng);
    LesionMask gt, pred;
    if (i % 2 == 0) {
      gt = testing::random_mask(w, h, dens(rng), rng);
      pred = testing::random_mask(w, h, dens(rng), rng);
    } else {
      gt = random_boxes(w, h, rng);
      pred = jitter(gt, rng);
    }

    long long tp = 0, fp = 0, fn = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool p = pred.is_lesion(x, y), g = gt.is_lesion(x, y);
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
      }
    pixel_ok += same_report(pixel_metrics(pred, gt), ratio_oracle(tp, fp, fn));

    const Plane<int> fp_labels = flood_fill(pred), fg_labels = flood_fill(gt);
    const ComponentSet pc = connected_components(pred), gc = connected_components(gt);
    cc_ok += same_partition(pc.labels, fp_labels) && same_partition(gc.labels, fg_labels) && pc.count() == fp_labels.maxCoeff() &&
             gc.count() == fg_labels.maxCoeff();

    const int np = fp_labels.maxCoeff(), ng = fg_labels.maxCoeff();
    if (np <= 4 && ng <= 4) {
      ++lesion_cases;
      const int m = exhaustive_matches(fp_labels, np, fg_labels, ng, 0.5);
      lesion_ok += same_report(lesion_metrics(pred, gt, 0.5), ratio_oracle(m, np - m, ng - m));
    }
  }
  const bool pass = pixel_ok == n && cc_ok == n && lesion_ok == lesion_cases && lesion_cases >= 1000;
  return {pass, fmt("pixel %d/%d exact; components %d/%d partitions equal; lesion %d/%d vs exhaustive matching (<= 4 components)",
                    pixel_ok, n, cc_ok, n, lesion_ok, lesion_cases)};
}

// ---------------------------------------------------------------- placement IoU

Outcome placement_iou_properties() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pos(-8, 24), dim(0, 20), mode(0, 3);
  int ok = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    Rect a{pos(rng), pos(rng), dim(rng), dim(rng)};
    Rect b{pos(rng), pos(rng), dim(rng), dim(rng)};
    if (mode(rng) == 0) b = a;
    if (mode(rng) == 0) b = a.translated(a.width, 0);  // touching, disjoint
    long long inter = 0, uni = 0;
    for (int y = -10; y < 50; ++y)
      for (int x = -10; x < 50; ++x) {
        const bool ia = x >= a.x && x < a.right() && y >= a.y && y < a.bottom();
        const bool ib = x >= b.x && x < b.right() && y >= b.y && y < b.bottom();
        inter += ia && ib;
        uni += ia || ib;
      }
    const double expected = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    const double v = placement_iou(a, b);
    bool good = v == expected && v == placement_iou(b, a);
    if (!a.empty() && !b.empty()) good = good && ((v == 1.0) == (a == b)) && ((v == 0.0) == (inter == 0));
    ok += good;
  }
  return {ok == n, fmt("%d/%d pairs exact vs pixel count, symmetric, 1 iff identical, 0 iff disjoint", ok, n)};
}

// ---------------------------------------------------------------- determinism

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  SynthSlideParams p;
  p.seed = 11;
  const VirtualSlide slide = synthesize_slide(p);
  const auto frames = generate_path_frames(slide, make_pan_path(slide, 640, 480, {50, 5.0, 30.0, 12}), {});
  const auto root = std::filesystem::temp_directory_path() / "vmscope_acceptance_determinism";
  std::filesystem::remove_all(root);
  SessionConfig cfg;
  cfg.backend = "oracle";
  cfg.slide_origin = std::array<int, 2>{frames[0].true_placement.x, frames[0].true_placement.y};
  auto mask = std::make_shared<const LesionMask>(*slide.gt_mask);
  for (const char* run : {"a", "b"}) {
    Session s(run, cfg, make_backend(cfg, mask));
    for (const auto& f : frames) s.step(f.pixels);
    s.export_canvases(root / run);
  }
  int same = 0;
  const char* files[] = {"mosaic.png", "mosaic_valid.png", "lesion_map.png", "lesion_map_valid.png"};
  for (const char* f : files) {
    const auto a = file_bytes(root / "a" / f), b = file_bytes(root / "b" / f);
    same += !a.empty() && a == b;
  }
  std::filesystem::remove_all(root);
  return {same == 4, fmt("%d/4 export files byte-identical after two 50-frame replays", same)};
}

// ---------------------------------------------------------------- degraded step

Outcome degraded_safety() {
  SynthSlideParams p;
  p.seed = 13;
  const VirtualSlide slide = synthesize_slide(p);
  const auto frames = generate_path_frames(slide, make_pan_path(slide, 640, 480, {12, 5.0, 30.0, 14}), {});
  SessionConfig cfg;
  Session s("d", cfg, make_backend(cfg, nullptr));
  for (int i = 0; i < 6; ++i) s.step(frames[static_cast<std::size_t>(i)].pixels);
  const MosaicCanvas mosaic = s.mosaic();
  const MosaicCanvas lesions = s.lesion_map();

  const PipelineOutputs bad = s.step(testing::white_noise(640, 480, 99));
  const bool untouched = s.mosaic() == mosaic && s.lesion_map() == lesions;
  const bool frozen = bad.status == RegistrationStatus::Degraded && untouched;

  // frame 6 follows frame 5, the last good one
  const PipelineOutputs next = s.step(frames[6].pixels);
  const Rect expected = frames[6].true_placement.translated(-frames[0].true_placement.x, -frames[0].true_placement.y);
  const bool reanchored = next.status == RegistrationStatus::Ok && next.placement == expected;
  return {frozen && reanchored, fmt("noise frame status %s, canvases %s; next frame status %s at expected placement %s",
                                    bad.status == RegistrationStatus::Degraded ? "degraded" : "ok",
                                    untouched ? "unchanged" : "changed",
                                    next.status == RegistrationStatus::Ok ? "ok" : "degraded", reanchored ? "yes" : "no")};
}

}  // namespace

int main() {
  report("shift-recovery", shift_recovery);
  report("mosaic-experiment", mosaic_experiment);
  report("throughput", throughput);
  report("edge-extension-ordering", edge_ordering);
  report("metrics-oracle", metrics_oracle);
  report("placement-iou-properties", placement_iou_properties);
  report("pipeline-determinism", determinism);
  report("degraded-step-safety", degraded_safety);
  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
