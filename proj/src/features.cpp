#include "vmscope/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <Eigen/Dense>

namespace vmscope {

IntegralImage::IntegralImage(const Raster& gray) {
  const Raster lum = to_luminance(gray);
  table_ = Plane<std::int64_t>::Zero(lum.height() + 1, lum.width() + 1);
  for (int y = 0; y < lum.height(); ++y) {
    std::int64_t row = 0;
    for (int x = 0; x < lum.width(); ++x) {
      row += lum(x, y);
      table_(y + 1, x + 1) = table_(y, x + 1) + row;
    }
  }
}

BoxHessian box_hessian(const IntegralImage& ii, int x, int y, int filter_size) {
  const int lobe = filter_size / 3;
  const int half = filter_size / 2;
  const int mid = (lobe - 1) / 2;
  BoxHessian h;

  // Three stacked lobes weighted +1 / -2 / +1 == whole band - 3 * middle lobe.
  const std::int64_t yy_band = ii.box_sum(x - lobe + 1, y - half, x + lobe, y + half + 1);
  const std::int64_t yy_mid = ii.box_sum(x - lobe + 1, y - mid, x + lobe, y + mid + 1);
  h.dyy = yy_band - 3 * yy_mid;

  const std::int64_t xx_band = ii.box_sum(x - half, y - lobe + 1, x + half + 1, y + lobe);
  const std::int64_t xx_mid = ii.box_sum(x - mid, y - lobe + 1, x + mid + 1, y + lobe);
  h.dxx = xx_band - 3 * xx_mid;

  const std::int64_t top_left = ii.box_sum(x - lobe, y - lobe, x, y);
  const std::int64_t bottom_right = ii.box_sum(x + 1, y + 1, x + lobe + 1, y + lobe + 1);
  const std::int64_t top_right = ii.box_sum(x + 1, y - lobe, x + lobe + 1, y);
  const std::int64_t bottom_left = ii.box_sum(x - lobe, y + 1, x, y + lobe + 1);
  h.dxy = top_left + bottom_right - top_right - bottom_left;
  return h;
}

double hessian_response(const BoxHessian& h, int filter_size) {
  const double area = static_cast<double>(filter_size) * filter_size;
  const double dxx = static_cast<double>(h.dxx) / area;
  const double dyy = static_cast<double>(h.dyy) / area;
  const double dxy = static_cast<double>(h.dxy) / area;
  return dxx * dyy - (0.9 * dxy) * (0.9 * dxy);
}

std::vector<std::array<int, 4>> octave_filter_sizes(int octaves) {
  static constexpr std::array<std::array<int, 4>, 3> kSizes{{
      {9, 15, 21, 27},
      {15, 27, 39, 51},
      {27, 51, 75, 99},
  }};
  octaves = std::clamp(octaves, 1, static_cast<int>(kSizes.size()));
  return {kSizes.begin(), kSizes.begin() + octaves};
}

namespace {

struct ResponseLayer {
  PlaneD response;
  Plane<std::int8_t> sign;
  int margin = 0;
};

ResponseLayer compute_layer(const IntegralImage& ii, int filter_size) {
  ResponseLayer layer;
  layer.response = PlaneD::Zero(ii.height(), ii.width());
  layer.sign = Plane<std::int8_t>::Zero(ii.height(), ii.width());
  layer.margin = filter_margin(filter_size);
  for (int y = layer.margin; y < ii.height() - layer.margin; ++y) {
    for (int x = layer.margin; x < ii.width() - layer.margin; ++x) {
      const BoxHessian h = box_hessian(ii, x, y, filter_size);
      layer.response(y, x) = hessian_response(h, filter_size);
      layer.sign(y, x) = (h.dxx + h.dyy) >= 0 ? 1 : -1;
    }
  }
  return layer;
}

// Clipped box sum so Haar taps near the border stay defined.
std::int64_t clipped_sum(const IntegralImage& ii, int x0, int y0, int x1, int y1) {
  x0 = std::clamp(x0, 0, ii.width());
  x1 = std::clamp(x1, 0, ii.width());
  y0 = std::clamp(y0, 0, ii.height());
  y1 = std::clamp(y1, 0, ii.height());
  if (x1 <= x0 || y1 <= y0) return 0;
  return ii.box_sum(x0, y0, x1, y1);
}

void describe_upright(const IntegralImage& ii, Keypoint& kp) {
  const double s = kp.scale;
  const int r = std::max(1, static_cast<int>(std::lround(s)));
  const double sigma = 3.3 * s;
  kp.descriptor.setZero();
  for (int j = -10; j < 10; ++j) {
    for (int i = -10; i < 10; ++i) {
      const double ox = (i + 0.5) * s;
      const double oy = (j + 0.5) * s;
      const int px = static_cast<int>(std::lround(kp.x + ox));
      const int py = static_cast<int>(std::lround(kp.y + oy));
      const double w = std::exp(-(ox * ox + oy * oy) / (2.0 * sigma * sigma));
      const double dx = static_cast<double>(clipped_sum(ii, px, py - r, px + r, py + r) - clipped_sum(ii, px - r, py - r, px, py + r));
      const double dy = static_cast<double>(clipped_sum(ii, px - r, py, px + r, py + r) - clipped_sum(ii, px - r, py - r, px + r, py));
      const int cell = ((j + 10) / 5) * 4 + (i + 10) / 5;
      kp.descriptor(cell * 4 + 0) += w * dx;
      kp.descriptor(cell * 4 + 1) += w * dy;
      kp.descriptor(cell * 4 + 2) += w * std::abs(dx);
      kp.descriptor(cell * 4 + 3) += w * std::abs(dy);
    }
  }
  const double norm = kp.descriptor.norm();
  if (norm > 0.0) {
    kp.descriptor /= norm;
  } else {
    // Flat neighbourhood: any unit vector keeps the norm invariant.
    kp.descriptor(0) = 1.0;
  }
}

}  // namespace

std::vector<Keypoint> detect_and_describe(const Raster& image, const FeatureConfig& cfg) {
  if (image.width() < 32 || image.height() < 32) throw Error(ErrorCode::TooSmall, "feature detection needs 32x32");
  if (!cfg.upright) throw Error(ErrorCode::InvalidArgument, "oriented descriptors are not supported");

  const IntegralImage ii(image);
  const auto octaves = octave_filter_sizes(cfg.octaves);
  std::map<int, ResponseLayer> layers;
  for (const auto& sizes : octaves)
    for (int size : sizes)
      if (!layers.count(size)) layers.emplace(size, compute_layer(ii, size));

  std::vector<Keypoint> keypoints;
  for (const auto& sizes : octaves) {
    const int margin = layers.at(sizes[3]).margin + 1;
    for (int k = 1; k <= 2; ++k) {
      const ResponseLayer& below = layers.at(sizes[static_cast<std::size_t>(k - 1)]);
      const ResponseLayer& here = layers.at(sizes[static_cast<std::size_t>(k)]);
      const ResponseLayer& above = layers.at(sizes[static_cast<std::size_t>(k + 1)]);
      for (int y = margin; y < ii.height() - margin; ++y) {
        for (int x = margin; x < ii.width() - margin; ++x) {
          const double v = here.response(y, x);
          if (v <= cfg.response_threshold) continue;
          bool is_max = true;
          for (int dy = -1; dy <= 1 && is_max; ++dy) {
            for (int dx = -1; dx <= 1 && is_max; ++dx) {
              if (below.response(y + dy, x + dx) >= v || above.response(y + dy, x + dx) >= v) is_max = false;
              if ((dx != 0 || dy != 0) && here.response(y + dy, x + dx) >= v) is_max = false;
            }
          }
          if (!is_max) continue;
          Keypoint kp;
          kp.x = x;
          kp.y = y;
          kp.scale = 1.2 * sizes[static_cast<std::size_t>(k)] / 9.0;
          kp.response = v;
          kp.laplacian_sign = here.sign(y, x);
          describe_upright(ii, kp);
          keypoints.push_back(kp);
        }
      }
    }
  }
  return keypoints;
}

Eigen::Matrix3d homography_dlt(const std::vector<Eigen::Vector2d>& src, const std::vector<Eigen::Vector2d>& dst) {
  const std::size_t n = src.size();
  if (n < 4 || dst.size() != n) throw Error(ErrorCode::InsufficientMatches, "DLT needs >= 4 correspondences");

  auto normaliser = [](const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(pts.size());
    const double scale = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
    Eigen::Matrix3d t;
    t << scale, 0, -scale * centroid.x(), 0, scale, -scale * centroid.y(), 0, 0, 1;
    return t;
  };
  const Eigen::Matrix3d ts = normaliser(src);
  const Eigen::Matrix3d td = normaliser(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = ts * src[i].homogeneous();
    const Eigen::Vector3d q = td * dst[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
    a.row(r + 1) << p.x(), p.y(), 1, 0, 0, 0, -q.x() * p.x(), -q.x() * p.y(), -q.x();
  }
  const Eigen::Matrix<double, 9, 9> ata = a.transpose() * a;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  const Eigen::Matrix<double, 9, 1> h = eig.eigenvectors().col(0);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d out = td.inverse() * hn * ts;
  if (std::abs(out(2, 2)) < 1e-12) throw Error(ErrorCode::Degenerate, "homography at infinity");
  return out / out(2, 2);
}

namespace {

double transfer_error(const Eigen::Matrix3d& h, const Eigen::Vector2d& src, const Eigen::Vector2d& dst) {
  const Eigen::Vector3d p = h * src.homogeneous();
  if (std::abs(p.z()) < 1e-12) return std::numeric_limits<double>::infinity();
  return (p.hnormalized() - dst).norm();
}

bool collinear_sample(const std::array<Eigen::Vector2d, 4>& pts) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) {
        const Eigen::Vector2d u = pts[static_cast<std::size_t>(j)] - pts[static_cast<std::size_t>(i)];
        const Eigen::Vector2d v = pts[static_cast<std::size_t>(k)] - pts[static_cast<std::size_t>(i)];
        if (std::abs(u.x() * v.y() - u.y() * v.x()) < 1e-6) return true;
      }
  return false;
}

}  // namespace

HomographyEstimate match_and_estimate(const std::vector<Keypoint>& prev, const std::vector<Keypoint>& cur,
                                      const MatchConfig& cfg) {
  if (prev.empty() || cur.empty()) throw Error(ErrorCode::InsufficientMatches, "empty keypoint list");

  std::vector<Eigen::Vector2d> src;  // current frame
  std::vector<Eigen::Vector2d> dst;  // previous frame
  for (const Keypoint& c : cur) {
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    const Keypoint* nearest = nullptr;
    for (const Keypoint& p : prev) {
      if (p.laplacian_sign != c.laplacian_sign) continue;
      const double d = (p.descriptor - c.descriptor).norm();
      if (d < d1) {
        d2 = d1;
        d1 = d;
        nearest = &p;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (nearest == nullptr) continue;
    if (std::isfinite(d2) && !(d1 < cfg.ratio * d2)) continue;
    src.emplace_back(c.x, c.y);
    dst.emplace_back(nearest->x, nearest->y);
  }

  HomographyEstimate est;
  est.match_count = static_cast<int>(src.size());
  if (src.size() < 4) throw Error(ErrorCode::InsufficientMatches, "only " + std::to_string(src.size()) + " matches");

  auto count_inliers = [&](const Eigen::Matrix3d& h) {
    int n = 0;
    for (std::size_t i = 0; i < src.size(); ++i)
      if (transfer_error(h, src[i], dst[i]) < cfg.inlier_threshold) ++n;
    return n;
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
  Eigen::Matrix3d best_h = Eigen::Matrix3d::Identity();
  int best_inliers = -1;
  for (int it = 0; it < cfg.ransac_iterations; ++it) {
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      bool fresh = false;
      while (!fresh) {
        idx[k] = pick(rng);
        fresh = std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx[k]) == idx.begin() + static_cast<std::ptrdiff_t>(k);
      }
    }
    std::array<Eigen::Vector2d, 4> sample_src{src[idx[0]], src[idx[1]], src[idx[2]], src[idx[3]]};
    if (collinear_sample(sample_src)) continue;
    Eigen::Matrix3d h;
    try {
      h = homography_dlt({sample_src.begin(), sample_src.end()}, {dst[idx[0]], dst[idx[1]], dst[idx[2]], dst[idx[3]]});
    } catch (const Error&) {
      continue;
    }
    if (!h.allFinite()) continue;
    const int n = count_inliers(h);
    if (n > best_inliers) {
      best_inliers = n;
      best_h = h;
    }
  }
  if (best_inliers < cfg.min_inliers) {
    throw Error(ErrorCode::NoConsensus, "best model has " + std::to_string(std::max(best_inliers, 0)) + " inliers");
  }

  std::vector<Eigen::Vector2d> in_src;
  std::vector<Eigen::Vector2d> in_dst;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (transfer_error(best_h, src[i], dst[i]) < cfg.inlier_threshold) {
      in_src.push_back(src[i]);
      in_dst.push_back(dst[i]);
    }
  }
  const Eigen::Matrix3d refined = homography_dlt(in_src, in_dst);
  const int refined_inliers = count_inliers(refined);
  if (refined.allFinite() && refined_inliers >= best_inliers) {
    est.homography = refined;
    est.inlier_count = refined_inliers;
  } else {
    est.homography = best_h;
    est.inlier_count = best_inliers;
  }
  return est;
}

}  // namespace vmscope
