#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "vmscope/image.hpp"

namespace vmscope {

/// Summed-area table with a zero first row/column: (h+1) x (w+1).
class IntegralImage {
 public:
  explicit IntegralImage(const Raster& gray);

  /// Sum over [x0, x1) x [y0, y1); the box must lie inside the image.
  std::int64_t box_sum(int x0, int y0, int x1, int y1) const {
    return table_(y1, x1) - table_(y0, x1) - table_(y1, x0) + table_(y0, x0);
  }

  int width() const { return static_cast<int>(table_.cols()) - 1; }
  int height() const { return static_cast<int>(table_.rows()) - 1; }

 private:
  Plane<std::int64_t> table_;
};

/// Box-filter second derivatives for an odd filter size L (lobe = L/3),
/// unnormalised integer sums centred on (x, y).
struct BoxHessian {
  std::int64_t dxx = 0;
  std::int64_t dyy = 0;
  std::int64_t dxy = 0;
};

BoxHessian box_hessian(const IntegralImage& ii, int x, int y, int filter_size);

/// det = Dxx*Dyy - (0.9*Dxy)^2 with each term normalised by the filter area.
double hessian_response(const BoxHessian& h, int filter_size);

/// Half extent of the filter footprint; responses exist where it fits.
inline int filter_margin(int filter_size) { return filter_size / 2 + 1; }

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double scale = 0.0;
  double response = 0.0;
  int laplacian_sign = 1;
  Eigen::Matrix<double, 64, 1> descriptor = Eigen::Matrix<double, 64, 1>::Zero();
};

struct FeatureConfig {
  double response_threshold = 50.0;
  /// Octave 1 uses filters 9/15/21/27, octave 2 uses 15/27/39/51.
  int octaves = 2;
  /// Orientation assignment is not implemented; false is rejected.
  bool upright = true;
};

/// Filter sizes used per octave (four layers each).
std::vector<std::array<int, 4>> octave_filter_sizes(int octaves);

std::vector<Keypoint> detect_and_describe(const Raster& image, const FeatureConfig& cfg = {});

struct MatchConfig {
  double ratio = 0.8;
  int ransac_iterations = 1000;
  double inlier_threshold = 3.0;
  int min_inliers = 8;
  std::uint64_t seed = 0x5eed;
};

struct HomographyEstimate {
  /// Maps current-frame coordinates into the previous frame.
  Eigen::Matrix3d homography = Eigen::Matrix3d::Identity();
  int inlier_count = 0;
  int match_count = 0;
};

HomographyEstimate match_and_estimate(const std::vector<Keypoint>& prev, const std::vector<Keypoint>& cur,
                                      const MatchConfig& cfg = {});

/// Normalised DLT from >= 4 correspondences (src -> dst).
Eigen::Matrix3d homography_dlt(const std::vector<Eigen::Vector2d>& src, const std::vector<Eigen::Vector2d>& dst);

}  // namespace vmscope
