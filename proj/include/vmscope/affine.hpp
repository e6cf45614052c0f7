#pragma once

#include <Eigen/Core>

#include "vmscope/image.hpp"

namespace vmscope {

/// 2x3 matrix mapping current-frame coordinates into the previous frame:
/// [x', y']^T = M.leftCols<2>() * [x, y]^T + M.col(2).
using AffineTransform = Eigen::Matrix<double, 2, 3>;

inline AffineTransform affine_identity() {
  AffineTransform m;
  m << 1, 0, 0, 0, 1, 0;
  return m;
}

inline AffineTransform affine_translation(double tx, double ty) {
  AffineTransform m = affine_identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

AffineTransform invert_affine(const AffineTransform& m);

/// Inverse-mapped bilinear warp; destination pixels whose preimage falls
/// outside the source are 0.
Raster warp_affine(const Raster& image, const AffineTransform& m);

struct AffineConfig {
  int max_iterations_per_level = 50;
  double update_tolerance = 1e-4;
  /// Consecutive non-improving iterations tolerated before giving up.
  int stall_limit = 5;
  /// Pyramid halving stops once the smaller side drops below this.
  int pyramid_min_side = 64;
  double min_determinant = 0.1;
  double max_determinant = 10.0;
  /// Zero-mean correlation over the overlap at the solution; below this the
  /// frames are treated as unrelated and the search as not converged.
  double min_correlation = 0.5;
};

struct AffineResult {
  AffineTransform transform = affine_identity();
  /// Sum of |F(cur, M) - prev| over the pixels both frames cover.
  double objective = 0.0;
  long long overlap_area = 0;
  int iterations = 0;
};

/// Intensity-based affine registration of `cur` onto `prev` (Gauss-Newton on
/// squared differences, coarse to fine). Throws DidNotConverge or Degenerate.
AffineResult affine_register(const Raster& prev, const Raster& cur, const AffineConfig& cfg = {});

}  // namespace vmscope
