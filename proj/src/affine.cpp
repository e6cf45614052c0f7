#include "vmscope/affine.hpp"

#include <cfenv>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace vmscope {

namespace {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

constexpr double kEdgeSlack = 1e-9;
constexpr double kStallTolerance = 0.05;

// Bilinear lookup inside [0, w-1] x [0, h-1]; false when outside.
bool sample_bilinear(const PlaneD& plane, double x, double y, double& value) {
  const double max_x = static_cast<double>(plane.cols() - 1);
  const double max_y = static_cast<double>(plane.rows() - 1);
  if (x < -kEdgeSlack || y < -kEdgeSlack || x > max_x + kEdgeSlack || y > max_y + kEdgeSlack) return false;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(x));
  const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(y));
  const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, plane.cols() - 1);
  const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, plane.rows() - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = plane(y0, x0) * (1.0 - fx) + plane(y0, x1) * fx;
  const double bottom = plane(y1, x0) * (1.0 - fx) + plane(y1, x1) * fx;
  value = top * (1.0 - fy) + bottom * fy;
  return true;
}

PlaneD halve(const PlaneD& p) {
  const Eigen::Index rows = p.rows() / 2;
  const Eigen::Index cols = p.cols() / 2;
  PlaneD out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x)
      out(y, x) = 0.25 * (p(2 * y, 2 * x) + p(2 * y, 2 * x + 1) + p(2 * y + 1, 2 * x) + p(2 * y + 1, 2 * x + 1));
  return out;
}

std::vector<PlaneD> build_pyramid(const PlaneD& base, int min_side) {
  std::vector<PlaneD> levels{base};
  while (std::min(levels.back().rows(), levels.back().cols()) >= min_side) {
    levels.push_back(halve(levels.back()));
  }
  return levels;
}

PlaneD gradient_x(const PlaneD& p) {
  PlaneD g = PlaneD::Zero(p.rows(), p.cols());
  const Eigen::Index c = p.cols();
  if (c < 3) return g;
  g.middleCols(1, c - 2) = 0.5 * (p.rightCols(c - 2) - p.leftCols(c - 2));
  g.col(0) = p.col(1) - p.col(0);
  g.col(c - 1) = p.col(c - 1) - p.col(c - 2);
  return g;
}

PlaneD gradient_y(const PlaneD& p) {
  PlaneD g = PlaneD::Zero(p.rows(), p.cols());
  const Eigen::Index r = p.rows();
  if (r < 3) return g;
  g.middleRows(1, r - 2) = 0.5 * (p.bottomRows(r - 2) - p.topRows(r - 2));
  g.row(0) = p.row(1) - p.row(0);
  g.row(r - 1) = p.row(r - 1) - p.row(r - 2);
  return g;
}

// Parameters of the prev -> cur map: (a11, a12, a21, a22, t1, t2).
Eigen::Matrix<double, 2, 3> as_matrix(const Vector6d& p) {
  Eigen::Matrix<double, 2, 3> m;
  m << p(0), p(1), p(4), p(2), p(3), p(5);
  return m;
}

struct LevelCost {
  double mean_sq = 0.0;
  double abs_sum = 0.0;
  long long count = 0;
  double correlation = 0.0;
};

LevelCost evaluate(const PlaneD& prev, const PlaneD& cur, const Vector6d& p) {
  LevelCost cost;
  double sq = 0.0;
  double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  for (Eigen::Index y = 0; y < prev.rows(); ++y) {
    for (Eigen::Index x = 0; x < prev.cols(); ++x) {
      const double u = p(0) * x + p(1) * y + p(4);
      const double v = p(2) * x + p(3) * y + p(5);
      double value = 0.0;
      if (!sample_bilinear(cur, u, v, value)) continue;
      const double r = value - prev(y, x);
      sq += r * r;
      cost.abs_sum += std::abs(r);
      ++cost.count;
      const double a = prev(y, x);
      sa += a;
      sb += value;
      saa += a * a;
      sbb += value * value;
      sab += a * value;
    }
  }
  cost.mean_sq = cost.count > 0 ? sq / static_cast<double>(cost.count) : std::numeric_limits<double>::infinity();
  if (cost.count > 1) {
    const double n = static_cast<double>(cost.count);
    const double va = saa - sa * sa / n;
    const double vb = sbb - sb * sb / n;
    if (va > 0.0 && vb > 0.0) cost.correlation = (sab - sa * sb / n) / std::sqrt(va * vb);
  }
  return cost;
}

}  // namespace

AffineTransform invert_affine(const AffineTransform& m) {
  const Eigen::Matrix2d a = m.leftCols<2>();
  const double det = a.determinant();
  if (std::abs(det) < 1e-12) throw Error(ErrorCode::Degenerate, "affine linear part is singular");
  const Eigen::Matrix2d inv = a.inverse();
  AffineTransform out;
  out.leftCols<2>() = inv;
  out.col(2) = -inv * m.col(2);
  return out;
}

Raster warp_affine(const Raster& image, const AffineTransform& m) {
  const AffineTransform inv = invert_affine(m);
  const int ch = image.channels();
  std::vector<PlaneD> planes;
  planes.reserve(static_cast<std::size_t>(ch));
  for (int c = 0; c < ch; ++c) {
    PlaneD p(image.height(), image.width());
    for (int y = 0; y < image.height(); ++y)
      for (int x = 0; x < image.width(); ++x) p(y, x) = image(x, y, c);
    planes.push_back(std::move(p));
  }

  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  Raster out(image.width(), image.height(), ch, 0);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double u = inv(0, 0) * x + inv(0, 1) * y + inv(0, 2);
      const double v = inv(1, 0) * x + inv(1, 1) * y + inv(1, 2);
      for (int c = 0; c < ch; ++c) {
        double value = 0.0;
        if (sample_bilinear(planes[static_cast<std::size_t>(c)], u, v, value)) {
          out(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::nearbyint(value), 0.0, 255.0));
        }
      }
    }
  }
  std::fesetround(saved);
  return out;
}

AffineResult affine_register(const Raster& prev, const Raster& cur, const AffineConfig& cfg) {
  if (prev.width() != cur.width() || prev.height() != cur.height()) {
    throw Error(ErrorCode::DimensionMismatch, "frames must have equal dims");
  }
  const auto prev_levels = build_pyramid(luminance_plane(prev), cfg.pyramid_min_side);
  const auto cur_levels = build_pyramid(luminance_plane(cur), cfg.pyramid_min_side);

  Vector6d p;
  p << 1, 0, 0, 1, 0, 0;
  int total_iterations = 0;

  for (int level = static_cast<int>(prev_levels.size()) - 1; level >= 0; --level) {
    const PlaneD& fp = prev_levels[static_cast<std::size_t>(level)];
    const PlaneD& fc = cur_levels[static_cast<std::size_t>(level)];
    const PlaneD gx = gradient_x(fc);
    const PlaneD gy = gradient_y(fc);

    double best = evaluate(fp, fc, p).mean_sq;
    int stalled = 0;
    for (int it = 0; it < cfg.max_iterations_per_level; ++it) {
      ++total_iterations;
      Matrix6d jtj = Matrix6d::Zero();
      Vector6d jtr = Vector6d::Zero();
      long long count = 0;
      for (Eigen::Index y = 0; y < fp.rows(); ++y) {
        for (Eigen::Index x = 0; x < fp.cols(); ++x) {
          const double u = p(0) * x + p(1) * y + p(4);
          const double v = p(2) * x + p(3) * y + p(5);
          double value = 0.0;
          if (!sample_bilinear(fc, u, v, value)) continue;
          double dx = 0.0;
          double dy = 0.0;
          sample_bilinear(gx, u, v, dx);
          sample_bilinear(gy, u, v, dy);
          Vector6d j;
          j << dx * x, dx * y, dy * x, dy * y, dx, dy;
          jtj.selfadjointView<Eigen::Lower>().rankUpdate(j);
          jtr += j * (value - fp(y, x));
          ++count;
        }
      }
      if (count < 6) throw Error(ErrorCode::DidNotConverge, "overlap vanished during affine search");
      jtj = jtj.selfadjointView<Eigen::Lower>();
      const Eigen::LDLT<Matrix6d> solver(jtj);
      if (solver.info() != Eigen::Success || !solver.isPositive()) {
        throw Error(ErrorCode::DidNotConverge, "affine normal equations are singular");
      }
      const Vector6d step = solver.solve(-jtr);
      if (!step.allFinite()) throw Error(ErrorCode::DidNotConverge, "affine update is not finite");
      p += step;

      const double cost = evaluate(fp, fc, p).mean_sq;
      // Near the optimum the overlap-normalised cost jitters by a fraction of a
      // percent as the overlap changes; only a clear rise counts as a stall.
      if (cost <= best * (1.0 + kStallTolerance)) {
        best = std::min(best, cost);
        stalled = 0;
      } else if (++stalled >= cfg.stall_limit) {
        throw Error(ErrorCode::DidNotConverge, "objective stopped decreasing at pyramid level " + std::to_string(level));
      }
      if (step.norm() < cfg.update_tolerance) break;
    }

    if (level > 0) {
      // Pixel-centre aligned 2x upsampling of the prev -> cur map.
      const Eigen::Matrix2d a = as_matrix(p).leftCols<2>();
      const Eigen::Vector2d half = 0.5 * (Eigen::Vector2d::Ones() - a * Eigen::Vector2d::Ones());
      p(4) = 2.0 * p(4) + half(0);
      p(5) = 2.0 * p(5) + half(1);
    }
  }

  const AffineTransform prev_to_cur = as_matrix(p);
  const double det = prev_to_cur.leftCols<2>().determinant();
  if (!(std::abs(det) >= cfg.min_determinant && std::abs(det) <= cfg.max_determinant)) {
    throw Error(ErrorCode::Degenerate, "affine determinant out of range: " + std::to_string(det));
  }

  const LevelCost final_cost = evaluate(prev_levels.front(), cur_levels.front(), p);
  if (!(final_cost.correlation >= cfg.min_correlation)) {
    throw Error(ErrorCode::DidNotConverge, "frames are uncorrelated at the solution (" + std::to_string(final_cost.correlation) + ")");
  }

  AffineResult result;
  result.transform = invert_affine(prev_to_cur);
  result.objective = final_cost.abs_sum;
  result.overlap_area = final_cost.count;
  result.iterations = total_iterations;
  return result;
}

}  // namespace vmscope
