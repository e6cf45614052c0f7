#pragma once

#include <cstdint>
#include <ostream>
#include <random>

#include "vmscope/image.hpp"
#include "vmscope/registration.hpp"
#include "vmscope/lesion_mask.hpp"
#include "vmscope/slide_sim.hpp"

namespace vmscope::testing {

// Blurred noise stretched to roughly 20..235: textured enough for
// registration, smooth enough for bilinear round trips.
inline Raster random_texture(int w, int h, std::uint64_t seed, double sigma = 1.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  PlaneD p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  if (sigma > 0) p = gaussian_blur(p, sigma);
  const double lo = p.minCoeff();
  const double hi = p.maxCoeff();
  p = 20.0 + (p - lo) * (215.0 / std::max(hi - lo, 1e-9));
  return to_raster(p);
}

inline Raster white_noise(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Raster r(w, h, 1);
  for (Eigen::Index i = 0; i < r.samples().size(); ++i) r.data()[i] = static_cast<std::uint8_t>(rng() & 0xff);
  return r;
}

inline LesionMask random_mask(int w, int h, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution b(density);
  LesionMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(x, y) = b(rng) ? kHydrops : kBackground;
  return m;
}

inline Raster constant(int w, int h, int ch, std::uint8_t v) { return Raster(w, h, ch, v); }

}  // namespace vmscope::testing

namespace vmscope {
// doctest prints these through operator<<
inline std::ostream& operator<<(std::ostream& os, const Displacement& d) { return os << "(" << d.dx << ", " << d.dy << ")"; }
inline std::ostream& operator<<(std::ostream& os, const Rect& r) {
  return os << "[" << r.x << ", " << r.y << ", " << r.width << "x" << r.height << "]";
}
}  // namespace vmscope
