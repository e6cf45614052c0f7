#pragma once

#include <cstdint>

#include "vmscope/image.hpp"
#include "vmscope/lesion_mask.hpp"
#include "vmscope/mosaic.hpp"

namespace vmscope {

enum class FillStrategy { Zero, Mirror };

enum Provenance : std::uint8_t {
  kFromFrame = 0,
  kFromMosaic = 1,
  kFromFill = 2,
};

/// Default border width and the accepted range.
inline constexpr int kDefaultEdgeWidth = 120;
inline constexpr int kMaxEdgeWidth = 256;

struct ExtendedFrame {
  Raster pixels;  // (W + 2w) x (H + 2w)
  int width_used = 0;
  Plane<std::uint8_t> provenance;
};

/// Symmetric (half-sample) reflection of index i into [0, n), folding
/// repeatedly when i is more than one period away.
int reflect_index(int i, int n);

/// Frame in the centre, historical context where valid, fill elsewhere.
ExtendedFrame extend_frame(const Raster& frame, const MosaicWindow& context, int width, FillStrategy strategy);

/// Extension with no history at all (every border pixel is fill).
ExtendedFrame extend_frame(const Raster& frame, int width, FillStrategy strategy);

/// Central W x H block of a mask over extended dims.
LesionMask crop_back(const LesionMask& mask, int width);

}  // namespace vmscope
