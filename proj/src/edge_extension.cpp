#include "vmscope/edge_extension.hpp"

namespace vmscope {

int reflect_index(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

ExtendedFrame extend_frame(const Raster& frame, const MosaicWindow& context, int width, FillStrategy strategy) {
  if (width < 0) throw Error(ErrorCode::InvalidArgument, "edge width must be >= 0");
  const int w = frame.width();
  const int h = frame.height();
  const int ew = w + 2 * width;
  const int eh = h + 2 * width;
  if (context.pixels.width() != ew || context.pixels.height() != eh || context.valid.cols() != ew || context.valid.rows() != eh) {
    throw Error(ErrorCode::DimensionMismatch, "context window must be (W+2w) x (H+2w)");
  }
  if (context.pixels.channels() != frame.channels()) {
    throw Error(ErrorCode::DimensionMismatch, "context and frame channel counts differ");
  }

  const int ch = frame.channels();
  ExtendedFrame out{Raster(ew, eh, ch, 0), width, Plane<std::uint8_t>::Constant(eh, ew, kFromFill)};
  for (int y = 0; y < eh; ++y) {
    const int fy = y - width;
    for (int x = 0; x < ew; ++x) {
      const int fx = x - width;
      if (fx >= 0 && fx < w && fy >= 0 && fy < h) {
        for (int c = 0; c < ch; ++c) out.pixels(x, y, c) = frame(fx, fy, c);
        out.provenance(y, x) = kFromFrame;
      } else if (context.valid(y, x) != 0) {
        for (int c = 0; c < ch; ++c) out.pixels(x, y, c) = context.pixels(x, y, c);
        out.provenance(y, x) = kFromMosaic;
      } else if (strategy == FillStrategy::Mirror) {
        const int sx = reflect_index(fx, w);
        const int sy = reflect_index(fy, h);
        for (int c = 0; c < ch; ++c) out.pixels(x, y, c) = frame(sx, sy, c);
      }
    }
  }
  return out;
}

ExtendedFrame extend_frame(const Raster& frame, int width, FillStrategy strategy) {
  if (width < 0) throw Error(ErrorCode::InvalidArgument, "edge width must be >= 0");
  MosaicWindow empty{Raster(frame.width() + 2 * width, frame.height() + 2 * width, frame.channels(), 0),
                     Plane<std::uint8_t>::Zero(frame.height() + 2 * width, frame.width() + 2 * width)};
  return extend_frame(frame, empty, width, strategy);
}

LesionMask crop_back(const LesionMask& mask, int width) {
  if (width < 0) throw Error(ErrorCode::InvalidArgument, "edge width must be >= 0");
  const int w = mask.width() - 2 * width;
  const int h = mask.height() - 2 * width;
  if (w < 1 || h < 1) throw Error(ErrorCode::DimensionMismatch, "mask smaller than the border it should drop");
  return crop_mask(mask, {width, width, w, h});
}

}  // namespace vmscope
