#include <doctest.h>

#include <random>
#include <set>

#include "support.hpp"
#include "vmscope/edge_extension.hpp"

using namespace vmscope;

namespace {

// Fold by hand until the index lands inside: -1 -> 0, n -> n-1.
int fold(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

TEST_CASE("reflect_index matches repeated folding") {
  for (int n : {1, 2, 3, 7})
    for (int i = -40; i < 40; ++i) CHECK(reflect_index(i, n) == fold(i, n));
}

TEST_CASE("3x3 mirror and zero examples") {
  Raster f(3, 3, 1);
  for (int i = 0; i < 9; ++i) f.data()[i] = static_cast<std::uint8_t>(i + 1);

  const ExtendedFrame m = extend_frame(f, 1, FillStrategy::Mirror);
  CHECK(m.pixels.width() == 5);
  CHECK(m.pixels(1, 0) == 1);
  CHECK(m.pixels(2, 0) == 2);
  CHECK(m.pixels(3, 0) == 3);
  CHECK(m.pixels(0, 0) == 1);
  CHECK(m.pixels(4, 4) == 9);
  CHECK(m.pixels(0, 2) == 4);
  CHECK(m.pixels(4, 2) == 6);

  const ExtendedFrame z = extend_frame(f, 1, FillStrategy::Zero);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      const bool centre = x >= 1 && x < 4 && y >= 1 && y < 4;
      CHECK(z.pixels(x, y) == (centre ? f(x - 1, y - 1) : 0));
      CHECK(z.provenance(y, x) == (centre ? kFromFrame : kFromFill));
    }

  CHECK(extend_frame(f, 0, FillStrategy::Mirror).pixels == f);
  CHECK(extend_frame(f, 0, FillStrategy::Zero).pixels == f);
}

TEST_CASE("wide borders fold cyclically") {
  Raster f(3, 2, 1);
  for (int i = 0; i < 6; ++i) f.data()[i] = static_cast<std::uint8_t>(10 * (i + 1));
  const int w = 7;
  const ExtendedFrame m = extend_frame(f, w, FillStrategy::Mirror);
  for (int y = 0; y < m.pixels.height(); ++y)
    for (int x = 0; x < m.pixels.width(); ++x) CHECK(m.pixels(x, y) == f(fold(x - w, 3), fold(y - w, 2)));
}

TEST_CASE("extension properties on random frames with partial context") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> dim(4, 20), wd(0, 12);
    const int fw = dim(rng), fh = dim(rng), w = wd(rng);
    const Raster frame = to_rgb(testing::white_noise(fw, fh, 100 + static_cast<std::uint64_t>(trial)));
    MosaicWindow ctx{to_rgb(testing::white_noise(fw + 2 * w, fh + 2 * w, 900 + static_cast<std::uint64_t>(trial))),
                     Plane<std::uint8_t>::Zero(fh + 2 * w, fw + 2 * w)};
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index i = 0; i < ctx.valid.size(); ++i) ctx.valid.data()[i] = coin(rng);

    const ExtendedFrame zero = extend_frame(frame, ctx, w, FillStrategy::Zero);
    const ExtendedFrame mirror = extend_frame(frame, ctx, w, FillStrategy::Mirror);
    CHECK(crop_region(zero.pixels, {w, w, fw, fh}) == frame);
    CHECK(crop_region(mirror.pixels, {w, w, fw, fh}) == frame);

    std::set<std::uint8_t> allowed(frame.data(), frame.data() + frame.samples().size());
    for (int y = 0; y < fh + 2 * w; ++y) {
      for (int x = 0; x < fw + 2 * w; ++x) {
        const bool centre = x >= w && x < w + fw && y >= w && y < w + fh;
        if (centre) continue;
        if (ctx.valid(y, x)) {
          // history wins over fill in both strategies
          CHECK(zero.provenance(y, x) == kFromMosaic);
          for (int c = 0; c < 3; ++c) {
            CHECK(zero.pixels(x, y, c) == ctx.pixels(x, y, c));
            CHECK(mirror.pixels(x, y, c) == ctx.pixels(x, y, c));
          }
        } else {
          CHECK(mirror.provenance(y, x) == kFromFill);
          CHECK(zero.pixels(x, y) == 0);
          CHECK(allowed.count(mirror.pixels(x, y, 1)) == 1);
        }
      }
    }

    ctx.valid.setOnes();
    CHECK(extend_frame(frame, ctx, w, FillStrategy::Zero).pixels == extend_frame(frame, ctx, w, FillStrategy::Mirror).pixels);
  }
}

TEST_CASE("extend_frame rejects mismatched context") {
  const Raster f = testing::constant(10, 10, 1, 3);
  MosaicWindow ctx{Raster(12, 12, 1), Plane<std::uint8_t>::Zero(12, 12)};
  CHECK_THROWS_AS(extend_frame(f, ctx, 2, FillStrategy::Zero), Error);
  MosaicWindow rgb{Raster(14, 14, 3), Plane<std::uint8_t>::Zero(14, 14)};
  CHECK_THROWS_AS(extend_frame(f, rgb, 2, FillStrategy::Zero), Error);
}

TEST_CASE("crop_back") {
  LesionMask m(20, 16);
  CHECK(crop_back(m, 0) == m);

  for (int y = 7; y < 9; ++y)
    for (int x = 8; x < 11; ++x) m(x, y) = kHydrops;
  const LesionMask inner = crop_back(m, 3);
  CHECK(inner.width() == 14);
  CHECK(inner.height() == 10);
  CHECK(inner.lesion_count() == 6);
  CHECK(inner.is_lesion(5, 4));

  LesionMask ring(20, 16);
  ring(1, 1) = ring(18, 14) = ring(0, 8) = kHydrops;
  CHECK(crop_back(ring, 2).lesion_count() == 0);

  try {
    crop_back(LesionMask(6, 6), 3);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}
