#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dbhcam/alignment.hpp"
#include "support.hpp"

using namespace dbhcam;
using dbhcam::test::rect_mask;

namespace {

// Tapered trunk of base width `w0` px and height `h` px standing on row
// boundary `base_v` at column `cx`, scaled by `s` about its base center and
// rasterized by pixel-center sampling.
TrunkMask tapered(int img_w, int img_h, double cx, double base_v, double w0, double h, double s) {
  TrunkMask m(img_w, img_h, MaskProvenance::Synthetic);
  for (int r = 0; r < img_h; ++r) {
    const double v = r + 0.5;
    const double t = (base_v - v) / s;  // height above base in unscaled units
    if (t < 0 || t > h) continue;
    const double half = s * 0.5 * w0 * (1.0 - 0.25 * t / h);
    const int c0 = static_cast<int>(std::ceil(cx - half - 0.5));
    const int c1 = static_cast<int>(std::floor(cx + half - 0.5));
    if (c0 <= c1) m.fill_row(r, std::max(0, c0), std::min(img_w - 1, c1));
  }
  return m;
}

// Direct per-pixel evaluation of the nearest-neighbour warp IoU.
double brute_iou(const TrunkMask& far, const TrunkMask& close, double s, double dx, double dy) {
  long inter = 0, uni = 0;
  for (int r = 0; r < close.height(); ++r) {
    const int v = static_cast<int>(std::floor((r + 0.5 - dy) / s));
    for (int c = 0; c < close.width(); ++c) {
      const int u = static_cast<int>(std::floor((c + 0.5 - dx) / s));
      const bool a = v >= 0 && v < far.height() && u >= 0 && u < far.width() && far.at(u, v);
      const bool b = close.at(c, r);
      inter += a && b;
      uni += a || b;
    }
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

TrunkMask random_blob(std::mt19937& rng, int w, int h) {
  TrunkMask m(w, h);
  const int top = static_cast<int>(rng() % (h / 3));
  const int base = h / 2 + static_cast<int>(rng() % (h / 2));
  for (int y = top; y <= base; ++y) {
    if (rng() % 11 == 0) continue;  // gap rows
    const int a = static_cast<int>(rng() % (w / 2));
    const int b = a + static_cast<int>(rng() % (w / 2));
    m.fill_row(y, a, b);
    if (rng() % 4 == 0 && b + 3 < w) m.fill_row(y, b + 2, std::min(w - 1, b + 2 + static_cast<int>(rng() % 5)));
  }
  return m;
}

}  // namespace

TEST(WarpedIou, MatchesPerPixelOracle) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> su(0.6, 1.9), off(-15.3, 15.3);
  for (int trial = 0; trial < 200; ++trial) {
    const TrunkMask far = random_blob(rng, 48, 60);
    const TrunkMask close = random_blob(rng, 48, 60);
    const detail::RunMask rf(far), rc(close);
    const double s = su(rng), dx = off(rng), dy = off(rng);
    EXPECT_NEAR(detail::warped_iou(rf, rc, s, dx, dy), brute_iou(far, close, s, dx, dy), 1e-12)
        << "trial " << trial;
  }
}

TEST(AlignMasks, IdenticalMasks) {
  const auto m = tapered(400, 600, 200, 550, 60, 400, 1.0);
  const auto t = align_masks(m, m);
  EXPECT_DOUBLE_EQ(t.scale, 1.0);
  EXPECT_NEAR(t.dx, 0.0, 1e-9);
  EXPECT_NEAR(t.dy, 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(t.iou, 1.0);
}

TEST(AlignMasks, RecoversScaleAboutBaseCenter) {
  for (double s : {1.1, 1.25, 4.0 / 3.0, 1.5}) {
    const auto far = tapered(1000, 1400, 480.3, 1300.2, 90, 560, 1.0);
    const auto close = tapered(1000, 1400, 480.3, 1300.2, 90, 560, s);
    const auto t = align_masks(far, close);
    const double tol = std::max(0.01, 2.0 / row_profile(far).height_px);
    EXPECT_NEAR(t.scale, s, tol) << "s = " << s;
    EXPECT_GT(t.iou, 0.95) << "s = " << s;
  }
}

TEST(AlignMasks, RecoversScaleWithoutVerticalRefinement) {
  AlignmentOptions opt;
  opt.vertical_refinement = false;
  const auto far = tapered(1000, 1400, 500, 1300, 90, 560, 1.0);
  const auto close = tapered(1000, 1400, 500, 1300, 90, 560, 4.0 / 3.0);
  const auto t = align_masks(far, close, opt);
  EXPECT_NEAR(t.scale, 4.0 / 3.0, 0.01);
  EXPECT_GT(t.iou, 0.95);
}

TEST(AlignMasks, UnrelatedBlobFails) {
  const auto bar = rect_mask(400, 1000, 100, 119, 300, 699);
  const auto blob = rect_mask(400, 1000, 50, 349, 900, 959);
  try {
    align_masks(bar, blob);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AlignFail);
  }
}

TEST(CommonSegment, FullTrunkScaleFourThirds) {
  const auto far = row_profile(rect_mask(400, 800, 150, 209, 100, 399));
  const auto close = row_profile(rect_mask(400, 800, 140, 219, 200, 599));
  const AlignmentTransform t{4.0 / 3.0, 0.0, 600.0 - 4.0 / 3.0 * 400.0, 1.0};
  const auto seg = common_segment(far, close, t);
  EXPECT_EQ(seg.first_far_row, 100);
  EXPECT_EQ(seg.last_far_row, 399);
  EXPECT_EQ(seg.h_far, 300);
  EXPECT_EQ(seg.h_close, 400);
}

TEST(CommonSegment, CroppedCloseExcludesUpperFarRows) {
  const auto far = row_profile(rect_mask(400, 800, 150, 209, 100, 399));
  // Top quarter of the close trunk (rows 200..299) is out of view.
  const auto close = row_profile(rect_mask(400, 800, 140, 219, 300, 599));
  const AlignmentTransform t{4.0 / 3.0, 0.0, 600.0 - 4.0 / 3.0 * 400.0, 1.0};
  const auto seg = common_segment(far, close, t);
  // Far row v lands at floor(4/3 (v + 0.5) + 66.67) >= 300 from v = 175.
  EXPECT_EQ(seg.first_far_row, 175);
  EXPECT_EQ(seg.last_far_row, 399);
  EXPECT_EQ(seg.h_far, 225);
  EXPECT_EQ(seg.h_close, 300);
}

TEST(CommonSegment, Identity) {
  const auto p = row_profile(rect_mask(100, 100, 40, 59, 10, 89));
  const auto seg = common_segment(p, p, AlignmentTransform{1.0, 0.0, 0.0, 1.0});
  EXPECT_EQ(seg.h_far, 80);
  EXPECT_EQ(seg.h_close, 80);
  EXPECT_EQ(seg.first_far_row, 10);
}

TEST(CommonSegment, HeightsAgreeWithScale) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> su(1.01, 1.6);
  for (int i = 0; i < 200; ++i) {
    const double s = su(rng);
    const auto far = row_profile(rect_mask(300, 1200, 100, 150, 50 + static_cast<int>(rng() % 100), 600));
    const auto close = row_profile(rect_mask(300, 1200, 90, 160, static_cast<int>(rng() % 300), 1100));
    const AlignmentTransform t{s, 0.0, 1101.0 - s * 601.0, 1.0};
    const auto seg = common_segment(far, close, t);
    EXPECT_LE(std::abs(seg.h_close - seg.h_far * s), 1.0);
  }
}

TEST(CommonSegment, NoOverlap) {
  const auto far = row_profile(rect_mask(100, 400, 40, 59, 10, 50));
  const auto close = row_profile(rect_mask(100, 400, 40, 59, 300, 390));
  try {
    common_segment(far, close, AlignmentTransform{1.0, 0.0, 0.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoOverlap);
  }
}
