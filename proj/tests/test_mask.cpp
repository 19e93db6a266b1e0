#include <gtest/gtest.h>

#include <random>

#include "dbhcam/mask.hpp"
#include "dbhcam/png_io.hpp"
#include "support.hpp"

using namespace dbhcam;
using dbhcam::test::rect_mask;

namespace {

Bytes gray_png(int w, int h, const std::vector<std::uint8_t>& px) {
  return encode_png(Raster{w, h, 1, px});
}

}  // namespace

TEST(DecodeMask, ThresholdAt127) {
  EXPECT_EQ(decode_mask(gray_png(3, 2, std::vector<std::uint8_t>(6, 0))).count(), 0u);
  EXPECT_EQ(decode_mask(gray_png(3, 2, std::vector<std::uint8_t>(6, 255))).count(), 6u);
  const auto checker = decode_mask(gray_png(2, 2, {0, 255, 255, 0}));
  EXPECT_EQ(checker.count(), 2u);
  EXPECT_TRUE(checker.at(1, 0));
  EXPECT_TRUE(checker.at(0, 1));
  const auto edge = decode_mask(gray_png(2, 1, {127, 128}));
  EXPECT_FALSE(edge.at(0, 0));
  EXPECT_TRUE(edge.at(1, 0));
}

TEST(DecodeMask, ColorUsesLuma) {
  // Pure green 255 -> luma 150 > 127; pure blue 255 -> 29.
  const Bytes png = encode_png(Raster{2, 1, 3, {0, 255, 0, 0, 0, 255}});
  const auto m = decode_mask(png);
  EXPECT_TRUE(m.at(0, 0));
  EXPECT_FALSE(m.at(1, 0));
}

TEST(DecodeMask, RejectsGarbage) {
  const Bytes junk = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  try {
    decode_mask(junk);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
  }
}

TEST(DecodeMask, EncodeRoundTrip) {
  std::mt19937 rng(5);
  TrunkMask m(37, 23);
  for (int y = 0; y < 23; ++y)
    for (int x = 0; x < 37; ++x) m.set(x, y, rng() % 3 == 0);
  EXPECT_EQ(decode_mask(encode_mask(m)), m);
  EXPECT_EQ(encode_mask(m), encode_mask(m));  // deterministic bytes
}

TEST(SelectComponent, SingleComponentUnchanged) {
  const auto m = rect_mask(100, 50, 40, 60, 5, 45);
  EXPECT_EQ(select_trunk_component(m), m);
}

TEST(SelectComponent, CenteredWins) {
  TrunkMask m(200, 50);
  for (int y = 10; y < 40; ++y) {
    m.fill_row(y, 45, 54);    // centroid 50 (25%)
    m.fill_row(y, 95, 104);   // centroid 100 (50%)
  }
  const auto kept = select_trunk_component(m);
  EXPECT_TRUE(kept.at(100, 20));
  EXPECT_FALSE(kept.at(50, 20));
}

TEST(SelectComponent, CenteringDominatesArea) {
  TrunkMask m(300, 100);
  for (int y = 0; y < 100; ++y) {
    m.fill_row(y, 10, 80);     // large, off-center
    m.fill_row(y, 220, 290);   // large, off-center
  }
  for (int y = 40; y < 60; ++y) m.fill_row(y, 145, 154);  // small, centered
  const auto kept = select_trunk_component(m);
  EXPECT_EQ(kept.count(), 200u);
  EXPECT_TRUE(kept.at(150, 50));
}

TEST(SelectComponent, TieBreaks) {
  // Mirror-symmetric components at equal distance: larger area wins.
  TrunkMask m(100, 40);
  for (int y = 0; y < 20; ++y) m.fill_row(y, 20, 29);   // 200 px, centroid 25
  for (int y = 0; y < 30; ++y) m.fill_row(y, 70, 79);   // 300 px, centroid 75
  EXPECT_TRUE(select_trunk_component(m).at(75, 5));
  // Equal area and distance: the one reaching higher wins.
  TrunkMask n(100, 40);
  for (int y = 5; y < 25; ++y) n.fill_row(y, 20, 29);
  for (int y = 2; y < 22; ++y) n.fill_row(y, 70, 79);
  EXPECT_TRUE(select_trunk_component(n).at(75, 2));
}

TEST(SelectComponent, DiagonalPixelsAreSeparate) {
  TrunkMask m(4, 4);
  m.set(1, 1);
  m.set(2, 2);
  EXPECT_EQ(connected_components(m).size(), 2u);
}

TEST(SelectComponent, EmptyMaskFails) {
  try {
    select_trunk_component(TrunkMask(10, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
}

TEST(RowProfile, SolidBar) {
  const auto p = row_profile(rect_mask(100, 100, 45, 54, 20, 79));
  EXPECT_EQ(p.base_row, 79);
  EXPECT_EQ(p.top_row, 20);
  EXPECT_EQ(p.height_px, 60);
  for (int r = 20; r <= 79; ++r) EXPECT_EQ(p.width(r), 10);
  EXPECT_EQ(p.width(10), 0);
  EXPECT_DOUBLE_EQ(p.column_centroid, 50.0);
}

TEST(RowProfile, WidthIsExtentNotCount) {
  TrunkMask m(100, 3);
  m.set(40, 1);
  m.set(44, 1);
  EXPECT_EQ(row_profile(m).width(1), 5);
}

TEST(RowProfile, MirrorInvariance) {
  std::mt19937 rng(9);
  TrunkMask m(64, 80);
  for (int y = 10; y < 70; ++y) {
    const int a = 20 + static_cast<int>(rng() % 6);
    const int b = 40 + static_cast<int>(rng() % 9);
    m.fill_row(y, a, b);
  }
  TrunkMask mirrored(64, 80);
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 64; ++x)
      if (m.at(x, y)) mirrored.set(63 - x, y);
  const auto p = row_profile(m);
  const auto q = row_profile(mirrored);
  EXPECT_EQ(p.widths, q.widths);
  EXPECT_EQ(p.top_row, q.top_row);
  EXPECT_EQ(p.base_row, q.base_row);
  EXPECT_NEAR(q.column_centroid, 64.0 - p.column_centroid, 1e-9);
}

TEST(WidthAtRow, MedianRejectsSpike) {
  TrunkMask m(400, 20);
  const int widths[] = {118, 120, 300, 121, 119};
  for (int i = 0; i < 5; ++i) m.fill_row(8 + i, 50, 50 + widths[i] - 1);
  const auto p = row_profile(m);
  EXPECT_EQ(width_at_row(p, 10, 2), 120);
  EXPECT_EQ(width_at_row(p, 10, 0), 300);
}

TEST(WidthAtRow, ConstantProfile) {
  const auto p = row_profile(rect_mask(100, 100, 45, 54, 20, 79));
  for (int r = 20; r <= 79; ++r) EXPECT_EQ(width_at_row(p, r), 10);
}

TEST(WidthAtRow, RobustToSingleRowCorruption) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    TrunkMask m(300, 60);
    for (int y = 10; y < 50; ++y) m.fill_row(y, 100, 100 + 60 + static_cast<int>(rng() % 3));
    const int row = 20 + static_cast<int>(rng() % 20);
    const int band = 1 + static_cast<int>(rng() % 5);
    const int before = width_at_row(row_profile(m), row, band);
    TrunkMask bad = m;
    const int y = row - band + static_cast<int>(rng() % (2 * band + 1));
    bad.fill_row(y, 20, 280);
    const int after = width_at_row(row_profile(bad), row, band);
    // One outlier moves the lower median by at most one rank.
    EXPECT_LE(std::abs(after - before), 2);
    EXPECT_GE(after, 61);
    EXPECT_LE(after, 63);
  }
}

TEST(WidthAtRow, OutsideSpanFails) {
  const auto p = row_profile(rect_mask(100, 100, 45, 54, 20, 79));
  try {
    width_at_row(p, 80);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfTrunk);
  }
}
