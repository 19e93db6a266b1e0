#include <gtest/gtest.h>

#include "dbhcam/metrics.hpp"
#include "dbhcam/segmentation.hpp"
#include "dbhcam/synthetic.hpp"
#include "support.hpp"

using namespace dbhcam;
using dbhcam::test::TempDir;

namespace {

Raster bar_image(int w, int h, int x0, int x1, int y0, int y1, std::uint8_t fg, std::uint8_t bg) {
  Raster r{w, h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, bg)};
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) r.pixels[static_cast<std::size_t>(y) * w + x] = fg;
  return r;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST(Otsu, SplitsBimodalHistogram) {
  std::array<std::uint64_t, 256> h{};
  h[40] = 100;
  h[220] = 300;
  const auto t = seg::otsu_threshold(h);
  ASSERT_TRUE(t);
  EXPECT_GE(*t, 40);
  EXPECT_LT(*t, 220);
  std::array<std::uint64_t, 256> flat{};
  flat[128] = 10;
  EXPECT_FALSE(seg::otsu_threshold(flat));
}

TEST(Baseline, RecoversDarkBar) {
  const Raster img = bar_image(200, 300, 90, 109, 20, 279, 40, 220);
  const TrunkMask truth = dbhcam::test::rect_mask(200, 300, 90, 109, 20, 279);
  const TrunkMask got = seg::baseline_threshold(encode_png(img));
  EXPECT_EQ(got.provenance(), MaskProvenance::BaselineSegmenter);
  EXPECT_GT(eval::seg_metrics(got, truth).iou, 0.95);
  const auto p = row_profile(got);
  EXPECT_NEAR(p.width(150), 20, 2);
  EXPECT_EQ(connected_components(got).size(), 1u);
}

TEST(Baseline, RemovesSpeckleAndNeighbours) {
  Raster img = bar_image(200, 300, 90, 109, 20, 279, 40, 220);
  img.pixels[5 * 200 + 5] = 40;                              // isolated speck
  for (int y = 50; y < 250; ++y)
    for (int x = 10; x < 30; ++x) img.pixels[y * 200 + x] = 40;  // off-center tree
  const TrunkMask got = seg::baseline_threshold(img);
  EXPECT_FALSE(got.at(5, 5));
  EXPECT_FALSE(got.at(20, 100));
  EXPECT_TRUE(got.at(100, 100));
}

TEST(Baseline, UniformImageIsSegmentationEmpty) {
  const Raster img{50, 50, 1, std::vector<std::uint8_t>(2500, 128)};
  EXPECT_EQ(code_of([&] { seg::baseline_threshold(img); }), ErrorCode::SegmentationEmpty);
}

TEST(Baseline, InvertFlagIsSymmetric) {
  const Raster dark = bar_image(120, 160, 50, 69, 10, 150, 40, 220);
  const Raster light = bar_image(120, 160, 50, 69, 10, 150, 220, 40);
  const auto a = seg::baseline_threshold(dark, {false});
  const auto b = seg::baseline_threshold(light, {true});
  EXPECT_EQ(a.bits().size(), b.bits().size());
  EXPECT_TRUE(std::equal(a.bits().begin(), a.bits().end(), b.bits().begin()));
}

TEST(Baseline, ColorInputUsesLuma) {
  Raster rgb{60, 80, 3, std::vector<std::uint8_t>(60 * 80 * 3, 230)};
  for (int y = 10; y < 70; ++y)
    for (int x = 25; x < 35; ++x) {
      auto* px = &rgb.pixels[(static_cast<std::size_t>(y) * 60 + x) * 3];
      px[0] = 90, px[1] = 60, px[2] = 30;  // bark brown
    }
  const auto m = seg::baseline_threshold(encode_png(rgb));
  EXPECT_EQ(m.count(), 600u);
}

TEST(Baseline, Deterministic) {
  const auto pair = synth::render_pair(synth::SyntheticScene{});
  const Bytes photo = encode_png(synth::render_image(pair.far));
  EXPECT_EQ(seg::segment(photo, seg::BaselineParams{}), seg::segment(photo, seg::BaselineParams{}));
  EXPECT_EQ(seg::segment(photo, seg::BaselineParams{}), pair.far);
}

TEST(Oracle, ReturnsStoredMaskVerbatim) {
  TempDir dir;
  const Raster img = bar_image(64, 64, 20, 30, 5, 60, 40, 220);
  const Bytes img_bytes = encode_png(img);
  TrunkMask stored(64, 64);
  stored.set(3, 3);
  stored.set(40, 50);  // two components, returned as stored
  write_file(dir / "t001.img", img_bytes);
  write_file(dir / "t001.mask.png", encode_mask(stored));
  const Bytes other = encode_png(bar_image(64, 64, 10, 12, 5, 60, 40, 220));
  write_file(dir / "t002.img", other);
  write_file(dir / "t002.mask.png", encode_mask(TrunkMask(64, 64)));

  const auto oracle = seg::OracleSource::open(dir.path());
  ASSERT_TRUE(oracle.available());
  EXPECT_EQ(oracle.size(), 2u);
  EXPECT_EQ(oracle.lookup(img_bytes), "t001");
  const auto got = seg::segment(img_bytes, oracle);
  EXPECT_EQ(got, stored);
  EXPECT_EQ(got.provenance(), MaskProvenance::OracleFile);

  const Bytes unknown = encode_png(bar_image(64, 64, 1, 2, 5, 60, 40, 220));
  EXPECT_EQ(code_of([&] { seg::segment(unknown, oracle); }), ErrorCode::UnknownImage);
}

TEST(Oracle, MisconfiguredDirectoryIsUnavailable) {
  const auto oracle = seg::OracleSource::open("/nonexistent/dbhcam-oracle");
  EXPECT_FALSE(oracle.available());
  EXPECT_EQ(code_of([&] { seg::segment(Bytes{1, 2, 3}, oracle); }), ErrorCode::ProviderUnavailable);
}

TEST(External, DeadEndpointIsProviderUnavailable) {
  // Bind then close to get a port that refuses connections.
  std::uint16_t port = 0;
  {
    auto s = net::listen_tcp("127.0.0.1", 0);
    port = net::bound_port(s);
  }
  const seg::ExternalEndpoint ext{{"127.0.0.1", port}, 500, ""};
  EXPECT_EQ(code_of([&] { seg::segment(Bytes{1, 2, 3}, ext); }), ErrorCode::ProviderUnavailable);
}

TEST(PrecomputedMask, DecodesPayloadAsMask) {
  const TrunkMask m = dbhcam::test::rect_mask(30, 40, 10, 19, 5, 35);
  EXPECT_EQ(seg::segment(encode_mask(m), seg::PrecomputedMask{}), m);
}
