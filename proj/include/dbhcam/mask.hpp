#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbhcam/error.hpp"
#include "dbhcam/png_io.hpp"

namespace dbhcam {

enum class MaskProvenance { OracleFile, BaselineSegmenter, Synthetic, External };

constexpr std::string_view to_string(MaskProvenance p) {
  switch (p) {
    case MaskProvenance::OracleFile: return "oracle-file";
    case MaskProvenance::BaselineSegmenter: return "baseline-segmenter";
    case MaskProvenance::Synthetic: return "synthetic";
    case MaskProvenance::External: return "external";
  }
  return "external";
}

/// Binary trunk silhouette, row-major, one byte per pixel (0 or 1).
class TrunkMask {
 public:
  TrunkMask() = default;
  TrunkMask(int width, int height, MaskProvenance provenance = MaskProvenance::External)
      : width_(width),
        height_(height),
        provenance_(provenance),
        bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::DomainError, "mask dimensions must be positive");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  MaskProvenance provenance() const { return provenance_; }
  void set_provenance(MaskProvenance p) { provenance_ = p; }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }

  /// Fills columns [x0, x1] of row y.
  void fill_row(int y, int x0, int x1) {
    x0 = std::max(x0, 0);
    x1 = std::min(x1, width_ - 1);
    if (y < 0 || y >= height_ || x0 > x1) return;
    std::fill(bits_.begin() + static_cast<std::ptrdiff_t>(index(x0, y)),
              bits_.begin() + static_cast<std::ptrdiff_t>(index(x1, y)) + 1, std::uint8_t{1});
  }

  std::span<const std::uint8_t> row(int y) const {
    return {bits_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const { return std::find(bits_.begin(), bits_.end(), 1) == bits_.end(); }

  bool same_shape(const TrunkMask& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const TrunkMask& a, const TrunkMask& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.bits_ == b.bits_;
  }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  MaskProvenance provenance_ = MaskProvenance::External;
  std::vector<std::uint8_t> bits_;
};

/// ITU-R BT.601 luma, rounded to nearest.
inline std::uint8_t luma601(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

inline std::vector<std::uint8_t> to_gray(const Raster& raster) {
  if (raster.channels == 1) return raster.pixels;
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(raster.width) * raster.height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const auto* px = &raster.pixels[i * raster.channels];
    gray[i] = luma601(px[0], px[1], px[2]);
  }
  return gray;
}

/// Pixel is set iff luminance > 127.
inline TrunkMask mask_from_raster(const Raster& raster,
                                  MaskProvenance provenance = MaskProvenance::External) {
  TrunkMask mask(raster.width, raster.height, provenance);
  const auto gray = to_gray(raster);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      if (gray[static_cast<std::size_t>(y) * raster.width + x] > 127) mask.set(x, y);
    }
  }
  return mask;
}

inline TrunkMask decode_mask(std::span<const std::uint8_t> bytes,
                             MaskProvenance provenance = MaskProvenance::External) {
  return mask_from_raster(decode_png(bytes), provenance);
}

/// 8-bit grayscale PNG, 255 = trunk.
inline Bytes encode_mask(const TrunkMask& mask) {
  Raster r{mask.width(), mask.height(), 1, {}};
  r.pixels.resize(mask.bits().size());
  std::transform(mask.bits().begin(), mask.bits().end(), r.pixels.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
  return encode_png(r);
}

struct Component {
  std::vector<std::size_t> pixels;  // linear indices
  int top_row = 0;
  double column_centroid = 0.0;  // continuous coordinates, pixel centers at x + 0.5
};

/// 4-connected components of the set pixels, in raster-scan order of their
/// first pixel.
inline std::vector<Component> connected_components(const TrunkMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  const auto bits = mask.bits();
  std::vector<std::uint8_t> seen(bits.size(), 0);
  std::vector<Component> out;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < bits.size(); ++start) {
    if (!bits[start] || seen[start]) continue;
    Component comp;
    comp.top_row = static_cast<int>(start / w);
    double col_sum = 0.0;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      comp.pixels.push_back(i);
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      col_sum += x + 0.5;
      auto visit = [&](std::size_t j) {
        if (bits[j] && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < w) visit(i + 1);
      if (y > 0) visit(i - w);
      if (y + 1 < h) visit(i + w);
    }
    comp.column_centroid = col_sum / static_cast<double>(comp.pixels.size());
    out.push_back(std::move(comp));
  }
  return out;
}

/// Keeps the single 4-connected component whose column centroid is closest
/// to the image center column; ties go to the larger area, then to the
/// component reaching highest in the frame.
inline TrunkMask select_trunk_component(const TrunkMask& mask) {
  auto comps = connected_components(mask);
  if (comps.empty()) throw Error(ErrorCode::EmptyMask, "mask has no set pixels");
  if (comps.size() == 1) return mask;

  const double center = mask.width() / 2.0;
  auto better = [center](const Component& a, const Component& b) {
    const double da = std::abs(a.column_centroid - center);
    const double db = std::abs(b.column_centroid - center);
    if (da != db) return da < db;
    if (a.pixels.size() != b.pixels.size()) return a.pixels.size() > b.pixels.size();
    return a.top_row < b.top_row;
  };
  const auto best = std::min_element(comps.begin(), comps.end(), better);

  TrunkMask out(mask.width(), mask.height(), mask.provenance());
  for (std::size_t i : best->pixels) {
    out.set(static_cast<int>(i % mask.width()), static_cast<int>(i / mask.width()));
  }
  return out;
}

/// Per-row horizontal extent of a trunk silhouette.
struct RowProfile {
  int image_width = 0;
  int image_height = 0;
  int top_row = 0;
  int base_row = 0;
  int height_px = 0;
  std::vector<int> widths;     // one entry per image row, 0 where empty
  std::vector<int> leftmost;   // -1 where empty
  double column_centroid = 0;  // continuous coordinates
  std::vector<int> gap_rows;   // empty rows strictly inside [top_row, base_row]

  int width(int row) const { return widths[static_cast<std::size_t>(row)]; }
  bool contains(int row) const { return row >= top_row && row <= base_row; }
};

inline RowProfile row_profile(const TrunkMask& mask) {
  RowProfile p;
  p.image_width = mask.width();
  p.image_height = mask.height();
  p.widths.assign(static_cast<std::size_t>(mask.height()), 0);
  p.leftmost.assign(static_cast<std::size_t>(mask.height()), -1);
  int top = -1;
  int base = -1;
  double col_sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    const auto row = mask.row(y);
    int left = -1;
    int right = -1;
    for (int x = 0; x < mask.width(); ++x) {
      if (!row[static_cast<std::size_t>(x)]) continue;
      if (left < 0) left = x;
      right = x;
      col_sum += x + 0.5;
      ++n;
    }
    if (left < 0) continue;
    p.widths[static_cast<std::size_t>(y)] = right - left + 1;
    p.leftmost[static_cast<std::size_t>(y)] = left;
    if (top < 0) top = y;
    base = y;
  }
  if (top < 0) throw Error(ErrorCode::EmptyMask, "mask has no set pixels");
  p.top_row = top;
  p.base_row = base;
  p.height_px = base - top + 1;
  p.column_centroid = col_sum / static_cast<double>(n);
  for (int y = top; y <= base; ++y) {
    if (p.width(y) == 0) p.gap_rows.push_back(y);
  }
  return p;
}

inline constexpr int kDefaultMedianBand = 5;

/// Median extent over rows [row - band, row + band] clipped to the occupied
/// span. Gap rows are skipped; even-sized windows take the lower median.
inline int width_at_row(const RowProfile& profile, int row, int band = kDefaultMedianBand) {
  if (!profile.contains(row)) {
    throw Error(ErrorCode::OutOfTrunk, "row " + std::to_string(row) + " outside trunk rows [" +
                                           std::to_string(profile.top_row) + ", " +
                                           std::to_string(profile.base_row) + "]");
  }
  if (band < 0) throw Error(ErrorCode::DomainError, "median band must be non-negative");
  const int lo = std::max(profile.top_row, row - band);
  const int hi = std::min(profile.base_row, row + band);
  std::vector<int> window;
  window.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int r = lo; r <= hi; ++r) {
    if (profile.width(r) > 0) window.push_back(profile.width(r));
  }
  if (window.empty()) {
    throw Error(ErrorCode::EmptyMask, "no trunk pixels around row " + std::to_string(row));
  }
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>((window.size() - 1) / 2);
  std::nth_element(window.begin(), mid, window.end());
  return *mid;
}

}  // namespace dbhcam
