#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dbhcam/error.hpp"
#include "dbhcam/mask.hpp"

namespace dbhcam {

/// Maps far-image continuous coordinates (pixel centers at i + 0.5) into the
/// close image: u' = scale * u + dx, v' = scale * v + dy.
struct AlignmentTransform {
  double scale = 1.0;
  double dx = 0.0;
  double dy = 0.0;
  double iou = 0.0;
};

struct AlignmentOptions {
  double scale_lo = 0.8;   // relative to the width-based initial estimate
  double scale_hi = 1.25;
  double scale_step = 0.005;
  int dy_radius = 20;
  double min_iou = 0.5;
  bool vertical_refinement = true;
};

namespace detail {

struct Run {
  int begin;  // first column
  int end;    // last column, inclusive
};

/// Run-length view of a mask with consecutive identical rows merged into
/// bands, so IoU evaluation costs O(bands) instead of O(rows).
class RunMask {
 public:
  struct Band {
    int first_row;
    int last_row;
    std::size_t run_begin;
    std::size_t run_end;
  };

  explicit RunMask(const TrunkMask& mask) : width_(mask.width()), height_(mask.height()) {
    for (int y = 0; y < height_; ++y) {
      const auto row = mask.row(y);
      const std::size_t first = runs_.size();
      int x = 0;
      while (x < width_) {
        if (!row[static_cast<std::size_t>(x)]) {
          ++x;
          continue;
        }
        const int b = x;
        while (x < width_ && row[static_cast<std::size_t>(x)]) ++x;
        runs_.push_back({b, x - 1});
        area_ += x - b;
      }
      if (runs_.size() == first) continue;
      if (top_ < 0) top_ = y;
      base_ = y;
      if (!bands_.empty()) {
        Band& prev = bands_.back();
        const std::size_t n = runs_.size() - first;
        if (prev.last_row == y - 1 && prev.run_end - prev.run_begin == n &&
            std::equal(runs_.begin() + static_cast<std::ptrdiff_t>(first), runs_.end(),
                       runs_.begin() + static_cast<std::ptrdiff_t>(prev.run_begin),
                       [](const Run& p, const Run& q) { return p.begin == q.begin && p.end == q.end; })) {
          prev.last_row = y;
          runs_.resize(first);
          continue;
        }
      }
      bands_.push_back({y, y, first, runs_.size()});
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int top() const { return top_; }
  int base() const { return base_; }
  long area() const { return area_; }
  const std::vector<Band>& bands() const { return bands_; }
  std::span<const Run> runs(const Band& b) const {
    return {runs_.data() + b.run_begin, b.run_end - b.run_begin};
  }

 private:
  int width_;
  int height_;
  int top_ = -1;
  int base_ = -1;
  long area_ = 0;
  std::vector<Run> runs_;
  std::vector<Band> bands_;
};

/// IoU, within the close frame, of the nearest-neighbour warp of `far`
/// against `close`. Close pixel (c, r) samples far row floor((r + 0.5 - dy) / s)
/// and far column floor((c + 0.5 - dx) / s).
inline double warped_iou(const RunMask& far, const RunMask& close, double s, double dx, double dy) {
  const int w = close.width();
  const int h = close.height();
  const auto& cbands = close.bands();
  long inter = 0;
  long warped = 0;
  std::vector<Run> cols;
  for (const auto& fb : far.bands()) {
    // Close rows whose sample row falls in [first_row, last_row].
    const int ra = std::max(0, static_cast<int>(std::ceil(s * fb.first_row + dy - 0.5)));
    const int rb = std::min(h - 1, static_cast<int>(std::ceil(s * (fb.last_row + 1) + dy - 0.5)) - 1);
    if (ra > rb) continue;
    cols.clear();
    long row_width = 0;
    for (const Run& run : far.runs(fb)) {
      const int c0 = std::max(0, static_cast<int>(std::ceil(s * run.begin + dx - 0.5)));
      const int c1 = std::min(w - 1, static_cast<int>(std::ceil(s * (run.end + 1) + dx - 0.5)) - 1);
      if (c0 > c1) continue;
      row_width += c1 - c0 + 1;
      cols.push_back({c0, c1});
    }
    if (cols.empty()) continue;
    warped += row_width * (rb - ra + 1);
    auto it = std::lower_bound(cbands.begin(), cbands.end(), ra,
                               [](const RunMask::Band& b, int row) { return b.last_row < row; });
    for (; it != cbands.end() && it->first_row <= rb; ++it) {
      const long rows = std::min(rb, it->last_row) - std::max(ra, it->first_row) + 1;
      long per_row = 0;
      for (const Run& c : close.runs(*it)) {
        for (const Run& f : cols) {
          const int lo = std::max(f.begin, c.begin);
          const int hi = std::min(f.end, c.end);
          if (lo <= hi) per_row += hi - lo + 1;
        }
      }
      inter += per_row * rows;
    }
  }
  const long uni = close.area() + warped - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline double median_width(const RowProfile& p) {
  std::vector<int> w;
  for (int r = p.top_row; r <= p.base_row; ++r) {
    if (p.width(r) > 0) w.push_back(p.width(r));
  }
  const auto mid = w.begin() + static_cast<std::ptrdiff_t>((w.size() - 1) / 2);
  std::nth_element(w.begin(), mid, w.end());
  return *mid;
}

}  // namespace detail

/// Scale + translation mapping the far silhouette onto the close one.
///
/// The initial scale is the ratio of median row widths; the vertical offset
/// aligns the bottom edges and the horizontal offset aligns the column
/// centroids. A grid search then visits scale in [0.8, 1.25] x initial
/// (step 0.005) and vertical offset within +-20 px of the base-aligned value
/// (step 1), keeping the IoU maximum. Candidates are visited outward from
/// the initial estimate so ties resolve toward it. Finally, when every trunk
/// end is inside both frames, the scale is snapped to the silhouette height
/// ratio if that lies within two grid steps of the IoU optimum.
inline AlignmentTransform align_masks(const TrunkMask& far, const TrunkMask& close,
                                      const AlignmentOptions& opt = {}) {
  const RowProfile pf = row_profile(far);
  const RowProfile pc = row_profile(close);
  const detail::RunMask rf(far);
  const detail::RunMask rc(close);

  const double s0 = detail::median_width(pc) / detail::median_width(pf);
  const int k_lo = static_cast<int>(std::ceil((opt.scale_lo * s0 - s0) / opt.scale_step - 1e-9));
  const int k_hi = static_cast<int>(std::floor((opt.scale_hi * s0 - s0) / opt.scale_step + 1e-9));

  auto ordered = [](int lo, int hi) {
    std::vector<int> ks{0};
    for (int m = 1; m <= std::max(-lo, hi); ++m) {
      if (m <= hi) ks.push_back(m);
      if (-m >= lo) ks.push_back(-m);
    }
    return ks;
  };

  AlignmentTransform best;
  best.iou = -1.0;
  for (int ks : ordered(k_lo, k_hi)) {
    const double s = s0 + ks * opt.scale_step;
    if (s <= 0.0) continue;
    const double dx = pc.column_centroid - s * pf.column_centroid;
    const double dy0 = (pc.base_row + 1) - s * (pf.base_row + 1);
    for (int kd : ordered(-opt.dy_radius, opt.dy_radius)) {
      const double dy = dy0 + kd;
      const double iou = detail::warped_iou(rf, rc, s, dx, dy);
      if (iou > best.iou) best = {s, dx, dy, iou};
    }
  }

  // Vertical refinement: when both silhouettes have both trunk ends inside
  // their frames, the height ratio pins the scale far more finely than the
  // width-dominated IoU grid. It is adopted only near the grid optimum.
  const bool ends_visible = pf.top_row > 0 && pf.base_row < far.height() - 1 &&
                            pc.top_row > 0 && pc.base_row < close.height() - 1;
  if (opt.vertical_refinement && ends_visible && best.iou >= opt.min_iou) {
    const double sv = static_cast<double>(pc.height_px) / static_cast<double>(pf.height_px);
    if (std::abs(sv - best.scale) <= 2.0 * opt.scale_step) {
      const double dx = pc.column_centroid - sv * pf.column_centroid;
      const double dy = (pc.base_row + 1) - sv * (pf.base_row + 1);
      best = {sv, dx, dy, detail::warped_iou(rf, rc, sv, dx, dy)};
    }
  }

  if (best.iou < opt.min_iou) {
    throw Error(ErrorCode::AlignFail, "far/close masks do not align (best IoU " +
                                          std::to_string(best.iou) + " < " +
                                          std::to_string(opt.min_iou) + ")");
  }
  return best;
}

struct CommonSegment {
  int first_far_row = 0;
  int last_far_row = 0;
  int h_far = 0;
  int h_close = 0;
};

/// Far rows whose centers map inside the close silhouette's occupied rows;
/// the close height is the mapped extent, round(h_far * scale).
inline CommonSegment common_segment(const RowProfile& far, const RowProfile& close,
                                    const AlignmentTransform& t) {
  if (!(t.scale > 0.0)) throw Error(ErrorCode::DomainError, "alignment scale must be positive");
  CommonSegment seg;
  seg.first_far_row = -1;
  for (int v = far.top_row; v <= far.base_row; ++v) {
    const int r = static_cast<int>(std::floor(t.scale * (v + 0.5) + t.dy));
    if (r < close.top_row || r > close.base_row) continue;
    if (seg.first_far_row < 0) seg.first_far_row = v;
    seg.last_far_row = v;
  }
  if (seg.first_far_row < 0) {
    throw Error(ErrorCode::NoOverlap, "no far rows map into the close trunk span");
  }
  seg.h_far = seg.last_far_row - seg.first_far_row + 1;
  seg.h_close = static_cast<int>(std::round(seg.h_far * t.scale));
  return seg;
}

}  // namespace dbhcam
