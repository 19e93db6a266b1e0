#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "dbhcam/alignment.hpp"
#include "dbhcam/camera.hpp"
#include "dbhcam/error.hpp"
#include "dbhcam/geometry.hpp"
#include "dbhcam/mask.hpp"
#include "dbhcam/units.hpp"

namespace dbhcam {

enum class DistanceMode { Manual, Estimated };

constexpr std::string_view to_string(DistanceMode m) {
  return m == DistanceMode::Manual ? "manual" : "estimated";
}

struct CaptureConfig {
  Length displacement = Length::feet(5);
  /// Set for manual mode (measured far distance); empty means the far
  /// distance is estimated from the pair.
  std::optional<Length> far_distance = Length::feet(20);
  Length breast_height = kBreastHeight;
  int median_band = kDefaultMedianBand;

  DistanceMode mode() const { return far_distance ? DistanceMode::Manual : DistanceMode::Estimated; }

  void validate() const {
    if (!(displacement.in_meters() > 0)) {
      throw Error(ErrorCode::DomainError, "displacement must be positive");
    }
    if (far_distance && !(far_distance->in_meters() > displacement.in_meters())) {
      throw Error(ErrorCode::DomainError, "far distance must exceed displacement");
    }
    if (!(breast_height.in_meters() >= 0)) {
      throw Error(ErrorCode::DomainError, "breast height must be non-negative");
    }
    if (median_band < 0) throw Error(ErrorCode::DomainError, "median band must be non-negative");
  }
};

struct Measurement {
  Length dbh;             // centimeters
  Length far_distance;    // meters
  DistanceFactor df;
  int p_pixels = 0;
  Length trunk_height_visible;
  int far_height_px = 0;  // full far silhouette height
  int h_far_px = 0;       // common segment, far image
  int h_close_px = 0;     // common segment, close image
  int breast_row = 0;
  double alignment_iou = 0;
  AlignmentTransform alignment;
  DistanceMode mode = DistanceMode::Manual;
};

/// Row at breast height above the trunk base: base_row - round(height / df).
inline int breast_row(const RowProfile& profile, DistanceFactor df, Length breast_height) {
  if (!(df.meters_per_px > 0)) throw Error(ErrorCode::DomainError, "distance factor must be positive");
  const double offset = std::round(breast_height.in_meters() / df.meters_per_px);
  const double row = profile.base_row - offset;
  if (row < profile.top_row) {
    throw Error(ErrorCode::TrunkTooShort,
                "breast height is " + std::to_string(static_cast<long>(offset)) +
                    " px above the base but the trunk spans only " +
                    std::to_string(profile.height_px) + " px");
  }
  return static_cast<int>(row);
}

/// Full far/close measurement:
///  1. row profiles of both silhouettes
///  2. scale + translation alignment of far onto close
///  3. common segment heights
///  4. far distance: measured (manual) or from the segment height ratio
///  5. sensor extent of the full far silhouette, real height by the pinhole relation
///  6. distance factor over the full far height
///  7. breast row above the far base
///  8. median width at the breast row
///  9. DBH = width x distance factor
inline Measurement measure_pair(const TrunkMask& far_input, const TrunkMask& close_input,
                                const CameraIntrinsics& cam, const CaptureConfig& cfg) {
  cfg.validate();
  if (!far_input.same_shape(close_input)) {
    throw Error(ErrorCode::ShapeMismatch, "far and close masks differ in size");
  }
  if (far_input.width() != cam.image_width() || far_input.height() != cam.image_height()) {
    throw Error(ErrorCode::ShapeMismatch, "mask size does not match camera image size");
  }
  const TrunkMask far = select_trunk_component(far_input);
  const TrunkMask close = select_trunk_component(close_input);

  const RowProfile pf = row_profile(far);
  const RowProfile pc = row_profile(close);

  Measurement m;
  m.mode = cfg.mode();
  m.alignment = align_masks(far, close);
  m.alignment_iou = m.alignment.iou;

  const CommonSegment seg = common_segment(pf, pc, m.alignment);
  m.h_far_px = seg.h_far;
  m.h_close_px = seg.h_close;

  m.far_distance = cfg.far_distance
                       ? convert(*cfg.far_distance, Unit::Meter)
                       : geometry::estimate_distance(seg.h_far, seg.h_close, cfg.displacement);

  m.far_height_px = pf.height_px;
  const Length sensor_extent =
      geometry::sensor_extent_from_pixels(pf.height_px, cam.image_height(), cam.sensor_height());
  m.trunk_height_visible = geometry::project_height(m.far_distance, sensor_extent, cam.focal_length());
  m.df = geometry::distance_factor(m.trunk_height_visible, pf.height_px);

  m.breast_row = breast_row(pf, m.df, cfg.breast_height);
  m.p_pixels = width_at_row(pf, m.breast_row, cfg.median_band);
  m.dbh = convert(m.df.over(m.p_pixels), Unit::Centimeter);
  return m;
}

}  // namespace dbhcam
