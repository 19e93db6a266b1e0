#pragma once

#include <string>

#include "dbhcam/error.hpp"
#include "dbhcam/units.hpp"

namespace dbhcam::geometry {

namespace detail {
inline void require_positive(double v, const char* name) {
  if (!(v > 0.0)) {
    throw Error(ErrorCode::DomainError, std::string(name) + " must be positive");
  }
}
}  // namespace detail

/// Pinhole relation H = x * y / z: real extent of an object at `distance`
/// whose image spans `sensor_extent` on a sensor behind a lens of
/// `focal_length`. The result is expressed in the unit of `distance`.
inline Length project_height(Length distance, Length sensor_extent, Length focal_length) {
  detail::require_positive(distance.value(), "distance");
  detail::require_positive(sensor_extent.value(), "sensor_extent");
  detail::require_positive(focal_length.value(), "focal_length");
  const double ratio = sensor_extent.in_meters() / focal_length.in_meters();
  return {distance.value() * ratio, distance.unit()};
}

/// Distance from the far capture position, given the projected pixel heights
/// of one trunk segment seen from two positions `displacement` apart along the
/// viewing axis: x = d * h_close / (h_close - h_far).
inline Length estimate_distance(double h_far, double h_close, Length displacement) {
  if (h_far <= 0.0) {
    throw Error(ErrorCode::EmptyMask, "far segment height is zero");
  }
  if (h_close <= h_far) {
    throw Error(ErrorCode::NonApproaching,
                "close segment (" + std::to_string(h_close) + " px) is not larger than far segment (" +
                    std::to_string(h_far) + " px)");
  }
  detail::require_positive(displacement.value(), "displacement");
  return Length::meters(displacement.in_meters() * h_close / (h_close - h_far));
}

/// Physical extent on the sensor of `extent_px` pixels out of an image
/// `image_extent_px` pixels tall (or wide), scaled from the full sensor extent.
inline Length sensor_extent_from_pixels(long extent_px, long image_extent_px, Length sensor_extent) {
  if (extent_px <= 0) throw Error(ErrorCode::EmptyMask, "extent_px must be positive");
  detail::require_positive(static_cast<double>(image_extent_px), "image_extent_px");
  detail::require_positive(sensor_extent.value(), "sensor_extent");
  if (extent_px > image_extent_px) {
    throw Error(ErrorCode::InconsistentMask, "mask extent " + std::to_string(extent_px) +
                                                 " px exceeds image extent " +
                                                 std::to_string(image_extent_px) + " px");
  }
  const double scale = static_cast<double>(extent_px) / static_cast<double>(image_extent_px);
  return {scale * sensor_extent.value(), sensor_extent.unit()};
}

/// Physical length per pixel: real extent divided by its pixel count.
inline DistanceFactor distance_factor(Length real_extent, long extent_px) {
  if (extent_px <= 0) throw Error(ErrorCode::EmptyMask, "distance factor over zero pixels");
  detail::require_positive(real_extent.value(), "real_extent");
  return {real_extent.in_meters() / static_cast<double>(extent_px)};
}

}  // namespace dbhcam::geometry
