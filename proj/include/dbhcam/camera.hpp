#pragma once

#include <cmath>
#include <string>

#include "dbhcam/error.hpp"
#include "dbhcam/units.hpp"

namespace dbhcam {

/// Pinhole camera description: focal length, physical sensor extent and the
/// pixel dimensions of the captured image. Image width/height are in the
/// orientation of the delivered raster (a portrait capture has
/// image_height > image_width and the sensor extents follow that mapping).
class CameraIntrinsics {
 public:
  CameraIntrinsics(Length focal_length, Length sensor_width, Length sensor_height,
                   int image_width, int image_height)
      : focal_length_(focal_length),
        sensor_width_(sensor_width),
        sensor_height_(sensor_height),
        image_width_(image_width),
        image_height_(image_height) {
    require(focal_length.in_meters() > 0, "focal_length");
    require(sensor_width.in_meters() > 0, "sensor_width");
    require(sensor_height.in_meters() > 0, "sensor_height");
    require(image_width > 0, "image_width");
    require(image_height > 0, "image_height");
  }

  static CameraIntrinsics from_mm(double focal_mm, double sensor_w_mm, double sensor_h_mm,
                                  int image_width, int image_height) {
    return {Length::millimeters(focal_mm), Length::millimeters(sensor_w_mm),
            Length::millimeters(sensor_h_mm), image_width, image_height};
  }

  Length focal_length() const { return focal_length_; }
  Length sensor_width() const { return sensor_width_; }
  Length sensor_height() const { return sensor_height_; }
  int image_width() const { return image_width_; }
  int image_height() const { return image_height_; }

  double horizontal_pitch_m() const { return sensor_width_.in_meters() / image_width_; }
  double vertical_pitch_m() const { return sensor_height_.in_meters() / image_height_; }

  /// Relative difference between horizontal and vertical pixel pitch.
  double pitch_mismatch() const {
    const double h = horizontal_pitch_m();
    const double v = vertical_pitch_m();
    return std::abs(h - v) / v;
  }

  /// The pipeline applies the vertical pitch to horizontal pixel counts; a
  /// mismatch above 1% is reported as a warning condition, not rejected.
  bool square_pixels() const { return pitch_mismatch() <= 0.01; }

  CameraIntrinsics with_image_size(int width, int height) const {
    return {focal_length_, sensor_width_, sensor_height_, width, height};
  }

 private:
  static void require(bool ok, const char* field) {
    if (!ok) {
      throw Error(ErrorCode::DomainError,
                  std::string("camera intrinsics: ") + field + " must be positive");
    }
  }

  Length focal_length_;
  Length sensor_width_;
  Length sensor_height_;
  int image_width_;
  int image_height_;
};

}  // namespace dbhcam
