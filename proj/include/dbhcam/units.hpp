#pragma once

#include <string_view>

#include "dbhcam/error.hpp"

namespace dbhcam {

enum class Unit { Meter, Centimeter, Millimeter, Foot };

/// Meters per unit. 1 ft = 0.3048 m exactly.
constexpr double meters_per(Unit u) {
  switch (u) {
    case Unit::Meter: return 1.0;
    case Unit::Centimeter: return 0.01;
    case Unit::Millimeter: return 0.001;
    case Unit::Foot: return 0.3048;
  }
  return 1.0;
}

constexpr std::string_view unit_symbol(Unit u) {
  switch (u) {
    case Unit::Meter: return "m";
    case Unit::Centimeter: return "cm";
    case Unit::Millimeter: return "mm";
    case Unit::Foot: return "ft";
  }
  return "?";
}

/// A non-negative physical length tagged with the unit it was expressed in.
/// Arithmetic results are in meters, the canonical internal unit.
class Length {
 public:
  constexpr Length() = default;
  constexpr Length(double value, Unit unit) : value_(value), unit_(unit) {}

  static constexpr Length meters(double v) { return {v, Unit::Meter}; }
  static constexpr Length centimeters(double v) { return {v, Unit::Centimeter}; }
  static constexpr Length millimeters(double v) { return {v, Unit::Millimeter}; }
  static constexpr Length feet(double v) { return {v, Unit::Foot}; }

  constexpr double value() const { return value_; }
  constexpr Unit unit() const { return unit_; }

  constexpr double in_meters() const {
    return unit_ == Unit::Meter ? value_ : value_ * meters_per(unit_);
  }
  constexpr double in(Unit target) const {
    if (target == unit_) return value_;
    return value_ * meters_per(unit_) / meters_per(target);
  }

  constexpr Length operator*(double k) const { return meters(in_meters() * k); }
  constexpr Length operator/(double k) const { return meters(in_meters() / k); }
  constexpr double operator/(const Length& o) const { return in_meters() / o.in_meters(); }

 private:
  double value_ = 0.0;
  Unit unit_ = Unit::Meter;
};

constexpr Length convert(const Length& length, Unit target) {
  return {length.in(target), target};
}

/// Physical length represented by one pixel at the trunk's depth.
struct DistanceFactor {
  double meters_per_px = 0.0;

  constexpr double mm_per_px() const { return meters_per_px * 1e3; }
  constexpr Length over(double pixels) const { return Length::meters(meters_per_px * pixels); }
};

/// Breast height, 4.5 ft.
inline constexpr Length kBreastHeight = Length::feet(4.5);

}  // namespace dbhcam
