#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "dbhcam/camera.hpp"
#include "dbhcam/error.hpp"
#include "dbhcam/mask.hpp"
#include "dbhcam/png_io.hpp"
#include "dbhcam/units.hpp"

namespace dbhcam::synth {

enum class SilhouetteModel { ThinObject, Tangent };

/// Default capture geometry used by the generator: 6 mm lens, 5.25 x 7.0 mm
/// sensor in portrait mapping, 3000 x 4000 px (1.75 um square pixels).
inline CameraIntrinsics default_intrinsics() {
  return CameraIntrinsics::from_mm(6.0, 5.25, 7.0, 3000, 4000);
}

/// Vertical cylinder standing on flat ground, seen from two positions on the
/// same axis. The trunk axis lies on the optical axis; the principal point
/// is the image center.
struct SyntheticScene {
  Length trunk_radius = Length::centimeters(22.5);
  Length trunk_height = Length::meters(3.0);
  Length far_distance = Length::feet(20);
  Length displacement = Length::feet(5);
  Length camera_height = kBreastHeight;
  CameraIntrinsics intrinsics = default_intrinsics();
  SilhouetteModel silhouette = SilhouetteModel::ThinObject;

  double dbh_cm() const { return 2.0 * trunk_radius.in(Unit::Centimeter); }
};

struct SceneTruth {
  double dbh_cm = 0;
  double far_distance_m = 0;
  double displacement_m = 0;
  double df_m_per_px = 0;   // at the far position
  double far_width_px = 0;  // closed-form projected width (not rasterized)
  double close_width_px = 0;
};

struct RenderedPair {
  TrunkMask far;
  TrunkMask close;
  SceneTruth truth;
};

/// Projected trunk width on the sensor in pixels at axis distance `distance_m`.
inline double projected_width_px(const SyntheticScene& scene, double distance_m) {
  const double f = scene.intrinsics.focal_length().in_meters();
  const double r = scene.trunk_radius.in_meters();
  const double pitch = scene.intrinsics.horizontal_pitch_m();
  if (scene.silhouette == SilhouetteModel::Tangent) {
    return 2.0 * f * r / std::sqrt(distance_m * distance_m - r * r) / pitch;
  }
  return 2.0 * r * f / distance_m / pitch;
}

inline void validate(const SyntheticScene& s) {
  const double x = s.far_distance.in_meters();
  const double d = s.displacement.in_meters();
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ParameterError, "scene: " + what); };
  if (!(s.trunk_radius.in_meters() > 0)) fail("trunk_radius must be positive");
  if (!(d >= 0)) fail("displacement must be non-negative");
  if (!(x > d)) fail("far_distance must exceed displacement");
  if (!(s.trunk_radius.in_meters() < x / 10)) fail("trunk_radius must be below far_distance / 10");
  if (!(s.trunk_height.in_meters() >= kBreastHeight.in_meters())) {
    fail("trunk_height must reach breast height");
  }
  if (!(s.camera_height.in_meters() > 0)) fail("camera_height must be positive");
}

/// Rasterizes the silhouette at axis distance `distance_m` by sampling pixel
/// centers. Throws Framing when the base or the full width leaves the frame.
inline TrunkMask render_mask(const SyntheticScene& scene, double distance_m) {
  const auto& cam = scene.intrinsics;
  const int w = cam.image_width();
  const int h = cam.image_height();
  const double f = cam.focal_length().in_meters();
  const double pv = cam.vertical_pitch_m();
  const double ph = cam.horizontal_pitch_m();
  const double cx = w / 2.0;
  const double cy = h / 2.0;

  const double half_w = projected_width_px(scene, distance_m) / 2.0;
  const double px_per_m = f / (distance_m * pv);
  const double v_bottom = cy + scene.camera_height.in_meters() * px_per_m;
  const double v_top =
      cy - (scene.trunk_height.in_meters() - scene.camera_height.in_meters()) * px_per_m;

  if (v_bottom > h || 2.0 * half_w > w) {
    const double max_radius = (w / 2.0) * ph * distance_m / f;
    const double max_camera_height = (h / 2.0) * pv * distance_m / f;
    std::ostringstream msg;
    msg << "trunk leaves the frame at " << distance_m << " m; max radius " << max_radius
        << " m, max camera height " << max_camera_height << " m";
    throw Error(ErrorCode::Framing, msg.str());
  }

  TrunkMask mask(w, h, MaskProvenance::Synthetic);
  const int c0 = static_cast<int>(std::ceil(cx - half_w - 0.5));
  const int c1 = static_cast<int>(std::floor(cx + half_w - 0.5));
  const int r0 = std::max(0, static_cast<int>(std::ceil(v_top - 0.5)));
  const int r1 = std::min(h - 1, static_cast<int>(std::floor(v_bottom - 0.5)));
  for (int r = r0; r <= r1; ++r) mask.fill_row(r, c0, c1);
  return mask;
}

inline RenderedPair render_pair(const SyntheticScene& scene) {
  validate(scene);
  const double x = scene.far_distance.in_meters();
  const double d = scene.displacement.in_meters();
  RenderedPair out{render_mask(scene, x), render_mask(scene, x - d), {}};
  out.truth.dbh_cm = scene.dbh_cm();
  out.truth.far_distance_m = x;
  out.truth.displacement_m = d;
  out.truth.df_m_per_px = x * scene.intrinsics.vertical_pitch_m() /
                          scene.intrinsics.focal_length().in_meters();
  out.truth.far_width_px = projected_width_px(scene, x);
  out.truth.close_width_px = projected_width_px(scene, x - d);
  return out;
}

/// Gray "photograph" of a mask: dark trunk on light ground.
inline Raster render_image(const TrunkMask& mask, std::uint8_t trunk = 40,
                           std::uint8_t background = 220) {
  Raster r{mask.width(), mask.height(), 1, {}};
  r.pixels.resize(mask.bits().size());
  for (std::size_t i = 0; i < r.pixels.size(); ++i) r.pixels[i] = mask.bits()[i] ? trunk : background;
  return r;
}

struct Range {
  double lo;
  double hi;
};

struct SceneRanges {
  Range dbh_cm{30, 100};
  Range far_distance_m{4, 10};
  Range displacement_m{1, 2};
  Range trunk_height_m{2.0, 3.5};
  CameraIntrinsics intrinsics = default_intrinsics();
  SilhouetteModel silhouette = SilhouetteModel::ThinObject;
};

/// Deterministic scene for `seed`. Draws that violate the scene invariants or
/// leave the frame are redrawn from the same stream.
inline SyntheticScene random_scene(std::uint64_t seed, const SceneRanges& ranges = {}) {
  for (const Range* r : {&ranges.dbh_cm, &ranges.far_distance_m, &ranges.displacement_m,
                         &ranges.trunk_height_m}) {
    if (!(r->lo <= r->hi)) throw Error(ErrorCode::ParameterError, "empty scene range");
  }
  std::mt19937_64 rng(seed);
  auto draw = [&rng](const Range& r) {
    if (r.lo == r.hi) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    SyntheticScene s;
    s.intrinsics = ranges.intrinsics;
    s.silhouette = ranges.silhouette;
    s.trunk_radius = Length::centimeters(draw(ranges.dbh_cm) / 2.0);
    s.far_distance = Length::meters(draw(ranges.far_distance_m));
    s.displacement = Length::meters(draw(ranges.displacement_m));
    s.trunk_height = Length::meters(draw(ranges.trunk_height_m));
    try {
      validate(s);
      if (!(s.displacement.in_meters() > 0)) continue;
      const double x = s.far_distance.in_meters();
      const double f = s.intrinsics.focal_length().in_meters();
      const int w = s.intrinsics.image_width();
      const int h = s.intrinsics.image_height();
      const double close = x - s.displacement.in_meters();
      if (s.camera_height.in_meters() * f / (close * s.intrinsics.vertical_pitch_m()) > h / 2.0) continue;
      if (projected_width_px(s, close) > w) continue;
      return s;
    } catch (const Error&) {
      continue;
    }
  }
  throw Error(ErrorCode::ParameterError, "scene ranges admit no renderable scene");
}

/// Plain `key = value` scene description; `#` starts a comment. Unset keys
/// keep their defaults. Keys: dbh_cm, trunk_height_m, far_distance_m,
/// displacement_m, camera_height_m, focal_mm, sensor_w_mm, sensor_h_mm,
/// image_w, image_h, silhouette (thin|tangent).
inline SyntheticScene parse_scene_config(std::istream& in, SyntheticScene scene = {}) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParameterError, "scene config line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto num = [&](const std::string& key) -> std::optional<double> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      kv.erase(it);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParameterError, "scene config: bad number for " + key);
    }
  };

  if (auto v = num("dbh_cm")) scene.trunk_radius = Length::centimeters(*v / 2.0);
  if (auto v = num("trunk_height_m")) scene.trunk_height = Length::meters(*v);
  if (auto v = num("far_distance_m")) scene.far_distance = Length::meters(*v);
  if (auto v = num("displacement_m")) scene.displacement = Length::meters(*v);
  if (auto v = num("camera_height_m")) scene.camera_height = Length::meters(*v);
  const auto& c = scene.intrinsics;
  const double focal = num("focal_mm").value_or(c.focal_length().in(Unit::Millimeter));
  const double sw = num("sensor_w_mm").value_or(c.sensor_width().in(Unit::Millimeter));
  const double sh = num("sensor_h_mm").value_or(c.sensor_height().in(Unit::Millimeter));
  const int iw = static_cast<int>(num("image_w").value_or(c.image_width()));
  const int ih = static_cast<int>(num("image_h").value_or(c.image_height()));
  scene.intrinsics = CameraIntrinsics::from_mm(focal, sw, sh, iw, ih);
  if (auto it = kv.find("silhouette"); it != kv.end()) {
    if (it->second == "thin") {
      scene.silhouette = SilhouetteModel::ThinObject;
    } else if (it->second == "tangent") {
      scene.silhouette = SilhouetteModel::Tangent;
    } else {
      throw Error(ErrorCode::ParameterError, "scene config: silhouette must be thin or tangent");
    }
    kv.erase(it);
  }
  if (!kv.empty()) {
    throw Error(ErrorCode::ParameterError, "scene config: unknown key " + kv.begin()->first);
  }
  return scene;
}

}  // namespace dbhcam::synth
