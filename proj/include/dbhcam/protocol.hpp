#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dbhcam/error.hpp"
#include "dbhcam/png_io.hpp"

// Wire protocol: newline-delimited JSON envelopes {"type": ..., "payload": ...}
// over an ordered reliable byte stream. Binary fields are base64 (RFC 4648,
// padded). Field names below are the canonical schema.
namespace dbhcam::protocol {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// base64

inline std::string base64_encode(std::span<const std::uint8_t> data) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{data[i]} << 16) | (std::uint32_t{data[i + 1]} << 8) | data[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < data.size()) {
    std::uint32_t v = std::uint32_t{data[i]} << 16;
    if (i + 1 < data.size()) v |= std::uint32_t{data[i + 1]} << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < data.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline Bytes base64_decode(std::string_view text) {
  static const auto kTable = [] {
    std::array<std::int8_t, 256> t{};
    t.fill(-1);
    const std::string_view a = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (std::size_t i = 0; i < a.size(); ++i) t[static_cast<unsigned char>(a[i])] = static_cast<std::int8_t>(i);
    return t;
  }();
  if (text.size() % 4 != 0) throw Error(ErrorCode::ProtocolError, "base64 length not a multiple of 4");
  Bytes out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const auto d = kTable[static_cast<unsigned char>(c)];
      if (d < 0 || pad > 0) throw Error(ErrorCode::ProtocolError, "invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

// ---------------------------------------------------------------------------
// envelopes

namespace type {
inline constexpr std::string_view kMeasureRequest = "measure_request";
inline constexpr std::string_view kMeasureResponse = "measure_response";
inline constexpr std::string_view kHealthRequest = "health_request";
inline constexpr std::string_view kHealthResponse = "health_response";
inline constexpr std::string_view kSegmentRequest = "segment_request";
inline constexpr std::string_view kSegmentResponse = "segment_response";
inline constexpr std::string_view kError = "error";
}  // namespace type

inline bool known_type(std::string_view t) {
  return t == type::kMeasureRequest || t == type::kMeasureResponse || t == type::kHealthRequest ||
         t == type::kHealthResponse || t == type::kSegmentRequest || t == type::kSegmentResponse ||
         t == type::kError;
}

struct Envelope {
  std::string type;
  json payload = json::object();

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

/// One frame: compact JSON followed by '\n'.
inline std::string encode_envelope(const Envelope& e) {
  json j = {{"type", e.type}, {"payload", e.payload}};
  std::string out = j.dump();
  out += '\n';
  return out;
}

/// Decodes exactly one newline-terminated frame.
inline Envelope decode_envelope(std::string_view frame) {
  if (frame.empty() || frame.back() != '\n') {
    throw Error(ErrorCode::FrameError, "truncated frame: missing newline terminator");
  }
  frame.remove_suffix(1);
  if (!frame.empty() && frame.back() == '\r') frame.remove_suffix(1);
  if (frame.find('\n') != std::string_view::npos) {
    throw Error(ErrorCode::FrameError, "frame contains more than one envelope");
  }
  json j;
  try {
    j = json::parse(frame);
  } catch (const json::parse_error& e) {
    // Input ending mid-value is a cut frame. An explicit unexpected token,
    // even as the last byte, is malformed JSON.
    const bool truncated =
        e.byte >= frame.size() && std::string_view(e.what()).find("unexpected '") == std::string_view::npos;
    throw Error(truncated ? ErrorCode::FrameError : ErrorCode::ProtocolError,
                std::string(truncated ? "truncated frame: " : "malformed envelope: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw Error(ErrorCode::ProtocolError, "envelope requires a string 'type'");
  }
  Envelope e;
  e.type = j["type"].get<std::string>();
  if (!known_type(e.type)) throw Error(ErrorCode::UnsupportedType, "unsupported envelope type '" + e.type + "'");
  if (!j.contains("payload") || !j["payload"].is_object()) {
    throw Error(ErrorCode::ProtocolError, "envelope requires an object 'payload'");
  }
  e.payload = std::move(j["payload"]);
  return e;
}

// ---------------------------------------------------------------------------
// field helpers

namespace detail {

inline const json& field(const json& obj, const char* name) {
  if (!obj.contains(name) || obj[name].is_null()) {
    throw Error(ErrorCode::ProtocolError, std::string("missing field ") + name);
  }
  return obj[name];
}

inline double number(const json& obj, const char* name) {
  const json& v = field(obj, name);
  if (!v.is_number()) throw Error(ErrorCode::ProtocolError, std::string("field ") + name + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(ErrorCode::ProtocolError, std::string("field ") + name + " must be finite");
  return d;
}

inline std::optional<double> optional_number(const json& obj, const char* name) {
  if (!obj.contains(name) || obj[name].is_null()) return std::nullopt;
  return number(obj, name);
}

inline std::string string(const json& obj, const char* name) {
  const json& v = field(obj, name);
  if (!v.is_string()) throw Error(ErrorCode::ProtocolError, std::string("field ") + name + " must be a string");
  return v.get<std::string>();
}

inline std::string optional_string(const json& obj, const char* name) {
  if (!obj.contains(name) || obj[name].is_null()) return {};
  return string(obj, name);
}

inline Bytes binary(const json& obj, const char* name) {
  return base64_decode(string(obj, name));
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::ProtocolError, message);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// measure

struct MeasureRequest {
  std::string request_id;
  Bytes far_image;
  Bytes close_image;
  double focal_length_mm = 0;
  double sensor_width_mm = 0;
  double sensor_height_mm = 0;
  double displacement_m = 0;
  std::optional<double> far_distance_m;  // absent: estimated mode
  std::string provider;                  // empty: server default
  std::optional<double> breast_height_m;
  std::optional<int> median_band_px;

  friend bool operator==(const MeasureRequest&, const MeasureRequest&) = default;
};

inline void validate(const MeasureRequest& r) {
  using detail::require;
  require(!r.far_image.empty(), "far_image must be non-empty");
  require(!r.close_image.empty(), "close_image must be non-empty");
  require(r.focal_length_mm > 0, "focal_length_mm must be positive");
  require(r.sensor_width_mm > 0, "sensor_width_mm must be positive");
  require(r.sensor_height_mm > 0, "sensor_height_mm must be positive");
  require(r.displacement_m > 0, "displacement_m must be positive");
  if (r.far_distance_m) require(*r.far_distance_m > r.displacement_m, "far_distance_m must exceed displacement_m");
  if (r.breast_height_m) require(*r.breast_height_m >= 0, "breast_height_m must be non-negative");
  if (r.median_band_px) require(*r.median_band_px >= 0, "median_band_px must be non-negative");
}

inline json to_json(const MeasureRequest& r) {
  json j = {
      {"request_id", r.request_id},
      {"far_image", base64_encode(r.far_image)},
      {"close_image", base64_encode(r.close_image)},
      {"focal_length_mm", r.focal_length_mm},
      {"sensor_width_mm", r.sensor_width_mm},
      {"sensor_height_mm", r.sensor_height_mm},
      {"displacement_m", r.displacement_m},
  };
  if (r.far_distance_m) j["far_distance_m"] = *r.far_distance_m;
  if (!r.provider.empty()) j["provider"] = r.provider;
  if (r.breast_height_m) j["breast_height_m"] = *r.breast_height_m;
  if (r.median_band_px) j["median_band_px"] = *r.median_band_px;
  return j;
}

/// Parses and validates; failures are ProtocolError naming the field.
inline MeasureRequest measure_request_from_json(const json& j) {
  detail::require(j.is_object(), "measure_request payload must be an object");
  MeasureRequest r;
  r.request_id = detail::string(j, "request_id");
  r.far_image = detail::binary(j, "far_image");
  r.close_image = detail::binary(j, "close_image");
  r.focal_length_mm = detail::number(j, "focal_length_mm");
  r.sensor_width_mm = detail::number(j, "sensor_width_mm");
  r.sensor_height_mm = detail::number(j, "sensor_height_mm");
  r.displacement_m = detail::number(j, "displacement_m");
  r.far_distance_m = detail::optional_number(j, "far_distance_m");
  r.provider = detail::optional_string(j, "provider");
  r.breast_height_m = detail::optional_number(j, "breast_height_m");
  if (auto band = detail::optional_number(j, "median_band_px")) {
    detail::require(*band == std::floor(*band), "median_band_px must be an integer");
    r.median_band_px = static_cast<int>(*band);
  }
  validate(r);
  return r;
}

struct MeasureResult {
  double dbh_cm = 0;
  double far_distance_m = 0;
  double df_mm_per_px = 0;
  double alignment_iou = 0;
  double alignment_scale = 0;
  double trunk_height_visible_m = 0;
  int p_pixels = 0;
  int breast_row = 0;
  int far_height_px = 0;
  int h_far_px = 0;
  int h_close_px = 0;
  std::string mode;
  Bytes far_mask;   // PNG
  Bytes close_mask; // PNG

  friend bool operator==(const MeasureResult&, const MeasureResult&) = default;
};

struct ErrorInfo {
  std::string code;
  std::string message;

  friend bool operator==(const ErrorInfo&, const ErrorInfo&) = default;
};

/// Either `result` (status ok) or `error` is set, never both.
struct MeasureResponse {
  std::string request_id;
  std::optional<MeasureResult> result;
  std::optional<ErrorInfo> error;
  std::map<std::string, double> timings_ms;
  std::vector<std::string> warnings;

  bool ok() const { return result.has_value(); }

  friend bool operator==(const MeasureResponse&, const MeasureResponse&) = default;
};

inline json to_json(const MeasureResponse& r) {
  json j = {{"request_id", r.request_id}, {"timings", r.timings_ms}};
  if (r.result) {
    const auto& m = *r.result;
    j["status"] = "ok";
    j["dbh_cm"] = m.dbh_cm;
    j["far_distance_m"] = m.far_distance_m;
    j["df_mm_per_px"] = m.df_mm_per_px;
    j["alignment_iou"] = m.alignment_iou;
    j["alignment_scale"] = m.alignment_scale;
    j["trunk_height_visible_m"] = m.trunk_height_visible_m;
    j["p_pixels"] = m.p_pixels;
    j["breast_row"] = m.breast_row;
    j["far_height_px"] = m.far_height_px;
    j["h_far_px"] = m.h_far_px;
    j["h_close_px"] = m.h_close_px;
    j["mode"] = m.mode;
    j["masks"] = {{"far", base64_encode(m.far_mask)}, {"close", base64_encode(m.close_mask)}};
  } else {
    const ErrorInfo e = r.error.value_or(ErrorInfo{"PROTOCOL_ERROR", "empty response"});
    j["status"] = "error";
    j["error"] = {{"code", e.code}, {"message", e.message}};
  }
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

inline MeasureResponse measure_response_from_json(const json& j) {
  detail::require(j.is_object(), "measure_response payload must be an object");
  MeasureResponse r;
  r.request_id = detail::optional_string(j, "request_id");
  if (j.contains("timings") && j["timings"].is_object()) {
    for (const auto& [k, v] : j["timings"].items()) r.timings_ms[k] = v.get<double>();
  }
  if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  const std::string status = detail::string(j, "status");
  if (status == "ok") {
    MeasureResult m;
    m.dbh_cm = detail::number(j, "dbh_cm");
    m.far_distance_m = detail::number(j, "far_distance_m");
    m.df_mm_per_px = detail::number(j, "df_mm_per_px");
    m.alignment_iou = detail::number(j, "alignment_iou");
    m.alignment_scale = detail::number(j, "alignment_scale");
    m.trunk_height_visible_m = detail::number(j, "trunk_height_visible_m");
    m.p_pixels = static_cast<int>(detail::number(j, "p_pixels"));
    m.breast_row = static_cast<int>(detail::number(j, "breast_row"));
    m.far_height_px = static_cast<int>(detail::number(j, "far_height_px"));
    m.h_far_px = static_cast<int>(detail::number(j, "h_far_px"));
    m.h_close_px = static_cast<int>(detail::number(j, "h_close_px"));
    m.mode = detail::string(j, "mode");
    const json& masks = detail::field(j, "masks");
    m.far_mask = detail::binary(masks, "far");
    m.close_mask = detail::binary(masks, "close");
    r.result = std::move(m);
  } else if (status == "error") {
    const json& e = detail::field(j, "error");
    r.error = ErrorInfo{detail::string(e, "code"), detail::optional_string(e, "message")};
  } else {
    throw Error(ErrorCode::ProtocolError, "unknown status '" + status + "'");
  }
  return r;
}

// ---------------------------------------------------------------------------
// health

struct ProviderStatus {
  std::string name;
  std::string status;  // "available" | "unavailable" | "configured"
  std::string detail;

  friend bool operator==(const ProviderStatus&, const ProviderStatus&) = default;
};

struct HealthReport {
  std::string status = "ok";
  std::string version;
  std::vector<ProviderStatus> providers;

  friend bool operator==(const HealthReport&, const HealthReport&) = default;
};

inline json to_json(const HealthReport& h) {
  json providers = json::array();
  for (const auto& p : h.providers) {
    json entry = {{"name", p.name}, {"status", p.status}};
    if (!p.detail.empty()) entry["detail"] = p.detail;
    providers.push_back(std::move(entry));
  }
  return {{"status", h.status}, {"version", h.version}, {"providers", providers}};
}

inline HealthReport health_from_json(const json& j) {
  HealthReport h;
  h.status = detail::string(j, "status");
  h.version = detail::string(j, "version");
  for (const auto& p : detail::field(j, "providers")) {
    h.providers.push_back({detail::string(p, "name"), detail::string(p, "status"),
                           detail::optional_string(p, "detail")});
  }
  return h;
}

// ---------------------------------------------------------------------------
// segment (mask sub-protocol used by external providers)

struct SegmentRequest {
  std::string request_id;
  Bytes image;
  std::string provider;

  friend bool operator==(const SegmentRequest&, const SegmentRequest&) = default;
};

struct SegmentResponse {
  std::string request_id;
  std::optional<Bytes> mask;  // PNG; absent on error
  std::optional<ErrorInfo> error;

  friend bool operator==(const SegmentResponse&, const SegmentResponse&) = default;
};

inline json to_json(const SegmentRequest& r) {
  json j = {{"request_id", r.request_id}, {"image", base64_encode(r.image)}};
  if (!r.provider.empty()) j["provider"] = r.provider;
  return j;
}

inline SegmentRequest segment_request_from_json(const json& j) {
  SegmentRequest r;
  r.request_id = detail::string(j, "request_id");
  r.image = detail::binary(j, "image");
  r.provider = detail::optional_string(j, "provider");
  detail::require(!r.image.empty(), "image must be non-empty");
  return r;
}

inline json to_json(const SegmentResponse& r) {
  json j = {{"request_id", r.request_id}};
  if (r.mask) {
    j["status"] = "ok";
    j["mask"] = base64_encode(*r.mask);
  } else {
    const ErrorInfo e = r.error.value_or(ErrorInfo{"PROTOCOL_ERROR", "empty response"});
    j["status"] = "error";
    j["error"] = {{"code", e.code}, {"message", e.message}};
  }
  return j;
}

inline SegmentResponse segment_response_from_json(const json& j) {
  SegmentResponse r;
  r.request_id = detail::optional_string(j, "request_id");
  const std::string status = detail::string(j, "status");
  if (status == "ok") {
    r.mask = detail::binary(j, "mask");
  } else {
    const json& e = detail::field(j, "error");
    r.error = ErrorInfo{detail::string(e, "code"), detail::optional_string(e, "message")};
  }
  return r;
}

inline Envelope error_envelope(const Error& e, const std::string& request_id = {}) {
  json payload = {{"code", std::string(e.code_name())}, {"message", e.what()}};
  if (!request_id.empty()) payload["request_id"] = request_id;
  return {std::string(type::kError), payload};
}

}  // namespace dbhcam::protocol
