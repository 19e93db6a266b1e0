#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dbhcam/error.hpp"
#include "dbhcam/mask.hpp"
#include "dbhcam/net.hpp"
#include "dbhcam/png_io.hpp"
#include "dbhcam/protocol.hpp"

namespace dbhcam::seg {

/// Payload already is a mask raster (nonzero = trunk).
struct PrecomputedMask {};

/// Stored masks: `<id>.img` holds the image bytes, `<id>.mask.png` its mask.
/// Images are matched by content.
class OracleSource {
 public:
  static OracleSource open(const std::filesystem::path& directory) {
    OracleSource src;
    src.directory_ = directory;
    std::error_code ec;
    if (!std::filesystem::is_directory(directory, ec)) {
      src.problem_ = "not a directory: " + directory.string();
      return src;
    }
    for (const auto& entry : std::filesystem::directory_iterator(directory, ec)) {
      const auto& p = entry.path();
      if (!entry.is_regular_file() || p.extension() != ".img") continue;
      const std::string id = p.stem().string();
      if (!std::filesystem::exists(directory / (id + ".mask.png"))) {
        src.problem_ = "image " + id + " has no mask";
        continue;
      }
      const Bytes data = read_file(p);
      src.index_.emplace(content_key(data), id);
    }
    if (ec) src.problem_ = ec.message();
    src.available_ = src.problem_.empty();
    return src;
  }

  bool available() const { return available_; }
  const std::string& problem() const { return problem_; }
  const std::filesystem::path& directory() const { return directory_; }
  std::size_t size() const { return index_.size(); }

  /// Id of the stored image whose bytes equal `image`.
  std::optional<std::string> lookup(std::span<const std::uint8_t> image) const {
    const auto [lo, hi] = index_.equal_range(content_key(image));
    for (auto it = lo; it != hi; ++it) {
      const Bytes stored = read_file(directory_ / (it->second + ".img"));
      if (std::equal(stored.begin(), stored.end(), image.begin(), image.end())) return it->second;
    }
    return std::nullopt;
  }

  TrunkMask mask_for_id(const std::string& id) const {
    const auto path = directory_ / (id + ".mask.png");
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::UnknownImage, "oracle has no mask for " + id);
    return decode_mask(read_file(path), MaskProvenance::OracleFile);
  }

 private:
  static std::uint64_t content_key(std::span<const std::uint8_t> data) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (std::uint8_t b : data) {
      h ^= b;
      h *= 1099511628211ull;
    }
    return h ^ data.size();
  }

  std::filesystem::path directory_;
  std::multimap<std::uint64_t, std::string> index_;
  bool available_ = false;
  std::string problem_;
};

/// Classical stand-in segmenter: BT.601 gray, global Otsu threshold, 3x3
/// opening, centered component. Foreground is the dark class unless
/// `invert` is set.
struct BaselineParams {
  bool invert = false;
};

/// Remote segmenter speaking the segment_request/segment_response envelopes.
struct ExternalEndpoint {
  net::Endpoint endpoint;
  int timeout_ms = 30000;
  std::string remote_provider;  // provider name forwarded to the remote; empty = its default
};

using MaskProviderKind = std::variant<PrecomputedMask, OracleSource, BaselineParams, ExternalEndpoint>;

/// Otsu threshold over a 256-bin histogram: class 0 is [0, t]. Returns
/// nullopt when the histogram has fewer than two occupied bins.
inline std::optional<int> otsu_threshold(const std::array<std::uint64_t, 256>& hist) {
  std::uint64_t total = 0;
  double sum_all = 0;
  int occupied = 0;
  for (int i = 0; i < 256; ++i) {
    total += hist[i];
    sum_all += static_cast<double>(i) * static_cast<double>(hist[i]);
    if (hist[i]) ++occupied;
  }
  if (occupied < 2) return std::nullopt;
  double best = -1.0;
  int best_t = 0;
  std::uint64_t w0 = 0;
  double sum0 = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += static_cast<double>(t) * static_cast<double>(hist[t]);
    const std::uint64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / static_cast<double>(w0);
    const double m1 = (sum_all - sum0) / static_cast<double>(w1);
    const double between = static_cast<double>(w0) * static_cast<double>(w1) * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

namespace detail {

// 3x3 min (erode) or max (dilate) filter; out-of-frame neighbours are ignored.
inline TrunkMask filter3x3(const TrunkMask& in, bool erode) {
  const int w = in.width();
  const int h = in.height();
  const auto bits = in.bits();
  std::vector<std::uint8_t> tmp(bits.size());
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = bits[row + x];
      if (x > 0) v = erode ? std::min(v, bits[row + x - 1]) : std::max(v, bits[row + x - 1]);
      if (x + 1 < w) v = erode ? std::min(v, bits[row + x + 1]) : std::max(v, bits[row + x + 1]);
      tmp[row + x] = v;
    }
  }
  TrunkMask out(w, h, in.provenance());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      std::uint8_t v = tmp[i];
      if (y > 0) v = erode ? std::min(v, tmp[i - w]) : std::max(v, tmp[i - w]);
      if (y + 1 < h) v = erode ? std::min(v, tmp[i + w]) : std::max(v, tmp[i + w]);
      if (v) out.set(x, y);
    }
  }
  return out;
}

}  // namespace detail

inline TrunkMask morphological_open(const TrunkMask& mask) {
  return detail::filter3x3(detail::filter3x3(mask, true), false);
}

inline TrunkMask baseline_threshold(const Raster& image, const BaselineParams& params = {}) {
  const auto gray = to_gray(image);
  std::array<std::uint64_t, 256> hist{};
  for (std::uint8_t g : gray) ++hist[g];
  const auto t = otsu_threshold(hist);
  if (!t) throw Error(ErrorCode::SegmentationEmpty, "uniform image: no foreground class");
  TrunkMask raw(image.width, image.height, MaskProvenance::BaselineSegmenter);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::uint8_t g = gray[static_cast<std::size_t>(y) * image.width + x];
      if (params.invert ? g > *t : g <= *t) raw.set(x, y);
    }
  }
  const TrunkMask opened = morphological_open(raw);
  if (opened.empty()) throw Error(ErrorCode::SegmentationEmpty, "nothing left after opening");
  return select_trunk_component(opened);
}

inline TrunkMask baseline_threshold(std::span<const std::uint8_t> image_bytes, const BaselineParams& params = {}) {
  return baseline_threshold(decode_png(image_bytes), params);
}

/// Sends one segment_request over a fresh connection and decodes the mask.
inline TrunkMask segment_external(std::span<const std::uint8_t> image, const ExternalEndpoint& ext,
                                  const std::string& request_id = "segment") {
  net::Socket sock = net::connect_tcp(ext.endpoint, ext.timeout_ms);
  protocol::SegmentRequest req{request_id, Bytes(image.begin(), image.end()), ext.remote_provider};
  try {
    net::send_all(sock, protocol::encode_envelope({std::string(protocol::type::kSegmentRequest), to_json(req)}));
  } catch (const Error& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("external provider: ") + e.what());
  }
  net::LineReader reader(sock, std::size_t{1} << 30);
  std::string line;
  if (reader.next(line, ext.timeout_ms) != net::LineReader::Status::Line) {
    throw Error(ErrorCode::ProviderUnavailable, "external provider closed or timed out");
  }
  line += '\n';
  const protocol::Envelope env = protocol::decode_envelope(line);
  if (env.type == protocol::type::kError) {
    throw Error(ErrorCode::ProviderUnavailable,
                "external provider error: " + env.payload.value("message", std::string{}));
  }
  if (env.type != protocol::type::kSegmentResponse) {
    throw Error(ErrorCode::ProtocolError, "external provider replied with " + env.type);
  }
  const auto resp = protocol::segment_response_from_json(env.payload);
  if (!resp.mask) {
    ErrorCode code = ErrorCode::ProviderUnavailable;
    parse_error_code(resp.error->code, code);
    throw Error(code, "external provider: " + resp.error->message);
  }
  TrunkMask mask = decode_mask(*resp.mask, MaskProvenance::External);
  return select_trunk_component(mask);
}

/// Uniform entry point over all provider kinds.
inline TrunkMask segment(std::span<const std::uint8_t> image, const MaskProviderKind& provider) {
  return std::visit(
      [&](const auto& p) -> TrunkMask {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, PrecomputedMask>) {
          return decode_mask(image, MaskProvenance::External);
        } else if constexpr (std::is_same_v<P, OracleSource>) {
          if (!p.available()) throw Error(ErrorCode::ProviderUnavailable, "oracle: " + p.problem());
          const auto id = p.lookup(image);
          if (!id) throw Error(ErrorCode::UnknownImage, "oracle has no entry for this image");
          return p.mask_for_id(*id);
        } else if constexpr (std::is_same_v<P, BaselineParams>) {
          return baseline_threshold(image, p);
        } else {
          return segment_external(image, p);
        }
      },
      provider);
}

}  // namespace dbhcam::seg
