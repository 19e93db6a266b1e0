#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "dbhcam/camera.hpp"
#include "dbhcam/error.hpp"
#include "dbhcam/mask.hpp"
#include "dbhcam/net.hpp"
#include "dbhcam/pipeline.hpp"
#include "dbhcam/protocol.hpp"
#include "dbhcam/segmentation.hpp"
#include "dbhcam/version.hpp"

namespace dbhcam::service {

inline constexpr std::size_t kDefaultMaxPayloadBytes = std::size_t{32} << 20;

struct ServiceConfig {
  std::optional<std::filesystem::path> oracle_dir;
  std::optional<seg::ExternalEndpoint> external;
  std::string default_provider = "mask";
  std::size_t max_payload_bytes = kDefaultMaxPayloadBytes;
};

/// Measurement converted to wire form.
inline protocol::MeasureResult to_result(const Measurement& m, Bytes far_mask, Bytes close_mask) {
  protocol::MeasureResult r;
  r.dbh_cm = m.dbh.in(Unit::Centimeter);
  r.far_distance_m = m.far_distance.in_meters();
  r.df_mm_per_px = m.df.mm_per_px();
  r.alignment_iou = m.alignment_iou;
  r.alignment_scale = m.alignment.scale;
  r.trunk_height_visible_m = m.trunk_height_visible.in_meters();
  r.p_pixels = m.p_pixels;
  r.breast_row = m.breast_row;
  r.far_height_px = m.far_height_px;
  r.h_far_px = m.h_far_px;
  r.h_close_px = m.h_close_px;
  r.mode = std::string(to_string(m.mode));
  r.far_mask = std::move(far_mask);
  r.close_mask = std::move(close_mask);
  return r;
}

/// Stateless request handlers shared by the stream and HTTP front ends and by
/// the CLI. Provider state is read-only after construction.
class MeasurementService {
 public:
  explicit MeasurementService(ServiceConfig cfg = {}) : cfg_(std::move(cfg)) {
    providers_.emplace("mask", seg::PrecomputedMask{});
    providers_.emplace("baseline", seg::BaselineParams{false});
    providers_.emplace("baseline-inverted", seg::BaselineParams{true});
    if (cfg_.oracle_dir) providers_.emplace("oracle", seg::OracleSource::open(*cfg_.oracle_dir));
    if (cfg_.external) providers_.emplace("external", *cfg_.external);
  }

  const ServiceConfig& config() const { return cfg_; }

  const seg::MaskProviderKind& provider(const std::string& requested) const {
    const std::string& name = requested.empty() ? cfg_.default_provider : requested;
    const auto it = providers_.find(name);
    if (it == providers_.end()) {
      throw Error(ErrorCode::ProviderUnavailable, "provider '" + name + "' is not configured");
    }
    return it->second;
  }

  protocol::MeasureResponse handle_measure(const protocol::MeasureRequest& req) const {
    using clock = std::chrono::steady_clock;
    protocol::MeasureResponse resp;
    resp.request_id = req.request_id;
    const auto t0 = clock::now();
    auto lap = [&resp](const char* stage, clock::time_point& since) {
      const auto now = clock::now();
      resp.timings_ms[stage] = std::chrono::duration<double, std::milli>(now - since).count();
      since = now;
    };
    try {
      protocol::validate(req);
      const auto& prov = provider(req.provider);
      auto t = clock::now();
      const TrunkMask far = seg::segment(req.far_image, prov);
      lap("segment_far", t);
      const TrunkMask close = seg::segment(req.close_image, prov);
      lap("segment_close", t);

      const auto cam = CameraIntrinsics::from_mm(req.focal_length_mm, req.sensor_width_mm, req.sensor_height_mm,
                                                 far.width(), far.height());
      if (!cam.square_pixels()) {
        resp.warnings.push_back("non-square pixel pitch (" + std::to_string(100.0 * cam.pitch_mismatch()) +
                                "% mismatch); vertical pitch used for widths");
      }
      CaptureConfig cfg;
      cfg.displacement = Length::meters(req.displacement_m);
      cfg.far_distance.reset();
      if (req.far_distance_m) cfg.far_distance = Length::meters(*req.far_distance_m);
      if (req.breast_height_m) cfg.breast_height = Length::meters(*req.breast_height_m);
      if (req.median_band_px) cfg.median_band = *req.median_band_px;
      const Measurement m = measure_pair(far, close, cam, cfg);
      lap("measure", t);

      auto result = to_result(m, encode_mask(far), encode_mask(close));
      lap("encode_masks", t);
      resp.result = std::move(result);
    } catch (const Error& e) {
      resp.result.reset();
      resp.warnings.clear();
      resp.error = protocol::ErrorInfo{std::string(e.code_name()), e.what()};
    }
    resp.timings_ms["total"] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    return resp;
  }

  protocol::HealthReport handle_health() const {
    protocol::HealthReport h;
    h.status = "ok";
    h.version = kVersion;
    for (const auto& [name, p] : providers_) {
      protocol::ProviderStatus s{name, "available", ""};
      if (const auto* o = std::get_if<seg::OracleSource>(&p); o && !o->available()) {
        s.status = "unavailable";
        s.detail = o->problem();
      } else if (const auto* x = std::get_if<seg::ExternalEndpoint>(&p)) {
        s.status = "configured";
        s.detail = x->endpoint.host + ":" + std::to_string(x->endpoint.port);
      }
      h.providers.push_back(std::move(s));
    }
    return h;
  }

  protocol::SegmentResponse handle_segment(const protocol::SegmentRequest& req) const {
    protocol::SegmentResponse resp;
    resp.request_id = req.request_id;
    try {
      resp.mask = encode_mask(seg::segment(req.image, provider(req.provider)));
    } catch (const Error& e) {
      resp.error = protocol::ErrorInfo{std::string(e.code_name()), e.what()};
    }
    return resp;
  }

  /// Dispatches one decoded envelope. Request payload errors are answered in
  /// the matching response type; anything else becomes an "error" envelope.
  protocol::Envelope handle_envelope(const protocol::Envelope& env) const {
    namespace t = protocol::type;
    const std::string request_id = env.payload.contains("request_id") && env.payload["request_id"].is_string()
                                        ? env.payload["request_id"].get<std::string>()
                                        : std::string{};
    auto failure = [&](const Error& e) {
      return protocol::ErrorInfo{std::string(e.code_name()), e.what()};
    };
    if (env.type == t::kMeasureRequest) {
      protocol::MeasureResponse resp;
      try {
        resp = handle_measure(protocol::measure_request_from_json(env.payload));
      } catch (const Error& e) {
        resp.request_id = request_id;
        resp.error = failure(e);
      }
      return {std::string(t::kMeasureResponse), to_json(resp)};
    }
    if (env.type == t::kSegmentRequest) {
      protocol::SegmentResponse resp;
      try {
        resp = handle_segment(protocol::segment_request_from_json(env.payload));
      } catch (const Error& e) {
        resp.request_id = request_id;
        resp.error = failure(e);
      }
      return {std::string(t::kSegmentResponse), to_json(resp)};
    }
    if (env.type == t::kHealthRequest) return {std::string(t::kHealthResponse), to_json(handle_health())};
    return protocol::error_envelope(
        Error(ErrorCode::UnsupportedType, "'" + env.type + "' is not a request type"), request_id);
  }

  /// One newline-terminated frame in, one frame out.
  std::string handle_frame(std::string_view frame) const {
    try {
      return protocol::encode_envelope(handle_envelope(protocol::decode_envelope(frame)));
    } catch (const Error& e) {
      return protocol::encode_envelope(protocol::error_envelope(e));
    }
  }

 private:
  ServiceConfig cfg_;
  std::map<std::string, seg::MaskProviderKind> providers_;
};

/// Newline-delimited envelope server over TCP. One thread per connection;
/// frames on a connection are answered in order.
class StreamServer {
 public:
  StreamServer(const MeasurementService& service, const std::string& address, std::uint16_t port)
      : service_(service), listener_(net::listen_tcp(address, port)) {}

  ~StreamServer() { stop(); }

  std::uint16_t port() const { return net::bound_port(listener_); }

  void start() {
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  /// Stops accepting, lets in-flight requests finish, then joins everything.
  void stop() {
    if (stopping_.exchange(true)) return;
    if (accept_thread_.joinable()) accept_thread_.join();
    std::list<std::thread> threads;
    {
      std::lock_guard lock(mu_);
      threads.swap(threads_);
    }
    for (auto& th : threads) th.join();
    listener_.close();
  }

 private:
  static constexpr int kPollMs = 100;

  void accept_loop() {
    while (!stopping_) {
      if (!net::wait_fd(listener_.fd(), POLLIN, kPollMs)) continue;
      const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      auto sock = std::make_shared<net::Socket>(fd);
      std::lock_guard lock(mu_);
      threads_.emplace_back([this, sock] { serve_connection(*sock); });
    }
  }

  void serve_connection(const net::Socket& sock) {
    net::LineReader reader(sock, service_.config().max_payload_bytes);
    std::string line;
    try {
      while (true) {
        const auto status = reader.next(line, kPollMs);
        if (status == net::LineReader::Status::Timeout) {
          if (stopping_) return;
          continue;
        }
        if (status == net::LineReader::Status::TooLong) {
          net::send_all(sock, protocol::encode_envelope(protocol::error_envelope(
                                  Error(ErrorCode::PayloadTooLarge, "frame exceeds " +
                                                                        std::to_string(service_.config().max_payload_bytes) +
                                                                        " bytes"))));
          return;
        }
        if (status == net::LineReader::Status::Closed) {
          if (!line.empty()) {
            net::send_all(sock, protocol::encode_envelope(protocol::error_envelope(
                                    Error(ErrorCode::FrameError, "connection closed mid-frame"))));
          }
          return;
        }
        line += '\n';
        net::send_all(sock, service_.handle_frame(line));
      }
    } catch (const Error&) {
      // Peer went away while we were writing.
    }
  }

  const MeasurementService& service_;
  net::Socket listener_;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::list<std::thread> threads_;
};

/// HTTP status for a pipeline or protocol error code.
inline int http_status(std::string_view code) {
  ErrorCode c{};
  if (!parse_error_code(code, c)) return 500;
  switch (c) {
    case ErrorCode::ProtocolError:
    case ErrorCode::FrameError:
    case ErrorCode::UnsupportedType: return 400;
    case ErrorCode::PayloadTooLarge: return 413;
    case ErrorCode::ProviderUnavailable: return 503;
    case ErrorCode::IoError: return 500;
    default: return 422;
  }
}

/// Single-shot HTTP front end:
///   POST /v1/envelope  body and reply are envelopes
///   POST /v1/measure   body is a measure_request payload, reply the response payload
///   GET  /v1/health
class HttpServer {
 public:
  HttpServer(const MeasurementService& service, const std::string& address, std::uint16_t port)
      : service_(service) {
    server_.set_payload_max_length(service.config().max_payload_bytes);
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Headers", "Content-Type"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server_.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(protocol::to_json(service_.handle_health()).dump(), "application/json");
    });
    server_.Post("/v1/measure", [this](const httplib::Request& req, httplib::Response& res) {
      protocol::MeasureResponse resp;
      try {
        resp = service_.handle_measure(
            protocol::measure_request_from_json(parse_body(req.body)));
      } catch (const Error& e) {
        resp.error = protocol::ErrorInfo{std::string(e.code_name()), e.what()};
      }
      res.status = resp.ok() ? 200 : http_status(resp.error->code);
      res.set_content(protocol::to_json(resp).dump(), "application/json");
    });
    server_.Post("/v1/envelope", [this](const httplib::Request& req, httplib::Response& res) {
      std::string frame = req.body;
      if (frame.empty() || frame.back() != '\n') frame += '\n';
      std::string reply = service_.handle_frame(frame);
      reply.pop_back();
      res.set_content(reply, "application/json");
    });
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
      res.status = 500;
      res.set_content(R"({"status":"error","error":{"code":"IO_ERROR","message":"internal error"}})",
                      "application/json");
    });
    if (port == 0) {
      port_ = static_cast<std::uint16_t>(server_.bind_to_any_port(address));
    } else if (server_.bind_to_port(address, port)) {
      port_ = port;
    }
    if (port_ == 0) {
      throw Error(ErrorCode::IoError, "cannot listen on " + address + ":" + std::to_string(port));
    }
  }

  ~HttpServer() { stop(); }

  std::uint16_t port() const { return port_; }

  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  static nlohmann::json parse_body(const std::string& body) {
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ProtocolError, std::string("malformed JSON body: ") + e.what());
    }
  }

  const MeasurementService& service_;
  httplib::Server server_;
  std::uint16_t port_ = 0;
  std::thread thread_;
};

}  // namespace dbhcam::service
