#pragma once

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dbhcam/error.hpp"
#include "dbhcam/manifest.hpp"
#include "dbhcam/metrics.hpp"
#include "dbhcam/protocol.hpp"
#include "dbhcam/segmentation.hpp"
#include "dbhcam/service.hpp"
#include "dbhcam/synthetic.hpp"
#include "dbhcam/version.hpp"

namespace dbhcam::cli {

enum ExitCode { kOk = 0, kPipelineError = 1, kUsageError = 2, kIoError = 3 };

inline int exit_code_for(std::string_view code) {
  ErrorCode c{};
  if (!parse_error_code(code, c)) return kPipelineError;
  switch (c) {
    case ErrorCode::IoError: return kIoError;
    case ErrorCode::ParameterError:
    case ErrorCode::ProtocolError: return kUsageError;
    default: return kPipelineError;
  }
}

struct ProviderFlags {
  std::string provider;
  std::string oracle_dir;
  std::string external;

  void add_to(CLI::App* cmd, const std::string& default_provider) {
    provider = default_provider;
    cmd->add_option("--provider", provider, "Mask provider: mask, oracle, baseline, baseline-inverted, external")
        ->capture_default_str();
    cmd->add_option("--oracle-dir", oracle_dir, "Directory of <id>.img / <id>.mask.png pairs");
    cmd->add_option("--external", external, "host:port of an external segmentation server");
  }

  service::ServiceConfig config() const {
    service::ServiceConfig cfg;
    cfg.default_provider = provider;
    if (!oracle_dir.empty()) cfg.oracle_dir = oracle_dir;
    if (!external.empty()) cfg.external = seg::ExternalEndpoint{net::parse_endpoint(external), 30000, ""};
    return cfg;
  }
};

struct IntrinsicsFlags {
  double focal_mm = 0;
  double sensor_w_mm = 0;
  double sensor_h_mm = 0;

  void add_to(CLI::App* cmd, bool required) {
    auto* f = cmd->add_option("--focal-mm", focal_mm, "Focal length (mm)")->check(CLI::PositiveNumber);
    auto* w = cmd->add_option("--sensor-w-mm", sensor_w_mm, "Sensor width (mm)")->check(CLI::PositiveNumber);
    auto* h = cmd->add_option("--sensor-h-mm", sensor_h_mm, "Sensor height (mm)")->check(CLI::PositiveNumber);
    if (required) {
      f->required();
      w->required();
      h->required();
    }
  }
};

inline std::string fmt(double v, int decimals = 4) { return eval::format_fixed(v, decimals); }

inline void print_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << "error: " << code << ": " << message << "\n";
}

// ---------------------------------------------------------------------------
// measure

struct MeasureFlags {
  std::string far_path;
  std::string close_path;
  IntrinsicsFlags cam;
  double displacement_m = 0;
  std::optional<double> far_distance_m;
  std::optional<double> breast_height_m;
  std::optional<int> median_band_px;
  std::string format = "text";
  std::string save_masks;
  ProviderFlags providers;
};

inline protocol::MeasureRequest build_request(const MeasureFlags& f) {
  protocol::MeasureRequest req;
  req.request_id = std::filesystem::path(f.far_path).filename().string();
  req.far_image = read_file(f.far_path);
  req.close_image = read_file(f.close_path);
  req.focal_length_mm = f.cam.focal_mm;
  req.sensor_width_mm = f.cam.sensor_w_mm;
  req.sensor_height_mm = f.cam.sensor_h_mm;
  req.displacement_m = f.displacement_m;
  req.far_distance_m = f.far_distance_m;
  req.breast_height_m = f.breast_height_m;
  req.median_band_px = f.median_band_px;
  return req;
}

/// Measurement report without the mask payloads.
inline nlohmann::json report_json(const protocol::MeasureResponse& resp) {
  auto j = protocol::to_json(resp);
  j.erase("masks");
  return j;
}

inline int run_measure(const MeasureFlags& f, std::ostream& out, std::ostream& err) {
  const service::MeasurementService svc(f.providers.config());
  const auto resp = svc.handle_measure(build_request(f));
  if (f.format == "json") {
    out << report_json(resp).dump(2) << "\n";
  } else if (resp.ok()) {
    const auto& m = *resp.result;
    out << "dbh_cm: " << fmt(m.dbh_cm, 2) << "\n"
        << "far_distance_m: " << fmt(m.far_distance_m) << " (" << m.mode << ")\n"
        << "df_mm_per_px: " << fmt(m.df_mm_per_px) << "\n"
        << "p_pixels: " << m.p_pixels << "\n"
        << "breast_row: " << m.breast_row << "\n"
        << "trunk_height_visible_m: " << fmt(m.trunk_height_visible_m) << "\n"
        << "far_height_px: " << m.far_height_px << "\n"
        << "h_far_px: " << m.h_far_px << "\n"
        << "h_close_px: " << m.h_close_px << "\n"
        << "alignment_scale: " << fmt(m.alignment_scale) << "\n"
        << "alignment_iou: " << fmt(m.alignment_iou) << "\n";
  }
  for (const auto& w : resp.warnings) err << "warning: " << w << "\n";
  if (!resp.ok()) {
    print_error(err, resp.error->code, resp.error->message);
    return exit_code_for(resp.error->code);
  }
  if (!f.save_masks.empty()) {
    std::filesystem::create_directories(f.save_masks);
    write_file(std::filesystem::path(f.save_masks) / "far.mask.png", resp.result->far_mask);
    write_file(std::filesystem::path(f.save_masks) / "close.mask.png", resp.result->close_mask);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthFlags {
  std::string out_dir;
  std::string id = "scene";
  std::optional<std::uint64_t> seed;
  std::string scene_file;
  std::optional<double> dbh_cm;
  std::optional<double> distance_m;
  std::optional<double> displacement_m;
  std::optional<double> trunk_height_m;
  std::optional<double> camera_height_m;
  std::optional<double> focal_mm;
  std::optional<double> sensor_w_mm;
  std::optional<double> sensor_h_mm;
  std::optional<int> image_w;
  std::optional<int> image_h;
  std::string silhouette;
  bool images = false;
};

inline synth::SyntheticScene scene_from_flags(const SynthFlags& f) {
  synth::SyntheticScene s;
  if (f.seed) s = synth::random_scene(*f.seed);
  if (!f.scene_file.empty()) {
    std::ifstream in(f.scene_file);
    if (!in) throw Error(ErrorCode::IoError, "cannot open scene file " + f.scene_file);
    s = synth::parse_scene_config(in, s);
  }
  if (f.dbh_cm) s.trunk_radius = Length::centimeters(*f.dbh_cm / 2.0);
  if (f.distance_m) s.far_distance = Length::meters(*f.distance_m);
  if (f.displacement_m) s.displacement = Length::meters(*f.displacement_m);
  if (f.trunk_height_m) s.trunk_height = Length::meters(*f.trunk_height_m);
  if (f.camera_height_m) s.camera_height = Length::meters(*f.camera_height_m);
  const auto& c = s.intrinsics;
  s.intrinsics = CameraIntrinsics::from_mm(f.focal_mm.value_or(c.focal_length().in(Unit::Millimeter)),
                                           f.sensor_w_mm.value_or(c.sensor_width().in(Unit::Millimeter)),
                                           f.sensor_h_mm.value_or(c.sensor_height().in(Unit::Millimeter)),
                                           f.image_w.value_or(c.image_width()), f.image_h.value_or(c.image_height()));
  if (f.silhouette == "tangent") s.silhouette = synth::SilhouetteModel::Tangent;
  if (f.silhouette == "thin") s.silhouette = synth::SilhouetteModel::ThinObject;
  return s;
}

inline nlohmann::json truth_json(const synth::SyntheticScene& s, const synth::SceneTruth& t) {
  const auto& c = s.intrinsics;
  return {{"dbh_cm", t.dbh_cm},
          {"far_distance_m", t.far_distance_m},
          {"displacement_m", t.displacement_m},
          {"df_mm_per_px", t.df_m_per_px * 1000.0},
          {"far_width_px", t.far_width_px},
          {"close_width_px", t.close_width_px},
          {"trunk_height_m", s.trunk_height.in_meters()},
          {"camera_height_m", s.camera_height.in_meters()},
          {"silhouette", s.silhouette == synth::SilhouetteModel::Tangent ? "tangent" : "thin"},
          {"focal_mm", c.focal_length().in(Unit::Millimeter)},
          {"sensor_w_mm", c.sensor_width().in(Unit::Millimeter)},
          {"sensor_h_mm", c.sensor_height().in(Unit::Millimeter)},
          {"image_w", c.image_width()},
          {"image_h", c.image_height()}};
}

inline int run_synth(const SynthFlags& f, std::ostream& out) {
  const auto scene = scene_from_flags(f);
  const auto pair = synth::render_pair(scene);
  const std::filesystem::path dir(f.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const auto base = [&](const std::string& suffix) { return dir / (f.id + suffix); };
  write_file(base(".far.png"), encode_mask(pair.far));
  write_file(base(".close.png"), encode_mask(pair.close));
  write_file(base(".truth.json"), truth_json(scene, pair.truth).dump(2) + "\n");
  out << "wrote " << base(".far.png").string() << ", " << base(".close.png").string() << ", "
      << base(".truth.json").string() << "\n";
  if (f.images) {
    // Gray photographs plus the oracle layout that maps them to their masks.
    for (const auto& [tag, mask] : {std::pair{".far", &pair.far}, std::pair{".close", &pair.close}}) {
      const Bytes photo = encode_png(synth::render_image(*mask));
      write_file(base(std::string(tag) + ".photo.png"), photo);
      write_file(base(std::string(tag) + ".img"), photo);
      write_file(base(std::string(tag) + ".mask.png"), encode_mask(*mask));
    }
    out << "wrote photographs and oracle entries for " << f.id << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
  std::string manifest;
  std::string predictions;
  std::string write_predictions;
  std::string format = "text";
  IntrinsicsFlags cam;
  ProviderFlags providers;
};

inline int run_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  auto manifest = eval::load_manifest(f.manifest);
  for (const auto& r : manifest.rejected) {
    err << "warning: manifest line " << r.line << (r.id.empty() ? "" : " (" + r.id + ")") << " rejected: "
        << r.reason << "\n";
  }
  auto& records = manifest.records;
  if (records.empty()) throw Error(ErrorCode::EmptyEvaluation, "manifest has no valid records");

  std::vector<std::pair<std::string, std::string>> failures;
  if (!f.predictions.empty()) {
    eval::apply_predictions(records, eval::load_predictions(f.predictions));
  } else {
    if (!(f.cam.focal_mm > 0 && f.cam.sensor_w_mm > 0 && f.cam.sensor_h_mm > 0)) {
      throw Error(ErrorCode::ParameterError,
                  "--focal-mm, --sensor-w-mm and --sensor-h-mm are required unless --predictions is given");
    }
    const service::MeasurementService svc(f.providers.config());
    std::vector<eval::EvaluationRecord> measured;
    for (auto& r : records) {
      protocol::MeasureRequest req;
      req.request_id = r.id;
      req.far_image = read_file(r.far_path);
      req.close_image = read_file(r.close_path);
      req.focal_length_mm = f.cam.focal_mm;
      req.sensor_width_mm = f.cam.sensor_w_mm;
      req.sensor_height_mm = f.cam.sensor_h_mm;
      req.displacement_m = r.capture.displacement.in_meters();
      if (r.capture.far_distance) req.far_distance_m = r.capture.far_distance->in_meters();
      const auto resp = svc.handle_measure(req);
      if (resp.ok()) {
        r.predicted_dbh_cm = resp.result->dbh_cm;
        measured.push_back(r);
      } else {
        failures.emplace_back(r.id, resp.error->code + ": " + resp.error->message);
      }
    }
    for (const auto& [id, why] : failures) err << "warning: record " << id << " failed: " << why << "\n";
    records = std::move(measured);
    if (records.empty()) throw Error(ErrorCode::EmptyEvaluation, "no record could be measured");
  }

  if (!f.write_predictions.empty()) {
    std::ostringstream csv;
    csv << "id,predicted_dbh_cm\n";
    for (const auto& r : records) {
      if (r.predicted_dbh_cm) csv << r.id << "," << fmt(*r.predicted_dbh_cm, 6) << "\n";
    }
    write_file(f.write_predictions, csv.str());
  }

  const auto groups = eval::group_by_species(records);
  const auto counts = eval::split_counts(records);
  if (f.format == "json") {
    auto j = eval::to_json(groups);
    j["splits"] = {{"train", counts.train}, {"validation", counts.validation}, {"test", counts.test},
                   {"unsplit", counts.unsplit}};
    j["rejected_rows"] = manifest.rejected.size();
    nlohmann::json failed = nlohmann::json::array();
    for (const auto& [id, why] : failures) failed.push_back({{"id", id}, {"reason", why}});
    j["failed_records"] = failed;
    out << j.dump(2) << "\n";
  } else {
    out << eval::render_table(groups);
    out << "splits: train " << counts.train << ", validation " << counts.validation << ", test " << counts.test
        << ", unsplit " << counts.unsplit << "\n";
  }
  return failures.empty() ? kOk : kPipelineError;
}

// ---------------------------------------------------------------------------
// segment

struct SegmentFlags {
  std::string image;
  std::string out;
  ProviderFlags providers;
};

inline int run_segment(const SegmentFlags& f, std::ostream& out, std::ostream& err) {
  const service::MeasurementService svc(f.providers.config());
  const auto resp = svc.handle_segment({"segment", read_file(f.image), ""});
  if (!resp.mask) {
    print_error(err, resp.error->code, resp.error->message);
    return exit_code_for(resp.error->code);
  }
  write_file(f.out, *resp.mask);
  out << "wrote " << f.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// serve

struct ServeFlags {
  std::string address = "127.0.0.1";
  int port = 8080;
  int stream_port = 8081;
  double max_payload_mb = 32;
  std::string port_file;
  ProviderFlags providers;
};

/// Runs until SIGINT or SIGTERM; in-flight requests finish before exit.
inline int run_serve(const ServeFlags& f, std::ostream& out) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // worker threads inherit the mask

  auto cfg = f.providers.config();
  cfg.max_payload_bytes = static_cast<std::size_t>(f.max_payload_mb * 1024 * 1024);
  const service::MeasurementService svc(cfg);
  service::HttpServer http(svc, f.address, static_cast<std::uint16_t>(f.port));
  service::StreamServer stream(svc, f.address, static_cast<std::uint16_t>(f.stream_port));
  http.start();
  stream.start();
  out << "dbhcam " << kVersion << " listening: http " << f.address << ":" << http.port() << ", stream "
      << f.address << ":" << stream.port() << std::endl;
  if (!f.port_file.empty()) {
    write_file(f.port_file, std::to_string(http.port()) + " " + std::to_string(stream.port()) + "\n");
  }
  int sig = 0;
  sigwait(&signals, &sig);
  out << "shutting down" << std::endl;
  stream.stop();
  http.stop();
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Tree DBH from a far/close image pair"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  MeasureFlags mf;
  auto* measure = app.add_subcommand("measure", "Measure DBH from a far/close pair");
  measure->add_option("--far", mf.far_path, "Far image (or mask) PNG")->required();
  measure->add_option("--close", mf.close_path, "Close image (or mask) PNG")->required();
  mf.cam.add_to(measure, true);
  measure->add_option("--displacement-m", mf.displacement_m, "Camera displacement between captures (m)")
      ->required()
      ->check(CLI::PositiveNumber);
  measure->add_option("--far-distance-m", mf.far_distance_m, "Measured far distance (m); omit to estimate");
  measure->add_option("--breast-height-m", mf.breast_height_m, "Breast height above the trunk base (m)");
  measure->add_option("--median-band-px", mf.median_band_px, "Half-width of the median band at the breast row");
  measure->add_option("--format", mf.format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  measure->add_option("--save-masks", mf.save_masks, "Directory for far.mask.png and close.mask.png");
  mf.providers.add_to(measure, "mask");

  SynthFlags sf;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic far/close mask pair with ground truth");
  synth_cmd->add_option("--out", sf.out_dir, "Output directory")->required();
  synth_cmd->add_option("--id", sf.id)->capture_default_str();
  synth_cmd->add_option("--seed", sf.seed, "Draw a random scene from this seed");
  synth_cmd->add_option("--scene", sf.scene_file, "key = value scene file");
  synth_cmd->add_option("--dbh-cm", sf.dbh_cm)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--distance-m", sf.distance_m, "Far distance (m)")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--displacement-m", sf.displacement_m)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--trunk-height-m", sf.trunk_height_m)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--camera-height-m", sf.camera_height_m)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--focal-mm", sf.focal_mm)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sensor-w-mm", sf.sensor_w_mm)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sensor-h-mm", sf.sensor_h_mm)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--image-w", sf.image_w)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--image-h", sf.image_h)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--silhouette", sf.silhouette)->check(CLI::IsMember({"thin", "tangent"}));
  synth_cmd->add_flag("--images", sf.images, "Also write gray photographs and oracle entries");

  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate DBH accuracy over a manifest");
  eval_cmd->add_option("--manifest", ef.manifest, "Manifest CSV")->required();
  eval_cmd->add_option("--predictions", ef.predictions, "CSV id,predicted_dbh_cm; skips the pipeline");
  eval_cmd->add_option("--write-predictions", ef.write_predictions, "Write predictions CSV");
  eval_cmd->add_option("--format", ef.format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  ef.cam.add_to(eval_cmd, false);
  ef.providers.add_to(eval_cmd, "mask");

  ServeFlags vf;
  auto* serve = app.add_subcommand("serve", "Run the measurement service");
  serve->add_option("--address", vf.address)->envname("DBHCAM_ADDRESS")->capture_default_str();
  serve->add_option("--port", vf.port, "HTTP port (0 = any)")
      ->envname("DBHCAM_PORT")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->add_option("--stream-port", vf.stream_port, "Envelope stream port (0 = any)")
      ->envname("DBHCAM_STREAM_PORT")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->add_option("--max-payload-mb", vf.max_payload_mb)
      ->envname("DBHCAM_MAX_PAYLOAD_MB")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_option("--port-file", vf.port_file, "Write the bound ports here once listening");
  vf.providers.add_to(serve, "mask");

  SegmentFlags gf;
  auto* segment_cmd = app.add_subcommand("segment", "Segment one image into a trunk mask");
  segment_cmd->add_option("--image", gf.image)->required();
  segment_cmd->add_option("--out", gf.out, "Mask PNG to write")->required();
  gf.providers.add_to(segment_cmd, "baseline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);  // --help, --version
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*measure) return run_measure(mf, out, err);
    if (*synth_cmd) return run_synth(sf, out);
    if (*eval_cmd) return run_eval(ef, out, err);
    if (*segment_cmd) return run_segment(gf, out, err);
    if (*serve) return run_serve(vf, out);
  } catch (const Error& e) {
    print_error(err, e.code_name(), e.what());
    return exit_code_for(e.code_name());
  } catch (const std::filesystem::filesystem_error& e) {
    print_error(err, "IO_ERROR", e.what());
    return kIoError;
  }
  return kUsageError;
}

}  // namespace dbhcam::cli
