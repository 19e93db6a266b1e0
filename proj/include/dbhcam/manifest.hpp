#pragma once

#include <boost/tokenizer.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dbhcam/error.hpp"
#include "dbhcam/metrics.hpp"
#include "dbhcam/units.hpp"

namespace dbhcam::eval {

inline const std::array<std::string, 8> kManifestColumns = {
    "id", "species", "gt_dbh_cm", "far_path", "close_path", "displacement_m", "far_distance_m", "split"};

struct RejectedRow {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string id;
  std::string reason;
};

struct Manifest {
  std::vector<EvaluationRecord> records;
  std::vector<RejectedRow> rejected;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t unsplit = 0;
};

inline SplitCounts split_counts(std::span<const EvaluationRecord> records) {
  SplitCounts c;
  for (const auto& r : records) {
    switch (r.split) {
      case Split::Train: ++c.train; break;
      case Split::Validation: ++c.validation; break;
      case Split::Test: ++c.test; break;
      case Split::Unsplit: ++c.unsplit; break;
    }
  }
  return c;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  using Sep = boost::escaped_list_separator<char>;
  boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
  std::vector<std::string> out(tok.begin(), tok.end());
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads a manifest CSV. Rows that violate record invariants are collected in
/// `rejected` with a diagnostic; a missing header column is a schema error.
/// Relative image paths resolve against `base_dir`.
inline Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ManifestSchema, "manifest is empty (no header row)");
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : kManifestColumns) {
    if (!col.count(name)) throw Error(ErrorCode::ManifestSchema, "manifest is missing column '" + name + "'");
  }

  Manifest m;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> f;
    try {
      f = detail::split_csv_line(line);
    } catch (const boost::escaped_list_error& e) {
      m.rejected.push_back({line_no, "", std::string("malformed CSV: ") + e.what()});
      continue;
    }
    auto get = [&](const std::string& name) -> std::string {
      const std::size_t i = col.at(name);
      return i < f.size() ? f[i] : std::string{};
    };
    EvaluationRecord r;
    r.id = get("id");
    auto reject = [&](const std::string& why) { m.rejected.push_back({line_no, r.id, why}); };
    if (f.size() != header.size()) {
      reject("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
      continue;
    }
    if (r.id.empty()) {
      reject("id is empty");
      continue;
    }
    r.species = get("species");
    const auto gt = detail::parse_number(get("gt_dbh_cm"));
    if (!gt || !(*gt > 0)) {
      reject("gt_dbh_cm must be a positive number, got '" + get("gt_dbh_cm") + "'");
      continue;
    }
    r.gt_dbh_cm = *gt;
    const auto split = parse_split(get("split"));
    if (!split) {
      reject("unknown split '" + get("split") + "' (expected train, validation, test or unsplit)");
      continue;
    }
    r.split = *split;
    auto resolve = [&](const std::string& p) {
      if (p.empty()) return p;
      const std::filesystem::path path(p);
      return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).string();
    };
    r.far_path = resolve(get("far_path"));
    r.close_path = resolve(get("close_path"));
    const auto disp = detail::parse_number(get("displacement_m"));
    if (!disp || !(*disp > 0)) {
      reject("displacement_m must be a positive number, got '" + get("displacement_m") + "'");
      continue;
    }
    r.capture.displacement = Length::meters(*disp);
    const std::string far_text = get("far_distance_m");
    if (far_text.empty()) {
      r.capture.far_distance.reset();
    } else {
      const auto far = detail::parse_number(far_text);
      if (!far || !(*far > *disp)) {
        reject("far_distance_m must be a number above displacement_m, got '" + far_text + "'");
        continue;
      }
      r.capture.far_distance = Length::meters(*far);
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

/// Predictions CSV with header `id,predicted_dbh_cm`.
inline std::map<std::string, double> parse_predictions(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ManifestSchema, "predictions file is empty");
  const auto header = detail::split_csv_line(line);
  const auto id_col = std::find(header.begin(), header.end(), "id");
  const auto pred_col = std::find(header.begin(), header.end(), "predicted_dbh_cm");
  if (id_col == header.end()) throw Error(ErrorCode::ManifestSchema, "predictions file is missing column 'id'");
  if (pred_col == header.end()) {
    throw Error(ErrorCode::ManifestSchema, "predictions file is missing column 'predicted_dbh_cm'");
  }
  const auto ic = static_cast<std::size_t>(id_col - header.begin());
  const auto pc = static_cast<std::size_t>(pred_col - header.begin());
  std::map<std::string, double> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    const auto v = pc < f.size() ? detail::parse_number(f[pc]) : std::nullopt;
    if (ic >= f.size() || !v) {
      throw Error(ErrorCode::ManifestSchema, "predictions line " + std::to_string(line_no) + ": bad row");
    }
    out[f[ic]] = *v;
  }
  return out;
}

inline std::map<std::string, double> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open predictions " + path.string());
  return parse_predictions(in);
}

inline void apply_predictions(std::vector<EvaluationRecord>& records, const std::map<std::string, double>& preds) {
  for (auto& r : records) {
    if (auto it = preds.find(r.id); it != preds.end()) r.predicted_dbh_cm = it->second;
  }
}

}  // namespace dbhcam::eval
