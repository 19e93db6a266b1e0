#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dbhcam/error.hpp"
#include "dbhcam/mask.hpp"
#include "dbhcam/pipeline.hpp"

namespace dbhcam::eval {

enum class Split { Train, Validation, Test, Unsplit };

constexpr std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    case Split::Unsplit: return "unsplit";
  }
  return "unsplit";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  if (s == "unsplit" || s.empty()) return Split::Unsplit;
  return std::nullopt;
}

struct EvaluationRecord {
  std::string id;
  std::string species;
  double gt_dbh_cm = 0;
  std::optional<double> predicted_dbh_cm;
  Split split = Split::Unsplit;
  std::string far_path;
  std::string close_path;
  CaptureConfig capture;
};

struct MetricsReport {
  std::string label;
  std::size_t n = 0;
  double rmse_cm = 0;
  double mae_cm = 0;
  double rebias_pct = 0;
  double rermse_pct = 0;
  double min_error_cm = 0;  // signed error, prediction - truth
  double max_error_cm = 0;
  double std_dev_cm = 0;
};

inline constexpr std::string_view kAverageLabel = "Average";

/// DBH error statistics. With y the truth and y' the prediction:
///   RMSE   = sqrt(sum (y - y')^2 / N)
///   MAE    = sum |y - y'| / N
///   reBias = 100 * sum ((y - y') / y) / N
///   reRMSE = 100 * sqrt(sum ((y - y') / y)^2 / N)
///   StdDev = population standard deviation of the signed errors y' - y
/// Min and max are over the signed errors. Sums run in record-id order so the
/// result does not depend on input order.
inline MetricsReport dbh_metrics(std::span<const EvaluationRecord> records, std::string label = std::string(kAverageLabel)) {
  if (records.empty()) throw Error(ErrorCode::EmptyEvaluation, "no records to evaluate");
  std::string missing;
  for (const auto& r : records) {
    if (!r.predicted_dbh_cm) missing += (missing.empty() ? "" : ", ") + r.id;
    if (!(r.gt_dbh_cm > 0)) throw Error(ErrorCode::DomainError, "record " + r.id + ": gt_dbh_cm must be positive");
  }
  if (!missing.empty()) throw Error(ErrorCode::IncompleteRecord, "records without prediction: " + missing);

  std::vector<const EvaluationRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const EvaluationRecord* a, const EvaluationRecord* b) {
    if (a->id != b->id) return a->id < b->id;
    if (a->gt_dbh_cm != b->gt_dbh_cm) return a->gt_dbh_cm < b->gt_dbh_cm;
    return *a->predicted_dbh_cm < *b->predicted_dbh_cm;
  });

  const double n = static_cast<double>(order.size());
  double sq = 0, abs_sum = 0, rel = 0, rel_sq = 0, err_sum = 0;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto* r : order) {
    const double y = r->gt_dbh_cm;
    const double e = y - *r->predicted_dbh_cm;  // formula residual
    sq += e * e;
    abs_sum += std::abs(e);
    rel += e / y;
    rel_sq += (e / y) * (e / y);
    err_sum += -e;
    lo = std::min(lo, -e);
    hi = std::max(hi, -e);
  }
  const double mean_err = err_sum / n;
  double var = 0;
  for (const auto* r : order) {
    const double d = (*r->predicted_dbh_cm - r->gt_dbh_cm) - mean_err;
    var += d * d;
  }

  MetricsReport m;
  m.label = std::move(label);
  m.n = order.size();
  m.rmse_cm = std::sqrt(sq / n);
  m.mae_cm = abs_sum / n;
  m.rebias_pct = 100.0 * rel / n;
  m.rermse_pct = 100.0 * std::sqrt(rel_sq / n);
  m.min_error_cm = lo;
  m.max_error_cm = hi;
  m.std_dev_cm = std::sqrt(var / n);
  return m;
}

/// One report per species (lexicographic), then the pooled "Average" row.
inline std::vector<MetricsReport> group_by_species(std::span<const EvaluationRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyEvaluation, "no records to evaluate");
  std::map<std::string, std::vector<EvaluationRecord>> groups;
  for (const auto& r : records) groups[r.species].push_back(r);
  std::vector<MetricsReport> out;
  for (const auto& [species, rs] : groups) out.push_back(dbh_metrics(rs, species));
  out.push_back(dbh_metrics(records, std::string(kAverageLabel)));
  return out;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  // Avoid printing "-0.0".
  std::string s = buf;
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline constexpr std::string_view kReBiasNote =
    "reBias = mean((truth - prediction) / truth); negative values mean predictions exceed truth.";

/// Aligned text table: cm values to 1 decimal, percentages to 2.
inline std::string render_table(std::span<const MetricsReport> rows) {
  const std::vector<std::string> header = {"Tree Species", "N",           "RMSE (cm)",      "MAE (cm)",
                                           "reBias (%)",   "reRMSE (%)",  "Min Error (cm)", "Max Error (cm)",
                                           "Std. Dev. (cm)"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.label, std::to_string(r.n), format_fixed(r.rmse_cm, 1), format_fixed(r.mae_cm, 1),
                     format_fixed(r.rebias_pct, 2), format_fixed(r.rermse_pct, 2), format_fixed(r.min_error_cm, 1),
                     format_fixed(r.max_error_cm, 1), format_fixed(r.std_dev_cm, 1)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string s;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) s += "  ";
      const std::string pad(width[c] - row[c].size(), ' ');
      s += c == 0 ? row[c] + pad : pad + row[c];
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::size_t total = 0;
  for (auto w : width) total += w;
  total += 2 * (width.size() - 1);
  const std::string rule(total, '-');

  std::string out = line(header) + rule + "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i + 1 == cells.size() && rows.back().label == kAverageLabel && cells.size() > 1) out += rule + "\n";
    out += line(cells[i]);
  }
  out += "\n" + std::string(kReBiasNote) + "\n";
  return out;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"label", r.label},           {"n", r.n},
          {"rmse_cm", r.rmse_cm},       {"mae_cm", r.mae_cm},
          {"rebias_pct", r.rebias_pct}, {"rermse_pct", r.rermse_pct},
          {"min_error_cm", r.min_error_cm}, {"max_error_cm", r.max_error_cm},
          {"std_dev_cm", r.std_dev_cm}};
}

inline nlohmann::json to_json(std::span<const MetricsReport> rows) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& r : rows) groups.push_back(to_json(r));
  return {{"groups", groups}, {"rebias_note", kReBiasNote}};
}

struct SegMetrics {
  double iou = 0;
  double pixel_accuracy = 0;
  double dice = 0;
};

/// Overlap metrics. Two empty masks count as perfect agreement (all 1).
inline SegMetrics seg_metrics(const TrunkMask& predicted, const TrunkMask& truth) {
  if (!predicted.same_shape(truth)) throw Error(ErrorCode::ShapeMismatch, "mask dimensions differ");
  const auto a = predicted.bits();
  const auto b = truth.bits();
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] & b[i];
    na += a[i];
    nb += b[i];
  }
  const std::size_t uni = na + nb - inter;
  if (uni == 0) return {1.0, 1.0, 1.0};
  const double total = static_cast<double>(a.size());
  const std::size_t agree = a.size() - (uni - inter);
  return {static_cast<double>(inter) / static_cast<double>(uni), static_cast<double>(agree) / total,
          2.0 * static_cast<double>(inter) / static_cast<double>(na + nb)};
}

}  // namespace dbhcam::eval
