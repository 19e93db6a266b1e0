#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dbhcam/metrics.hpp"
#include "support.hpp"

using namespace dbhcam;
using namespace dbhcam::eval;

namespace {

EvaluationRecord rec(std::string id, std::string species, double gt, double pred) {
  EvaluationRecord r;
  r.id = std::move(id);
  r.species = std::move(species);
  r.gt_dbh_cm = gt;
  r.predicted_dbh_cm = pred;
  return r;
}

}  // namespace

TEST(DbhMetrics, HandEvaluatedPair) {
  const std::vector<EvaluationRecord> rs = {rec("a", "s", 40, 42), rec("b", "s", 40, 38)};
  const auto m = dbh_metrics(rs);
  EXPECT_EQ(m.n, 2u);
  EXPECT_DOUBLE_EQ(m.rmse_cm, 2.0);
  EXPECT_DOUBLE_EQ(m.mae_cm, 2.0);
  EXPECT_DOUBLE_EQ(m.rebias_pct, 0.0);
  EXPECT_DOUBLE_EQ(m.rermse_pct, 5.0);
  EXPECT_DOUBLE_EQ(m.std_dev_cm, 2.0);
  EXPECT_DOUBLE_EQ(m.min_error_cm, -2.0);
  EXPECT_DOUBLE_EQ(m.max_error_cm, 2.0);
}

TEST(DbhMetrics, PerfectPrediction) {
  const std::vector<EvaluationRecord> rs = {rec("a", "s", 37.5, 37.5)};
  const auto m = dbh_metrics(rs);
  EXPECT_EQ(m.n, 1u);
  EXPECT_EQ(m.rmse_cm, 0);
  EXPECT_EQ(m.mae_cm, 0);
  EXPECT_EQ(m.rebias_pct, 0);
  EXPECT_EQ(m.rermse_pct, 0);
  EXPECT_EQ(m.std_dev_cm, 0);
  EXPECT_EQ(m.min_error_cm, 0);
  EXPECT_EQ(m.max_error_cm, 0);
}

TEST(DbhMetrics, OverestimationGivesNegativeReBias) {
  const std::vector<EvaluationRecord> rs = {rec("a", "s", 50, 55)};
  EXPECT_LT(dbh_metrics(rs).rebias_pct, 0);
}

TEST(DbhMetrics, EmptyAndIncomplete) {
  try {
    dbh_metrics({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyEvaluation);
  }
  std::vector<EvaluationRecord> rs = {rec("a", "s", 40, 41), rec("b", "s", 40, 41), rec("c", "s", 40, 41)};
  rs[1].predicted_dbh_cm.reset();
  rs[2].predicted_dbh_cm.reset();
  try {
    dbh_metrics(rs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteRecord);
    EXPECT_NE(std::string(e.what()).find("b, c"), std::string::npos);
  }
}

TEST(DbhMetrics, InvariantUnderReordering) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> gt(20, 120), err(-9, 9);
  std::vector<EvaluationRecord> rs;
  for (int i = 0; i < 300; ++i) {
    const double y = gt(rng);
    rs.push_back(rec("r" + std::to_string(i), "s", y, y + err(rng)));
  }
  const auto a = dbh_metrics(rs);
  std::shuffle(rs.begin(), rs.end(), rng);
  const auto b = dbh_metrics(rs);
  EXPECT_EQ(a.rmse_cm, b.rmse_cm);
  EXPECT_EQ(a.mae_cm, b.mae_cm);
  EXPECT_EQ(a.rebias_pct, b.rebias_pct);
  EXPECT_EQ(a.rermse_pct, b.rermse_pct);
  EXPECT_EQ(a.std_dev_cm, b.std_dev_cm);
}

TEST(GroupBySpecies, SingleSpecies) {
  const std::vector<EvaluationRecord> rs = {rec("a", "Ficus", 40, 41), rec("b", "Ficus", 30, 28)};
  const auto g = group_by_species(rs);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].label, "Ficus");
  EXPECT_EQ(g[1].label, "Average");
  EXPECT_EQ(g[0].rmse_cm, g[1].rmse_cm);
  EXPECT_EQ(g[0].std_dev_cm, g[1].std_dev_cm);
}

TEST(GroupBySpecies, PooledRowAndOrdering) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> gt(20, 120), e1(-2, 2), e2(-8, 8);
  std::vector<EvaluationRecord> rs;
  for (int i = 0; i < 40; ++i) {
    const double y = gt(rng);
    rs.push_back(rec("z" + std::to_string(i), "Zeta", y, y + e1(rng)));
  }
  for (int i = 0; i < 25; ++i) {
    const double y = gt(rng);
    rs.push_back(rec("a" + std::to_string(i), "Alpha", y, y + e2(rng)));
  }
  const auto g = group_by_species(rs);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0].label, "Alpha");
  EXPECT_EQ(g[1].label, "Zeta");
  const auto& avg = g[2];
  EXPECT_EQ(avg.n, 65u);
  EXPECT_GE(avg.rmse_cm, std::min(g[0].rmse_cm, g[1].rmse_cm));
  EXPECT_LE(avg.rmse_cm, std::max(g[0].rmse_cm, g[1].rmse_cm));
  const double pooled_sq = g[0].n * g[0].rmse_cm * g[0].rmse_cm + g[1].n * g[1].rmse_cm * g[1].rmse_cm;
  EXPECT_NEAR(avg.n * avg.rmse_cm * avg.rmse_cm, pooled_sq, 1e-9 * pooled_sq);
}

TEST(RenderTable, PaperLayout) {
  // Published per-species values injected as precomputed reports.
  const std::vector<MetricsReport> rows = {
      {"Phoenix dactylifera", 0, 2.1, 1.7, -0.5, 4.8, -3.5, 4.2, 1.8},
      {"Vachellia nilotica", 0, 1.9, 1.4, 0.3, 3.6, -2.1, 3.7, 1.2},
      {"Ziziphus mauritiana", 0, 2.3, 1.9, -0.2, 5.0, -3.1, 4.8, 2.0},
      {"Average", 0, 2.1, 1.6, -0.1, 4.5, -2.9, 4.2, 1.6},
  };
  const std::string table = render_table(rows);
  const std::string expected =
      "Tree Species         N  RMSE (cm)  MAE (cm)  reBias (%)  reRMSE (%)  Min Error (cm)  Max Error (cm)  Std. Dev. (cm)\n"
      "-------------------------------------------------------------------------------------------------------------------\n"
      "Phoenix dactylifera  0        2.1       1.7       -0.50        4.80            -3.5             4.2             1.8\n"
      "Vachellia nilotica   0        1.9       1.4        0.30        3.60            -2.1             3.7             1.2\n"
      "Ziziphus mauritiana  0        2.3       1.9       -0.20        5.00            -3.1             4.8             2.0\n"
      "-------------------------------------------------------------------------------------------------------------------\n"
      "Average              0        2.1       1.6       -0.10        4.50            -2.9             4.2             1.6\n"
      "\n"
      "reBias = mean((truth - prediction) / truth); negative values mean predictions exceed truth.\n";
  EXPECT_EQ(table, expected);
}

TEST(RenderTable, NoNegativeZero) {
  EXPECT_EQ(format_fixed(-0.04, 1), "0.0");
  EXPECT_EQ(format_fixed(-0.05, 2), "-0.05");
}

TEST(MetricsJson, Fields) {
  const std::vector<MetricsReport> rows = {{"Average", 3, 1, 1, 0, 2, -1, 1, 1}};
  const auto j = to_json(rows);
  EXPECT_EQ(j["groups"][0]["label"], "Average");
  for (const char* k : {"rmse_cm", "mae_cm", "rebias_pct", "rermse_pct", "min_error_cm", "max_error_cm",
                        "std_dev_cm", "n"}) {
    EXPECT_TRUE(j["groups"][0].contains(k)) << k;
  }
}

TEST(SegMetrics, HandCountedFixtures) {
  using dbhcam::test::rect_mask;
  const auto a = rect_mask(20, 20, 0, 9, 0, 9);
  auto s = seg_metrics(a, a);
  EXPECT_EQ(s.iou, 1.0);
  EXPECT_EQ(s.pixel_accuracy, 1.0);
  EXPECT_EQ(s.dice, 1.0);

  const auto b = rect_mask(20, 20, 10, 19, 10, 19);  // disjoint, 25% each
  s = seg_metrics(a, b);
  EXPECT_EQ(s.iou, 0.0);
  EXPECT_EQ(s.dice, 0.0);
  EXPECT_EQ(s.pixel_accuracy, 0.5);

  const auto big = rect_mask(20, 20, 0, 9, 0, 19);
  s = seg_metrics(a, big);  // A inside B, half its size
  EXPECT_EQ(s.iou, 0.5);
  EXPECT_DOUBLE_EQ(s.dice, 2.0 / 3.0);

  s = seg_metrics(TrunkMask(5, 5), TrunkMask(5, 5));
  EXPECT_EQ(s.iou, 1.0);
  EXPECT_EQ(s.dice, 1.0);
  EXPECT_EQ(s.pixel_accuracy, 1.0);
}

TEST(SegMetrics, ShapeMismatch) {
  try {
    seg_metrics(TrunkMask(5, 5), TrunkMask(5, 6));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}
