// Prints the per-species error table for a handful of made-up residuals.
#include <iostream>
#include <vector>

#include "dbhcam/metrics.hpp"

int main() {
  using dbhcam::eval::EvaluationRecord;
  std::vector<EvaluationRecord> records;
  auto add = [&](const char* id, const char* species, double truth, double predicted) {
    EvaluationRecord r;
    r.id = id;
    r.species = species;
    r.gt_dbh_cm = truth;
    r.predicted_dbh_cm = predicted;
    records.push_back(r);
  };
  add("p1", "Phoenix dactylifera", 42.0, 43.1);
  add("p2", "Phoenix dactylifera", 38.5, 37.9);
  add("v1", "Vachellia nilotica", 51.0, 52.4);
  add("v2", "Vachellia nilotica", 33.2, 32.0);
  add("z1", "Ziziphus mauritiana", 46.7, 47.0);

  const auto rows = dbhcam::eval::group_by_species(records);
  std::cout << dbhcam::eval::render_table(rows);
}
