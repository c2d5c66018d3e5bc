// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gennv/baselines.hpp"
#include "gennv/cdgm.hpp"
#include "gennv/dataset.hpp"
#include "gennv/report.hpp"

namespace gennv {

/// One row of the food-demand CSV.
struct MealRecord {
  std::int64_t id = 0;
  int week = 0;
  std::int64_t center_id = 0;
  std::int64_t meal_id = 0;
  double checkout_price = 0.0;
  double base_price = 0.0;
  int emailer_for_promotion = 0;
  int homepage_featured = 0;
  double num_orders = 0.0;

  bool operator==(const MealRecord&) const = default;
};

struct MealLoad {
  std::vector<MealRecord> records;
  std::size_t skipped = 0;
  std::vector<std::string> problems;  // "line N: reason", one per skipped row
};

/// Columns may appear in any order; extra columns are ignored. A missing
/// required column throws Error(format) naming it. Rows that fail to parse
/// or violate week >= 1, prices > 0, orders >= 0, flags in {0,1} are
/// skipped and reported.
MealLoad load_meal_csv(std::istream& in);
/// Throws Error(io) if the file cannot be opened.
MealLoad load_meal_csv(const std::filesystem::path& path);

struct FeatureSpec {
  std::int64_t meal_id = 0;
  int split_week = 120;  // train: week <= split_week
  /// Passed through as numeric features after the promotion flags.
  std::vector<std::string> passthrough = {"base_price"};
};

struct MealSplit {
  Dataset train;
  Dataset test;
  std::vector<int> train_weeks;  // per record
  std::vector<int> test_weeks;
};

/// Records of one meal partitioned at the split week, in input order.
std::pair<std::vector<MealRecord>, std::vector<MealRecord>> split_by_week(
    const std::vector<MealRecord>& records, int split_week);

/// Features per (center, week) row of the selected meal: one-hot center
/// (ascending id), lag1 and lag2 orders of that center, the promotion flags
/// and the passthrough columns. Price is checkout_price and demand is
/// num_orders. Rows without both lag weeks are dropped. Records are sorted
/// by (week, center). Throws Error(data) when the meal is absent or a
/// split side is empty.
MealSplit build_meal_dataset(const std::vector<MealRecord>& records, const FeatureSpec& spec);

/// FNV-1a over the shape and the little-endian bytes of the row-major
/// numeric matrix, followed by prices and demands.
std::uint64_t feature_hash(const Dataset& data);

struct CostSetting {
  double c = 0.0;
  double s = 0.0;
};

/// s in {0, 50, 100} crossed with c in {150, 200, 250, 300}, s outer.
std::vector<CostSetting> real_data_cost_grid();

struct RealDataConfig {
  std::vector<std::int64_t> meals;
  int split_week = 120;
  std::vector<std::string> methods = {"saa", "erm_lr", "ko", "rbe", "cdgm"};
  std::vector<CostSetting> costs = real_data_cost_grid();
  std::size_t m = 1000;
  std::uint64_t seed = 1;
  TrainConfig cdgm;
  ErmConfig erm;

  void validate() const;
};

/// Per meal, fits every method on the training weeks and reports the mean
/// realized test profit per (c, s). Test rows priced at or below c order
/// nothing. Rows: dgp = meal_<id>, mode = real, metric = profit_c<c>_s<s>.
/// KO falls back to the pooled SAA order where every kernel weight
/// underflows; those rows are counted under fallback_rows_c<c>_s<s>.
ExperimentReport run_real_data(const std::vector<MealRecord>& records, const RealDataConfig& cfg);

}  // namespace gennv
