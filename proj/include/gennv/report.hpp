// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gennv {

/// One metric for one method, with its value in every replication.
struct ReportRow {
  std::string dgp;
  std::string mode;
  std::string method;
  std::string metric;
  std::optional<double> price;  // empty: averaged over prices
  std::vector<double> values;   // one per replication

  double mean() const;
  /// Sample standard deviation; empty for fewer than two replications.
  std::optional<double> std() const;
};

struct ExperimentReport {
  std::string experiment;  // inventory, joint, convergence, real-data
  nlohmann::json config;   // effective configuration
  std::vector<ReportRow> rows;

  /// Row with these keys, or nullptr. An empty price matches the average.
  const ReportRow* find(std::string_view method, std::string_view metric,
                        std::optional<double> price = std::nullopt) const;
};

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(std::string_view name);

/// Values rounded to 6 significant digits, as written to reports.
double round6(double v);

/// CSV: one `#`-prefixed line holding the code version and the config as
/// compact JSON, then `dgp,mode,method,metric,price,mean,std,reps`. An
/// averaged row has price `avg`; a missing std is empty.
std::string render_csv(const ExperimentReport& report);
/// JSON mirror including the raw per-replication values.
std::string render_json(const ExperimentReport& report);

/// Throws Error(io) when the file cannot be written.
void write_report(const ExperimentReport& report, const std::filesystem::path& path,
                  ReportFormat format);

/// One parsed CSV data line.
struct ReportLine {
  std::string dgp, mode, method, metric;
  std::optional<double> price;
  double mean = 0.0;
  std::optional<double> std;
  int reps = 0;

  bool operator==(const ReportLine&) const = default;
};

/// Parses render_csv output (the comment line is skipped). Throws
/// Error(format) on a malformed line.
std::vector<ReportLine> parse_report_csv(std::string_view text);
/// The lines render_csv would emit for `report`.
std::vector<ReportLine> report_lines(const ExperimentReport& report);

}  // namespace gennv
