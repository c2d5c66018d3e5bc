// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gennv {

/// Conditioning information for one sales period: a numeric vector, an
/// optional free-text description, or both.
struct Features {
  std::vector<double> numeric;
  std::vector<std::string> words;

  bool operator==(const Features&) const = default;
};

struct FeatureSchema {
  std::vector<std::string> numeric_names;
  bool text = false;

  std::size_t numeric_dim() const noexcept { return numeric_names.size(); }
  bool operator==(const FeatureSchema&) const = default;

  static FeatureSchema numbered(std::size_t k);  // x1..xk
};

struct DemandRecord {
  Features x;
  double price = 0.0;
  double demand = 0.0;

  bool operator==(const DemandRecord&) const = default;
};

/// The training corpus: observed (x, p, d) triplets under one schema.
struct Dataset {
  FeatureSchema schema;
  std::vector<DemandRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  /// Throws Error(dimension) if a record disagrees with the schema.
  void validate() const;

  /// Copy with the textual feature removed.
  Dataset without_text() const;
  /// The first n records.
  Dataset prefix(std::size_t n) const;

  /// n x k matrix of numeric features.
  Eigen::MatrixXd numeric_matrix() const;
  std::vector<double> prices() const;
  std::vector<double> demands() const;
};

/// Header: numeric names, then `text` when present, then `p,d`. Text is
/// double-quoted with words separated by single spaces.
void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Splits one CSV line, honouring double quotes ("" escapes a quote).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace gennv
