// SPDX-License-Identifier: Apache-2.0
#include "gennv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gennv/error.hpp"
#include "gennv/sampler.hpp"

namespace gennv {

FeatureSchema FeatureSchema::numbered(std::size_t k) {
  FeatureSchema schema;
  for (std::size_t i = 1; i <= k; ++i) schema.numeric_names.push_back("x" + std::to_string(i));
  return schema;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.x.numeric.size() != schema.numeric_dim()) {
      throw Error(ErrorKind::dimension, "record " + std::to_string(i) + " has " +
                                            std::to_string(r.x.numeric.size()) +
                                            " numeric features, schema expects " +
                                            std::to_string(schema.numeric_dim()));
    }
    if (!schema.text && !r.x.words.empty()) {
      throw Error(ErrorKind::dimension,
                  "record " + std::to_string(i) + " carries text but the schema has none");
    }
  }
}

Dataset Dataset::without_text() const {
  Dataset out{schema, records};
  out.schema.text = false;
  for (auto& r : out.records) r.x.words.clear();
  return out;
}

Dataset Dataset::prefix(std::size_t n) const {
  Dataset out{schema, {}};
  n = std::min(n, records.size());
  out.records.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

Eigen::MatrixXd Dataset::numeric_matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()),
                    static_cast<Eigen::Index>(schema.numeric_dim()));
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = 0; j < schema.numeric_dim(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records[i].x.numeric[j];
  return m;
}

std::vector<double> Dataset::prices() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.price);
  return out;
}

std::vector<double> Dataset::demands() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.demand);
  return out;
}

namespace {

std::string format_number(double v) {
  // Shortest representation that round-trips.
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_number(const std::string& field, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::format,
                "line " + std::to_string(line) + ": '" + field + "' is not a number");
  }
  return v;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  data.validate();
  for (const auto& name : data.schema.numeric_names) out << name << ',';
  if (data.schema.text) out << "text,";
  out << "p,d\n";
  for (const auto& r : data.records) {
    for (double v : r.x.numeric) out << format_number(v) << ',';
    if (data.schema.text) {
      out << '"';
      for (std::size_t i = 0; i < r.x.words.size(); ++i) {
        if (i) out << ' ';
        for (char ch : r.x.words[i]) {
          if (ch == '"') out << '"';
          out << ch;
        }
      }
      out << "\",";
    }
    out << format_number(r.price) << ',' << format_number(r.demand) << '\n';
  }
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_dataset_csv(data, out);
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, "dataset CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[header.size() - 2] != "p" || header.back() != "d") {
    throw Error(ErrorKind::format, "dataset CSV header must end with p,d");
  }
  Dataset data;
  std::size_t numeric_cols = header.size() - 2;
  if (numeric_cols > 0 && header[numeric_cols - 1] == "text") {
    data.schema.text = true;
    --numeric_cols;
  }
  data.schema.numeric_names.assign(header.begin(),
                                   header.begin() + static_cast<std::ptrdiff_t>(numeric_cols));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::format, "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(header.size()) + " fields, found " +
                                         std::to_string(fields.size()));
    }
    DemandRecord r;
    for (std::size_t j = 0; j < numeric_cols; ++j) r.x.numeric.push_back(parse_number(fields[j], line_no));
    if (data.schema.text) r.x.words = split_words(fields[numeric_cols]);
    r.price = parse_number(fields[fields.size() - 2], line_no);
    r.demand = parse_number(fields.back(), line_no);
    data.records.push_back(std::move(r));
  }
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return read_dataset_csv(in);
}

std::vector<std::vector<double>> DemandSampler::sample_prices(const Features& x,
                                                              std::span<const double> prices,
                                                              std::size_t m,
                                                              const RngStream& rng) const {
  std::vector<std::vector<double>> out(prices.size(), std::vector<double>(m));
  for (std::size_t j = 0; j < prices.size(); ++j) {
    RngStream replay = rng;
    sample_into(x, prices[j], out[j], replay);
  }
  return out;
}

std::vector<double> draw_sorted(const DemandSampler& sampler, const Features& x, double price,
                                std::size_t m, RngStream& rng) {
  if (m == 0) throw Error(ErrorKind::domain, "draw_sorted: sample count must be at least 1");
  std::vector<double> out(m);
  sampler.sample_into(x, price, out, rng);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gennv
