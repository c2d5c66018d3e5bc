// SPDX-License-Identifier: Apache-2.0
#include "gennv/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gennv/dataset.hpp"
#include "gennv/error.hpp"
#include "gennv/numerics.hpp"

namespace gennv {

using nlohmann::json;

double ReportRow::mean() const { return gennv::mean(values); }

std::optional<double> ReportRow::std() const {
  if (values.size() < 2) return std::nullopt;
  return stddev(values);
}

const ReportRow* ExperimentReport::find(std::string_view method, std::string_view metric,
                                        std::optional<double> price) const {
  for (const auto& row : rows) {
    if (row.method != method || row.metric != metric) continue;
    if (price.has_value() != row.price.has_value()) continue;
    if (price && std::abs(*price - *row.price) > 1e-9) continue;
    return &row;
  }
  return nullptr;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw Error(ErrorKind::config, "unknown report format '" + std::string(name) + "' (csv or json)");
}

namespace {

std::string fmt6(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string version_line(const ExperimentReport& report) {
  json head{{"code_version", GENNV_VERSION}, {"experiment", report.experiment}, {"config", report.config}};
  return "# " + head.dump();
}

}  // namespace

double round6(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(fmt6(v).c_str(), nullptr);
}

std::vector<ReportLine> report_lines(const ExperimentReport& report) {
  std::vector<ReportLine> out;
  for (const auto& row : report.rows) {
    ReportLine line{row.dgp, row.mode, row.method, row.metric, std::nullopt, round6(row.mean()),
                    std::nullopt, static_cast<int>(row.values.size())};
    if (row.price) line.price = round6(*row.price);
    if (auto sd = row.std()) line.std = round6(*sd);
    out.push_back(std::move(line));
  }
  return out;
}

std::string render_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << version_line(report) << '\n';
  os << "dgp,mode,method,metric,price,mean,std,reps\n";
  for (const auto& l : report_lines(report)) {
    os << l.dgp << ',' << l.mode << ',' << l.method << ',' << l.metric << ','
       << (l.price ? fmt6(*l.price) : "avg") << ',' << fmt6(l.mean) << ','
       << (l.std ? fmt6(*l.std) : "") << ',' << l.reps << '\n';
  }
  return os.str();
}

std::string render_json(const ExperimentReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    json values = json::array();
    for (double v : row.values) values.push_back(round6(v));
    const auto sd = row.std();
    rows.push_back({{"dgp", row.dgp},
                    {"mode", row.mode},
                    {"method", row.method},
                    {"metric", row.metric},
                    {"price", row.price ? json(round6(*row.price)) : json("avg")},
                    {"mean", round6(row.mean())},
                    {"std", sd ? json(round6(*sd)) : json(nullptr)},
                    {"reps", row.values.size()},
                    {"values", values}});
  }
  json doc{{"code_version", GENNV_VERSION},
           {"experiment", report.experiment},
           {"config", report.config},
           {"rows", rows}};
  return doc.dump(2) + "\n";
}

void write_report(const ExperimentReport& report, const std::filesystem::path& path,
                  ReportFormat format) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write report " + path.string());
  out << (format == ReportFormat::csv ? render_csv(report) : render_json(report));
  out.flush();
  if (!out) throw Error(ErrorKind::io, "failed writing report " + path.string());
}

std::vector<ReportLine> parse_report_csv(std::string_view text) {
  std::vector<ReportLine> out;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  auto number = [&](const std::string& field) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || *end != '\0') {
      throw Error(ErrorKind::format, "report line " + std::to_string(line_no) + ": bad number '" + field + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "dgp,mode,method,metric,price,mean,std,reps") {
        throw Error(ErrorKind::format, "report: unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 8) {
      throw Error(ErrorKind::format, "report line " + std::to_string(line_no) + ": expected 8 fields");
    }
    ReportLine l;
    l.dgp = f[0];
    l.mode = f[1];
    l.method = f[2];
    l.metric = f[3];
    if (f[4] != "avg") l.price = number(f[4]);
    l.mean = number(f[5]);
    if (!f[6].empty()) l.std = number(f[6]);
    l.reps = static_cast<int>(number(f[7]));
    out.push_back(std::move(l));
  }
  if (!header_seen) throw Error(ErrorKind::format, "report: missing header");
  return out;
}

}  // namespace gennv
