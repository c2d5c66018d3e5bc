// SPDX-License-Identifier: Apache-2.0
#include "gennv/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "gennv/config.hpp"
#include "gennv/decisions.hpp"
#include "gennv/error.hpp"

namespace gennv {

namespace {

constexpr std::array<const char*, 9> kColumns{"id", "week", "center_id", "meal_id", "checkout_price",
                                              "base_price", "emailer_for_promotion",
                                              "homepage_featured", "num_orders"};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string number_text(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

MealLoad load_meal_csv(std::istream& in) {
  MealLoad out;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, "meal CSV is empty");
  const auto header = split_csv_line(line);
  std::array<std::size_t, kColumns.size()> pos{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return trim(h) == kColumns[c]; });
    if (it == header.end()) {
      throw Error(ErrorKind::format, std::string("meal CSV: missing required column '") + kColumns[c] + "'");
    }
    pos[c] = static_cast<std::size_t>(it - header.begin());
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    auto field = [&](std::size_t c) { return trim(f[pos[c]]); };
    std::string reason;
    MealRecord r;
    if (f.size() < header.size()) {
      reason = "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size());
    } else if (!parse_number(field(0), r.id) || !parse_number(field(1), r.week) ||
               !parse_number(field(2), r.center_id) || !parse_number(field(3), r.meal_id)) {
      reason = "non-integer id, week, center_id or meal_id";
    } else if (!parse_number(field(4), r.checkout_price) || !parse_number(field(5), r.base_price)) {
      reason = "non-numeric price";
    } else if (!parse_number(field(6), r.emailer_for_promotion) || !parse_number(field(7), r.homepage_featured)) {
      reason = "non-integer promotion flag";
    } else if (!parse_number(field(8), r.num_orders)) {
      reason = "non-numeric num_orders";
    } else if (r.week < 1) {
      reason = "week must be >= 1";
    } else if (!(r.checkout_price > 0.0 && r.base_price > 0.0 && std::isfinite(r.checkout_price) &&
                 std::isfinite(r.base_price))) {
      reason = "prices must be positive";
    } else if (!(r.num_orders >= 0.0 && std::isfinite(r.num_orders))) {
      reason = "num_orders must be nonnegative";
    } else if ((r.emailer_for_promotion != 0 && r.emailer_for_promotion != 1) ||
               (r.homepage_featured != 0 && r.homepage_featured != 1)) {
      reason = "promotion flags must be 0 or 1";
    }
    if (!reason.empty()) {
      ++out.skipped;
      out.problems.push_back("line " + std::to_string(line_no) + ": " + reason);
      continue;
    }
    out.records.push_back(r);
  }
  return out;
}

MealLoad load_meal_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open meal CSV " + path.string());
  return load_meal_csv(in);
}

std::pair<std::vector<MealRecord>, std::vector<MealRecord>> split_by_week(
    const std::vector<MealRecord>& records, int split_week) {
  std::pair<std::vector<MealRecord>, std::vector<MealRecord>> out;
  for (const auto& r : records) (r.week <= split_week ? out.first : out.second).push_back(r);
  return out;
}

MealSplit build_meal_dataset(const std::vector<MealRecord>& records, const FeatureSpec& spec) {
  std::vector<MealRecord> meal;
  for (const auto& r : records) {
    if (r.meal_id == spec.meal_id) meal.push_back(r);
  }
  if (meal.empty()) throw Error(ErrorKind::data, "meal " + std::to_string(spec.meal_id) + " not found");
  for (const auto& col : spec.passthrough) {
    if (col != "base_price" && col != "checkout_price") {
      throw Error(ErrorKind::config, "unsupported passthrough column '" + col + "'");
    }
  }
  std::sort(meal.begin(), meal.end(), [](const MealRecord& a, const MealRecord& b) {
    return std::tie(a.week, a.center_id) < std::tie(b.week, b.center_id);
  });

  std::set<std::int64_t> center_set;
  std::map<std::pair<std::int64_t, int>, double> orders;  // (center, week) -> num_orders
  for (const auto& r : meal) {
    center_set.insert(r.center_id);
    if (!orders.emplace(std::make_pair(r.center_id, r.week), r.num_orders).second) {
      throw Error(ErrorKind::data, "meal " + std::to_string(spec.meal_id) + ": duplicate row for center " +
                                       std::to_string(r.center_id) + " week " + std::to_string(r.week));
    }
  }
  const std::vector<std::int64_t> centers(center_set.begin(), center_set.end());

  FeatureSchema schema;
  for (auto c : centers) schema.numeric_names.push_back("center_" + std::to_string(c));
  for (const char* name : {"lag1", "lag2", "emailer_for_promotion", "homepage_featured"}) {
    schema.numeric_names.emplace_back(name);
  }
  for (const auto& col : spec.passthrough) schema.numeric_names.push_back(col);

  MealSplit out;
  out.train.schema = schema;
  out.test.schema = schema;
  for (const auto& r : meal) {
    const auto lag1 = orders.find({r.center_id, r.week - 1});
    const auto lag2 = orders.find({r.center_id, r.week - 2});
    if (lag1 == orders.end() || lag2 == orders.end()) continue;
    DemandRecord rec;
    for (auto c : centers) rec.x.numeric.push_back(c == r.center_id ? 1.0 : 0.0);
    rec.x.numeric.push_back(lag1->second);
    rec.x.numeric.push_back(lag2->second);
    rec.x.numeric.push_back(r.emailer_for_promotion);
    rec.x.numeric.push_back(r.homepage_featured);
    for (const auto& col : spec.passthrough) {
      rec.x.numeric.push_back(col == "base_price" ? r.base_price : r.checkout_price);
    }
    rec.price = r.checkout_price;
    rec.demand = r.num_orders;
    if (r.week <= spec.split_week) {
      out.train.records.push_back(std::move(rec));
      out.train_weeks.push_back(r.week);
    } else {
      out.test.records.push_back(std::move(rec));
      out.test_weeks.push_back(r.week);
    }
  }
  if (out.train.empty() || out.test.empty()) {
    throw Error(ErrorKind::data, "meal " + std::to_string(spec.meal_id) + ": " +
                                     (out.train.empty() ? "training" : "test") +
                                     " side of the week split is empty");
  }
  return out;
}

std::uint64_t feature_hash(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto bytes = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  };
  auto f64 = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  };
  u64(data.size());
  u64(data.schema.numeric_dim());
  for (const auto& r : data.records) {
    for (double v : r.x.numeric) f64(v);
  }
  for (const auto& r : data.records) f64(r.price);
  for (const auto& r : data.records) f64(r.demand);
  return h;
}

std::vector<CostSetting> real_data_cost_grid() {
  std::vector<CostSetting> out;
  for (double s : {0.0, 50.0, 100.0}) {
    for (double c : {150.0, 200.0, 250.0, 300.0}) out.push_back({c, s});
  }
  return out;
}

void RealDataConfig::validate() const {
  if (meals.empty()) throw Error(ErrorKind::config, "real-data: no meal ids given");
  if (methods.empty()) throw Error(ErrorKind::config, "real-data: method list is empty");
  static const std::set<std::string> known{"saa", "erm_lr", "ko", "rbe", "cdgm"};
  for (const auto& m : methods) {
    if (!known.count(m)) throw Error(ErrorKind::config, "unknown real-data method '" + m + "'");
  }
  if (costs.empty()) throw Error(ErrorKind::config, "real-data: cost grid is empty");
  for (const auto& c : costs) CostParams{c.c, c.s}.validate();
  if (m == 0) throw Error(ErrorKind::config, "real-data: m must be positive");
  cdgm.validate();
}

namespace {

// Columns of x that are linearly independent of price, the intercept and the
// columns kept before them.
std::vector<std::size_t> independent_columns(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  std::vector<Eigen::VectorXd> basis;
  const auto absorb = [&](Eigen::VectorXd v) {
    const double norm0 = v.norm();
    for (const auto& b : basis) v -= b.dot(v) * b;
    const double norm = v.norm();
    if (norm0 == 0.0 || norm <= 1e-9 * norm0) return false;
    basis.push_back(v / norm);
    return true;
  };
  absorb(Eigen::VectorXd::Ones(n));
  Eigen::VectorXd col(n);
  for (Eigen::Index i = 0; i < n; ++i) col(i) = data.records[static_cast<std::size_t>(i)].price;
  absorb(col);
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < data.schema.numeric_dim(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) col(i) = data.records[static_cast<std::size_t>(i)].x.numeric[j];
    if (absorb(col)) keep.push_back(j);
  }
  return keep;
}

Features select_columns(const Features& x, const std::vector<std::size_t>& cols) {
  Features out;
  for (auto j : cols) out.numeric.push_back(x.numeric[j]);
  return out;
}

Dataset select_columns(const Dataset& data, const std::vector<std::size_t>& cols) {
  Dataset out;
  for (auto j : cols) out.schema.numeric_names.push_back(data.schema.numeric_names[j]);
  for (const auto& r : data.records) out.records.push_back({select_columns(r.x, cols), r.price, r.demand});
  return out;
}

}  // namespace

ExperimentReport run_real_data(const std::vector<MealRecord>& records, const RealDataConfig& cfg) {
  cfg.validate();
  ExperimentReport report;
  report.experiment = "real-data";
  report.config = to_json(cfg);

  const RngStream root = RngStream(cfg.seed).derive("real-data");
  for (auto meal_id : cfg.meals) {
    FeatureSpec spec;
    spec.meal_id = meal_id;
    spec.split_week = cfg.split_week;
    const MealSplit split = build_meal_dataset(records, spec);
    const Dataset& train_set = split.train;
    const Dataset& test_set = split.test;
    const RngStream meal_rng = root.derive(static_cast<std::uint64_t>(meal_id));
    const std::string dgp = "meal_" + std::to_string(meal_id);

    const auto has = [&](std::string_view m) {
      return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
    };
    std::optional<Generator> gen;
    if (has("cdgm")) {
      TrainConfig tc = cfg.cdgm;
      tc.use_text = false;
      tc.demand_max = 0.0;
      tc.seed = meal_rng.derive("cdgm").derive(cfg.cdgm.seed).next_u64();
      gen = train(train_set, tc);
    }
    std::optional<RbeModel> rbe;
    std::vector<std::size_t> rbe_cols;
    if (has("rbe")) {
      rbe_cols = independent_columns(train_set);
      rbe = rbe_fit(select_columns(train_set, rbe_cols));
    }
    std::optional<KernelWeights> kw;
    if (has("ko")) kw = KernelWeights::silverman(train_set);
    std::vector<double> pooled = train_set.demands();
    std::sort(pooled.begin(), pooled.end());
    double mean_price = 0.0;
    for (const auto& r : train_set.records) mean_price += r.price / static_cast<double>(train_set.size());

    // Generator draws do not depend on costs; sample once per test row.
    std::vector<std::vector<double>> samples;
    if (gen) {
      const RngStream decide = meal_rng.derive("decide");
      for (std::size_t i = 0; i < test_set.size(); ++i) {
        RngStream s = decide.derive(static_cast<std::uint64_t>(i));
        samples.push_back(gen->generate(test_set.records[i].x, test_set.records[i].price, cfg.m, s));
      }
    }

    for (const auto& cs : cfg.costs) {
      const CostParams costs_cs{cs.c, cs.s};
      std::optional<PinballModel> erm;
      if (has("erm_lr") && mean_price > cs.c) {
        ErmConfig ec = cfg.erm;
        ec.seed = meal_rng.derive("erm").derive(cfg.erm.seed).next_u64();
        erm = erm_fit(train_set, rho(mean_price, costs_cs), ErmForm::linear, ec);
      }
      const std::string metric = "profit_c" + number_text(cs.c) + "_s" + number_text(cs.s);
      for (const auto& method : cfg.methods) {
        double total = 0.0;
        std::size_t fallbacks = 0;
        for (std::size_t i = 0; i < test_set.size(); ++i) {
          const auto& r = test_set.records[i];
          double q = 0.0;
          if (r.price > cs.c) {
            if (method == "saa") {
              q = inventory_decision(pooled, r.price, costs_cs);
            } else if (method == "erm_lr") {
              q = erm ? std::max(0.0, erm->predict(r.x, r.price)) : 0.0;
            } else if (method == "ko") {
              try {
                q = ko_decide(train_set, r.x, r.price, costs_cs, *kw);
              } catch (const Error& e) {
                // Every kernel weight underflowed: no neighbour to learn from.
                if (e.kind() != ErrorKind::data) throw;
                q = inventory_decision(pooled, r.price, costs_cs);
                ++fallbacks;
              }
            } else if (method == "rbe") {
              q = rbe->decide(select_columns(r.x, rbe_cols), r.price, costs_cs);
            } else {
              q = inventory_decision(samples[i], r.price, costs_cs);
            }
          }
          total += profit(r.demand, r.price, q, costs_cs);
        }
        ReportRow row{dgp, "real", method, metric, std::nullopt, {total / static_cast<double>(test_set.size())}};
        report.rows.push_back(std::move(row));
        if (method == "ko") {
          report.rows.push_back(ReportRow{dgp, "real", method, "fallback_rows_c" + number_text(cs.c) + "_s" + number_text(cs.s),
                                          std::nullopt, {static_cast<double>(fallbacks)}});
        }
      }
    }
  }
  return report;
}

}  // namespace gennv
