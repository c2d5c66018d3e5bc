// SPDX-License-Identifier: Apache-2.0
#include "gennv/dgp.hpp"

#include <cmath>
#include <numbers>

#include "gennv/error.hpp"

namespace gennv {

namespace {

constexpr double kPriceTolerance = 1e-9;

// Three words per score level; "excellent" and "recommended" score 5 and 4.
const std::map<std::string, int>& review_dictionary() {
  static const std::map<std::string, int> dict = {
      {"terrible", 1}, {"awful", 1},         {"useless", 1},
      {"poor", 2},     {"disappointing", 2}, {"mediocre", 2},
      {"average", 3},  {"okay", 3},          {"decent", 3},
      {"good", 4},     {"recommended", 4},   {"solid", 4},
      {"excellent", 5}, {"outstanding", 5},  {"perfect", 5},
  };
  return dict;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

double clip_demand(double d) { return std::clamp(d, kDemandMin, kDemandMax); }

}  // namespace

DgpKind parse_dgp_kind(std::string_view name) {
  if (name == "a") return DgpKind::a;
  if (name == "b") return DgpKind::b;
  if (name == "c") return DgpKind::c;
  if (name == "d") return DgpKind::d;
  if (name == "e") return DgpKind::e;
  throw Error(ErrorKind::config, "unknown DGP kind '" + std::string(name) + "' (expected a-e)");
}

std::string_view to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::a: return "a";
    case DgpKind::b: return "b";
    case DgpKind::c: return "c";
    case DgpKind::d: return "d";
    case DgpKind::e: return "e";
  }
  return "?";
}

PriceMode parse_price_mode(std::string_view name) {
  if (name == "discrete") return PriceMode::discrete;
  if (name == "continuous") return PriceMode::continuous;
  throw Error(ErrorKind::config,
              "unknown price mode '" + std::string(name) + "' (expected discrete|continuous)");
}

std::string_view to_string(PriceMode mode) {
  return mode == PriceMode::discrete ? "discrete" : "continuous";
}

void CostParams::validate() const {
  if (!(s >= 0.0 && s <= c)) {
    throw Error(ErrorKind::config, "costs must satisfy 0 <= s <= c");
  }
}

double rho(double price, const CostParams& costs) {
  if (!(price > costs.c)) {
    throw Error(ErrorKind::domain, "critical ratio undefined for price " + std::to_string(price) +
                                       " <= unit cost " + std::to_string(costs.c));
  }
  return (price - costs.c) / (price - costs.s);
}

OracleModel OracleModel::make(DgpKind kind, std::uint64_t seed) {
  return make(kind, RngStream(seed));
}

OracleModel OracleModel::make(DgpKind kind, const RngStream& stream) {
  OracleModel m;
  m.kind_ = kind;
  RngStream beta_rng = stream.derive("beta");
  m.beta_ = Eigen::VectorXd::Zero(5);
  if (kind == DgpKind::a || kind == DgpKind::c) {
    for (Eigen::Index i = 0; i < 5; ++i) m.beta_(i) = std::sqrt(2.0) * beta_rng.normal();
  }
  switch (kind) {
    case DgpKind::a:
    case DgpKind::b: m.noise_sd_ = std::sqrt(5.0); break;
    case DgpKind::c: m.noise_sd_ = std::sqrt(0.5); break;
    case DgpKind::d: m.noise_sd_ = 2.0; break;
    case DgpKind::e: m.noise_sd_ = std::sqrt(10.0); break;
  }
  if (kind == DgpKind::d) {
    // 21 evenly spaced prices in (1, 4]; p = c = 1 has no critical ratio.
    m.price_lo_ = 1.0;
    m.price_hi_ = 4.0;
    for (int i = 1; i <= 21; ++i) m.discrete_prices_.push_back(1.0 + 3.0 * i / 21.0);
    m.discrete_prices_.back() = 4.0;
  } else {
    m.price_lo_ = 2.0;
    m.price_hi_ = 4.0;
    m.discrete_prices_ = linspace(2.0, 4.0, 21);
  }
  if (kind == DgpKind::e) m.word_scores_ = review_dictionary();
  return m;
}

FeatureSchema OracleModel::schema() const {
  if (kind_ == DgpKind::e) return FeatureSchema{{}, true};
  return FeatureSchema::numbered(5);
}

OracleModel OracleModel::with_beta(Eigen::VectorXd beta) const {
  if (beta.size() != 5) throw Error(ErrorKind::dimension, "with_beta: beta must have 5 entries");
  OracleModel m = *this;
  m.beta_ = std::move(beta);
  return m;
}

OracleModel OracleModel::with_noise_sd(double sd) const {
  if (!(sd >= 0.0)) throw Error(ErrorKind::domain, "with_noise_sd: scale must be >= 0");
  OracleModel m = *this;
  m.noise_sd_ = sd;
  return m;
}

Features OracleModel::sample_features(RngStream& rng) const {
  Features x;
  if (kind_ == DgpKind::e) {
    static const std::vector<std::string> vocab = [] {
      std::vector<std::string> v;
      for (const auto& [w, s] : review_dictionary()) v.push_back(w);
      return v;
    }();
    const auto len = rng.below(4);
    for (std::uint64_t i = 0; i < len; ++i) x.words.push_back(vocab[rng.below(vocab.size())]);
    return x;
  }
  const Eigen::VectorXd v = sample_mvn(Eigen::VectorXd::Zero(5), omega_, rng);
  x.numeric.assign(v.data(), v.data() + v.size());
  return x;
}

double OracleModel::text_score(std::span<const std::string> words) const {
  double total = 0.0;
  int scored = 0;
  for (const auto& w : words) {
    auto it = word_scores_.find(w);
    if (it == word_scores_.end()) continue;
    total += it->second;
    ++scored;
  }
  return scored == 0 ? 3.0 : total / scored;
}

void OracleModel::check_price(double price) const {
  if (!(price >= price_lo_ - kPriceTolerance && price <= price_hi_ + kPriceTolerance)) {
    throw Error(ErrorKind::domain, "price " + std::to_string(price) + " outside [" +
                                       std::to_string(price_lo_) + ", " +
                                       std::to_string(price_hi_) + "] for DGP " +
                                       std::string(to_string(kind_)));
  }
}

double OracleModel::raw_demand(const Features& x, double price, double z) const {
  const double noise = noise_sd_ * z;
  auto xb = [&] {
    if (x.numeric.size() != 5) throw Error(ErrorKind::dimension, "DGP features must have 5 entries");
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) acc += x.numeric[i] * beta_(i);
    return acc;
  };
  switch (kind_) {
    case DgpKind::a: return 100.0 - 20.0 * price + xb() + noise;
    case DgpKind::b: {
      if (x.numeric.size() != 5) throw Error(ErrorKind::dimension, "DGP features must have 5 entries");
      const auto& v = x.numeric;
      return 100.0 - 20.0 * price + 4.0 * std::sin(2.0 * v[0]) + 3.0 * v[1] * v[2] + noise;
    }
    case DgpKind::c: return 130.0 * std::pow(4.0 * price - 6.0, -1.3) * std::exp(noise) + xb();
    case DgpKind::d: {
      if (x.numeric.size() != 5) throw Error(ErrorKind::dimension, "DGP features must have 5 entries");
      double sum = 0.0;
      for (double v : x.numeric) sum += v;
      const double g = sum / std::sqrt(15.0);
      const double base = std::max(4.0 - price, 0.0);
      return 40.0 * std::pow(base, std::sin(3.0 * g) + 1.01) + noise;
    }
    case DgpKind::e: return 40.0 + 10.0 * text_score(x.words) - 10.0 * price + noise;
  }
  return 0.0;
}

double OracleModel::sample_demand(const Features& x, double price, RngStream& rng) const {
  check_price(price);
  return clip_demand(raw_demand(x, price, rng.normal()));
}

void OracleModel::sample_into(const Features& x, double price, std::span<double> out,
                              RngStream& rng) const {
  check_price(price);
  for (double& d : out) d = clip_demand(raw_demand(x, price, rng.normal()));
}

double OracleModel::quantile(const Features& x, double price, double u) const {
  if (!(u > 0.0 && u < 1.0)) {
    throw Error(ErrorKind::domain, "oracle quantile level must lie in (0,1)");
  }
  check_price(price);
  // raw_demand is increasing in z, and clipping is monotone, so the
  // quantile of the clipped demand is the clipped raw quantile.
  return clip_demand(raw_demand(x, price, std_normal_quantile(u)));
}

double OracleModel::mean_demand(const Features& x, double price) const {
  check_price(price);
  // Composite Simpson on z in [-9, 9]; the tails beyond carry < 1e-18 mass.
  constexpr int kIntervals = 6000;
  constexpr double kLo = -9.0;
  constexpr double kHi = 9.0;
  const double h = (kHi - kLo) / kIntervals;
  double acc = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double z = kLo + h * i;
    const double w = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * clip_demand(raw_demand(x, price, z)) * std_normal_pdf(z);
  }
  return acc * h / 3.0;
}

ProfitEstimate OracleModel::expected_profit(const Features& x, double price, double q,
                                            const CostParams& costs, std::size_t mc_n,
                                            const RngStream& stream) const {
  if (mc_n < 2) throw Error(ErrorKind::domain, "expected_profit: mc_n must be >= 2");
  if (q < 0.0) throw Error(ErrorKind::domain, "expected_profit: q must be >= 0");
  check_price(price);
  RngStream rng = stream;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < mc_n; ++i) {
    const double v = profit(clip_demand(raw_demand(x, price, rng.normal())), price, q, costs);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(mc_n);
  const double mu = sum / n;
  const double var = std::max(sum_sq / n - mu * mu, 0.0) * n / (n - 1.0);
  return {mu, std::sqrt(var / n)};
}

double oracle_quantile(const OracleModel& model, const Features& x, double price, double u) {
  return model.quantile(x, price, u);
}

ProfitEstimate oracle_expected_profit(const OracleModel& model, const Features& x, double price,
                                      double q, const CostParams& costs, std::size_t mc_n,
                                      const RngStream& stream) {
  return model.expected_profit(x, price, q, costs, mc_n, stream);
}

double sample_price(const OracleModel& model, PriceMode mode, RngStream& rng) {
  if (mode == PriceMode::discrete) {
    const auto& set = model.discrete_prices();
    return set[rng.below(set.size())];
  }
  // Uniform on (lo, hi]; keeps p strictly above a cost equal to lo.
  return model.price_max() - (model.price_max() - model.price_min()) * rng.uniform();
}

Dataset make_dataset(const OracleModel& model, std::size_t n, PriceMode mode,
                     const RngStream& stream) {
  Dataset data;
  data.schema = model.schema();
  data.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng = stream.derive(static_cast<std::uint64_t>(i));
    DemandRecord r;
    r.x = model.sample_features(rng);
    r.price = sample_price(model, mode, rng);
    r.demand = model.sample_demand(r.x, r.price, rng);
    data.records.push_back(std::move(r));
  }
  return data;
}

}  // namespace gennv
