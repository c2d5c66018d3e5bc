// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gennv/baselines.hpp"
#include "gennv/error.hpp"

namespace gennv {
namespace {

const CostParams kCosts{1.0, 0.5};
constexpr double kInf = std::numeric_limits<double>::infinity();

Dataset one_dim(std::vector<DemandRecord> records) {
  return Dataset{FeatureSchema::numbered(1), std::move(records)};
}

// d = 2 + 0.5 x1 - p exactly.
Dataset noiseless_linear(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset data{FeatureSchema::numbered(1), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double p = rng.uniform(0.5, 1.5);
    data.records.push_back({Features{{x}, {}}, p, 2 + 0.5 * x - p});
  }
  return data;
}

TEST(Saa, OrderStatisticAtPrice) {
  Dataset data = one_dim({});
  for (int i = 1; i <= 10; ++i) data.records.push_back({Features{{double(i % 3)}, {}}, 3.0, double(11 - i)});
  data.records.push_back({Features{{0.0}, {}}, 2.0, 100.0});
  EXPECT_EQ(saa_decide(data, 3.0, kCosts, PriceMode::discrete), 8.0);
}

TEST(Saa, IgnoresFeatures) {
  const OracleModel m = make_oracle(DgpKind::a, 1);
  Dataset data = make_dataset(m, 500, PriceMode::discrete, RngStream(2));
  Dataset permuted = data;
  RngStream rng(3);
  for (std::size_t i = permuted.size() - 1; i > 0; --i) std::swap(permuted.records[i].x, permuted.records[rng.below(i + 1)].x);
  for (double p : m.discrete_prices())
    EXPECT_EQ(saa_decide(data, p, kCosts, PriceMode::discrete), saa_decide(permuted, p, kCosts, PriceMode::discrete));
}

TEST(Saa, NoMatchingRecordNamesPrice) {
  Dataset data = one_dim({{Features{{0.0}, {}}, 2.0, 5.0}});
  try {
    saa_decide(data, 3.5, kCosts, PriceMode::discrete);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("3.5"), std::string::npos);
  }
}

TEST(Saa, ContinuousWindow) {
  Dataset data = one_dim({{Features{{0.0}, {}}, 2.95, 5.0},
                          {Features{{0.0}, {}}, 3.05, 7.0},
                          {Features{{0.0}, {}}, 3.5, 100.0}});
  EXPECT_EQ(saa_decide(data, 3.0, kCosts, PriceMode::continuous, 0.1), 7.0);
  EXPECT_THROW(saa_decide(data, 2.5, kCosts, PriceMode::continuous, 0.1), Error);
}

TEST(Pinball, Example) { EXPECT_NEAR(pinball_loss(0.8, 10, 12), 0.4, 1e-15); }

TEST(Erm, LinearFitsNoiselessLine) {
  const Dataset data = noiseless_linear(300, 4);
  for (double tau : {0.3, 0.8}) {
    const PinballModel model = erm_fit(data, tau, ErmForm::linear);
    EXPECT_LE(model.loss(data), 1e-3) << "tau " << tau;
    RngStream rng(5);
    for (int i = 0; i < 20; ++i) {
      const double x = rng.normal(), p = rng.uniform(0.5, 1.5);
      EXPECT_NEAR(model.predict(Features{{x}, {}}, p), 2 + 0.5 * x - p, 0.05);
    }
  }
}

TEST(Erm, RejectsBadInputs) {
  EXPECT_THROW(erm_fit(noiseless_linear(10, 1), 1.0, ErmForm::linear), Error);
  EXPECT_THROW(erm_fit(Dataset{FeatureSchema::numbered(1), {}}, 0.5, ErmForm::linear), Error);
  EXPECT_THROW(ErmBank().decide(Features{{0.0}, {}}, 3.0, kCosts), Error);
}

TEST(Erm, BankPicksNearestLevelAndFloorsAtZero) {
  const Dataset data = noiseless_linear(200, 6);
  ErmConfig cfg;
  cfg.linear_steps = 500;
  const std::vector<double> taus = default_quantile_bank();
  ASSERT_EQ(taus.size(), 7u);
  EXPECT_DOUBLE_EQ(taus.front(), 0.60);
  EXPECT_DOUBLE_EQ(taus.back(), 0.90);
  const ErmBank bank = erm_fit_bank(data, taus, ErmForm::linear, cfg);
  // the noiseless line is negative at x = -10, p = 3
  EXPECT_EQ(bank.decide(Features{{-10.0}, {}}, 3.0, kCosts), 0.0);
  const Features x{{1.0}, {}};
  // rho(3) = 0.8 -> the 0.80 model
  EXPECT_EQ(bank.decide(x, 3.0, kCosts), std::max(0.0, bank.models()[4].predict(x, 3.0)));
}

TEST(Erm, NeuralFitReducesLoss) {
  const OracleModel m = make_oracle(DgpKind::b, 7);
  const Dataset data = make_dataset(m, 600, PriceMode::discrete, RngStream(8));
  ErmConfig cfg;
  cfg.epochs = 60;
  const PinballModel model = erm_fit(data, 0.75, ErmForm::neural, cfg);
  // constant predictor at the pooled quantile as the reference
  std::vector<double> d = data.demands();
  std::sort(d.begin(), d.end());
  const double c = d[order_statistic_index(d.size(), 0.75) - 1];
  double ref = 0;
  for (double v : d) ref += pinball_loss(0.75, v, c);
  ref /= d.size();
  EXPECT_LT(model.loss(data), 0.5 * ref);
  EXPECT_TRUE(std::isfinite(model.predict(data.records[0].x, 3.0)));
}

TEST(Ko, SingleRecord) {
  const Dataset data = one_dim({{Features{{0.3}, {}}, 2.5, 42.0}});
  const KernelWeights kw{{1.0}, 1.0};
  EXPECT_EQ(ko_decide(data, Features{{0.0}, {}}, 3.0, kCosts, kw), 42.0);
}

TEST(Ko, TwoEquidistantRecords) {
  const Dataset data = one_dim({{Features{{-1.0}, {}}, 3.0, 10.0}, {Features{{1.0}, {}}, 3.0, 20.0}});
  const KernelWeights kw{{1.0}, 1.0};
  EXPECT_EQ(ko_decide(data, Features{{0.0}, {}}, 3.0, kCosts, kw), 20.0);
}

TEST(Ko, AllWeightsUnderflowThrows) {
  const Dataset data = one_dim({{Features{{0.0}, {}}, 3.0, 10.0}});
  const KernelWeights kw{{1e-3}, 1e-3};
  EXPECT_THROW(ko_decide(data, Features{{100.0}, {}}, 3.0, kCosts, kw), Error);
}

// Independent reference: brute-force argmax of the weighted empirical profit.
double ko_brute_force(const Dataset& data, const Features& x, double p, const KernelWeights& kw) {
  std::vector<double> w;
  for (const auto& r : data.records) {
    double logw = 0;
    for (std::size_t j = 0; j < x.numeric.size(); ++j) {
      const double z = (x.numeric[j] - r.x.numeric[j]) / kw.feature_bandwidth[j];
      logw -= 0.5 * z * z;
    }
    const double z = (p - r.price) / kw.price_bandwidth;
    w.push_back(logw - 0.5 * z * z);
  }
  const double top = *std::max_element(w.begin(), w.end());
  for (auto& v : w) v = std::exp(v - top);
  double best_q = 0, best = -1e300;
  for (const auto& cand : data.records) {
    double v = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
      v += w[i] * profit(data.records[i].demand, data.records[i].price, cand.demand, kCosts);
    if (v > best + 1e-9 * std::abs(best) || (std::abs(v - best) <= 1e-9 * std::abs(best) && cand.demand < best_q)) {
      best = v;
      best_q = cand.demand;
    }
  }
  return best_q;
}

TEST(Ko, MatchesBruteForce) {
  const OracleModel m = make_oracle(DgpKind::a, 9);
  const Dataset data = make_dataset(m, 300, PriceMode::discrete, RngStream(10));
  const KernelWeights kw = KernelWeights::silverman(data);
  RngStream rng(11);
  for (int i = 0; i < 20; ++i) {
    const Features x = m.sample_features(rng);
    const double p = m.discrete_prices()[rng.below(21)];
    EXPECT_EQ(ko_decide(data, x, p, kCosts, kw), ko_brute_force(data, x, p, kw));
  }
}

TEST(Kernel, SilvermanBandwidths) {
  const Dataset data = noiseless_linear(1000, 12);
  const KernelWeights kw = KernelWeights::silverman(data);
  std::vector<double> x, p;
  for (const auto& r : data.records) {
    x.push_back(r.x.numeric[0]);
    p.push_back(r.price);
  }
  const double factor = 1.06 * std::pow(1000.0, -0.2);
  EXPECT_NEAR(kw.feature_bandwidth[0], factor * stddev(x), 1e-12);
  EXPECT_NEAR(kw.price_bandwidth, factor * stddev(p), 1e-12);
  EXPECT_THROW((KernelWeights{{0.0}, 1.0}.validate(1)), Error);
  EXPECT_THROW((KernelWeights{{1.0, 1.0}, 1.0}.validate(1)), Error);
}

TEST(Kernel, WeightedQuantile) {
  const std::vector<double> d{30, 10, 20};
  const std::vector<double> w{1, 1, 2};
  EXPECT_EQ(weighted_quantile(d, w, 0.25), 10.0);
  EXPECT_EQ(weighted_quantile(d, w, 0.5), 20.0);
  EXPECT_EQ(weighted_quantile(d, w, 0.76), 30.0);
}

TEST(Kernel, ReorderInvariance) {
  const OracleModel m = make_oracle(DgpKind::a, 13);
  const Dataset data = make_dataset(m, 300, PriceMode::discrete, RngStream(14));
  Dataset shuffled = data;
  std::reverse(shuffled.records.begin(), shuffled.records.end());
  std::swap(shuffled.records[3], shuffled.records[100]);
  const KernelWeights kw = KernelWeights::silverman(data);
  const KernelWeights kw2 = KernelWeights::silverman(shuffled);
  ASSERT_NEAR(kw.price_bandwidth, kw2.price_bandwidth, 1e-12);
  RngStream rng(15);
  for (int i = 0; i < 10; ++i) {
    const Features x = m.sample_features(rng);
    EXPECT_EQ(ko_decide(data, x, 3.0, kCosts, kw), ko_decide(shuffled, x, 3.0, kCosts, kw));
    const JointDecision a = prescriptive_joint(data, x, m.discrete_prices(), kCosts, kw);
    const JointDecision b = prescriptive_joint(shuffled, x, m.discrete_prices(), kCosts, kw);
    EXPECT_EQ(a.price, b.price);
    EXPECT_EQ(a.quantity, b.quantity);
    EXPECT_NEAR(a.profit, b.profit, 1e-9 * std::abs(a.profit));
  }
}

TEST(Rbe, NoiselessLinearInterpolates) {
  const Dataset data = noiseless_linear(100, 16);
  const RbeModel model = rbe_fit(data);
  for (double r : model.residuals) EXPECT_NEAR(r, 0.0, 1e-9);
  EXPECT_NEAR(model.alpha, -1.0, 1e-9);
  const Features x{{0.7}, {}};
  EXPECT_NEAR(rbe_decide(model, x, 1.2, {0.5, 0.2}), 2 + 0.35 - 1.2, 1e-6);
  EXPECT_NEAR(model.fitted(x, 1.2), 2 + 0.35 - 1.2, 1e-6);
}

TEST(Rbe, ResidualQuantile) {
  RbeModel model;
  model.beta = Eigen::VectorXd::Zero(1);
  model.intercept = 10.0;
  model.residuals = {-1, 0, 1, 2};
  // rho = 0.5 at p = 1.5
  EXPECT_EQ(model.decide(Features{{0.0}, {}}, 1.5, kCosts), 10.0);
  EXPECT_EQ(model.demand_samples(Features{{0.0}, {}}, 1.5), (std::vector<double>{9, 10, 11, 12}));
}

TEST(Rbe, Errors) {
  EXPECT_THROW(rbe_fit(noiseless_linear(3, 1)), Error);
  Dataset collinear = noiseless_linear(20, 2);
  for (auto& r : collinear.records) r.x.numeric[0] = 2 * r.price;
  try {
    rbe_fit(collinear);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::factorization);
  }
}

TEST(Rbe, AgreesWithLinearErmOnNoiselessData) {
  const Dataset data = noiseless_linear(300, 17);
  const RbeModel rbe = rbe_fit(data);
  const ErmBank bank = erm_fit_bank(data, default_quantile_bank(), ErmForm::linear);
  const CostParams costs{0.5, 0.2};
  RngStream rng(18);
  for (int i = 0; i < 20; ++i) {
    const Features x{{rng.normal()}, {}};
    const double p = rng.uniform(0.6, 1.4);
    EXPECT_NEAR(bank.decide(x, p, costs), rbe.decide(x, p, costs), 0.05);
  }
}

TEST(Prescriptive, ConcentratedWeightsPickHighestPrice) {
  const Dataset data = one_dim({{Features{{0.0}, {}}, 2.5, 40.0},
                                {Features{{5.0}, {}}, 3.0, 10.0},
                                {Features{{-5.0}, {}}, 2.0, 90.0}});
  const KernelWeights kw{{1e-3}, kInf};
  const std::vector<double> grid = build_price_grid(2.0, 4.0, 21);
  const JointDecision jd = prescriptive_joint(data, Features{{0.0}, {}}, grid, kCosts, kw);
  EXPECT_EQ(jd.price, 4.0);
  EXPECT_EQ(jd.quantity, 40.0);
  EXPECT_NEAR(jd.profit, (4.0 - 1.0) * 40.0, 1e-9);
}

TEST(Prescriptive, UniformWeightsMatchPooledJoint) {
  const OracleModel m = make_oracle(DgpKind::a, 19);
  const Dataset data = make_dataset(m, 400, PriceMode::discrete, RngStream(20));
  const KernelWeights kw{std::vector<double>(5, kInf), kInf};
  RngStream rng(21);
  const Features x = m.sample_features(rng);
  const JointDecision a = prescriptive_joint(data, x, m.discrete_prices(), kCosts, kw);
  const JointDecision b = saa_joint(data, m.discrete_prices(), kCosts);
  EXPECT_EQ(a.price, b.price);
  EXPECT_EQ(a.quantity, b.quantity);
  EXPECT_NEAR(a.profit, b.profit, 1e-9 * std::abs(b.profit));
}

TEST(SaaJoint, FrozenDemandPicksMaximumPrice) {
  Dataset data = one_dim({});
  for (int i = 0; i < 20; ++i) data.records.push_back({Features{{double(i)}, {}}, 2.0 + 0.1 * i, 50.0});
  const JointDecision jd = saa_joint(data, build_price_grid(2.0, 4.0, 21), kCosts);
  EXPECT_EQ(jd.price, 4.0);
  EXPECT_EQ(jd.quantity, 50.0);
  EXPECT_THROW(saa_joint(one_dim({}), build_price_grid(2.0, 4.0, 21), kCosts), Error);
}

TEST(Baselines, OutputsNonnegativeAndQuantileMethodsReturnObservedDemands) {
  const OracleModel m = make_oracle(DgpKind::c, 22);
  const Dataset data = make_dataset(m, 500, PriceMode::discrete, RngStream(23));
  std::vector<double> demands = data.demands();
  std::sort(demands.begin(), demands.end());
  const KernelWeights kw = KernelWeights::silverman(data);
  const RbeModel rbe = rbe_fit(data);
  RngStream rng(24);
  for (int i = 0; i < 20; ++i) {
    const Features x = m.sample_features(rng);
    const double p = m.discrete_prices()[rng.below(21)];
    const double saa = saa_decide(data, p, kCosts, PriceMode::discrete);
    const double ko = ko_decide(data, x, p, kCosts, kw);
    EXPECT_TRUE(std::binary_search(demands.begin(), demands.end(), saa));
    EXPECT_TRUE(std::binary_search(demands.begin(), demands.end(), ko));
    EXPECT_GE(rbe.decide(x, p, kCosts), 0.0);
    const JointDecision jd = rbe_joint(rbe, x, m.discrete_prices(), kCosts);
    EXPECT_GE(jd.quantity, 0.0);
  }
}

}  // namespace
}  // namespace gennv
