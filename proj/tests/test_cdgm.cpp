// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "gennv/cdgm.hpp"
#include "gennv/decisions.hpp"
#include "gennv/dgp.hpp"
#include "gennv/error.hpp"

namespace gennv {
namespace {

TrainConfig quick(int epochs, std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = seed;
  return cfg;
}

std::vector<double> all_parameters(Generator g) {
  std::vector<double> out;
  Mlp net = g.net();
  for (auto block : net.parameters()) out.insert(out.end(), block.begin(), block.end());
  return out;
}

// Two-sample Kolmogorov-Smirnov statistic on sorted inputs.
double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t i = 0, j = 0;
  double best = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    best = std::max(best, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return best;
}

TEST(EnergyScore, ValueAndGradient) {
  const std::vector<double> s{1.0, 4.0, 7.0};
  // mean |s - 2| = 8/3; ordered pairs with j != k sum to 24 over 6 pairs
  std::vector<double> g(3);
  EXPECT_DOUBLE_EQ(energy_score(s, 2.0, g), 8.0 / 3.0 - 0.5 * 24.0 / 6.0);
  EXPECT_DOUBLE_EQ(energy_score(std::vector<double>{5.0}, 2.0), 3.0);
  RngStream rng(1);
  std::vector<double> x(7);
  for (auto& v : x) v = rng.normal();
  std::vector<double> grad(7);
  energy_score(x, 0.3, grad);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> up = x, down = x;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    EXPECT_NEAR((energy_score(up, 0.3) - energy_score(down, 0.3)) / 2e-6, grad[i], 1e-6);
  }
}

// For samples from N(0, sd^2) scored against N(0, 1) targets the expected
// score is sqrt(2 (sd^2 + 1) / pi) - sd / sqrt(pi), minimized at sd = 1.
TEST(EnergyScore, UnbiasedAndMinimizedByTrueSpread) {
  const auto closed = [](double sd) { return std::sqrt(2 * (sd * sd + 1) / M_PI) - sd / std::sqrt(M_PI); };
  RngStream rng(3);
  std::vector<double> avg;
  for (double sd : {0.7, 1.0, 1.3}) {
    std::vector<double> scores;
    std::vector<double> s(10);
    for (int i = 0; i < 40000; ++i) {
      for (auto& v : s) v = sd * rng.normal();
      scores.push_back(energy_score(s, rng.normal()));
    }
    const double se = stddev(scores) / std::sqrt(double(scores.size()));
    EXPECT_NEAR(mean(scores), closed(sd), 4 * se) << sd;
    avg.push_back(mean(scores));
  }
  EXPECT_LT(avg[1], avg[0]);
  EXPECT_LT(avg[1], avg[2]);
}

TEST(Train, RejectsEmptyDataAndBadConfig) {
  Dataset empty{FeatureSchema::numbered(5), {}};
  try {
    train(empty, quick(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
  const Dataset data = make_dataset(make_oracle(DgpKind::a, 1), 50, PriceMode::discrete, RngStream(1));
  TrainConfig bad = quick(5);
  bad.noise_dim = 0;
  EXPECT_THROW(train(data, bad), Error);
  bad = quick(0);
  EXPECT_THROW(train(data, bad), Error);
}

TEST(Train, SameSeedGivesIdenticalParameters) {
  const Dataset data = make_dataset(make_oracle(DgpKind::a, 2), 300, PriceMode::discrete, RngStream(3));
  for (TrainStrategy s : {TrainStrategy::energy_score, TrainStrategy::adversarial}) {
    TrainConfig cfg = s == TrainStrategy::adversarial ? TrainConfig::adversarial_defaults() : TrainConfig{};
    cfg.epochs = 5;
    cfg.seed = 7;
    const Generator a = train(data, cfg);
    const Generator b = train(data, cfg);
    EXPECT_EQ(all_parameters(a), all_parameters(b));
    cfg.seed = 8;
    EXPECT_NE(all_parameters(a), all_parameters(train(data, cfg)));
  }
}

TEST(Train, DegenerateDemandCollapsesToPointMass) {
  const OracleModel m = make_oracle(DgpKind::a, 4);
  Dataset data = make_dataset(m, 500, PriceMode::discrete, RngStream(5));
  for (auto& r : data.records) r.demand = 40.0;
  const Generator g = train(data, quick(300));
  RngStream rng(6);
  for (int i = 0; i < 10; ++i) {
    const DemandRecord& r = data.records[rng.below(data.size())];
    const std::vector<double> s = g.generate(r.x, r.price, 2000, rng);
    EXPECT_NEAR(mean(s), 40.0, 1.0);
    EXPECT_LE(stddev(s), 2.0);
  }
}

class TrainedOnA : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    oracle_ = new OracleModel(make_oracle(DgpKind::a, 10));
    data_ = new Dataset(make_dataset(*oracle_, 2000, PriceMode::discrete, RngStream(11)));
    gen_ = new Generator(train(*data_, quick(300, 12)));
  }
  static void TearDownTestSuite() {
    delete gen_;
    delete data_;
    delete oracle_;
  }
  static OracleModel* oracle_;
  static Dataset* data_;
  static Generator* gen_;
};
OracleModel* TrainedOnA::oracle_ = nullptr;
Dataset* TrainedOnA::data_ = nullptr;
Generator* TrainedOnA::gen_ = nullptr;

TEST_F(TrainedOnA, KolmogorovSmirnovAgainstOracle) {
  RngStream rng(13);
  for (int i = 0; i < 20; ++i) {
    const Features x = oracle_->sample_features(rng);
    const double p = sample_price(*oracle_, PriceMode::continuous, rng);
    const std::vector<double> gen = gen_->generate(x, p, 10000, rng);
    const std::vector<double> ref = draw_sorted(*oracle_, x, p, 10000, rng);
    EXPECT_LE(ks_statistic(gen, ref), 0.12) << "point " << i;
  }
}

TEST_F(TrainedOnA, GenerateIsDeterministicSortedAndClipped) {
  const Features& x = data_->records[0].x;
  RngStream a(14), b(14);
  const auto s1 = gen_->generate(x, 3.0, 1000, a);
  const auto s2 = gen_->generate(x, 3.0, 1000, b);
  EXPECT_EQ(s1, s2);
  EXPECT_TRUE(std::is_sorted(s1.begin(), s1.end()));
  RngStream rng(15);
  for (int i = 0; i < 50; ++i) {
    Features far = oracle_->sample_features(rng);
    for (auto& v : far.numeric) v *= 20;  // push toward the clip bounds
    for (double p : {2.0, 4.0}) {
      const auto s = gen_->generate(far, p, 200, rng);
      EXPECT_GE(s.front(), 0.0);
      EXPECT_LE(s.back(), 200.0);
    }
  }
}

TEST_F(TrainedOnA, SaveLoadRoundTripIsBitwise) {
  const std::string payload = gen_->save();
  const Generator back = Generator::load(payload);
  EXPECT_EQ(all_parameters(back), all_parameters(*gen_));
  EXPECT_EQ(back.save(), payload);
  RngStream rng(16);
  for (int i = 0; i < 5; ++i) {
    const Features x = oracle_->sample_features(rng);
    RngStream a = rng.derive(i), b = rng.derive(i);
    EXPECT_EQ(gen_->generate(x, 2.7, 500, a), back.generate(x, 2.7, 500, b));
  }
}

TEST_F(TrainedOnA, MalformedPayloads) {
  const std::string payload = gen_->save();
  try {
    Generator::load(payload.substr(0, payload.size() / 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::format);
  }
  EXPECT_THROW(Generator::load(""), Error);
  nlohmann::json doc = nlohmann::json::parse(payload);
  doc["version"] = Generator::kFormatVersion + 1;
  try {
    Generator::load(doc.dump());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::version);
  }
  doc = nlohmann::json::parse(payload);
  doc["layers"][0]["bias"].erase(0);
  EXPECT_THROW(Generator::load(doc.dump()), Error);
}

TEST_F(TrainedOnA, DecisionsReproduceFromSerializedModelAlone) {
  std::string payload = gen_->save();
  RngStream rng(17);
  std::vector<Features> xs;
  std::vector<JointDecision> before;
  for (int i = 0; i < 5; ++i) {
    xs.push_back(oracle_->sample_features(rng));
    before.push_back(joint_decision(*gen_, xs.back(), oracle_->discrete_prices(), 1000, {1.0, 0.5}, rng.derive(i)));
  }
  // the training corpus is gone from here on
  Dataset().records.swap(data_->records);
  const Generator reloaded = Generator::load(payload);
  RngStream replay(17);
  for (int i = 0; i < 5; ++i) {
    (void)oracle_->sample_features(replay);
    const JointDecision after =
        joint_decision(reloaded, xs[i], oracle_->discrete_prices(), 1000, {1.0, 0.5}, replay.derive(i));
    EXPECT_EQ(after.price, before[i].price);
    EXPECT_EQ(after.quantity, before[i].quantity);
    EXPECT_EQ(after.profit, before[i].profit);
  }
}

TEST(Train, EnergyLossDecreasesOnEveryDgp) {
  for (DgpKind k : {DgpKind::a, DgpKind::b, DgpKind::c, DgpKind::d, DgpKind::e}) {
    const OracleModel m = make_oracle(k, 20);
    const Dataset data = make_dataset(m, 1000, PriceMode::discrete, RngStream(21));
    TrainLog log;
    train(data, quick(60, 22), &log);
    ASSERT_EQ(log.epoch_loss.size(), 60u);
    const std::size_t tenth = log.epoch_loss.size() / 10;
    double first = 0, last = 0;
    for (std::size_t i = 0; i < tenth; ++i) {
      first += log.epoch_loss[i];
      last += log.epoch_loss[log.epoch_loss.size() - 1 - i];
    }
    EXPECT_LE(last, first) << "kind " << to_string(k);
  }
}

TEST(Train, AdversarialRunsAndStaysFinite) {
  const Dataset data = make_dataset(make_oracle(DgpKind::a, 23), 500, PriceMode::discrete, RngStream(24));
  TrainConfig cfg = TrainConfig::adversarial_defaults();
  cfg.epochs = 20;
  TrainLog log;
  const Generator g = train(data, cfg, &log);
  EXPECT_EQ(log.discriminator_loss.size(), 20u);
  for (double v : log.epoch_loss) EXPECT_TRUE(std::isfinite(v));
  RngStream rng(25);
  const auto s = g.generate(data.records[0].x, 3.0, 100, rng);
  EXPECT_GE(s.front(), 0.0);
  EXPECT_LE(s.back(), 200.0);
}

TEST(Train, TextGeneratorIgnoresWordOrder) {
  const OracleModel m = make_oracle(DgpKind::e, 26);
  const Dataset data = make_dataset(m, 500, PriceMode::discrete, RngStream(27));
  const Generator g = train(data, quick(20, 28));
  ASSERT_TRUE(g.embedding().has_value());
  std::vector<std::string> words{"excellent", "poor", "okay"};
  const Eigen::VectorXd base = g.encode_condition(Features{{}, words}, 3.0);
  std::sort(words.begin(), words.end());
  do {
    EXPECT_EQ(g.encode_condition(Features{{}, words}, 3.0), base);
    RngStream a(29), b(29);
    const std::vector<std::string> original{"excellent", "poor", "okay"};
    EXPECT_EQ(g.generate(Features{{}, words}, 3.0, 50, a), g.generate(Features{{}, original}, 3.0, 50, b));
  } while (std::next_permutation(words.begin(), words.end()));
}

TEST(Train, UnboundedGeneratorIsNotCappedAt200) {
  const OracleModel m = make_oracle(DgpKind::a, 30);
  Dataset data = make_dataset(m, 300, PriceMode::discrete, RngStream(31));
  for (auto& r : data.records) r.demand = 1000.0 + r.demand;
  TrainConfig cfg = quick(30, 32);
  cfg.demand_max = 0.0;
  const Generator g = train(data, cfg);
  RngStream rng(33);
  EXPECT_GT(mean(g.generate(data.records[0].x, 3.0, 200, rng)), 500.0);
}

}  // namespace
}  // namespace gennv
