// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gennv/dataset.hpp"
#include "gennv/numerics.hpp"
#include "gennv/profit.hpp"
#include "gennv/sampler.hpp"

namespace gennv {

enum class DgpKind { a, b, c, d, e };
enum class PriceMode { discrete, continuous };

DgpKind parse_dgp_kind(std::string_view name);
std::string_view to_string(DgpKind kind);
PriceMode parse_price_mode(std::string_view name);
std::string_view to_string(PriceMode mode);

struct ProfitEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Demand truncation applied to every realized draw.
inline constexpr double kDemandMin = 0.0;
inline constexpr double kDemandMax = 200.0;

/// One of the five synthetic demand processes, with exact samplers and
/// closed-form conditional quantiles.
///   a: 100 - 20p + x'b + e                      e ~ N(0, 5)
///   b: 100 - 20p + 4 sin(2 x1) + 3 x2 x3 + e    e ~ N(0, 5)
///   c: 130 (4p - 6)^-1.3 e + x'b                log e ~ N(0, 0.5)
///   d: 40 (4 - p)^(sin(3 g(x)) + 1.01) + e      e ~ N(0, 4), g(x) = sum(x)/sqrt(15)
///   e: 40 + 10 score(x) - 10p + e               e ~ N(0, 10), x is text
/// The second normal parameter is a variance. x ~ N(0, Omega) with unit
/// variances and 0.5 correlations; b ~ N(0, 2 I). Draws are clipped to
/// [0, 200].
class OracleModel : public DemandSampler {
 public:
  static OracleModel make(DgpKind kind, std::uint64_t seed);
  static OracleModel make(DgpKind kind, const RngStream& stream);

  DgpKind kind() const noexcept { return kind_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  /// Standard deviation of the Gaussian noise (of log e for kind c).
  double noise_sd() const noexcept { return noise_sd_; }
  const Covariance& feature_covariance() const noexcept { return omega_; }
  FeatureSchema schema() const;

  double price_min() const noexcept { return price_lo_; }
  double price_max() const noexcept { return price_hi_; }
  /// The discrete price set used by the discrete protocol.
  const std::vector<double>& discrete_prices() const noexcept { return discrete_prices_; }

  /// Test hooks: replace the coefficient vector or the noise scale
  /// (a zero scale makes demand deterministic).
  OracleModel with_beta(Eigen::VectorXd beta) const;
  OracleModel with_noise_sd(double sd) const;

  Features sample_features(RngStream& rng) const;
  /// Demand before clipping for a standard-normal noise value z. Increasing in z.
  double raw_demand(const Features& x, double price, double z) const;
  double sample_demand(const Features& x, double price, RngStream& rng) const;
  /// Exact u-quantile of the clipped conditional demand.
  double quantile(const Features& x, double price, double u) const;
  /// E[D | x, p] of the clipped demand, by quadrature over the noise.
  double mean_demand(const Features& x, double price) const;
  ProfitEstimate expected_profit(const Features& x, double price, double q,
                                 const CostParams& costs, std::size_t mc_n,
                                 const RngStream& stream) const;

  /// Average word score of a description (3 when no word is scored).
  double text_score(std::span<const std::string> words) const;
  const std::map<std::string, int>& word_scores() const noexcept { return word_scores_; }

  void sample_into(const Features& x, double price, std::span<double> out,
                   RngStream& rng) const override;

  void check_price(double price) const;

 private:
  OracleModel() : omega_(Covariance::equicorrelated(5, 0.5)) {}

  DgpKind kind_ = DgpKind::a;
  Eigen::VectorXd beta_;
  double noise_sd_ = 1.0;
  Covariance omega_;
  double price_lo_ = 2.0;
  double price_hi_ = 4.0;
  std::vector<double> discrete_prices_;
  std::map<std::string, int> word_scores_;
};

// Free-function spellings of the model operations.
inline OracleModel make_oracle(DgpKind kind, std::uint64_t seed) {
  return OracleModel::make(kind, seed);
}
double oracle_quantile(const OracleModel& model, const Features& x, double price, double u);
ProfitEstimate oracle_expected_profit(const OracleModel& model, const Features& x, double price,
                                      double q, const CostParams& costs, std::size_t mc_n,
                                      const RngStream& stream);

/// n records with features from the model and prices uniform on the price
/// set. Record i depends only on (stream, i), so a smaller corpus drawn from
/// the same stream is a prefix of a larger one.
Dataset make_dataset(const OracleModel& model, std::size_t n, PriceMode mode,
                     const RngStream& stream);

/// Uniform price draw from the model's price set.
double sample_price(const OracleModel& model, PriceMode mode, RngStream& rng);

}  // namespace gennv
