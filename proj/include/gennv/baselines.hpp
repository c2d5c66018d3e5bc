// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gennv/dataset.hpp"
#include "gennv/decisions.hpp"
#include "gennv/dgp.hpp"
#include "gennv/neural.hpp"

namespace gennv {

// ---------------------------------------------------------------------------
// Sample average approximation

/// Critical-ratio quantile of the observed demands at price p, ignoring
/// features. Discrete mode uses records with price exactly p; continuous
/// mode uses records with |p_i - p| <= window. Throws Error(data) naming
/// the price when no record qualifies.
double saa_decide(const Dataset& data, double price, const CostParams& costs, PriceMode mode,
                  double window = 0.1);

/// Price chosen by maximizing (1/n) sum Pi(d_i, p, q) over the whole
/// corpus, as if demand did not react to price. The quantity at each price
/// is the pooled critical-ratio quantile, which maximizes that estimate.
JointDecision saa_joint(const Dataset& data, std::span<const double> grid, const CostParams& costs);

// ---------------------------------------------------------------------------
// Empirical risk minimization under the pinball loss

/// tau (d - f)+ + (1 - tau)(f - d)+
inline double pinball_loss(double tau, double demand, double prediction) {
  const double diff = demand - prediction;
  return diff >= 0 ? tau * diff : (tau - 1.0) * diff;
}

enum class ErmForm { linear, neural };

struct ErmConfig {
  // linear form: full-batch Adam
  int linear_steps = 4000;
  double linear_lr = 0.05;
  // neural form: minibatch Adam
  int epochs = 150;
  int batch_size = 128;
  double lr = 1e-3;
  std::vector<int> hidden = {64, 64};
  /// Learning rate decays linearly to lr * lr_final_fraction.
  double lr_final_fraction = 0.05;
  std::uint64_t seed = 0;
};

/// A fitted tau-quantile regression q(x, p).
class PinballModel {
 public:
  ErmForm form() const noexcept { return form_; }
  double tau() const noexcept { return tau_; }
  double predict(const Features& x, double price) const;
  /// Mean pinball loss over a dataset.
  double loss(const Dataset& data) const;

 private:
  friend PinballModel erm_fit(const Dataset&, double, ErmForm, const ErmConfig&);

  ErmForm form_ = ErmForm::linear;
  double tau_ = 0.5;
  std::vector<double> feature_mean_, feature_scale_;
  double price_mean_ = 0.0, price_scale_ = 1.0;
  double demand_mean_ = 0.0, demand_scale_ = 1.0;
  Eigen::VectorXd coef_;  // linear: one weight per standardized input
  double intercept_ = 0.0;
  Mlp net_;               // neural
};

PinballModel erm_fit(const Dataset& data, double tau, ErmForm form, const ErmConfig& cfg = {});

/// Quantile levels {0.60, 0.65, ..., 0.90}.
std::vector<double> default_quantile_bank();

/// Models trained at fixed quantile levels; a decision uses the model whose
/// level is nearest the critical ratio, floored at zero.
class ErmBank {
 public:
  ErmBank() = default;
  explicit ErmBank(std::vector<PinballModel> models);

  double decide(const Features& x, double price, const CostParams& costs) const;
  const std::vector<PinballModel>& models() const noexcept { return models_; }

 private:
  std::vector<PinballModel> models_;
};

ErmBank erm_fit_bank(const Dataset& data, std::span<const double> taus, ErmForm form,
                     const ErmConfig& cfg = {});

// ---------------------------------------------------------------------------
// Kernel weights (KO and the prescriptive joint method)

/// Gaussian product kernel bandwidths. An infinite bandwidth makes that
/// dimension irrelevant.
struct KernelWeights {
  std::vector<double> feature_bandwidth;
  double price_bandwidth = 1.0;

  /// 1.06 * sd * n^(-1/5) per dimension.
  static KernelWeights silverman(const Dataset& data);
  void validate(std::size_t numeric_dim) const;
};

/// Normalized weights w_i(x, p) / max_j w_j(x, p). Throws Error(data) when
/// every raw weight underflows to zero.
std::vector<double> kernel_weights(const Dataset& data, const KernelWeights& kw,
                                   const Features& x, double price);

/// argmax over q in {d_i} of sum_i w_i Pi(d_i, p_i, q) with w_i = K_H(x - x_i) K_h(p - p_i).
double ko_decide(const Dataset& data, const Features& x, double price, const CostParams& costs,
                 const KernelWeights& kw);

/// Smallest observed demand whose cumulative weight reaches `level` of the
/// total. `weights` is aligned with `demands`.
double weighted_quantile(std::span<const double> demands, std::span<const double> weights,
                         double level);

/// Joint decision from weights w_i(x, p) over the corpus: at each grid price
/// the weighted critical-ratio quantile and the weighted profit
/// sum w_i Pi(d_i, p, q) / sum w_i. Grid prices whose weights all underflow
/// are skipped; Error(data) if all do.
JointDecision prescriptive_joint(const Dataset& data, const Features& x,
                                 std::span<const double> grid, const CostParams& costs,
                                 const KernelWeights& kw);

// ---------------------------------------------------------------------------
// Residual-based estimation

/// Least squares d ~ alpha p + beta'x + intercept with the sorted residuals.
struct RbeModel {
  double alpha = 0.0;
  Eigen::VectorXd beta;
  double intercept = 0.0;
  std::vector<double> residuals;  // ascending

  double fitted(const Features& x, double price) const;
  /// fitted + empirical critical-ratio residual quantile, floored at zero.
  double decide(const Features& x, double price, const CostParams& costs) const;
  /// fitted + every residual, floored at zero (ascending).
  std::vector<double> demand_samples(const Features& x, double price) const;
};

/// Throws Error(data) unless n > k + 2 and Error(factorization) when the
/// design matrix is rank deficient.
RbeModel rbe_fit(const Dataset& data);
inline double rbe_decide(const RbeModel& model, const Features& x, double price,
                         const CostParams& costs) {
  return model.decide(x, price, costs);
}
/// Joint decision treating fitted + residuals as the demand distribution.
JointDecision rbe_joint(const RbeModel& model, const Features& x, std::span<const double> grid,
                        const CostParams& costs);

}  // namespace gennv
