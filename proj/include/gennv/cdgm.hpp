// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gennv/dataset.hpp"
#include "gennv/neural.hpp"
#include "gennv/numerics.hpp"
#include "gennv/sampler.hpp"

namespace gennv {

enum class TrainStrategy { adversarial, energy_score };

TrainStrategy parse_train_strategy(std::string_view name);
std::string_view to_string(TrainStrategy strategy);

struct TrainConfig {
  TrainStrategy strategy = TrainStrategy::energy_score;
  int epochs = 300;
  int batch_size = 128;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// The learning rate decays linearly to lr * lr_final_fraction over training.
  double lr_final_fraction = 0.1;
  /// The returned weights average the iterates of this final share of steps; 0 keeps the last iterate.
  double average_fraction = 0.25;
  /// Decoupled weight decay for the generator (and its embedding).
  double weight_decay = 1.0;
  std::vector<int> hidden = {64, 64};
  int noise_dim = 5;
  /// Generated samples per record in each energy-score batch.
  int samples_per_condition = 10;
  std::vector<int> discriminator_hidden = {64, 64};
  /// Embed textual features when the dataset has them.
  bool use_text = true;
  int embedding_dim = 8;
  /// Samples are clipped to [0, demand_max]; 0 leaves them unbounded above.
  double demand_max = 200.0;
  std::uint64_t seed = 0;

  /// Defaults for the adversarial trainer (lr 2e-4, beta1 0.5).
  static TrainConfig adversarial_defaults();
  void validate() const;
};

/// Affine maps that put conditions and demand on unit scale.
struct Standardizer {
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  double price_mean = 0.0;
  double price_scale = 1.0;
  double demand_mean = 0.0;
  double demand_scale = 1.0;

  static Standardizer fit(const Dataset& data);
};

/// Per-epoch training diagnostics.
struct TrainLog {
  std::vector<double> epoch_loss;  // energy score or generator loss
  std::vector<double> discriminator_loss;
};

/// Trained conditional generator d = G(x, p, eta), eta ~ N(0, I_r), with
/// outputs clipped to [0, 200] at sampling time.
class Generator : public DemandSampler {
 public:
  Generator() = default;
  Generator(Mlp net, int noise_dim, Standardizer standardizer, FeatureSchema schema,
            std::optional<EmbeddingTable> embedding, TrainConfig config);

  int noise_dim() const noexcept { return noise_dim_; }
  int condition_dim() const;
  const Mlp& net() const noexcept { return net_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const FeatureSchema& schema() const noexcept { return schema_; }
  const std::optional<EmbeddingTable>& embedding() const noexcept { return embedding_; }
  const TrainConfig& config() const noexcept { return config_; }

  /// Standardized condition vector (features, price, embedded text).
  Eigen::VectorXd encode_condition(const Features& x, double price) const;

  /// G(x, p, eta) for one noise vector, de-standardized and clipped.
  double evaluate(const Features& x, double price, std::span<const double> eta) const;

  /// M draws sorted ascending.
  std::vector<double> generate(const Features& x, double price, std::size_t m,
                               RngStream& rng) const;

  void sample_into(const Features& x, double price, std::span<double> out,
                   RngStream& rng) const override;
  std::vector<std::vector<double>> sample_prices(const Features& x,
                                                 std::span<const double> prices, std::size_t m,
                                                 const RngStream& rng) const override;

  /// JSON container: format version, config echo, standardizer, schema,
  /// layer shapes and row-major weights, optional embedding table.
  std::string save() const;
  /// Throws Error(format) on malformed input, Error(version) on a version
  /// mismatch.
  static Generator load(std::string_view payload);

  static constexpr int kFormatVersion = 1;

 private:
  Eigen::MatrixXd input_batch(const Eigen::VectorXd& condition, const Eigen::MatrixXd& eta) const;
  void finish(const Eigen::MatrixXd& raw, std::span<double> out) const;

  Mlp net_;
  int noise_dim_ = 0;
  Standardizer standardizer_;
  FeatureSchema schema_;
  std::optional<EmbeddingTable> embedding_;
  TrainConfig config_;
};

/// Fit a generator to the data. Deterministic given cfg.seed. Throws
/// Error(data) for an empty dataset and Error(numeric) if the loss stops
/// being finite.
Generator train(const Dataset& data, const TrainConfig& cfg, TrainLog* log = nullptr);

/// Energy score of one record: mean |s_j - y| minus half the mean pairwise
/// |s_j - s_k|. Writes d(score)/d(s_j) into `grad` when it is nonempty.
double energy_score(std::span<const double> samples, double target, std::span<double> grad = {});

}  // namespace gennv
