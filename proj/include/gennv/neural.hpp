// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gennv/numerics.hpp"

namespace gennv {

enum class Activation { relu, identity };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::identity;
};

/// Activation cache of one forward pass over a batch. Column j of every
/// matrix belongs to sample j.
struct Tape {
  std::vector<Eigen::MatrixXd> inputs;  // input to layer l
  std::vector<Eigen::MatrixXd> pre;     // affine output of layer l
};

/// Fully connected feed-forward network. Batches are column-major: an input
/// batch is (input_dim x batch_size).
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Widths (in, h1, ..., out); hidden layers use `hidden`, the last layer
  /// `output`. Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
  static Mlp glorot(std::span<const int> widths, Activation hidden, Activation output,
                    RngStream& rng);

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  /// Inference without recording a tape.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& batch) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& input) const;

  /// Mutable views of every parameter, layer by layer (weight then bias).
  std::vector<std::span<double>> parameters();

 private:
  std::vector<DenseLayer> layers_;
};

struct ForwardResult {
  Eigen::MatrixXd output;
  Tape tape;
};

ForwardResult forward(const Mlp& net, const Eigen::MatrixXd& batch);

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;  // dLoss/dInput, same shape as the input batch

  /// Views in the same order as Mlp::parameters().
  std::vector<std::span<const double>> blocks() const;
};

/// Exact gradients of a scalar loss given dLoss/dOutput for the batch that
/// produced `tape`.
MlpGradients backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& output_grad);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled decay: each step also subtracts lr * weight_decay * w.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  long step = 0;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

/// One bias-corrected Adam update. Moment buffers are allocated on the first
/// call; later calls must pass blocks of the same shapes.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state);

/// Word embedding with mean aggregation. Row 0 is reserved for words not in
/// the vocabulary; an empty description embeds to the zero vector.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> vocabulary, int dim, RngStream& rng);
  EmbeddingTable(std::map<std::string, int> index, Eigen::MatrixXd vectors);

  int dim() const noexcept { return static_cast<int>(vectors_.cols()); }
  int rows() const noexcept { return static_cast<int>(vectors_.rows()); }
  int row_of(const std::string& word) const;

  Eigen::VectorXd embed(std::span<const std::string> words) const;
  /// Accumulate dLoss/dRow into `grad` (rows x dim) for one description.
  void accumulate_gradient(std::span<const std::string> words,
                           const Eigen::VectorXd& embedded_grad, Eigen::MatrixXd& grad) const;

  const std::map<std::string, int>& index() const noexcept { return index_; }
  const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }
  std::span<double> parameters() {
    return {vectors_.data(), static_cast<std::size_t>(vectors_.size())};
  }

 private:
  std::map<std::string, int> index_;
  Eigen::MatrixXd vectors_;
};

}  // namespace gennv
