// SPDX-License-Identifier: Apache-2.0
#include "gennv/neural.hpp"

#include <algorithm>
#include <cmath>

#include "gennv/error.hpp"

namespace gennv {

namespace {

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::relu) z = z.cwiseMax(0.0);
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorKind::dimension, "Mlp: at least one layer required");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw Error(ErrorKind::dimension, "Mlp: bias length differs from weight rows");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw Error(ErrorKind::dimension, "Mlp: adjacent layer widths do not chain");
    }
  }
}

Mlp Mlp::glorot(std::span<const int> widths, Activation hidden, Activation output,
                RngStream& rng) {
  if (widths.size() < 2) throw Error(ErrorKind::dimension, "Mlp::glorot: need >= 2 widths");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    if (fan_in <= 0 || fan_out <= 0) throw Error(ErrorKind::dimension, "Mlp::glorot: widths > 0");
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
        layer.weight(i, j) = rng.uniform(-limit, limit);
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layer.activation = (l + 2 == widths.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

Eigen::MatrixXd Mlp::predict(const Eigen::MatrixXd& batch) const {
  if (batch.rows() != input_dim()) {
    throw Error(ErrorKind::dimension, "Mlp::predict: input has " + std::to_string(batch.rows()) +
                                          " rows, expected " + std::to_string(input_dim()));
  }
  Eigen::MatrixXd a = batch;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weight * a;
    z.colwise() += layer.bias;
    apply_activation(z, layer.activation);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd Mlp::predict(const Eigen::VectorXd& input) const {
  return predict(Eigen::MatrixXd(input)).col(0);
}

std::vector<std::span<double>> Mlp::parameters() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers_) {
    out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  return out;
}

ForwardResult forward(const Mlp& net, const Eigen::MatrixXd& batch) {
  if (batch.rows() != net.input_dim()) {
    throw Error(ErrorKind::dimension, "forward: input has " + std::to_string(batch.rows()) +
                                          " rows, expected " + std::to_string(net.input_dim()));
  }
  ForwardResult result;
  const auto& layers = net.layers();
  result.tape.inputs.reserve(layers.size());
  result.tape.pre.reserve(layers.size());
  Eigen::MatrixXd a = batch;
  for (const auto& layer : layers) {
    Eigen::MatrixXd z = layer.weight * a;
    z.colwise() += layer.bias;
    result.tape.inputs.push_back(std::move(a));
    result.tape.pre.push_back(z);
    apply_activation(z, layer.activation);
    a = std::move(z);
  }
  result.output = std::move(a);
  return result;
}

std::vector<std::span<const double>> MlpGradients::blocks() const {
  std::vector<std::span<const double>> out;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    out.emplace_back(weight[l].data(), static_cast<std::size_t>(weight[l].size()));
    out.emplace_back(bias[l].data(), static_cast<std::size_t>(bias[l].size()));
  }
  return out;
}

MlpGradients backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& output_grad) {
  const auto& layers = net.layers();
  if (tape.inputs.size() != layers.size() || tape.pre.size() != layers.size()) {
    throw Error(ErrorKind::dimension, "backward: tape does not match network depth");
  }
  if (output_grad.rows() != net.output_dim() || output_grad.cols() != tape.pre.back().cols()) {
    throw Error(ErrorKind::dimension, "backward: output gradient shape mismatch");
  }
  MlpGradients grads;
  grads.weight.resize(layers.size());
  grads.bias.resize(layers.size());
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    if (layer.activation == Activation::relu) {
      delta = (tape.pre[l].array() > 0.0).select(delta, 0.0);
    }
    grads.weight[l].noalias() = delta * tape.inputs[l].transpose();
    grads.bias[l] = delta.rowwise().sum();
    Eigen::MatrixXd upstream = layer.weight.transpose() * delta;
    delta = std::move(upstream);
  }
  grads.input = std::move(delta);
  return grads;
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw Error(ErrorKind::dimension, "adam_step: parameter and gradient block counts differ");
  }
  if (state.first.empty()) {
    for (const auto& block : params) {
      state.first.emplace_back(block.size(), 0.0);
      state.second.emplace_back(block.size(), 0.0);
    }
  }
  if (state.first.size() != params.size()) {
    throw Error(ErrorKind::dimension, "adam_step: state shape differs from parameters");
  }
  ++state.step;
  const auto& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.first[b];
    auto& v = state.second[b];
    if (p.size() != g.size() || p.size() != m.size()) {
      throw Error(ErrorKind::dimension, "adam_step: block shape mismatch");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) + cfg.weight_decay * p[i]);
    }
  }
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocabulary, int dim, RngStream& rng) {
  if (dim <= 0) throw Error(ErrorKind::dimension, "EmbeddingTable: dim must be positive");
  int row = 1;
  for (auto& word : vocabulary) {
    if (index_.emplace(std::move(word), row).second) ++row;
  }
  vectors_.resize(row, dim);
  for (Eigen::Index j = 0; j < vectors_.cols(); ++j)
    for (Eigen::Index i = 0; i < vectors_.rows(); ++i) vectors_(i, j) = rng.uniform(-0.5, 0.5);
}

EmbeddingTable::EmbeddingTable(std::map<std::string, int> index, Eigen::MatrixXd vectors)
    : index_(std::move(index)), vectors_(std::move(vectors)) {
  for (const auto& [word, row] : index_) {
    if (row <= 0 || row >= vectors_.rows()) {
      throw Error(ErrorKind::format, "EmbeddingTable: word '" + word + "' maps outside the table");
    }
  }
}

int EmbeddingTable::row_of(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? 0 : it->second;
}

Eigen::VectorXd EmbeddingTable::embed(std::span<const std::string> words) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  if (words.empty()) return out;
  // Summation in row order makes the result exactly independent of word order.
  std::vector<int> rows;
  rows.reserve(words.size());
  for (const auto& w : words) rows.push_back(row_of(w));
  std::sort(rows.begin(), rows.end());
  for (int r : rows) out += vectors_.row(r).transpose();
  return out / static_cast<double>(words.size());
}

void EmbeddingTable::accumulate_gradient(std::span<const std::string> words,
                                         const Eigen::VectorXd& embedded_grad,
                                         Eigen::MatrixXd& grad) const {
  if (words.empty()) return;
  const double share = 1.0 / static_cast<double>(words.size());
  for (const auto& w : words) grad.row(row_of(w)) += share * embedded_grad.transpose();
}

}  // namespace gennv
