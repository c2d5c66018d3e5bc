// SPDX-License-Identifier: Apache-2.0
#include "gennv/cdgm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "gennv/config.hpp"
#include "gennv/dgp.hpp"
#include "gennv/error.hpp"

namespace gennv {

using nlohmann::json;

TrainStrategy parse_train_strategy(std::string_view name) {
  if (name == "energy_score") return TrainStrategy::energy_score;
  if (name == "adversarial") return TrainStrategy::adversarial;
  throw Error(ErrorKind::config, "unknown training strategy '" + std::string(name) + "'");
}

std::string_view to_string(TrainStrategy strategy) {
  return strategy == TrainStrategy::energy_score ? "energy_score" : "adversarial";
}

TrainConfig TrainConfig::adversarial_defaults() {
  TrainConfig cfg;
  cfg.strategy = TrainStrategy::adversarial;
  cfg.lr = 2e-4;
  cfg.beta1 = 0.5;
  cfg.lr_final_fraction = 1.0;
  return cfg;
}

void TrainConfig::validate() const {
  auto positive = [](long v, const char* what) {
    if (v <= 0) throw Error(ErrorKind::config, std::string(what) + " must be positive");
  };
  positive(epochs, "epochs");
  positive(batch_size, "batch_size");
  positive(noise_dim, "noise_dim");
  positive(samples_per_condition, "samples_per_condition");
  positive(embedding_dim, "embedding_dim");
  if (!(lr > 0.0)) throw Error(ErrorKind::config, "lr must be positive");
  if (!(weight_decay >= 0.0)) throw Error(ErrorKind::config, "weight_decay must be nonnegative");
  if (!(average_fraction >= 0.0 && average_fraction < 1.0)) {
    throw Error(ErrorKind::config, "average_fraction must lie in [0, 1)");
  }
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
    throw Error(ErrorKind::config, "lr_final_fraction must lie in (0, 1]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorKind::config, "Adam betas must lie in [0, 1)");
  }
  if (strategy == TrainStrategy::energy_score && samples_per_condition < 2) {
    throw Error(ErrorKind::config, "energy score training needs samples_per_condition >= 2");
  }
  if (!(demand_max >= 0.0)) throw Error(ErrorKind::config, "demand_max must be nonnegative");
  for (int w : hidden) positive(w, "hidden width");
  for (int w : discriminator_hidden) positive(w, "discriminator width");
}

Standardizer Standardizer::fit(const Dataset& data) {
  if (data.empty()) throw Error(ErrorKind::data, "cannot standardize an empty dataset");
  Standardizer st;
  const std::size_t k = data.schema.numeric_dim();
  const double n = static_cast<double>(data.size());
  auto scale_of = [](double var) {
    const double sd = std::sqrt(std::max(var, 0.0));
    return sd > 1e-12 ? sd : 1.0;
  };
  st.feature_mean.assign(k, 0.0);
  st.feature_scale.assign(k, 1.0);
  for (std::size_t j = 0; j < k; ++j) {
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& r : data.records) {
      sum += r.x.numeric[j];
      sum_sq += r.x.numeric[j] * r.x.numeric[j];
    }
    st.feature_mean[j] = sum / n;
    st.feature_scale[j] = scale_of(sum_sq / n - st.feature_mean[j] * st.feature_mean[j]);
  }
  double ps = 0.0, ps2 = 0.0, ds = 0.0, ds2 = 0.0;
  for (const auto& r : data.records) {
    ps += r.price;
    ps2 += r.price * r.price;
    ds += r.demand;
    ds2 += r.demand * r.demand;
  }
  st.price_mean = ps / n;
  st.price_scale = scale_of(ps2 / n - st.price_mean * st.price_mean);
  st.demand_mean = ds / n;
  st.demand_scale = scale_of(ds2 / n - st.demand_mean * st.demand_mean);
  return st;
}

double energy_score(std::span<const double> samples, double target, std::span<double> grad) {
  const std::size_t m = samples.size();
  if (m == 0) throw Error(ErrorKind::data, "energy_score: no samples");
  const double inv_m = 1.0 / static_cast<double>(m);
  // pair average over j != k
  const double inv_pairs = m > 1 ? 1.0 / static_cast<double>(m * (m - 1)) : 0.0;
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != m) throw Error(ErrorKind::dimension, "energy_score: grad size");
  double fit = 0.0;
  double spread = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double diff = samples[j] - target;
    fit += std::abs(diff);
    double g = want_grad ? inv_m * ((diff > 0) - (diff < 0)) : 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double pair = samples[j] - samples[k];
      spread += std::abs(pair);
      if (want_grad) g -= inv_pairs * ((pair > 0) - (pair < 0));
    }
    if (want_grad) grad[j] = g;
  }
  return fit * inv_m - 0.5 * spread * inv_pairs;
}

// ---------------------------------------------------------------------------
// Condition encoding shared by training and sampling.

namespace {

struct ConditionLayout {
  std::size_t numeric = 0;
  int text = 0;  // embedding width, 0 when text is unused
  int dim() const { return static_cast<int>(numeric) + 1 + text; }
};

void encode_into(const Standardizer& st, const EmbeddingTable* embedding, const Features& x,
                 double price, double* out) {
  const std::size_t k = st.feature_mean.size();
  if (x.numeric.size() != k) {
    throw Error(ErrorKind::dimension, "condition has " + std::to_string(x.numeric.size()) +
                                          " numeric features, generator expects " +
                                          std::to_string(k));
  }
  for (std::size_t j = 0; j < k; ++j) out[j] = (x.numeric[j] - st.feature_mean[j]) / st.feature_scale[j];
  out[k] = (price - st.price_mean) / st.price_scale;
  if (embedding) {
    const Eigen::VectorXd e = embedding->embed(x.words);
    for (Eigen::Index j = 0; j < e.size(); ++j) out[k + 1 + static_cast<std::size_t>(j)] = e(j);
  }
}

std::vector<std::string> vocabulary_of(const Dataset& data) {
  std::set<std::string> words;
  for (const auto& r : data.records) words.insert(r.x.words.begin(), r.x.words.end());
  return {words.begin(), words.end()};
}

void check_finite(double loss, int epoch, std::size_t step, const char* what) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::numeric, std::string(what) + " became non-finite at epoch " +
                                        std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

// Parameter and gradient views over a network plus an optional embedding.
struct ParamSet {
  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> grads;
};

ParamSet collect(Mlp& net, const MlpGradients& g, EmbeddingTable* emb, const Eigen::MatrixXd* emb_grad) {
  ParamSet set{net.parameters(), g.blocks()};
  if (emb != nullptr) {
    set.params.push_back(emb->parameters());
    set.grads.emplace_back(emb_grad->data(), static_cast<std::size_t>(emb_grad->size()));
  }
  return set;
}

double scheduled_lr(const TrainConfig& cfg, long step, long total_steps) {
  const double t = total_steps > 1 ? static_cast<double>(step) / static_cast<double>(total_steps - 1) : 1.0;
  return cfg.lr * (1.0 - (1.0 - cfg.lr_final_fraction) * t);
}

// Running mean of the parameters over the final steps of training.
class TailAverage {
 public:
  TailAverage(double fraction, long total_steps)
      : start_(total_steps - static_cast<long>(std::ceil(fraction * static_cast<double>(total_steps)))) {}

  void add(long step, const std::vector<std::span<double>>& params) {
    if (step < start_) return;
    if (sum_.empty()) {
      for (const auto& block : params) sum_.emplace_back(block.size(), 0.0);
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size(); ++i) sum_[b][i] += params[b][i];
    }
    ++count_;
  }

  void apply(const std::vector<std::span<double>>& params) const {
    if (count_ == 0) return;
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] = sum_[b][i] / static_cast<double>(count_);
    }
  }

 private:
  long start_;
  long count_ = 0;
  std::vector<std::vector<double>> sum_;
};

std::vector<std::span<double>> generator_parameters(Mlp& net, EmbeddingTable* emb) {
  std::vector<std::span<double>> params = net.parameters();
  if (emb != nullptr) params.push_back(emb->parameters());
  return params;
}

void shuffle(std::vector<std::size_t>& order, RngStream& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
}

struct TrainingSetup {
  Standardizer st;
  ConditionLayout layout;
  std::optional<EmbeddingTable> embedding;
  std::vector<double> target;  // standardized demand
  std::vector<std::string> vocab;
};

TrainingSetup prepare(const Dataset& data, const TrainConfig& cfg, RngStream& init_rng) {
  TrainingSetup s;
  s.st = Standardizer::fit(data);
  s.layout.numeric = data.schema.numeric_dim();
  if (cfg.use_text && data.schema.text) {
    s.vocab = vocabulary_of(data);
    s.embedding.emplace(s.vocab, cfg.embedding_dim, init_rng);
    s.layout.text = cfg.embedding_dim;
  }
  s.target.reserve(data.size());
  for (const auto& r : data.records) s.target.push_back((r.demand - s.st.demand_mean) / s.st.demand_scale);
  return s;
}

Generator train_energy(const Dataset& data, const TrainConfig& cfg, TrainLog* log) {
  RngStream root(cfg.seed);
  RngStream init_rng = root.derive("init");
  RngStream order_rng = root.derive("order");
  RngStream noise_rng = root.derive("noise");
  TrainingSetup setup = prepare(data, cfg, init_rng);
  const int cond_dim = setup.layout.dim();
  const int r = cfg.noise_dim;
  const int m = cfg.samples_per_condition;

  std::vector<int> widths{cond_dim + r};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  Mlp net = Mlp::glorot(widths, Activation::relu, Activation::identity, init_rng);
  EmbeddingTable* emb = setup.embedding ? &*setup.embedding : nullptr;

  AdamState adam(AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});
  const std::size_t n = data.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long total_steps = steps_per_epoch * cfg.epochs;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Eigen::MatrixXd emb_grad;
  std::vector<double> cond(static_cast<std::size_t>(cond_dim));
  std::vector<double> sample_grad(static_cast<std::size_t>(m));
  long step = 0;
  TailAverage average(cfg.average_fraction, total_steps);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b_count = std::min(batch, n - start);
      Eigen::MatrixXd input(cond_dim + r, static_cast<Eigen::Index>(b_count * m));
      for (std::size_t b = 0; b < b_count; ++b) {
        const auto& rec = data.records[order[start + b]];
        encode_into(setup.st, emb, rec.x, rec.price, cond.data());
        for (int j = 0; j < m; ++j) {
          const auto col = static_cast<Eigen::Index>(b * m + j);
          for (int i = 0; i < cond_dim; ++i) input(i, col) = cond[i];
          for (int i = 0; i < r; ++i) input(cond_dim + i, col) = noise_rng.normal();
        }
      }
      ForwardResult fw = forward(net, input);
      Eigen::MatrixXd out_grad(1, input.cols());
      double batch_loss = 0.0;
      const double inv_b = 1.0 / static_cast<double>(b_count);
      for (std::size_t b = 0; b < b_count; ++b) {
        const double* samples = fw.output.data() + b * m;
        batch_loss += energy_score({samples, static_cast<std::size_t>(m)},
                                   setup.target[order[start + b]], sample_grad);
        for (int j = 0; j < m; ++j) out_grad(0, static_cast<Eigen::Index>(b * m + j)) = sample_grad[j] * inv_b;
      }
      batch_loss *= inv_b;
      check_finite(batch_loss, epoch, static_cast<std::size_t>(step), "energy score");
      epoch_loss += batch_loss * static_cast<double>(b_count);

      MlpGradients grads = backward(net, fw.tape, out_grad);
      if (emb) {
        emb_grad = Eigen::MatrixXd::Zero(emb->rows(), emb->dim());
        const auto offset = static_cast<Eigen::Index>(setup.layout.numeric + 1);
        for (std::size_t b = 0; b < b_count; ++b) {
          const auto& rec = data.records[order[start + b]];
          Eigen::VectorXd g = grads.input.block(offset, static_cast<Eigen::Index>(b * m), emb->dim(), m).rowwise().sum();
          emb->accumulate_gradient(rec.x.words, g, emb_grad);
        }
      }
      adam.config.lr = scheduled_lr(cfg, step, total_steps);
      ParamSet set = collect(net, grads, emb, &emb_grad);
      adam_step(set.params, set.grads, adam);
      average.add(step, set.params);
      ++step;
    }
    if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  average.apply(generator_parameters(net, emb));
  return Generator(std::move(net), r, setup.st, data.schema, std::move(setup.embedding), cfg);
}

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Generator train_adversarial(const Dataset& data, const TrainConfig& cfg, TrainLog* log) {
  RngStream root(cfg.seed);
  RngStream init_rng = root.derive("init");
  RngStream order_rng = root.derive("order");
  RngStream noise_rng = root.derive("noise");
  TrainingSetup setup = prepare(data, cfg, init_rng);
  const int cond_dim = setup.layout.dim();
  const int r = cfg.noise_dim;

  std::vector<int> g_widths{cond_dim + r};
  g_widths.insert(g_widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  g_widths.push_back(1);
  Mlp gen = Mlp::glorot(g_widths, Activation::relu, Activation::identity, init_rng);
  std::vector<int> d_widths{cond_dim + 1};
  d_widths.insert(d_widths.end(), cfg.discriminator_hidden.begin(), cfg.discriminator_hidden.end());
  d_widths.push_back(1);
  Mlp disc = Mlp::glorot(d_widths, Activation::relu, Activation::identity, init_rng);

  EmbeddingTable* g_emb = setup.embedding ? &*setup.embedding : nullptr;
  std::optional<EmbeddingTable> d_embedding;
  if (g_emb) d_embedding.emplace(setup.vocab, cfg.embedding_dim, init_rng);
  EmbeddingTable* d_emb = d_embedding ? &*d_embedding : nullptr;

  AdamState g_adam(AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});
  AdamState d_adam(AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  const std::size_t n = data.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  const long total_steps = static_cast<long>((n + batch - 1) / batch) * cfg.epochs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto text_offset = static_cast<Eigen::Index>(setup.layout.numeric + 1);
  long step = 0;
  TailAverage average(cfg.average_fraction, total_steps);

  auto fill_conditions = [&](std::size_t start, std::size_t count, const EmbeddingTable* emb,
                             Eigen::MatrixXd& dst) {
    std::vector<double> cond(static_cast<std::size_t>(cond_dim));
    for (std::size_t b = 0; b < count; ++b) {
      const auto& rec = data.records[order[start + b]];
      encode_into(setup.st, emb, rec.x, rec.price, cond.data());
      for (int i = 0; i < cond_dim; ++i) dst(i, static_cast<Eigen::Index>(b)) = cond[i];
    }
  };
  auto text_grad = [&](std::size_t start, std::size_t count, const EmbeddingTable& emb,
                       const Eigen::MatrixXd& input_grad, Eigen::Index col0) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(emb.rows(), emb.dim());
    for (std::size_t b = 0; b < count; ++b) {
      const auto& rec = data.records[order[start + b]];
      emb.accumulate_gradient(rec.x.words,
                              input_grad.block(text_offset, col0 + static_cast<Eigen::Index>(b), emb.dim(), 1),
                              g);
    }
    return g;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    double g_epoch = 0.0;
    double d_epoch = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b_count = std::min(batch, n - start);
      const auto bc = static_cast<Eigen::Index>(b_count);
      const double inv_b = 1.0 / static_cast<double>(b_count);
      const double lr = scheduled_lr(cfg, step, total_steps);

      // Discriminator step: real (x, p, d) against (x, p, G(x, p, eta)).
      Eigen::MatrixXd g_cond(cond_dim, bc);
      fill_conditions(start, b_count, g_emb, g_cond);
      Eigen::MatrixXd g_in(cond_dim + r, bc);
      g_in.topRows(cond_dim) = g_cond;
      for (Eigen::Index j = 0; j < bc; ++j)
        for (int i = 0; i < r; ++i) g_in(cond_dim + i, j) = noise_rng.normal();
      const Eigen::MatrixXd fake = gen.predict(g_in);

      Eigen::MatrixXd d_cond(cond_dim, bc);
      fill_conditions(start, b_count, d_emb, d_cond);
      Eigen::MatrixXd d_in(cond_dim + 1, 2 * bc);
      d_in.block(0, 0, cond_dim, bc) = d_cond;
      d_in.block(0, bc, cond_dim, bc) = d_cond;
      for (Eigen::Index j = 0; j < bc; ++j) {
        d_in(cond_dim, j) = setup.target[order[start + static_cast<std::size_t>(j)]];
        d_in(cond_dim, bc + j) = fake(0, j);
      }
      ForwardResult d_fw = forward(disc, d_in);
      Eigen::MatrixXd d_grad(1, 2 * bc);
      double d_loss = 0.0;
      for (Eigen::Index j = 0; j < bc; ++j) {
        const double real_logit = d_fw.output(0, j);
        const double fake_logit = d_fw.output(0, bc + j);
        d_loss -= log_sigmoid(real_logit) + log_sigmoid(-fake_logit);
        d_grad(0, j) = (sigmoid(real_logit) - 1.0) * inv_b;
        d_grad(0, bc + j) = sigmoid(fake_logit) * inv_b;
      }
      d_loss *= inv_b;
      check_finite(d_loss, epoch, static_cast<std::size_t>(step), "discriminator loss");
      MlpGradients dg = backward(disc, d_fw.tape, d_grad);
      Eigen::MatrixXd d_emb_grad;
      if (d_emb) {
        d_emb_grad = text_grad(start, b_count, *d_emb, dg.input, 0) +
                     text_grad(start, b_count, *d_emb, dg.input, bc);
      }
      d_adam.config.lr = lr;
      ParamSet d_set = collect(disc, dg, d_emb, &d_emb_grad);
      adam_step(d_set.params, d_set.grads, d_adam);

      // Generator step with the non-saturating loss -log D(G(x, p, eta)).
      for (Eigen::Index j = 0; j < bc; ++j)
        for (int i = 0; i < r; ++i) g_in(cond_dim + i, j) = noise_rng.normal();
      ForwardResult g_fw = forward(gen, g_in);
      fill_conditions(start, b_count, d_emb, d_cond);
      Eigen::MatrixXd d_fake_in(cond_dim + 1, bc);
      d_fake_in.topRows(cond_dim) = d_cond;
      d_fake_in.row(cond_dim) = g_fw.output.row(0);
      ForwardResult d_fake = forward(disc, d_fake_in);
      Eigen::MatrixXd logit_grad(1, bc);
      double g_loss = 0.0;
      for (Eigen::Index j = 0; j < bc; ++j) {
        const double logit = d_fake.output(0, j);
        g_loss -= log_sigmoid(logit);
        logit_grad(0, j) = (sigmoid(logit) - 1.0) * inv_b;
      }
      g_loss *= inv_b;
      check_finite(g_loss, epoch, static_cast<std::size_t>(step), "generator loss");
      MlpGradients through_d = backward(disc, d_fake.tape, logit_grad);
      Eigen::MatrixXd sample_grad = through_d.input.row(cond_dim);
      MlpGradients gg = backward(gen, g_fw.tape, sample_grad);
      Eigen::MatrixXd g_emb_grad;
      if (g_emb) g_emb_grad = text_grad(start, b_count, *g_emb, gg.input, 0);
      g_adam.config.lr = lr;
      ParamSet g_set = collect(gen, gg, g_emb, &g_emb_grad);
      adam_step(g_set.params, g_set.grads, g_adam);
      average.add(step, g_set.params);

      g_epoch += g_loss * static_cast<double>(b_count);
      d_epoch += d_loss * static_cast<double>(b_count);
      ++step;
    }
    if (log) {
      log->epoch_loss.push_back(g_epoch / static_cast<double>(n));
      log->discriminator_loss.push_back(d_epoch / static_cast<double>(n));
    }
  }
  average.apply(generator_parameters(gen, g_emb));
  return Generator(std::move(gen), r, setup.st, data.schema, std::move(setup.embedding), cfg);
}

}  // namespace

Generator train(const Dataset& data, const TrainConfig& cfg, TrainLog* log) {
  if (data.empty()) throw Error(ErrorKind::data, "train: dataset is empty");
  data.validate();
  cfg.validate();
  if (cfg.strategy == TrainStrategy::energy_score) return train_energy(data, cfg, log);
  return train_adversarial(data, cfg, log);
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(Mlp net, int noise_dim, Standardizer standardizer, FeatureSchema schema,
                     std::optional<EmbeddingTable> embedding, TrainConfig config)
    : net_(std::move(net)),
      noise_dim_(noise_dim),
      standardizer_(std::move(standardizer)),
      schema_(std::move(schema)),
      embedding_(std::move(embedding)),
      config_(std::move(config)) {
  if (noise_dim_ < 1) throw Error(ErrorKind::config, "Generator: noise_dim must be >= 1");
  if (net_.input_dim() != condition_dim() + noise_dim_ || net_.output_dim() != 1) {
    throw Error(ErrorKind::dimension, "Generator: network shape does not match condition layout");
  }
  if (!(standardizer_.price_scale > 0 && standardizer_.demand_scale > 0)) {
    throw Error(ErrorKind::config, "Generator: standardizer scales must be positive");
  }
  for (double s : standardizer_.feature_scale) {
    if (!(s > 0)) throw Error(ErrorKind::config, "Generator: standardizer scales must be positive");
  }
}

int Generator::condition_dim() const {
  return static_cast<int>(standardizer_.feature_mean.size()) + 1 +
         (embedding_ ? embedding_->dim() : 0);
}

Eigen::VectorXd Generator::encode_condition(const Features& x, double price) const {
  Eigen::VectorXd cond(condition_dim());
  encode_into(standardizer_, embedding_ ? &*embedding_ : nullptr, x, price, cond.data());
  return cond;
}

Eigen::MatrixXd Generator::input_batch(const Eigen::VectorXd& condition,
                                       const Eigen::MatrixXd& eta) const {
  const int cd = condition_dim();
  Eigen::MatrixXd in(cd + noise_dim_, eta.cols());
  in.topRows(cd) = condition.replicate(1, eta.cols());
  in.bottomRows(noise_dim_) = eta;
  return in;
}

void Generator::finish(const Eigen::MatrixXd& raw, std::span<double> out) const {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = standardizer_.demand_mean + standardizer_.demand_scale * raw(0, static_cast<Eigen::Index>(i));
    out[i] = config_.demand_max > 0.0 ? std::clamp(d, 0.0, config_.demand_max) : std::max(d, 0.0);
  }
}

double Generator::evaluate(const Features& x, double price, std::span<const double> eta) const {
  if (eta.size() != static_cast<std::size_t>(noise_dim_)) {
    throw Error(ErrorKind::dimension, "Generator::evaluate: noise vector has wrong length");
  }
  Eigen::MatrixXd e(noise_dim_, 1);
  for (int i = 0; i < noise_dim_; ++i) e(i, 0) = eta[i];
  double out = 0.0;
  finish(net_.predict(input_batch(encode_condition(x, price), e)), {&out, 1});
  return out;
}

void Generator::sample_into(const Features& x, double price, std::span<double> out,
                            RngStream& rng) const {
  if (out.empty()) return;
  Eigen::MatrixXd eta(noise_dim_, static_cast<Eigen::Index>(out.size()));
  for (Eigen::Index j = 0; j < eta.cols(); ++j)
    for (int i = 0; i < noise_dim_; ++i) eta(i, j) = rng.normal();
  finish(net_.predict(input_batch(encode_condition(x, price), eta)), out);
}

std::vector<std::vector<double>> Generator::sample_prices(const Features& x,
                                                          std::span<const double> prices,
                                                          std::size_t m,
                                                          const RngStream& rng) const {
  RngStream replay = rng;
  Eigen::MatrixXd eta(noise_dim_, static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < eta.cols(); ++j)
    for (int i = 0; i < noise_dim_; ++i) eta(i, j) = replay.normal();
  std::vector<std::vector<double>> out(prices.size(), std::vector<double>(m));
  Eigen::MatrixXd in = input_batch(encode_condition(x, prices.empty() ? 0.0 : prices[0]), eta);
  const auto price_row = static_cast<Eigen::Index>(standardizer_.feature_mean.size());
  for (std::size_t j = 0; j < prices.size(); ++j) {
    in.row(price_row).setConstant((prices[j] - standardizer_.price_mean) / standardizer_.price_scale);
    finish(net_.predict(in), out[j]);
  }
  return out;
}

std::vector<double> Generator::generate(const Features& x, double price, std::size_t m,
                                        RngStream& rng) const {
  return draw_sorted(*this, x, price, m, rng);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

TrainConfig loaded_config(const json& j) {
  TrainConfig c;
  apply_json(j, c);
  return c;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> row_major;
  row_major.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) row_major.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", row_major}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw Error(ErrorKind::format, "model file: matrix payload does not match its shape");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)];
  return m;
}

}  // namespace

std::string Generator::save() const {
  json layers = json::array();
  for (const auto& layer : net_.layers()) {
    layers.push_back({{"activation", layer.activation == Activation::relu ? "relu" : "identity"},
                      {"weight", matrix_to_json(layer.weight)},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  json doc{{"format", "gennv-generator"},
           {"version", kFormatVersion},
           {"code_version", GENNV_VERSION},
           {"config", to_json(config_)},
           {"noise_dim", noise_dim_},
           {"schema", {{"numeric", schema_.numeric_names}, {"text", schema_.text}}},
           {"standardizer",
            {{"feature_mean", standardizer_.feature_mean},
             {"feature_scale", standardizer_.feature_scale},
             {"price_mean", standardizer_.price_mean},
             {"price_scale", standardizer_.price_scale},
             {"demand_mean", standardizer_.demand_mean},
             {"demand_scale", standardizer_.demand_scale}}},
           {"layers", layers}};
  if (embedding_) {
    doc["embedding"] = {{"index", embedding_->index()}, {"vectors", matrix_to_json(embedding_->vectors())}};
  }
  return doc.dump();
}

Generator Generator::load(std::string_view payload) {
  json doc;
  try {
    doc = json::parse(payload);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != "gennv-generator") {
      throw Error(ErrorKind::format, "model file: not a gennv generator");
    }
    const int version = doc.at("version").get<int>();
    if (version != kFormatVersion) {
      throw Error(ErrorKind::version, "model file format version " + std::to_string(version) +
                                          " is incompatible with this build (expects " +
                                          std::to_string(kFormatVersion) + ")");
    }
    std::vector<DenseLayer> layers;
    for (const auto& jl : doc.at("layers")) {
      DenseLayer layer;
      const auto act = jl.at("activation").get<std::string>();
      if (act != "relu" && act != "identity") throw Error(ErrorKind::format, "model file: unknown activation");
      layer.activation = act == "relu" ? Activation::relu : Activation::identity;
      layer.weight = matrix_from_json(jl.at("weight"));
      const auto bias = jl.at("bias").get<std::vector<double>>();
      layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
      layers.push_back(std::move(layer));
    }
    Standardizer st;
    const auto& js = doc.at("standardizer");
    st.feature_mean = js.at("feature_mean").get<std::vector<double>>();
    st.feature_scale = js.at("feature_scale").get<std::vector<double>>();
    st.price_mean = js.at("price_mean").get<double>();
    st.price_scale = js.at("price_scale").get<double>();
    st.demand_mean = js.at("demand_mean").get<double>();
    st.demand_scale = js.at("demand_scale").get<double>();
    if (st.feature_mean.size() != st.feature_scale.size()) {
      throw Error(ErrorKind::format, "model file: standardizer vectors differ in length");
    }
    FeatureSchema schema;
    schema.numeric_names = doc.at("schema").at("numeric").get<std::vector<std::string>>();
    schema.text = doc.at("schema").at("text").get<bool>();
    std::optional<EmbeddingTable> embedding;
    if (doc.contains("embedding")) {
      embedding.emplace(doc.at("embedding").at("index").get<std::map<std::string, int>>(),
                        matrix_from_json(doc.at("embedding").at("vectors")));
    }
    return Generator(Mlp(std::move(layers)), doc.at("noise_dim").get<int>(), std::move(st),
                     std::move(schema), std::move(embedding), loaded_config(doc.at("config")));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("model file is malformed: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::version) throw;
    throw Error(ErrorKind::format, std::string("model file is malformed: ") + e.what());
  }
}

}  // namespace gennv
