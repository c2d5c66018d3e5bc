// SPDX-License-Identifier: Apache-2.0
#include "gennv/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gennv/error.hpp"

namespace gennv {

namespace {

constexpr double kPriceMatch = 1e-9;

std::string price_text(double p) {
  std::ostringstream os;
  os << p;
  return os.str();
}

std::vector<double> sorted_copy(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// SAA

double saa_decide(const Dataset& data, double price, const CostParams& costs, PriceMode mode,
                  double window) {
  if (mode == PriceMode::continuous && !(window > 0.0)) {
    throw Error(ErrorKind::config, "SAA price window must be positive");
  }
  const double tol = mode == PriceMode::discrete ? kPriceMatch : window + kPriceMatch;
  std::vector<double> matched;
  for (const auto& r : data.records) {
    if (std::abs(r.price - price) <= tol) matched.push_back(r.demand);
  }
  if (matched.empty()) {
    throw Error(ErrorKind::data, "SAA: no training records at price " + price_text(price));
  }
  std::sort(matched.begin(), matched.end());
  return inventory_decision(matched, price, costs);
}

JointDecision saa_joint(const Dataset& data, std::span<const double> grid, const CostParams& costs) {
  if (data.empty()) throw Error(ErrorKind::data, "saa_joint: dataset is empty");
  if (grid.empty()) throw Error(ErrorKind::data, "saa_joint: price grid is empty");
  const auto demands = sorted_copy(data.demands());
  std::vector<PricePoint> profile;
  for (double p : grid) {
    const double q = inventory_decision(demands, p, costs);
    profile.push_back({p, q, estimate_profit(demands, p, q, costs)});
  }
  return select_best(std::move(profile));
}

// ---------------------------------------------------------------------------
// ERM

double PinballModel::predict(const Features& x, double price) const {
  const std::size_t k = feature_mean_.size();
  if (x.numeric.size() != k) throw Error(ErrorKind::dimension, "PinballModel: feature count mismatch");
  Eigen::VectorXd z(static_cast<Eigen::Index>(k + 1));
  for (std::size_t j = 0; j < k; ++j) z(static_cast<Eigen::Index>(j)) = (x.numeric[j] - feature_mean_[j]) / feature_scale_[j];
  z(static_cast<Eigen::Index>(k)) = (price - price_mean_) / price_scale_;
  const double f = form_ == ErmForm::linear ? coef_.dot(z) + intercept_ : net_.predict(z)(0);
  return demand_mean_ + demand_scale_ * f;
}

double PinballModel::loss(const Dataset& data) const {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : data.records) total += pinball_loss(tau_, r.demand, predict(r.x, r.price));
  return total / static_cast<double>(data.size());
}

PinballModel erm_fit(const Dataset& data, double tau, ErmForm form, const ErmConfig& cfg) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::domain, "ERM quantile level must lie in (0,1)");
  if (data.empty()) throw Error(ErrorKind::data, "ERM: dataset is empty");
  data.validate();
  const std::size_t n = data.size();
  const std::size_t k = data.schema.numeric_dim();
  const auto in_dim = static_cast<Eigen::Index>(k + 1);

  PinballModel model;
  model.form_ = form;
  model.tau_ = tau;
  // Standardize inputs and targets.
  Eigen::MatrixXd z(in_dim, static_cast<Eigen::Index>(n));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) z(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = data.records[i].x.numeric[j];
    z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = data.records[i].price;
    y(static_cast<Eigen::Index>(i)) = data.records[i].demand;
  }
  auto scale_of = [](double sd) { return sd > 1e-12 ? sd : 1.0; };
  model.feature_mean_.resize(k);
  model.feature_scale_.resize(k);
  for (Eigen::Index j = 0; j < in_dim; ++j) {
    const double mu = z.row(j).mean();
    const double sd = scale_of(std::sqrt((z.row(j).array() - mu).square().mean()));
    z.row(j) = (z.row(j).array() - mu) / sd;
    if (j < static_cast<Eigen::Index>(k)) {
      model.feature_mean_[static_cast<std::size_t>(j)] = mu;
      model.feature_scale_[static_cast<std::size_t>(j)] = sd;
    } else {
      model.price_mean_ = mu;
      model.price_scale_ = sd;
    }
  }
  model.demand_mean_ = y.mean();
  model.demand_scale_ = scale_of(std::sqrt((y.array() - model.demand_mean_).square().mean()));
  y = (y.array() - model.demand_mean_) / model.demand_scale_;

  auto subgradient = [tau](double target, double pred) {
    // d/df of the pinball loss
    return target > pred ? -tau : (target < pred ? 1.0 - tau : 0.0);
  };

  if (form == ErmForm::linear) {
    model.coef_ = Eigen::VectorXd::Zero(in_dim);
    model.intercept_ = 0.0;
    AdamState adam(AdamConfig{cfg.linear_lr, 0.9, 0.999, 1e-8});
    Eigen::VectorXd g_coef(in_dim);
    double g_bias = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int step = 0; step < cfg.linear_steps; ++step) {
      const Eigen::VectorXd pred = (z.transpose() * model.coef_).array() + model.intercept_;
      Eigen::VectorXd g(static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = subgradient(y(i), pred(i)) * inv_n;
      g_coef = z * g;
      g_bias = g.sum();
      // Cosine decay to 1e-4 of the initial rate lets the subgradient iterates settle.
      const double t = static_cast<double>(step) / std::max(1, cfg.linear_steps - 1);
      adam.config.lr = cfg.linear_lr * (1e-4 + (1.0 - 1e-4) * 0.5 * (1.0 + std::cos(t * 3.141592653589793)));
      std::vector<std::span<double>> params{{model.coef_.data(), static_cast<std::size_t>(in_dim)},
                                            {&model.intercept_, 1}};
      std::vector<std::span<const double>> grads{{g_coef.data(), static_cast<std::size_t>(in_dim)},
                                                 {&g_bias, 1}};
      adam_step(params, grads, adam);
    }
    return model;
  }

  RngStream root(cfg.seed);
  RngStream init_rng = root.derive("erm-init");
  RngStream order_rng = root.derive("erm-order");
  std::vector<int> widths{static_cast<int>(in_dim)};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  model.net_ = Mlp::glorot(widths, Activation::relu, Activation::identity, init_rng);
  AdamState adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  const long total = static_cast<long>((n + batch - 1) / batch) * cfg.epochs;
  long step = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      Eigen::MatrixXd in(in_dim, static_cast<Eigen::Index>(b));
      for (std::size_t j = 0; j < b; ++j) in.col(static_cast<Eigen::Index>(j)) = z.col(static_cast<Eigen::Index>(order[start + j]));
      ForwardResult fw = forward(model.net_, in);
      Eigen::MatrixXd g(1, static_cast<Eigen::Index>(b));
      double loss = 0.0;
      for (std::size_t j = 0; j < b; ++j) {
        const double target = y(static_cast<Eigen::Index>(order[start + j]));
        const double pred = fw.output(0, static_cast<Eigen::Index>(j));
        loss += pinball_loss(tau, target, pred);
        g(0, static_cast<Eigen::Index>(j)) = subgradient(target, pred) / static_cast<double>(b);
      }
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::numeric, "ERM-NN loss became non-finite at epoch " + std::to_string(epoch));
      }
      MlpGradients grads = backward(model.net_, fw.tape, g);
      const double t = total > 1 ? static_cast<double>(step) / static_cast<double>(total - 1) : 1.0;
      adam.config.lr = cfg.lr * (1.0 - (1.0 - cfg.lr_final_fraction) * t);
      auto params = model.net_.parameters();
      auto blocks = grads.blocks();
      adam_step(params, blocks, adam);
      ++step;
    }
  }
  return model;
}

std::vector<double> default_quantile_bank() {
  return {0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90};
}

ErmBank::ErmBank(std::vector<PinballModel> models) : models_(std::move(models)) {}

double ErmBank::decide(const Features& x, double price, const CostParams& costs) const {
  if (models_.empty()) throw Error(ErrorKind::data, "ERM bank is empty");
  const double level = rho(price, costs);
  const PinballModel* best = &models_.front();
  for (const auto& m : models_) {
    if (std::abs(m.tau() - level) < std::abs(best->tau() - level)) best = &m;
  }
  return std::max(0.0, best->predict(x, price));
}

ErmBank erm_fit_bank(const Dataset& data, std::span<const double> taus, ErmForm form,
                     const ErmConfig& cfg) {
  std::vector<PinballModel> models;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    ErmConfig c = cfg;
    c.seed = RngStream(cfg.seed).derive(static_cast<std::uint64_t>(i)).next_u64();
    models.push_back(erm_fit(data, taus[i], form, c));
  }
  return ErmBank(std::move(models));
}

// ---------------------------------------------------------------------------
// Kernel methods

KernelWeights KernelWeights::silverman(const Dataset& data) {
  if (data.size() < 2) throw Error(ErrorKind::data, "bandwidth selection needs >= 2 records");
  const double factor = 1.06 * std::pow(static_cast<double>(data.size()), -0.2);
  auto bandwidth = [&](auto value_of) {
    std::vector<double> v;
    v.reserve(data.size());
    for (const auto& r : data.records) v.push_back(value_of(r));
    const double sd = stddev(v);
    return sd > 0.0 ? factor * sd : std::numeric_limits<double>::infinity();
  };
  KernelWeights kw;
  for (std::size_t j = 0; j < data.schema.numeric_dim(); ++j) {
    kw.feature_bandwidth.push_back(bandwidth([j](const DemandRecord& r) { return r.x.numeric[j]; }));
  }
  kw.price_bandwidth = bandwidth([](const DemandRecord& r) { return r.price; });
  return kw;
}

void KernelWeights::validate(std::size_t numeric_dim) const {
  if (feature_bandwidth.size() != numeric_dim) {
    throw Error(ErrorKind::dimension, "kernel bandwidth count differs from feature count");
  }
  for (double h : feature_bandwidth) {
    if (!(h > 0.0)) throw Error(ErrorKind::config, "kernel bandwidths must be positive");
  }
  if (!(price_bandwidth > 0.0)) throw Error(ErrorKind::config, "kernel bandwidths must be positive");
}

std::vector<double> kernel_weights(const Dataset& data, const KernelWeights& kw,
                                   const Features& x, double price) {
  kw.validate(data.schema.numeric_dim());
  if (x.numeric.size() != data.schema.numeric_dim()) {
    throw Error(ErrorKind::dimension, "kernel weights: feature count mismatch");
  }
  const std::size_t k = kw.feature_bandwidth.size();
  std::vector<double> inv_h(k);
  for (std::size_t j = 0; j < k; ++j) inv_h[j] = 1.0 / kw.feature_bandwidth[j];
  const double inv_hp = 1.0 / kw.price_bandwidth;
  std::vector<double> log_w(data.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double u = (x.numeric[j] - r.x.numeric[j]) * inv_h[j];
      acc += u * u;
    }
    const double up = (price - r.price) * inv_hp;
    acc += up * up;
    log_w[i] = -0.5 * acc;
    max_log = std::max(max_log, log_w[i]);
  }
  // exp(-745) is the smallest positive double.
  if (data.empty() || !(max_log > -745.0)) {
    throw Error(ErrorKind::data, "all kernel weights are numerically zero at price " + price_text(price));
  }
  for (double& w : log_w) w = std::exp(w - max_log);
  return log_w;
}

double weighted_quantile(std::span<const double> demands, std::span<const double> weights,
                         double level) {
  if (demands.empty() || demands.size() != weights.size()) {
    throw Error(ErrorKind::data, "weighted_quantile: demands and weights must be nonempty and aligned");
  }
  std::vector<std::size_t> idx(demands.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return demands[a] < demands[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorKind::data, "weighted_quantile: total weight is zero");
  const double target = level * total * (1.0 - 1e-12);
  double cum = 0.0;
  for (std::size_t i : idx) {
    cum += weights[i];
    if (cum >= target && weights[i] > 0.0) return demands[i];
  }
  return demands[idx.back()];
}

double ko_decide(const Dataset& data, const Features& x, double price, const CostParams& costs,
                 const KernelWeights& kw) {
  if (data.empty()) throw Error(ErrorKind::data, "KO: dataset is empty");
  const auto w = kernel_weights(data, kw, x, price);
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return data.records[a].demand < data.records[b].demand; });
  // Objective at q = d_(k): records at or below q sell d_i and salvage the
  // rest; records above q sell q.
  double total_w = 0.0, above_wp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total_w += w[i];
    above_wp += w[i] * data.records[i].price;
  }
  double below_wpd = 0.0, below_w = 0.0, below_wd = 0.0;
  double best_q = 0.0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto& r = data.records[idx[pos]];
    const double wi = w[idx[pos]];
    below_wpd += wi * r.price * r.demand;
    below_w += wi;
    below_wd += wi * r.demand;
    above_wp -= wi * r.price;
    const double q = r.demand;
    const double val = below_wpd + costs.s * (below_w * q - below_wd) + above_wp * q - costs.c * total_w * q;
    if (pos == 0 || val > best_val + 1e-12 * std::abs(best_val)) {
      best_val = val;
      best_q = q;
    }
  }
  return best_q;
}

JointDecision prescriptive_joint(const Dataset& data, const Features& x,
                                 std::span<const double> grid, const CostParams& costs,
                                 const KernelWeights& kw) {
  if (grid.empty()) throw Error(ErrorKind::data, "prescriptive_joint: price grid is empty");
  if (data.empty()) throw Error(ErrorKind::data, "prescriptive_joint: dataset is empty");
  const auto demands = data.demands();
  std::vector<PricePoint> profile;
  for (double p : grid) {
    std::vector<double> w;
    try {
      w = kernel_weights(data, kw, x, p);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::data) continue;
      throw;
    }
    const double q = weighted_quantile(demands, w, rho(p, costs));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < demands.size(); ++i) {
      num += w[i] * profit(demands[i], p, q, costs);
      den += w[i];
    }
    profile.push_back({p, q, num / den});
  }
  if (profile.empty()) {
    throw Error(ErrorKind::data, "prescriptive_joint: kernel weights vanish at every grid price");
  }
  return select_best(std::move(profile));
}

// ---------------------------------------------------------------------------
// RBE

double RbeModel::fitted(const Features& x, double price) const {
  if (x.numeric.size() != static_cast<std::size_t>(beta.size())) {
    throw Error(ErrorKind::dimension, "RBE: feature count mismatch");
  }
  double v = intercept + alpha * price;
  for (Eigen::Index j = 0; j < beta.size(); ++j) v += beta(j) * x.numeric[static_cast<std::size_t>(j)];
  return v;
}

double RbeModel::decide(const Features& x, double price, const CostParams& costs) const {
  if (residuals.empty()) throw Error(ErrorKind::data, "RBE model has no residuals");
  const double eps = residuals[order_statistic_index(residuals.size(), rho(price, costs)) - 1];
  return std::max(0.0, fitted(x, price) + eps);
}

std::vector<double> RbeModel::demand_samples(const Features& x, double price) const {
  const double base = fitted(x, price);
  std::vector<double> out;
  out.reserve(residuals.size());
  for (double e : residuals) out.push_back(std::max(0.0, base + e));
  return out;
}

RbeModel rbe_fit(const Dataset& data) {
  data.validate();
  const std::size_t n = data.size();
  const std::size_t k = data.schema.numeric_dim();
  if (n <= k + 2) {
    throw Error(ErrorKind::data, "RBE needs more than " + std::to_string(k + 2) + " records, got " +
                                     std::to_string(n));
  }
  const auto cols = static_cast<Eigen::Index>(k + 2);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), cols);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    design(row, 0) = data.records[i].price;
    for (std::size_t j = 0; j < k; ++j) design(row, static_cast<Eigen::Index>(j + 1)) = data.records[i].x.numeric[j];
    design(row, cols - 1) = 1.0;
    y(row) = data.records[i].demand;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) throw Error(ErrorKind::factorization, "RBE: design matrix is rank deficient");
  const Eigen::VectorXd coef = qr.solve(y);
  RbeModel model;
  model.alpha = coef(0);
  model.beta = coef.segment(1, static_cast<Eigen::Index>(k));
  model.intercept = coef(cols - 1);
  const Eigen::VectorXd resid = y - design * coef;
  model.residuals.assign(resid.data(), resid.data() + resid.size());
  std::sort(model.residuals.begin(), model.residuals.end());
  return model;
}

JointDecision rbe_joint(const RbeModel& model, const Features& x, std::span<const double> grid,
                        const CostParams& costs) {
  if (grid.empty()) throw Error(ErrorKind::data, "rbe_joint: price grid is empty");
  std::vector<PricePoint> profile;
  for (double p : grid) {
    const auto samples = model.demand_samples(x, p);
    const double q = inventory_decision(samples, p, costs);
    profile.push_back({p, q, estimate_profit(samples, p, q, costs)});
  }
  return select_best(std::move(profile));
}

}  // namespace gennv
