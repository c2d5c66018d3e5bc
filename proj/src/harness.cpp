// SPDX-License-Identifier: Apache-2.0
#include "gennv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <optional>
#include <set>
#include <thread>

#include "gennv/config.hpp"
#include "gennv/error.hpp"

namespace gennv {

std::string_view to_string(Experiment e) {
  return e == Experiment::inventory ? "inventory" : "joint";
}

namespace {

const std::set<std::string> kInventoryMethods{"saa", "rbe", "erm_lr", "erm_nn", "ko", "cdgm", "cdgm_text", "oracle"};
const std::set<std::string> kJointMethods{"saa_joint", "rbe", "prescriptive", "cdgm", "cdgm_text", "oracle"};

bool has(const std::vector<std::string>& methods, std::string_view name) {
  return std::find(methods.begin(), methods.end(), name) != methods.end();
}

// Runs body(r) for r in [0, reps) on up to `threads` workers. Results land
// in replication order; the lowest-index failure is rethrown.
template <typename T>
std::vector<T> for_each_replication(int reps, int threads, const std::function<T(int)>& body) {
  std::vector<std::optional<T>> results(static_cast<std::size_t>(reps));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < reps; r = next++) {
      try {
        results[static_cast<std::size_t>(r)].emplace(body(r));
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  int n_threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = std::min(n_threads, reps);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

RngStream replication_stream(const ExperimentConfig& cfg, int r) {
  return RngStream(cfg.seed).derive("replication").derive(static_cast<std::uint64_t>(r));
}

// Everything fitted on one training corpus.
struct Fitted {
  std::optional<Generator> cdgm, cdgm_text;
  std::optional<ErmBank> erm_lr, erm_nn;
  std::optional<RbeModel> rbe;
  std::optional<KernelWeights> kw;
};

Generator train_cdgm(const Dataset& data, const ExperimentConfig& cfg, const RngStream& rep, bool text) {
  TrainConfig tc = cfg.cdgm;
  tc.use_text = text;
  tc.seed = rep.derive(text ? "cdgm_text" : "cdgm").derive(cfg.cdgm.seed).next_u64();
  return text ? train(data, tc) : train(data.without_text(), tc);
}

Fitted fit_methods(const std::vector<std::string>& methods, const Dataset& data,
                   const ExperimentConfig& cfg, const RngStream& rep) {
  Fitted f;
  if (has(methods, "cdgm")) f.cdgm = train_cdgm(data, cfg, rep, false);
  if (has(methods, "cdgm_text")) f.cdgm_text = train_cdgm(data, cfg, rep, true);
  const auto taus = default_quantile_bank();
  for (const char* name : {"erm_lr", "erm_nn"}) {
    if (!has(methods, name)) continue;
    ErmConfig ec = cfg.erm;
    ec.seed = rep.derive(name).derive(cfg.erm.seed).next_u64();
    const bool linear = std::string_view(name) == "erm_lr";
    auto bank = erm_fit_bank(data, taus, linear ? ErmForm::linear : ErmForm::neural, ec);
    (linear ? f.erm_lr : f.erm_nn) = std::move(bank);
  }
  if (has(methods, "rbe")) f.rbe = rbe_fit(data);
  if (has(methods, "ko") || has(methods, "prescriptive")) f.kw = KernelWeights::silverman(data);
  return f;
}

struct TestCase {
  Features x;
  double price = 0.0;
  std::size_t price_index = 0;  // into decision_prices; 0 in continuous mode
  double demand = 0.0;
};

// Discrete: n_test points per decision price. Continuous: n_test pairs
// with prices drawn over the price range (those at or below c redrawn).
std::vector<TestCase> inventory_test_set(const OracleModel& model, const ExperimentConfig& cfg,
                                         const std::vector<double>& prices, const RngStream& stream) {
  std::vector<TestCase> out;
  if (cfg.mode == PriceMode::discrete) {
    out.reserve(prices.size() * cfg.n_test);
    for (std::size_t j = 0; j < prices.size(); ++j) {
      RngStream s = stream.derive(static_cast<std::uint64_t>(j));
      for (std::size_t i = 0; i < cfg.n_test; ++i) {
        TestCase t;
        t.x = model.sample_features(s);
        t.price = prices[j];
        t.price_index = j;
        t.demand = model.sample_demand(t.x, t.price, s);
        out.push_back(std::move(t));
      }
    }
    return out;
  }
  RngStream s = stream;
  out.reserve(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    TestCase t;
    t.x = model.sample_features(s);
    do {
      t.price = sample_price(model, PriceMode::continuous, s);
    } while (t.price <= cfg.costs.c);
    t.demand = model.sample_demand(t.x, t.price, s);
    out.push_back(std::move(t));
  }
  return out;
}

using InventoryRule = std::function<double(const TestCase&, std::size_t)>;

InventoryRule inventory_rule(const std::string& method, const Fitted& f, const Dataset& data,
                             const OracleModel& model, const ExperimentConfig& cfg,
                             const std::vector<double>& prices, const RngStream& rep) {
  const CostParams costs = cfg.costs;
  if (method == "oracle") {
    return [&model, costs](const TestCase& t, std::size_t) {
      return oracle_quantile(model, t.x, t.price, rho(t.price, costs));
    };
  }
  if (method == "saa") {
    if (cfg.mode == PriceMode::discrete) {
      std::vector<double> q;
      for (double p : prices) q.push_back(saa_decide(data, p, costs, PriceMode::discrete));
      return [q](const TestCase& t, std::size_t) { return q[t.price_index]; };
    }
    const double window = cfg.saa_window;
    return [&data, costs, window](const TestCase& t, std::size_t) {
      return saa_decide(data, t.price, costs, PriceMode::continuous, window);
    };
  }
  if (method == "cdgm" || method == "cdgm_text") {
    const Generator& g = method == "cdgm" ? *f.cdgm : *f.cdgm_text;
    const RngStream decide = rep.derive("decide").derive(method);
    const std::size_t m = cfg.m;
    return [&g, decide, m, costs](const TestCase& t, std::size_t i) {
      RngStream s = decide.derive(static_cast<std::uint64_t>(i));
      return inventory_decision(g.generate(t.x, t.price, m, s), t.price, costs);
    };
  }
  if (method == "erm_lr" || method == "erm_nn") {
    const ErmBank& bank = method == "erm_lr" ? *f.erm_lr : *f.erm_nn;
    return [&bank, costs](const TestCase& t, std::size_t) { return bank.decide(t.x, t.price, costs); };
  }
  if (method == "ko") {
    const KernelWeights& kw = *f.kw;
    return [&data, &kw, costs](const TestCase& t, std::size_t) {
      return ko_decide(data, t.x, t.price, costs, kw);
    };
  }
  if (method == "rbe") {
    const RbeModel& rbe = *f.rbe;
    return [&rbe, costs](const TestCase& t, std::size_t) { return rbe.decide(t.x, t.price, costs); };
  }
  throw Error(ErrorKind::config, "unknown inventory method '" + method + "'");
}

// Mean excess risk per price index (size 1 in continuous mode), then the
// average over prices.
std::vector<double> excess_risk(const std::vector<TestCase>& tests, const InventoryRule& rule,
                                const OracleModel& model, const CostParams& costs, std::size_t n_prices) {
  std::vector<double> sum(n_prices, 0.0);
  std::vector<std::size_t> count(n_prices, 0);
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const auto& t = tests[i];
    const double q_star = oracle_quantile(model, t.x, t.price, rho(t.price, costs));
    const double q_hat = rule(t, i);
    sum[t.price_index] += profit(t.demand, t.price, q_star, costs) - profit(t.demand, t.price, q_hat, costs);
    ++count[t.price_index];
  }
  std::vector<double> out(n_prices + 1, 0.0);
  for (std::size_t j = 0; j < n_prices; ++j) {
    out[j] = count[j] ? sum[j] / static_cast<double>(count[j]) : 0.0;
    out[n_prices] += out[j] / static_cast<double>(n_prices);
  }
  return out;
}

ReportRow make_row(const ExperimentConfig& cfg, std::string method, std::string metric,
                   std::optional<double> price) {
  return ReportRow{std::string(to_string(cfg.dgp)), std::string(to_string(cfg.mode)), std::move(method),
                   std::move(metric), price, {}};
}

}  // namespace

void ExperimentConfig::validate(Experiment e) const {
  if (n == 0 || n_test == 0 || replications <= 0 || m == 0 || grid_j <= 0 || oracle_mc == 0) {
    throw Error(ErrorKind::config, "experiment sizes (n, n_test, replications, m, grid_j, oracle_mc) must be positive");
  }
  if (!(saa_window > 0.0)) throw Error(ErrorKind::config, "saa_window must be positive");
  if (methods.empty()) throw Error(ErrorKind::config, "method list is empty");
  const auto& known = e == Experiment::inventory ? kInventoryMethods : kJointMethods;
  std::set<std::string> seen;
  for (const auto& name : methods) {
    if (!known.count(name)) {
      throw Error(ErrorKind::config, "unknown " + std::string(to_string(e)) + " method '" + name + "'");
    }
    if (!seen.insert(name).second) throw Error(ErrorKind::config, "method '" + name + "' listed twice");
  }
  if (has(methods, "cdgm_text") && dgp != DgpKind::e) {
    throw Error(ErrorKind::config, "cdgm_text needs a DGP with text features (kind e)");
  }
  costs.validate();
  cdgm.validate();
}

std::vector<std::string> default_inventory_methods(DgpKind kind) {
  std::vector<std::string> m{"saa", "rbe", "erm_lr", "erm_nn", "ko", "cdgm"};
  if (kind == DgpKind::e) m.push_back("cdgm_text");
  m.push_back("oracle");
  return m;
}

std::vector<std::string> default_joint_methods(DgpKind kind) {
  std::vector<std::string> m{"saa_joint", "rbe", "prescriptive", "cdgm"};
  if (kind == DgpKind::e) m.push_back("cdgm_text");
  m.push_back("oracle");
  return m;
}

std::vector<double> decision_prices(const OracleModel& model, const ExperimentConfig& cfg) {
  std::vector<double> grid = cfg.mode == PriceMode::discrete
                                 ? build_price_grid(model.discrete_prices())
                                 : build_price_grid(model.price_min(), model.price_max(), cfg.grid_j);
  std::erase_if(grid, [&](double p) { return p <= cfg.costs.c; });
  if (grid.empty()) {
    throw Error(ErrorKind::config, "no decision price exceeds the retail cost c");
  }
  return grid;
}

ExperimentReport run_inventory_experiment(const ExperimentConfig& cfg, int threads) {
  cfg.validate(Experiment::inventory);
  const bool discrete = cfg.mode == PriceMode::discrete;
  using Gaps = std::vector<std::vector<double>>;  // [method][price index..., avg]
  std::vector<double> prices;

  const auto per_rep = for_each_replication<Gaps>(cfg.replications, threads, [&](int r) {
    const RngStream rep = replication_stream(cfg, r);
    const OracleModel model = OracleModel::make(cfg.dgp, rep.derive("oracle"));
    const Dataset data = make_dataset(model, cfg.n, cfg.mode, rep.derive("train"));
    const Fitted fitted = fit_methods(cfg.methods, data, cfg, rep);
    const auto grid = decision_prices(model, cfg);
    const auto tests = inventory_test_set(model, cfg, grid, rep.derive("test"));
    const std::size_t n_prices = discrete ? grid.size() : 1;
    Gaps gaps;
    for (const auto& method : cfg.methods) {
      const auto rule = inventory_rule(method, fitted, data, model, cfg, grid, rep);
      gaps.push_back(excess_risk(tests, rule, model, cfg.costs, n_prices));
    }
    return gaps;
  });
  // Decision prices do not depend on beta.
  prices = decision_prices(OracleModel::make(cfg.dgp, 0), cfg);

  ExperimentReport report;
  report.experiment = "inventory";
  report.config = to_json(cfg);
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    const std::size_t n_cols = per_rep.front()[k].size();
    for (std::size_t j = 0; j < n_cols; ++j) {
      const bool avg = j + 1 == n_cols;
      if (!discrete && !avg) continue;
      ReportRow row = make_row(cfg, cfg.methods[k], "excess_risk",
                               avg ? std::nullopt : std::optional<double>(prices[j]));
      for (const auto& g : per_rep) row.values.push_back(g[k][j]);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

ExperimentReport run_joint_experiment(const ExperimentConfig& cfg, int threads) {
  cfg.validate(Experiment::joint);
  struct Outcome {
    std::vector<double> profit;  // per method
    std::vector<double> price;   // mean chosen price per method
  };

  const auto per_rep = for_each_replication<Outcome>(cfg.replications, threads, [&](int r) {
    const RngStream rep = replication_stream(cfg, r);
    const OracleModel model = OracleModel::make(cfg.dgp, rep.derive("oracle"));
    const Dataset data = make_dataset(model, cfg.n, cfg.mode, rep.derive("train"));
    const Fitted f = fit_methods(cfg.methods, data, cfg, rep);
    const auto grid = decision_prices(model, cfg);
    const CostParams costs = cfg.costs;
    std::optional<JointDecision> saa;
    if (has(cfg.methods, "saa_joint")) saa = saa_joint(data, grid, costs);

    const RngStream test = rep.derive("test");
    const RngStream decide = rep.derive("decide");
    Outcome out{std::vector<double>(cfg.methods.size(), 0.0), std::vector<double>(cfg.methods.size(), 0.0)};
    for (std::size_t i = 0; i < cfg.n_test; ++i) {
      RngStream point = test.derive(static_cast<std::uint64_t>(i));
      const Features x = model.sample_features(point);
      // One noise substream per test point, shared by every method.
      const RngStream noise = point.derive("demand");
      const RngStream point_decide = decide.derive(static_cast<std::uint64_t>(i));
      for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
        const auto& method = cfg.methods[k];
        JointDecision d;
        if (method == "saa_joint") {
          d = *saa;
        } else if (method == "rbe") {
          d = rbe_joint(*f.rbe, x, grid, costs);
        } else if (method == "prescriptive") {
          d = prescriptive_joint(data, x, grid, costs, *f.kw);
        } else if (method == "cdgm" || method == "cdgm_text") {
          d = joint_decision(method == "cdgm" ? *f.cdgm : *f.cdgm_text, x, grid, cfg.m, costs,
                             point_decide.derive(method));
        } else {  // oracle
          std::vector<PricePoint> profile;
          const RngStream mc = point_decide.derive("oracle");
          for (double p : grid) {
            const double q = oracle_quantile(model, x, p, rho(p, costs));
            profile.push_back({p, q, oracle_expected_profit(model, x, p, q, costs, cfg.oracle_mc, mc).value});
          }
          d = select_best(std::move(profile));
        }
        RngStream draw = noise;
        const double demand = model.sample_demand(x, d.price, draw);
        out.profit[k] += profit(demand, d.price, d.quantity, costs) / static_cast<double>(cfg.n_test);
        out.price[k] += d.price / static_cast<double>(cfg.n_test);
      }
    }
    return out;
  });

  ExperimentReport report;
  report.experiment = "joint";
  report.config = to_json(cfg);
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    ReportRow profit_row = make_row(cfg, cfg.methods[k], "profit", std::nullopt);
    ReportRow price_row = make_row(cfg, cfg.methods[k], "chosen_price", std::nullopt);
    for (const auto& o : per_rep) {
      profit_row.values.push_back(o.profit[k]);
      price_row.values.push_back(o.price[k]);
    }
    report.rows.push_back(std::move(profit_row));
    report.rows.push_back(std::move(price_row));
  }
  return report;
}

ConvergenceResult convergence_probe(const ExperimentConfig& cfg, std::span<const std::size_t> sizes,
                                    int threads) {
  if (sizes.empty()) throw Error(ErrorKind::config, "convergence: size list is empty");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || (i > 0 && sizes[i] <= sizes[i - 1])) {
      throw Error(ErrorKind::config, "convergence: sizes must be positive and strictly ascending");
    }
  }
  ExperimentConfig probe = cfg;
  probe.methods = {"cdgm"};
  probe.n = sizes.back();
  probe.validate(Experiment::inventory);

  const auto per_rep = for_each_replication<std::vector<double>>(probe.replications, threads, [&](int r) {
    const RngStream rep = replication_stream(probe, r);
    const OracleModel model = OracleModel::make(probe.dgp, rep.derive("oracle"));
    const Dataset full = make_dataset(model, sizes.back(), probe.mode, rep.derive("train"));
    const auto grid = decision_prices(model, probe);
    const std::size_t n_prices = probe.mode == PriceMode::discrete ? grid.size() : 1;
    std::vector<double> gaps;
    for (std::size_t n : sizes) {
      const Dataset data = full.prefix(n);
      Fitted f;
      f.cdgm = train_cdgm(data, probe, rep.derive(static_cast<std::uint64_t>(n)), false);
      const auto tests = inventory_test_set(model, probe, grid, rep.derive("test"));
      const auto rule = inventory_rule("cdgm", f, data, model, probe, grid, rep);
      gaps.push_back(excess_risk(tests, rule, model, probe.costs, n_prices).back());
    }
    return gaps;
  });

  ConvergenceResult res;
  res.sizes.assign(sizes.begin(), sizes.end());
  res.gaps.assign(sizes.size(), {});
  for (const auto& g : per_rep) {
    for (std::size_t i = 0; i < sizes.size(); ++i) res.gaps[i].push_back(g[i]);
    if (sizes.size() > 1 && g.back() < g.front()) ++res.decreasing_replications;
  }
  res.decreasing_on_average = sizes.size() > 1 && mean(res.gaps.back()) < mean(res.gaps.front());

  res.report.experiment = "convergence";
  nlohmann::json echo = to_json(probe);
  echo["sizes"] = res.sizes;
  res.report.config = echo;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    ReportRow row = make_row(probe, "cdgm", "excess_risk_n" + std::to_string(sizes[i]), std::nullopt);
    row.values = res.gaps[i];
    res.report.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace gennv
