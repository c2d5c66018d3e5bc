// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion. Desk scale, 10 replications.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gennv/baselines.hpp"
#include "gennv/cdgm.hpp"
#include "gennv/decisions.hpp"
#include "gennv/dgp.hpp"
#include "gennv/harness.hpp"
#include "gennv/ingest.hpp"
#include "gennv/neural.hpp"
#include "gennv/report.hpp"

using namespace gennv;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const CostParams kCosts{1.0, 0.5};
constexpr std::uint64_t kFixtureTrainHash1885 = 0x40e9d7ac9227bf40ULL;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ExperimentConfig desk(DgpKind kind, PriceMode mode, std::vector<std::string> methods, std::size_t n_test) {
  ExperimentConfig cfg;
  cfg.dgp = kind;
  cfg.mode = mode;
  cfg.n = 2000;
  cfg.replications = 10;
  cfg.n_test = n_test;
  cfg.m = 1000;
  cfg.seed = 20240;
  cfg.methods = std::move(methods);
  return cfg;
}

double avg(const ExperimentReport& r, const std::string& method, const std::string& metric) {
  const ReportRow* row = r.find(method, metric);
  return row ? row->mean() : std::nan("");
}

Outcome oracle_sampler_sanity() {
  double worst = 0;
  std::string detail = "max |q - q*| by kind:";
  for (DgpKind k : {DgpKind::a, DgpKind::b, DgpKind::c, DgpKind::d}) {
    const OracleModel m = make_oracle(k, 101);
    RngStream rng(102);
    std::vector<double> draws(100000);
    double kind_worst = 0;
    for (int i = 0; i < 100; ++i) {
      const Features x = m.sample_features(rng);
      double p;
      do p = sample_price(m, PriceMode::continuous, rng);
      while (p <= kCosts.c);
      m.sample_into(x, p, draws, rng);
      std::sort(draws.begin(), draws.end());
      kind_worst =
          std::max(kind_worst, std::abs(inventory_decision(draws, p, kCosts) - m.quantile(x, p, rho(p, kCosts))));
    }
    worst = std::max(worst, kind_worst);
    detail += " " + std::string(to_string(k)) + "=" + fmt("%.4f", kind_worst);
  }
  return {worst <= 0.1, detail + " (each <= 0.1)"};
}

Outcome proposition1() {
  int bad = 0, total = 0;
  for (DgpKind k : {DgpKind::a, DgpKind::b, DgpKind::c, DgpKind::d, DgpKind::e}) {
    const OracleModel m = make_oracle(k, 201);
    RngStream rng(202);
    for (int i = 0; i < 50; ++i, ++total) {
      const Features x = m.sample_features(rng);
      double p;
      do p = sample_price(m, PriceMode::continuous, rng);
      while (p <= kCosts.c);
      const std::vector<double> s = draw_sorted(m, x, p, 200 + rng.below(800), rng);
      const double q = inventory_decision(s, p, kCosts);
      const double step = 0.01;
      double best_q = 0, best = -1e300;
      for (double g = std::max(0.0, s.front() - 1); g <= s.back() + 1; g += step) {
        const double v = estimate_profit(s, p, g, kCosts);
        if (v > best) {
          best = v;
          best_q = g;
        }
      }
      if (std::abs(best_q - q) > step + 1e-9) ++bad;
    }
  }
  return {bad == 0, std::to_string(total - bad) + "/" + std::to_string(total) + " instances within one grid step"};
}

Outcome proposition2() {
  const OracleModel m = make_oracle(DgpKind::a, 301);
  RngStream rng(302);
  int violations = 0;
  double min_gap = 1e300;
  for (int i = 0; i < 50; ++i) {
    const Features x = m.sample_features(rng);
    const double p = sample_price(m, PriceMode::continuous, rng);
    const double mu = m.mean_demand(x, p);
    const double q = rng.uniform(0, 150);
    RngStream draws_rng = rng.derive(static_cast<std::uint64_t>(i));
    const std::vector<double> s = draw_sorted(m, x, p, 200000, draws_rng);
    const double shift = p * std::abs(mean(s) - mu);
    if (profit(mu, p, q, kCosts) + 1e-9 < estimate_profit(s, p, q, kCosts) - shift) ++violations;
    min_gap = std::min(min_gap, profit(mu, p, mu, kCosts) - estimate_profit(s, p, mu, kCosts) - shift);
  }
  return {violations == 0 && min_gap >= 1.0,
          std::to_string(violations) + " violations of the bound; min gap at q=E[D] " + fmt("%.3f", min_gap) +
              " >= 1"};
}

Outcome inventory_discrete() {
  const auto a = run_inventory_experiment(desk(DgpKind::a, PriceMode::discrete, {"cdgm", "saa"}, 500));
  const auto c = run_inventory_experiment(desk(DgpKind::c, PriceMode::discrete, {"cdgm", "ko"}, 500));
  const auto d = run_inventory_experiment(desk(DgpKind::d, PriceMode::discrete, {"cdgm", "rbe", "ko"}, 500));
  const double a_cdgm = avg(a, "cdgm", "excess_risk"), a_saa = avg(a, "saa", "excess_risk");
  const double c_cdgm = avg(c, "cdgm", "excess_risk"), c_ko = avg(c, "ko", "excess_risk");
  const double d_cdgm = avg(d, "cdgm", "excess_risk"), d_rbe = avg(d, "rbe", "excess_risk"),
               d_ko = avg(d, "ko", "excess_risk");
  std::vector<std::string> failed;
  if (!(a_cdgm <= 0.5)) failed.push_back("a:cdgm");
  if (!(a_saa >= 4.0)) failed.push_back("a:saa");
  if (!(c_cdgm <= 2.0 && c_cdgm <= 0.5 * c_ko)) failed.push_back("c:cdgm");
  if (!(d_cdgm <= 5.0 && d_cdgm < d_rbe && d_cdgm < d_ko)) failed.push_back("d:cdgm");
  std::string detail = "a: cdgm " + fmt("%.3f", a_cdgm) + " (<=0.5), saa " + fmt("%.3f", a_saa) + " (>=4); c: cdgm " +
                       fmt("%.3f", c_cdgm) + " (<=2, <=ko/2), ko " + fmt("%.3f", c_ko) + "; d: cdgm " +
                       fmt("%.3f", d_cdgm) + " (<=5), rbe " + fmt("%.3f", d_rbe) + ", ko " + fmt("%.3f", d_ko);
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

Outcome joint_discrete() {
  const auto a = run_joint_experiment(desk(DgpKind::a, PriceMode::discrete, {"cdgm"}, 1000));
  const auto d =
      run_joint_experiment(desk(DgpKind::d, PriceMode::discrete, {"cdgm", "rbe", "prescriptive", "saa_joint"}, 1000));
  const double a_cdgm = avg(a, "cdgm", "profit");
  const double d_cdgm = avg(d, "cdgm", "profit"), d_rbe = avg(d, "rbe", "profit"),
               d_pre = avg(d, "prescriptive", "profit"), d_saa = avg(d, "saa_joint", "profit");
  const bool pass = a_cdgm >= 74 && d_cdgm >= 95 && d_cdgm - d_rbe >= 10 && d_cdgm - d_pre >= 10 && d_saa <= 0;
  return {pass, "a: cdgm " + fmt("%.2f", a_cdgm) + " (>=74); d: cdgm " + fmt("%.2f", d_cdgm) + " (>=95), rbe " +
                    fmt("%.2f", d_rbe) + ", prescriptive " + fmt("%.2f", d_pre) + " (cdgm ahead by >=10), saa_joint " +
                    fmt("%.2f", d_saa) + " (<=0)"};
}

Outcome continuous() {
  std::ostringstream detail;
  bool pass = true;
  const std::vector<std::string> inv_methods{"saa", "rbe", "erm_lr", "erm_nn", "ko", "cdgm"};
  const std::vector<std::string> joint_methods{"saa_joint", "rbe", "prescriptive", "cdgm"};
  for (DgpKind k : {DgpKind::c, DgpKind::d}) {
    const auto inv = run_inventory_experiment(desk(k, PriceMode::continuous, inv_methods, 5000));
    const auto joint = run_joint_experiment(desk(k, PriceMode::continuous, joint_methods, 1000));
    const double cdgm_gap = avg(inv, "cdgm", "excess_risk");
    std::string best_inv = "cdgm";
    for (const auto& m : inv_methods)
      if (avg(inv, m, "excess_risk") < avg(inv, best_inv, "excess_risk")) best_inv = m;
    const double cdgm_profit = avg(joint, "cdgm", "profit");
    std::string best_joint = "cdgm";
    for (const auto& m : joint_methods)
      if (avg(joint, m, "profit") > avg(joint, best_joint, "profit")) best_joint = m;
    const double limit = k == DgpKind::c ? 2.0 : 5.0;
    bool ok = best_inv == "cdgm" && best_joint == "cdgm" && cdgm_gap <= limit;
    if (k == DgpKind::d) {
      ok = ok && cdgm_profit >= 95 && cdgm_profit - avg(joint, "rbe", "profit") >= 10 &&
           cdgm_profit - avg(joint, "prescriptive", "profit") >= 10;
    }
    pass = pass && ok;
    detail << to_string(k) << ": inventory gaps";
    for (const auto& m : inv_methods) detail << " " << m << "=" << fmt("%.3f", avg(inv, m, "excess_risk"));
    detail << "; joint profits";
    for (const auto& m : joint_methods) detail << " " << m << "=" << fmt("%.2f", avg(joint, m, "profit"));
    detail << (ok ? " [ok]" : " [not ok]") << (k == DgpKind::c ? "; " : "");
  }
  return {pass, detail.str()};
}

Outcome textual() {
  const auto r = run_joint_experiment(desk(DgpKind::e, PriceMode::discrete, {"cdgm", "cdgm_text"}, 1000));
  const double plain = avg(r, "cdgm", "profit"), text = avg(r, "cdgm_text", "profit");
  return {text - plain >= 3.0, "cdgm_text " + fmt("%.2f", text) + " vs cdgm " + fmt("%.2f", plain) +
                                   " (difference " + fmt("%.2f", text - plain) + " >= 3)"};
}

Outcome convergence() {
  ExperimentConfig cfg = desk(DgpKind::c, PriceMode::discrete, {"cdgm"}, 500);
  const std::vector<std::size_t> sizes{200, 2000};
  const ConvergenceResult res = convergence_probe(cfg, sizes);
  return {res.decreasing_replications >= 8,
          "gap decreased in " + std::to_string(res.decreasing_replications) + "/10 replications (mean " +
              fmt("%.3f", mean(res.gaps[0])) + " -> " + fmt("%.3f", mean(res.gaps[1])) + ")"};
}

// Smallest |pre-activation| over all relu units and batch columns.
double kink_margin(const Mlp& net, const Eigen::MatrixXd& x) {
  double margin = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd a = x;
  for (const auto& l : net.layers()) {
    Eigen::MatrixXd z = (l.weight * a).colwise() + l.bias;
    if (l.activation == Activation::relu) {
      margin = std::min(margin, z.cwiseAbs().minCoeff());
      a = z.cwiseMax(0.0);
    } else {
      a = z;
    }
  }
  return margin;
}

Outcome gradients() {
  RngStream shapes(901);
  double worst = 0;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> widths{1 + static_cast<int>(shapes.below(12))};
    const int depth = 1 + static_cast<int>(shapes.below(3));
    for (int i = 0; i < depth; ++i) widths.push_back(1 + static_cast<int>(shapes.below(32)));
    widths.push_back(1 + static_cast<int>(shapes.below(3)));
    const int cols = 1 + static_cast<int>(shapes.below(4));
    RngStream rng = shapes.derive(static_cast<std::uint64_t>(trial));
    // redraw until no relu pre-activation is near its kink
    Mlp net;
    Eigen::MatrixXd x(widths.front(), cols);
    do {
      net = Mlp::glorot(widths, Activation::relu, Activation::identity, rng);
      for (auto& l : net.layers())
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.1 * rng.normal();
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    } while (kink_margin(net, x) < 1e-3);
    Eigen::MatrixXd g(net.output_dim(), x.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    const MlpGradients grads = backward(net, forward(net, x).tape, g);
    auto loss = [&] { return (net.predict(x).array() * g.array()).sum(); };
    auto params = net.parameters();
    auto blocks = grads.blocks();
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size(); ++i) {
        const double orig = params[b][i];
        params[b][i] = orig + 1e-4;
        const double up = loss();
        params[b][i] = orig - 1e-4;
        const double down = loss();
        params[b][i] = orig;
        const double fd = (up - down) / 2e-4;
        const double rel = std::abs(fd - blocks[b][i]) / std::max({std::abs(fd), std::abs(blocks[b][i]), 1e-6});
        worst = std::max(worst, rel);
        ++checked;
      }
    }
  }
  return {worst <= 1e-4, std::to_string(checked) + " parameters, max relative error " + fmt("%.2e", worst)};
}

Outcome determinism() {
  ExperimentConfig cfg = desk(DgpKind::b, PriceMode::discrete, {"saa", "rbe", "erm_lr", "ko", "cdgm", "oracle"}, 50);
  cfg.n = 500;
  cfg.replications = 3;
  cfg.cdgm.epochs = 30;
  bool same = true;
  const std::string inv = render_csv(run_inventory_experiment(cfg, 1)) + render_json(run_inventory_experiment(cfg, 1));
  same = same && inv == render_csv(run_inventory_experiment(cfg, 2)) + render_json(run_inventory_experiment(cfg, 2));
  cfg.methods = {"saa_joint", "rbe", "prescriptive", "cdgm", "oracle"};
  const std::string joint = render_csv(run_joint_experiment(cfg, 1));
  same = same && joint == render_csv(run_joint_experiment(cfg, 3));
  return {same, same ? "inventory and joint reports byte-identical across reruns and thread counts"
                     : "reports differ between reruns"};
}

Outcome real_data() {
  const MealLoad load = load_meal_csv(std::filesystem::path(std::string(GENNV_FIXTURE_DIR) + "/meal_demand.csv"));
  FeatureSpec spec;
  spec.meal_id = 1885;
  const MealSplit split = build_meal_dataset(load.records, spec);
  const std::uint64_t hash = feature_hash(split.train);
  const bool hash_ok = hash == kFixtureTrainHash1885;
  const bool split_ok = *std::max_element(split.train_weeks.begin(), split.train_weeks.end()) == 120 &&
                        *std::min_element(split.test_weeks.begin(), split.test_weeks.end()) == 121;
  const bool grid_ok = real_data_cost_grid().size() == 12;
  RealDataConfig cfg;
  cfg.meals = {1885, 2631};
  cfg.cdgm.epochs = 20;
  const ExperimentReport report = run_real_data(load.records, cfg);
  std::size_t profit_rows = 0;
  for (const auto& row : report.rows)
    if (row.metric.rfind("profit_", 0) == 0) ++profit_rows;
  const bool rows_ok = profit_rows == cfg.meals.size() * cfg.methods.size() * 12;
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  return {hash_ok && split_ok && grid_ok && rows_ok,
          std::string("hash ") + hex + (hash_ok ? " (expected)" : " (unexpected)") + ", split " +
              (split_ok ? "ok" : "wrong") + ", cost grid " + (grid_ok ? "12" : "wrong") + ", " +
              std::to_string(profit_rows) + " profit rows"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle-sampler sanity", oracle_sampler_sanity},
      {"inventory decision equals brute-force argmax", proposition1},
      {"mean plug-in overestimates profit", proposition2},
      {"inventory results, discrete prices", inventory_discrete},
      {"joint results, discrete prices", joint_discrete},
      {"continuous-price ranking", continuous},
      {"textual features", textual},
      {"convergence in training size", convergence},
      {"gradient integrity", gradients},
      {"determinism", determinism},
      {"real-data pipeline on fixture", real_data},
  };
  // optional arguments select criteria by number
  std::vector<std::size_t> selected;
  for (int a = 1; a < argc; ++a) {
    const long k = std::strtol(argv[a], nullptr, 10);
    if (k < 1 || k > static_cast<long>(criteria.size())) {
      std::fprintf(stderr, "usage: acceptance [criterion number ...]\n");
      return 64;
    }
    selected.push_back(static_cast<std::size_t>(k - 1));
  }
  if (selected.empty())
    for (std::size_t i = 0; i < criteria.size(); ++i) selected.push_back(i);

  int passed = 0;
  for (std::size_t i : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    passed += o.pass;
    std::printf("%s %2zu %s: %s [%.0fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", passed, selected.size());
  return passed == static_cast<int>(selected.size()) ? 0 : 1;
}
