// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gennv/baselines.hpp"
#include "gennv/cdgm.hpp"
#include "gennv/dgp.hpp"
#include "gennv/report.hpp"

namespace gennv {

enum class Experiment { inventory, joint };

std::string_view to_string(Experiment e);

/// Everything a simulated experiment depends on. Two runs with equal
/// configs produce identical reports regardless of thread count.
struct ExperimentConfig {
  DgpKind dgp = DgpKind::a;
  PriceMode mode = PriceMode::discrete;
  std::size_t n = 2000;
  /// Inventory, discrete: test points per price. Inventory, continuous:
  /// (x, p) test pairs. Joint: test feature vectors.
  std::size_t n_test = 500;
  int replications = 10;
  std::vector<std::string> methods;
  CostParams costs;
  std::size_t m = 1000;          // generator draws per decision
  int grid_j = 21;               // joint grid size in continuous mode
  double saa_window = 0.1;       // continuous-mode SAA price window
  std::size_t oracle_mc = 2000;  // draws per price for the oracle joint policy
  std::uint64_t seed = 1;
  TrainConfig cdgm;
  ErmConfig erm;

  /// Throws Error(config) on nonpositive sizes, an empty or unknown method
  /// list, or text methods on a DGP without text.
  void validate(Experiment e) const;
};

/// saa, rbe, erm_lr, erm_nn, ko, cdgm, oracle (plus cdgm_text on kind e).
std::vector<std::string> default_inventory_methods(DgpKind kind);
/// saa_joint, rbe, prescriptive, cdgm, oracle (plus cdgm_text on kind e).
std::vector<std::string> default_joint_methods(DgpKind kind);

/// Prices where decisions are evaluated: the discrete set, or grid_j evenly
/// spaced prices in continuous mode. Prices at or below the retail cost are
/// dropped since no critical ratio exists there.
std::vector<double> decision_prices(const OracleModel& model, const ExperimentConfig& cfg);

/// Excess-risk gap L_test per price (metric "excess_risk"; the price-averaged
/// row has no price). Continuous mode reports only the average over pairs.
/// `threads` = 0 uses the hardware concurrency.
ExperimentReport run_inventory_experiment(const ExperimentConfig& cfg, int threads = 0);

/// Mean realized profit per method (metric "profit").
ExperimentReport run_joint_experiment(const ExperimentConfig& cfg, int threads = 0);

struct ConvergenceResult {
  std::vector<std::size_t> sizes;
  std::vector<std::vector<double>> gaps;  // gaps[size index][replication]
  /// Replications whose gap at the largest size is below that at the smallest.
  int decreasing_replications = 0;
  bool decreasing_on_average = false;
  ExperimentReport report;
};

/// cDGM price-averaged excess risk trained on nested prefixes of one corpus
/// per replication. `sizes` must be ascending. Uses cfg.n_test, m, costs,
/// replications, seed and cdgm; cfg.n and cfg.methods are ignored.
ConvergenceResult convergence_probe(const ExperimentConfig& cfg, std::span<const std::size_t> sizes,
                                    int threads = 0);

}  // namespace gennv
