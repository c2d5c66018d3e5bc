// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "gennv/dataset.hpp"
#include "gennv/numerics.hpp"
#include "gennv/profit.hpp"
#include "gennv/sampler.hpp"

namespace gennv {

/// Sample-average profit (1/M) sum Pi(d_m, p, q). Throws Error(data) when
/// `samples` is empty.
double estimate_profit(std::span<const double> samples, double price, double q,
                       const CostParams& costs);

/// Order quantity maximizing estimate_profit over q: the ceil(M rho(p))-th
/// smallest sample (1-based, clamped to [1, M]). `sorted` must be ascending.
double inventory_decision(std::span<const double> sorted, double price, const CostParams& costs);

struct PricePoint {
  double price = 0.0;
  double quantity = 0.0;
  double profit = 0.0;  // estimated profit at (price, quantity)
};

struct JointDecision {
  double price = 0.0;
  double quantity = 0.0;
  double profit = 0.0;
  std::vector<PricePoint> profile;  // one entry per grid price, grid order
};

/// Argmax of the profile's estimated profit; ties go to the lowest price.
/// Throws Error(data) for an empty profile.
JointDecision select_best(std::vector<PricePoint> profile);

/// Joint price and inventory choice over a price grid: at each grid price
/// draw M demands, order the critical-ratio quantile, and estimate profit.
/// All grid prices reuse the same noise draws.
JointDecision joint_decision(const DemandSampler& sampler, const Features& x,
                             std::span<const double> grid, std::size_t m,
                             const CostParams& costs, const RngStream& rng);

/// J evenly spaced prices on [lo, hi], both ends included ({lo} if lo == hi).
std::vector<double> build_price_grid(double lo, double hi, int j);
/// A discrete price set passes through (sorted, deduplicated).
std::vector<double> build_price_grid(std::span<const double> discrete);

/// Grid size from the discretization bound p_max (2C + (2 p_max - c - s) L) / eps,
/// rounded up.
int grid_size_for_tolerance(double eps, double p_max, double bound_c, double lipschitz_l,
                            const CostParams& costs);
std::vector<double> build_price_grid_for_tolerance(double lo, double hi, double eps,
                                                   double bound_c, double lipschitz_l,
                                                   const CostParams& costs);

}  // namespace gennv
