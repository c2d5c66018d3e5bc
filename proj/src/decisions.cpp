// SPDX-License-Identifier: Apache-2.0
#include "gennv/decisions.hpp"

#include <algorithm>
#include <cmath>

#include "gennv/error.hpp"

namespace gennv {

double estimate_profit(std::span<const double> samples, double price, double q,
                       const CostParams& costs) {
  if (samples.empty()) throw Error(ErrorKind::data, "estimate_profit: no demand samples");
  double total = 0.0;
  for (double d : samples) total += profit(d, price, q, costs);
  return total / static_cast<double>(samples.size());
}

double inventory_decision(std::span<const double> sorted, double price, const CostParams& costs) {
  if (sorted.empty()) throw Error(ErrorKind::data, "inventory_decision: no demand samples");
  const double level = rho(price, costs);
  return sorted[order_statistic_index(sorted.size(), level) - 1];
}

JointDecision select_best(std::vector<PricePoint> profile) {
  if (profile.empty()) throw Error(ErrorKind::data, "price grid is empty");
  std::size_t best = 0;
  for (std::size_t j = 1; j < profile.size(); ++j) {
    const auto& cand = profile[j];
    const auto& cur = profile[best];
    if (cand.profit > cur.profit || (cand.profit == cur.profit && cand.price < cur.price)) best = j;
  }
  JointDecision out;
  out.price = profile[best].price;
  out.quantity = profile[best].quantity;
  out.profit = profile[best].profit;
  out.profile = std::move(profile);
  return out;
}

JointDecision joint_decision(const DemandSampler& sampler, const Features& x,
                             std::span<const double> grid, std::size_t m,
                             const CostParams& costs, const RngStream& rng) {
  if (grid.empty()) throw Error(ErrorKind::data, "joint_decision: price grid is empty");
  if (m == 0) throw Error(ErrorKind::domain, "joint_decision: M must be at least 1");
  for (double p : grid) (void)rho(p, costs);
  auto draws = sampler.sample_prices(x, grid, m, rng);
  std::vector<PricePoint> profile;
  profile.reserve(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    auto& samples = draws[j];
    std::sort(samples.begin(), samples.end());
    const double q = inventory_decision(samples, grid[j], costs);
    profile.push_back({grid[j], q, estimate_profit(samples, grid[j], q, costs)});
  }
  return select_best(std::move(profile));
}

std::vector<double> build_price_grid(double lo, double hi, int j) {
  if (j < 1) throw Error(ErrorKind::config, "price grid needs at least one point");
  if (!(lo <= hi)) throw Error(ErrorKind::config, "price interval must satisfy lo <= hi");
  if (lo == hi) return {lo};
  if (j == 1) return {lo};
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(j));
  for (int i = 0; i < j; ++i) grid.push_back(lo + (hi - lo) * i / (j - 1));
  grid.back() = hi;
  return grid;
}

std::vector<double> build_price_grid(std::span<const double> discrete) {
  if (discrete.empty()) throw Error(ErrorKind::config, "discrete price set is empty");
  std::vector<double> grid(discrete.begin(), discrete.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

int grid_size_for_tolerance(double eps, double p_max, double bound_c, double lipschitz_l,
                            const CostParams& costs) {
  if (!(eps > 0.0)) throw Error(ErrorKind::config, "grid tolerance eps must be positive");
  if (!(bound_c > 0.0 && lipschitz_l > 0.0)) {
    throw Error(ErrorKind::config, "grid bound constants C and L must be positive");
  }
  const double bound =
      p_max * (2.0 * bound_c + (2.0 * p_max - costs.c - costs.s) * lipschitz_l) / eps;
  return std::max(1, static_cast<int>(std::ceil(bound - 1e-9 * bound)));
}

std::vector<double> build_price_grid_for_tolerance(double lo, double hi, double eps,
                                                   double bound_c, double lipschitz_l,
                                                   const CostParams& costs) {
  return build_price_grid(lo, hi, grid_size_for_tolerance(eps, hi, bound_c, lipschitz_l, costs));
}

}  // namespace gennv
