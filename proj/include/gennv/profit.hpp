// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>

namespace gennv {

struct CostParams {
  double c = 1.0;  // unit purchase cost
  double s = 0.5;  // unit salvage value

  /// Throws Error(config) unless 0 <= s <= c.
  void validate() const;
};

/// Single-period profit (p - c) d - (c - s)(q - d)+ - (p - c)(d - q)+,
/// equivalently p min(q, d) + s (q - d)+ - c q.
inline double profit(double demand, double price, double q, const CostParams& costs) {
  const double sold = std::min(q, demand);
  const double leftover = std::max(q - demand, 0.0);
  return price * sold + costs.s * leftover - costs.c * q;
}

/// Critical ratio (p - c) / (p - s). Throws Error(domain) if p <= c.
double rho(double price, const CostParams& costs);

}  // namespace gennv
