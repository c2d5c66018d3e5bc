// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "gennv/dataset.hpp"
#include "gennv/numerics.hpp"

namespace gennv {

/// Anything that can draw demand samples for a condition (x, p): a trained
/// generator, the true process, or a hand-built stand-in.
class DemandSampler {
 public:
  virtual ~DemandSampler() = default;

  /// Fill `out` with independent draws of D | (x, p). Unsorted.
  virtual void sample_into(const Features& x, double price, std::span<double> out,
                           RngStream& rng) const = 0;

  /// m draws at each price. Every price replays the same copy of `rng`, so
  /// the rows share their noise (common random numbers). Unsorted.
  virtual std::vector<std::vector<double>> sample_prices(const Features& x,
                                                         std::span<const double> prices,
                                                         std::size_t m,
                                                         const RngStream& rng) const;
};

/// m draws sorted ascending (the generated demand set of one condition).
std::vector<double> draw_sorted(const DemandSampler& sampler, const Features& x, double price,
                                std::size_t m, RngStream& rng);

}  // namespace gennv
