// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gennv {

/// Counter-based random stream. Draw n of a stream is a pure function of
/// (key, n), so a stream can be copied to replay the same draws and child
/// streams can be split off by label without touching the parent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Child stream keyed by (this stream's key, label). Does not advance
  /// this stream.
  RngStream derive(std::string_view label) const;
  RngStream derive(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  void fill_normal(std::span<double> out);

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  RngStream(std::uint64_t key, bool /*raw*/) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Standalone alias for RngStream::derive so call sites can read either way.
inline RngStream derive_stream(const RngStream& parent, std::string_view label) {
  return parent.derive(label);
}

double std_normal_pdf(double z);
double std_normal_cdf(double z);
/// Inverse of the standard normal CDF. Throws Error(domain) unless 0 < u < 1.
double std_normal_quantile(double u);

/// Symmetric positive-definite matrix with its Cholesky factor cached.
class Covariance {
 public:
  /// Throws Error(factorization) if the matrix is not symmetric positive
  /// definite. Pivots below `min_pivot` (relative to the largest diagonal
  /// entry, or absolute when the diagonal is tiny) count as not PD.
  explicit Covariance(Eigen::MatrixXd matrix, double min_pivot = 1e-10);

  /// Unit diagonal with a constant off-diagonal correlation.
  static Covariance equicorrelated(int dim, double rho);

  int dim() const noexcept { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  const Eigen::MatrixXd& cholesky_lower() const noexcept { return lower_; }

 private:
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd lower_;
};

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Covariance& cov,
                           RngStream& rng);

/// ceil(m * level) as a 1-based order statistic index, clamped to [1, m].
std::size_t order_statistic_index(std::size_t m, double level);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> values);

}  // namespace gennv
