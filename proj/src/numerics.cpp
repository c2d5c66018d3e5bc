// SPDX-License-Identifier: Apache-2.0
#include "gennv/numerics.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "gennv/error.hpp"

namespace gennv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::factorization: return "factorization";
    case ErrorKind::data: return "data";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::version: return "version";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : key_(mix64(seed + kGolden)) {}

RngStream RngStream::derive(std::string_view label) const {
  return RngStream(mix64(key_ ^ mix64(fnv1a(label))), true);
}

RngStream RngStream::derive(std::uint64_t index) const {
  return RngStream(mix64(key_ ^ mix64(index * kGolden + 0x632BE59BD9B4E019ULL)),
                   true);
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::domain, "RngStream::below: n must be positive");
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void RngStream::fill_normal(std::span<double> out) {
  for (double& v : out) v = normal();
}

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw Error(ErrorKind::domain,
                "std_normal_quantile: probability must lie in (0,1), got " + std::to_string(u));
  }
  // Acklam's rational approximation (relative error ~1.2e-9) ...
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double z;
  if (u < p_low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - p_low) {
    const double q = u - 0.5;
    const double r = q * q;
    z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // ... refined by Halley steps on Phi(z) - u.
  for (int iter = 0; iter < 2; ++iter) {
    const double err = std_normal_cdf(z) - u;
    const double step = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * z * z);
    z -= step / (1.0 + 0.5 * z * step);
  }
  return z;
}

Covariance::Covariance(Eigen::MatrixXd matrix, double min_pivot) : matrix_(std::move(matrix)) {
  if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols()) {
    throw Error(ErrorKind::dimension, "Covariance: matrix must be square and nonempty");
  }
  if (!matrix_.isApprox(matrix_.transpose(), 1e-12)) {
    throw Error(ErrorKind::factorization, "Covariance: matrix is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(matrix_);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::factorization, "Covariance: matrix is not positive definite");
  }
  lower_ = llt.matrixL();
  const double scale = std::max(1.0, matrix_.diagonal().maxCoeff());
  for (Eigen::Index i = 0; i < lower_.rows(); ++i) {
    const double pivot = lower_(i, i) * lower_(i, i);
    if (!(pivot > min_pivot * scale)) {
      throw Error(ErrorKind::factorization,
                  "Covariance: Cholesky pivot below tolerance (numerically singular)");
    }
  }
}

Covariance Covariance::equicorrelated(int dim, double rho) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(dim, dim, rho);
  m.diagonal().setOnes();
  return Covariance(std::move(m));
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Covariance& cov,
                           RngStream& rng) {
  if (mean.size() != cov.dim()) {
    throw Error(ErrorKind::dimension, "sample_mvn: mean and covariance dimensions differ");
  }
  Eigen::VectorXd z(cov.dim());
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  return mean + cov.cholesky_lower() * z;
}

std::size_t order_statistic_index(std::size_t m, double level) {
  if (m == 0) throw Error(ErrorKind::data, "order_statistic_index: empty sample");
  // Guard against m*level landing a hair above an integer through rounding.
  const double raw = static_cast<double>(m) * level;
  double idx = std::ceil(raw - 1e-9 * std::max(1.0, raw));
  if (idx < 1.0) idx = 1.0;
  if (idx > static_cast<double>(m)) idx = static_cast<double>(m);
  return static_cast<std::size_t>(idx);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mu = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace gennv
