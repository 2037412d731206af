#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace softprune {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an iterative numerical routine cannot reach its tolerance.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a vector from raw values, rejecting NaN and infinities.
Vector make_vector(std::span<const double> values);

/// Throws std::domain_error naming `what` if any entry is not finite.
void require_finite(const Vector& v, const std::string& what);

/// -1, 0 or +1. Both signed zeros map to 0.
double sign(double x);

double soft_threshold(double x, double d);

/// Element-wise sign(x_i) * max(|x_i| - d, 0). Negative d is a domain error.
Vector soft_threshold(const Vector& x, double d);

/// Fraction of entries with |w_i| <= zero_tol.
double sparsity(const Vector& w, double zero_tol = 0.0);

struct QuadratureOptions {
  /// Subdivision budget; exceeding it raises NumericError.
  int max_intervals = 4096;
};

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of h over [a, b] with
/// 0 <= a <= b <= 1. The interval with the largest error estimate is bisected
/// until the summed estimate is at most `tol`, so isolated jump
/// discontinuities still converge.
double integrate(const std::function<double(double)>& h, double a, double b,
                 double tol, QuadratureOptions opts = {});

/// Seedable generator used by every stochastic routine in the library.
///
/// The bit stream comes from std::mt19937_64, whose output sequence is fixed
/// by the standard. Uniform, normal and integer draws are derived here rather
/// than through the <random> distributions, whose algorithms are
/// implementation-defined, so a seed replays identically across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace softprune
