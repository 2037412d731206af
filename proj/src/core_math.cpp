#include "softprune/core_math.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>

#include <fmt/format.h>

namespace softprune {

Vector make_vector(std::span<const double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::domain_error(fmt::format("non-finite entry at index {}", i));
    }
    v[static_cast<Eigen::Index>(i)] = values[i];
  }
  return v;
}

void require_finite(const Vector& v, const std::string& what) {
  if (!v.allFinite()) {
    throw std::domain_error(what + " contains NaN or infinite entries");
  }
}

double sign(double x) {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return -1.0;
  return 0.0;
}

double soft_threshold(double x, double d) {
  const double shrunk = std::abs(x) - d;
  return shrunk > 0.0 ? sign(x) * shrunk : 0.0;
}

Vector soft_threshold(const Vector& x, double d) {
  if (!(d >= 0.0)) {
    throw std::domain_error(fmt::format("soft threshold must be >= 0, got {}", d));
  }
  return x.unaryExpr([d](double v) { return soft_threshold(v, d); });
}

double sparsity(const Vector& w, double zero_tol) {
  if (!(zero_tol >= 0.0)) {
    throw std::domain_error("zero_tol must be >= 0");
  }
  if (w.size() == 0) return 0.0;
  const auto zeros = (w.array().abs() <= zero_tol).count();
  return static_cast<double>(zeros) / static_cast<double>(w.size());
}

namespace {

// Kronrod 15-point abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights on the odd Kronrod nodes.
constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel gauss_kronrod(const std::function<double(double)>& h, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = h(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (std::size_t i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    const double pair = h(center - dx) + h(center + dx);
    kronrod += kKronrodWeights[i] * pair;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * pair;
  }
  const double value = kronrod * half;
  const double error = std::abs((kronrod - gauss) * half);
  if (!std::isfinite(value)) {
    throw NumericError(fmt::format("integrand not finite on [{}, {}]", a, b));
  }
  return {a, b, value, error};
}

}  // namespace

double integrate(const std::function<double(double)>& h, double a, double b,
                 double tol, QuadratureOptions opts) {
  if (!(0.0 <= a && a <= b && b <= 1.0)) {
    throw std::domain_error(
        fmt::format("integration bounds must satisfy 0 <= a <= b <= 1, got [{}, {}]", a, b));
  }
  if (!(tol > 0.0)) {
    throw std::domain_error("quadrature tolerance must be positive");
  }
  if (a == b) return 0.0;

  std::priority_queue<Panel> panels;
  panels.push(gauss_kronrod(h, a, b));
  double error = panels.top().error;
  int count = 1;

  while (error > tol) {
    if (count >= opts.max_intervals) {
      throw NumericError(fmt::format(
          "quadrature did not reach tol {} within {} intervals (estimate {})", tol,
          opts.max_intervals, error));
    }
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(worst.a < mid && mid < worst.b)) {
      throw NumericError("quadrature interval collapsed below machine resolution");
    }
    const Panel left = gauss_kronrod(h, worst.a, mid);
    const Panel right = gauss_kronrod(h, mid, worst.b);
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++count;
  }

  double sum = 0.0;
  while (!panels.empty()) {
    sum += panels.top().value;
    panels.pop();
  }
  return sum;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::domain_error("Rng::below requires n > 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

}  // namespace softprune
