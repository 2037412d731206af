#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "softprune/core_math.hpp"

namespace softprune {

/// min_x 1/2 ||A x - b||^2 + mu ||x||_1
struct LassoProblem {
  Matrix a;
  Vector b;
  double mu = 0.0;

  void validate() const;
  double smooth_objective(const Vector& x) const;
  double objective(const Vector& x) const;
  Vector gradient(const Vector& x) const;
};

struct IstaConfig {
  /// Step size; empty means 1/L_f from power iteration.
  std::optional<double> step;
  /// 0 selects 100 * n.
  std::size_t max_iterations = 0;
  double kkt_tolerance = 1e-8;
  bool fista = false;
  bool record_objective = false;
  int power_iterations = 30;
  double lipschitz_safety = 1.01;
};

struct IstaResult {
  Vector x;
  std::size_t iterations = 0;
  double kkt = 0.0;
  bool converged = false;
  double step = 0.0;
  /// F(x^(0)), F(x^(1)), ... when requested.
  std::vector<double> objective_history;
};

/// Largest eigenvalue of A^T A by power iteration, times `safety`.
double lipschitz_estimate(const Matrix& a, int iterations = 30, double safety = 1.01);

/// soft_threshold(x - step * grad, mu * step)
Vector ista_step(const Vector& x, const Vector& grad, double step, double mu);

/// max_i of |grad_i + mu sign(x_i)| on the support and max(0, |grad_i| - mu)
/// off it. Zero exactly at minimizers.
double kkt_residual(const LassoProblem& p, const Vector& x);

/// Proximal gradient descent from `x0` (zero when empty). Stops once the KKT
/// residual reaches the tolerance; otherwise returns the best iterate seen,
/// flagged as not converged.
IstaResult solve_lasso(const LassoProblem& p, const IstaConfig& cfg,
                       const std::optional<Vector>& x0 = std::nullopt);

struct ContinuationResult {
  IstaResult result;
  std::vector<std::size_t> stage_iterations;
};

/// Solves for each penalty in the strictly decreasing `mu_schedule` in turn,
/// warm-starting from the previous stage. The last entry must equal p.mu.
ContinuationResult solve_with_continuation(const LassoProblem& p,
                                           const std::vector<double>& mu_schedule,
                                           const IstaConfig& cfg);

/// mu_target * beta^(k/K - 1) for k = 0..K, i.e. a geometric ramp from
/// mu_target / beta down to mu_target.
std::vector<double> geometric_continuation(double mu_target, double beta, std::size_t stages);

}  // namespace softprune
