#include "softprune/ista.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace softprune {

void LassoProblem::validate() const {
  if (a.rows() != b.size()) {
    throw std::invalid_argument(
        fmt::format("A has {} rows but b has {} entries", a.rows(), b.size()));
  }
  if (!(std::isfinite(mu) && mu >= 0.0)) {
    throw std::invalid_argument("LASSO penalty mu must be finite and >= 0");
  }
  if (!a.allFinite()) throw std::invalid_argument("A contains non-finite entries");
  require_finite(b, "b");
}

double LassoProblem::smooth_objective(const Vector& x) const {
  return 0.5 * (a * x - b).squaredNorm();
}

double LassoProblem::objective(const Vector& x) const {
  return smooth_objective(x) + mu * x.lpNorm<1>();
}

Vector LassoProblem::gradient(const Vector& x) const { return a.transpose() * (a * x - b); }

double lipschitz_estimate(const Matrix& a, int iterations, double safety) {
  if (a.cols() == 0) return 0.0;
  Vector v = Vector::Ones(a.cols()) / std::sqrt(static_cast<double>(a.cols()));
  double eigen = 0.0;
  for (int k = 0; k < iterations; ++k) {
    Vector next = a.transpose() * (a * v);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    eigen = v.dot(next);
    v = next / norm;
  }
  eigen = std::max(eigen, v.dot(a.transpose() * (a * v)));
  return eigen * safety;
}

Vector ista_step(const Vector& x, const Vector& grad, double step, double mu) {
  if (!(step > 0.0)) throw std::domain_error("ISTA step must be positive");
  if (!(mu >= 0.0)) throw std::domain_error("ISTA penalty must be >= 0");
  return soft_threshold(x - step * grad, mu * step);
}

double kkt_residual(const LassoProblem& p, const Vector& x) {
  const Vector grad = p.gradient(x);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double violation = x[i] != 0.0 ? std::abs(grad[i] + p.mu * sign(x[i]))
                                         : std::max(0.0, std::abs(grad[i]) - p.mu);
    worst = std::max(worst, violation);
  }
  return worst;
}

IstaResult solve_lasso(const LassoProblem& p, const IstaConfig& cfg,
                       const std::optional<Vector>& x0) {
  p.validate();
  const auto n = p.a.cols();
  IstaResult out;
  out.x = x0 ? *x0 : Vector::Zero(n);
  if (out.x.size() != n) throw std::invalid_argument("warm start has the wrong dimension");

  if (cfg.step) {
    out.step = *cfg.step;
  } else {
    const double lip = lipschitz_estimate(p.a, cfg.power_iterations, cfg.lipschitz_safety);
    out.step = lip > 0.0 ? 1.0 / lip : 1.0;
  }
  if (!(out.step > 0.0)) throw std::invalid_argument("ISTA step must be positive");

  const std::size_t max_iter =
      cfg.max_iterations > 0 ? cfg.max_iterations : 100 * static_cast<std::size_t>(n);

  Vector x = out.x;
  Vector y = x;  // FISTA extrapolation point
  double momentum = 1.0;
  double kkt = kkt_residual(p, x);
  Vector best = x;
  double best_kkt = kkt;
  if (cfg.record_objective) out.objective_history.push_back(p.objective(x));

  std::size_t it = 0;
  while (kkt > cfg.kkt_tolerance && it < max_iter) {
    const Vector& base = cfg.fista ? y : x;
    Vector next = ista_step(base, p.gradient(base), out.step, p.mu);
    if (cfg.fista) {
      const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      y = next + ((momentum - 1.0) / momentum_next) * (next - x);
      momentum = momentum_next;
    }
    x = std::move(next);
    ++it;
    kkt = kkt_residual(p, x);
    if (cfg.record_objective) out.objective_history.push_back(p.objective(x));
    if (kkt < best_kkt) {
      best_kkt = kkt;
      best = x;
    }
  }

  out.iterations = it;
  out.converged = kkt <= cfg.kkt_tolerance;
  out.x = out.converged ? x : best;
  out.kkt = out.converged ? kkt : best_kkt;
  return out;
}

ContinuationResult solve_with_continuation(const LassoProblem& p,
                                           const std::vector<double>& mu_schedule,
                                           const IstaConfig& cfg) {
  if (mu_schedule.empty()) throw std::invalid_argument("continuation schedule is empty");
  for (std::size_t k = 1; k < mu_schedule.size(); ++k) {
    if (!(mu_schedule[k] < mu_schedule[k - 1])) {
      throw std::invalid_argument("continuation schedule must be strictly decreasing");
    }
  }
  if (mu_schedule.back() != p.mu) {
    throw std::invalid_argument("continuation schedule must end at the problem's mu");
  }

  ContinuationResult out;
  LassoProblem stage = p;
  std::optional<Vector> warm;
  std::size_t total = 0;
  for (double mu : mu_schedule) {
    stage.mu = mu;
    IstaResult r = solve_lasso(stage, cfg, warm);
    out.stage_iterations.push_back(r.iterations);
    total += r.iterations;
    warm = r.x;
    out.result = std::move(r);
  }
  out.result.iterations = total;
  return out;
}

std::vector<double> geometric_continuation(double mu_target, double beta, std::size_t stages) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("continuation beta must be in (0, 1)");
  if (stages == 0) return {mu_target};
  std::vector<double> out;
  for (std::size_t k = 0; k <= stages; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(stages);
    out.push_back(k == stages ? mu_target : mu_target * std::pow(beta, frac - 1.0));
  }
  return out;
}

}  // namespace softprune
