#include "softprune/schedulers.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "softprune/core_math.hpp"

namespace softprune {

namespace {

constexpr double kPi = std::numbers::pi;

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

double warmup_factor(const LearningRateSpec& spec, std::size_t epoch) {
  if (epoch >= spec.warmup_epochs) return 1.0;
  return static_cast<double>(epoch + 1) / static_cast<double>(spec.warmup_epochs);
}

void check_progress(std::size_t t, std::size_t total) {
  if (total == 0) throw std::domain_error("total iterations must be positive");
  if (t > total) {
    throw std::domain_error(fmt::format("iteration {} beyond total {}", t, total));
  }
}

double progress(std::size_t t, std::size_t total) {
  return static_cast<double>(t) / static_cast<double>(total);
}

}  // namespace

void LearningRateSpec::validate() const {
  if (!(std::isfinite(eta_max) && eta_max > 0.0)) {
    throw std::invalid_argument("lr.eta_max must be positive");
  }
  if (epochs < 1) throw std::invalid_argument("lr.epochs must be >= 1");
  if (batches < 1) throw std::invalid_argument("lr.batches must be >= 1");
  if (kind == LrKind::kPolynomialDecay && !(std::isfinite(kappa) && kappa > 0.0)) {
    throw std::invalid_argument("lr.kappa must be positive for polynomial decay");
  }
  if (warmup_epochs > epochs) {
    throw std::invalid_argument("lr.warmup_epochs cannot exceed lr.epochs");
  }
}

void SchedulerSpec::validate() const {
  if (!finite_nonneg(initial_threshold)) {
    throw std::invalid_argument("scheduler.d0 must be finite and >= 0");
  }
  switch (kind) {
    case SchedulerKind::kLatsExact:
      if (!finite_nonneg(mu)) throw std::invalid_argument("scheduler.mu must be >= 0");
      return;
    case SchedulerKind::kTrainableStr:
      if (!std::isfinite(s_init)) throw std::invalid_argument("scheduler.s_init must be finite");
      return;
    case SchedulerKind::kPgh:
      if (!(beta > 0.0 && beta <= 1.0)) {
        throw std::invalid_argument("scheduler.beta must lie in (0, 1]");
      }
      break;
    default:
      break;
  }
  if (!finite_nonneg(final_threshold)) {
    throw std::invalid_argument("scheduler.D must be finite and >= 0");
  }
  if (final_threshold < initial_threshold) {
    throw std::invalid_argument("scheduler.D must be >= scheduler.d0");
  }
}

std::string_view to_string(LrKind kind) {
  switch (kind) {
    case LrKind::kCosineAnnealing: return "cosine";
    case LrKind::kPolynomialDecay: return "polynomial";
    case LrKind::kConstant: return "constant";
  }
  return "?";
}

std::string_view to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::kLatsExact: return "lats-exact";
    case SchedulerKind::kSlats: return "slats";
    case SchedulerKind::kIntegralGeneric: return "integral";
    case SchedulerKind::kPgh: return "pgh";
    case SchedulerKind::kSine: return "sine";
    case SchedulerKind::kLinear: return "linear";
    case SchedulerKind::kLog2: return "log2";
    case SchedulerKind::kTrainableStr: return "trainable-str";
    case SchedulerKind::kPruneAtInit: return "prune-at-init";
  }
  return "?";
}

LrKind parse_lr_kind(std::string_view name) {
  for (auto kind : {LrKind::kCosineAnnealing, LrKind::kPolynomialDecay, LrKind::kConstant}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument(fmt::format("unknown learning-rate kind '{}'", name));
}

SchedulerKind parse_scheduler_kind(std::string_view name) {
  for (auto kind :
       {SchedulerKind::kLatsExact, SchedulerKind::kSlats, SchedulerKind::kIntegralGeneric,
        SchedulerKind::kPgh, SchedulerKind::kSine, SchedulerKind::kLinear,
        SchedulerKind::kLog2, SchedulerKind::kTrainableStr, SchedulerKind::kPruneAtInit}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument(fmt::format("unknown scheduler kind '{}'", name));
}

std::function<double(double)> lr_function(const LearningRateSpec& spec) {
  const double eta = spec.eta_max;
  switch (spec.kind) {
    case LrKind::kCosineAnnealing:
      return [eta](double x) { return 0.5 * eta * (1.0 + std::cos(kPi * x)); };
    case LrKind::kPolynomialDecay: {
      const double kappa = spec.kappa;
      return [eta, kappa](double x) { return eta * std::pow(1.0 - x, kappa); };
    }
    case LrKind::kConstant:
      return [eta](double) { return eta; };
  }
  throw std::logic_error("unhandled learning-rate kind");
}

double lr_at(const LearningRateSpec& spec, std::size_t epoch, std::size_t batch) {
  if (epoch >= spec.epochs) {
    throw std::domain_error(fmt::format("epoch {} out of range [0, {})", epoch, spec.epochs));
  }
  if (batch < 1 || batch > spec.batches) {
    throw std::domain_error(fmt::format("batch {} out of range [1, {}]", batch, spec.batches));
  }
  const double x = static_cast<double>(epoch) / static_cast<double>(spec.epochs);
  return lr_function(spec)(x) * warmup_factor(spec, epoch);
}

double lr_at_iteration(const LearningRateSpec& spec, std::size_t t) {
  if (t >= spec.total_iterations()) {
    throw std::domain_error(
        fmt::format("iteration {} out of range [0, {})", t, spec.total_iterations()));
  }
  return lr_at(spec, t / spec.batches, 1);
}

std::vector<double> lr_sequence(const LearningRateSpec& spec) {
  spec.validate();
  std::vector<double> out(spec.total_iterations());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = lr_at_iteration(spec, t);
  return out;
}

double lats_threshold_summed(const LearningRateSpec& lr, double mu, double d0,
                             std::size_t epoch, std::size_t batch, bool include_warmup) {
  if (epoch >= lr.epochs || batch > lr.batches) {
    throw std::domain_error(fmt::format("LATS index ({}, {}) out of range", epoch, batch));
  }
  const auto counted = [&](std::size_t n) { return include_warmup || n >= lr.warmup_epochs; };
  double epochs_sum = 0.0;
  for (std::size_t i = 0; i < epoch; ++i) {
    if (counted(i)) epochs_sum += lr_at(lr, i, 1);
  }
  const double current = counted(epoch) ? lr_at(lr, epoch, 1) : 0.0;
  return d0 + mu * (static_cast<double>(batch) * current +
                    static_cast<double>(lr.batches) * epochs_sum);
}

double lats_threshold_exact(const LearningRateSpec& lr, double mu, double d0,
                            std::size_t epoch, std::size_t batch, bool include_warmup) {
  if (!finite_nonneg(mu)) throw std::domain_error("LATS mu must be >= 0");
  if (lr.kind != LrKind::kCosineAnnealing || lr.warmup_epochs > 0) {
    return lats_threshold_summed(lr, mu, d0, epoch, batch, include_warmup);
  }
  if (epoch >= lr.epochs || batch > lr.batches) {
    throw std::domain_error(fmt::format("LATS index ({}, {}) out of range", epoch, batch));
  }
  // Closed form of the cosine sum: sum_{i<n} cos(i pi / N) =
  // 1/2 + sin((2n - 1) pi / 2N) / (2 sin(pi / 2N)).
  const double n = static_cast<double>(epoch);
  const double b = static_cast<double>(batch);
  const double big_n = static_cast<double>(lr.epochs);
  const double big_b = static_cast<double>(lr.batches);
  const double ratio =
      std::sin((2.0 * n - 1.0) * kPi / (2.0 * big_n)) / std::sin(kPi / (2.0 * big_n));
  const double bracket = 0.5 * b * (1.0 + std::cos(n * kPi / big_n)) +
                         0.25 * big_b * (2.0 * n + 1.0 + ratio);
  return d0 + mu * lr.eta_max * bracket;
}

double lats_threshold_at(const LearningRateSpec& lr, double mu, double d0, std::size_t t,
                         bool include_warmup) {
  const std::size_t total = lr.total_iterations();
  check_progress(t, total);
  if (t == total) return lats_threshold_exact(lr, mu, d0, lr.epochs - 1, lr.batches, include_warmup);
  return lats_threshold_exact(lr, mu, d0, t / lr.batches, t % lr.batches, include_warmup);
}

double slats_threshold(double final_threshold, std::size_t t, std::size_t total) {
  check_progress(t, total);
  const double x = progress(t, total);
  return final_threshold * (std::sin(x * kPi) / kPi + x);
}

double integral_scheduler(const LearningRateSpec& lr, double final_threshold, std::size_t t,
                          std::size_t total, double tol) {
  check_progress(t, total);
  if (t == total) return final_threshold;
  const auto h = lr_function(lr);
  const double whole = integrate(h, 0.0, 1.0, tol);
  const double part = integrate(h, 0.0, progress(t, total), tol);
  return final_threshold * part / whole;
}

double pgh_fraction(double beta, double x) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::domain_error(fmt::format("PGH beta must lie in (0, 1], got {}", beta));
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (beta == 1.0) return std::sin(kPi * x) / kPi + x;
  // beta^x is evaluated as exp(x ln beta); expm1 keeps beta -> 1 accurate.
  const double log_beta = std::log(beta);
  const double l2 = log_beta * log_beta;
  const double pi2 = kPi * kPi;
  const double beta_x = std::exp(x * log_beta);
  const double numerator = pi2 * std::expm1(x * log_beta) + l2 * (beta_x - 2.0) +
                           log_beta * beta_x *
                               (log_beta * std::cos(kPi * x) + kPi * std::sin(kPi * x));
  const double denominator = pi2 * std::expm1(log_beta) - 2.0 * l2;
  return numerator / denominator;
}

double pgh_fraction_derivative(double beta, double x) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::domain_error(fmt::format("PGH beta must lie in (0, 1], got {}", beta));
  }
  const double cosine_factor = 1.0 + std::cos(kPi * x);
  if (beta == 1.0) return cosine_factor;
  const double log_beta = std::log(beta);
  const double l2 = log_beta * log_beta;
  const double pi2 = kPi * kPi;
  const double denominator = pi2 * std::expm1(log_beta) - 2.0 * l2;
  return std::exp(x * log_beta) * log_beta * (pi2 + l2) * cosine_factor / denominator;
}

double pgh_threshold(double final_threshold, double beta, std::size_t t, std::size_t total) {
  check_progress(t, total);
  return final_threshold * pgh_fraction(beta, progress(t, total));
}

std::optional<double> pgh_stop_fraction(double beta, double level, double x_tol) {
  if (!(level > 0.0)) throw std::domain_error("stop level must be positive");
  // g' is non-increasing on [0, 1]: beta^x and 1 + cos(pi x) both decrease.
  if (pgh_fraction_derivative(beta, 0.0) < level) return 0.0;
  if (pgh_fraction_derivative(beta, 1.0) >= level) return std::nullopt;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > x_tol) {
    const double mid = 0.5 * (lo + hi);
    if (pgh_fraction_derivative(beta, mid) < level) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double prune_at_init_threshold(double final_threshold, double d0, std::size_t t) {
  return t == 0 ? d0 : final_threshold;
}

double baseline_threshold(BaselineKind kind, double final_threshold, std::size_t t,
                          std::size_t total) {
  check_progress(t, total);
  const double x = progress(t, total);
  switch (kind) {
    case BaselineKind::kSine: return 0.5 * (1.0 - std::cos(x * kPi)) * final_threshold;
    case BaselineKind::kLinear: return x * final_threshold;
    case BaselineKind::kLog2: return std::log2(x + 1.0) * final_threshold;
  }
  throw std::logic_error("unhandled baseline kind");
}

double threshold_at(const SchedulerSpec& spec, const LearningRateSpec& lr, std::size_t t) {
  const std::size_t total = lr.total_iterations();
  check_progress(t, total);
  const double d0 = spec.initial_threshold;
  const double span = spec.final_threshold - d0;
  switch (spec.kind) {
    case SchedulerKind::kLatsExact:
      return lats_threshold_at(lr, spec.mu, d0, t, spec.lats_include_warmup);
    case SchedulerKind::kSlats: return d0 + slats_threshold(span, t, total);
    case SchedulerKind::kIntegralGeneric: return d0 + integral_scheduler(lr, span, t, total);
    case SchedulerKind::kPgh: return d0 + pgh_threshold(span, spec.beta, t, total);
    case SchedulerKind::kSine: return d0 + baseline_threshold(BaselineKind::kSine, span, t, total);
    case SchedulerKind::kLinear:
      return d0 + baseline_threshold(BaselineKind::kLinear, span, t, total);
    case SchedulerKind::kLog2: return d0 + baseline_threshold(BaselineKind::kLog2, span, t, total);
    case SchedulerKind::kPruneAtInit:
      return prune_at_init_threshold(spec.final_threshold, d0, t);
    case SchedulerKind::kTrainableStr:
      throw std::invalid_argument("trainable-str thresholds come from training, not a schedule");
  }
  throw std::logic_error("unhandled scheduler kind");
}

std::vector<double> threshold_sequence(const SchedulerSpec& spec, const LearningRateSpec& lr) {
  spec.validate();
  lr.validate();
  const std::size_t total = lr.total_iterations();
  std::vector<double> out(total + 1);
  for (std::size_t t = 0; t <= total; ++t) out[t] = threshold_at(spec, lr, t);
  return out;
}

std::vector<double> PenaltyTrace::values() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.value);
  return out;
}

PenaltyTrace implicit_penalty(std::span<const double> thresholds, std::span<const double> lr) {
  if (thresholds.size() != lr.size() + 1) {
    throw std::invalid_argument(fmt::format(
        "need T + 1 thresholds for T learning rates, got {} and {}", thresholds.size(),
        lr.size()));
  }
  PenaltyTrace trace;
  trace.entries.reserve(lr.size());
  for (std::size_t t = 0; t < lr.size(); ++t) {
    if (lr[t] < 0.0) throw std::domain_error(fmt::format("negative learning rate at {}", t));
    if (lr[t] == 0.0) {
      trace.entries.push_back({t, std::numeric_limits<double>::quiet_NaN(), false});
      continue;
    }
    trace.entries.push_back({t, (thresholds[t + 1] - thresholds[t]) / lr[t], true});
  }
  return trace;
}

std::vector<double> thresholds_from_penalty(const PenaltyTrace& trace,
                                            std::span<const double> lr, double d0) {
  if (trace.size() != lr.size()) {
    throw std::invalid_argument("penalty trace and learning rates are not aligned");
  }
  std::vector<double> out;
  out.reserve(lr.size() + 1);
  out.push_back(d0);
  for (std::size_t t = 0; t < lr.size(); ++t) {
    if (!trace.entries[t].defined) {
      throw std::domain_error(fmt::format("penalty undefined at iteration {}", t));
    }
    out.push_back(out.back() + trace.entries[t].value * lr[t]);
  }
  return out;
}

namespace {

struct TwoTerm {
  double hi;
  double lo;
};

TwoTerm two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

TwoTerm add(TwoTerm a, TwoTerm b) {
  const TwoTerm s = two_sum(a.hi, b.hi);
  const double lo = s.lo + a.lo + b.lo;
  const double hi = s.hi + lo;
  return {hi, lo - (hi - s.hi)};
}

}  // namespace

CompensatedSequence lats_threshold_compensated(const LearningRateSpec& lr, double mu, double d0,
                                               bool include_warmup) {
  if (!finite_nonneg(mu)) throw std::domain_error("LATS mu must be >= 0");
  const std::vector<double> eta = lr_sequence(lr);
  CompensatedSequence out;
  out.hi.reserve(eta.size() + 1);
  out.lo.reserve(eta.size() + 1);
  TwoTerm d{d0, 0.0};
  out.hi.push_back(d.hi);
  out.lo.push_back(d.lo);
  for (std::size_t t = 0; t < eta.size(); ++t) {
    const bool counted = include_warmup || t / lr.batches >= lr.warmup_epochs;
    if (counted) {
      const double p = mu * eta[t];
      d = add(d, {p, std::fma(mu, eta[t], -p)});
    }
    out.hi.push_back(d.hi);
    out.lo.push_back(d.lo);
  }
  return out;
}

PenaltyTrace implicit_penalty(const CompensatedSequence& thresholds, std::span<const double> lr) {
  if (thresholds.hi.size() != lr.size() + 1 || thresholds.lo.size() != thresholds.hi.size()) {
    throw std::invalid_argument(fmt::format(
        "need T + 1 thresholds for T learning rates, got {} and {}", thresholds.size(),
        lr.size()));
  }
  PenaltyTrace trace;
  trace.entries.reserve(lr.size());
  for (std::size_t t = 0; t < lr.size(); ++t) {
    if (lr[t] < 0.0) throw std::domain_error(fmt::format("negative learning rate at {}", t));
    if (lr[t] == 0.0) {
      trace.entries.push_back({t, std::numeric_limits<double>::quiet_NaN(), false});
      continue;
    }
    const TwoTerm diff = add({thresholds.hi[t + 1], thresholds.lo[t + 1]},
                             {-thresholds.hi[t], -thresholds.lo[t]});
    const double q = diff.hi / lr[t];
    const double r = std::fma(-q, lr[t], diff.hi) + diff.lo;
    trace.entries.push_back({t, q + r / lr[t], true});
  }
  return trace;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

StrThresholdStep str_trainable_threshold_step(double s, double grad_s, double eta,
                                              double lambda) {
  if (!(eta > 0.0)) throw std::domain_error("learning rate must be positive");
  if (!(lambda >= 0.0)) throw std::domain_error("weight decay must be >= 0");
  const double next = s - eta * (grad_s + lambda * s);
  return {next, sigmoid(next)};
}

double str_threshold_gradient(double s, std::span<const double> grad_w,
                              std::span<const double> theta, std::span<const double> w) {
  if (grad_w.size() != theta.size() || theta.size() != w.size()) {
    throw std::invalid_argument("gradient, hidden and actual weights differ in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) sum += grad_w[i] * sign(theta[i]);
  }
  const double sig = sigmoid(s);
  return -sig * (1.0 - sig) * sum;
}

}  // namespace softprune
