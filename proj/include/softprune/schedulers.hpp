#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace softprune {

enum class LrKind { kCosineAnnealing, kPolynomialDecay, kConstant };

/// Epoch-wise learning-rate schedule eta^(n,b) = h(n/N), constant inside an
/// epoch. Optional linear warmup scales the first `warmup_epochs` epochs by
/// (n+1)/warmup_epochs.
struct LearningRateSpec {
  LrKind kind = LrKind::kCosineAnnealing;
  double eta_max = 0.1;
  double kappa = 0.9;  // polynomial decay only
  std::size_t epochs = 1;
  std::size_t batches = 1;
  std::size_t warmup_epochs = 0;

  std::size_t total_iterations() const { return epochs * batches; }
  void validate() const;
};

enum class SchedulerKind {
  kLatsExact,
  kSlats,
  kIntegralGeneric,
  kPgh,
  kSine,
  kLinear,
  kLog2,
  kTrainableStr,
  kPruneAtInit,
};

/// Declarative description of a threshold scheduler d^(t).
struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::kSlats;
  double final_threshold = 0.0;  // D
  double mu = 0.0;               // LATS-exact only
  double beta = 0.1;             // PGH only, in (0, 1]
  double initial_threshold = 0.0;
  double s_init = -5.0;          // trainable-STR logit
  /// LATS-exact: accumulate the warmup epochs' learning rates too.
  bool lats_include_warmup = true;

  void validate() const;
};

std::string_view to_string(LrKind kind);
std::string_view to_string(SchedulerKind kind);
LrKind parse_lr_kind(std::string_view name);
SchedulerKind parse_scheduler_kind(std::string_view name);

/// The continuous learning-rate function h on [0, 1], without warmup.
std::function<double(double)> lr_function(const LearningRateSpec& spec);

/// eta^(n,b) for epoch 0 <= n < N and batch 1 <= b <= B.
double lr_at(const LearningRateSpec& spec, std::size_t epoch, std::size_t batch);

/// Learning rate of optimizer step t in [0, T): epoch t / B.
double lr_at_iteration(const LearningRateSpec& spec, std::size_t t);

/// Per-step learning rates for t = 0..T-1.
std::vector<double> lr_sequence(const LearningRateSpec& spec);

/// d^(n,b) = d0 + mu * [b h(n/N) + B sum_{i<n} h(i/N)], the threshold after
/// nB + b optimizer steps. Cosine annealing without warmup uses the closed
/// form; everything else sums the realized learning rates. 0 <= b <= B.
double lats_threshold_exact(const LearningRateSpec& lr, double mu, double d0,
                            std::size_t epoch, std::size_t batch,
                            bool include_warmup = true);

/// Same as above by direct summation only (never the closed form).
double lats_threshold_summed(const LearningRateSpec& lr, double mu, double d0,
                             std::size_t epoch, std::size_t batch,
                             bool include_warmup = true);

/// LATS indexed by optimizer step t in [0, T].
double lats_threshold_at(const LearningRateSpec& lr, double mu, double d0,
                         std::size_t t, bool include_warmup = true);

/// D [sin(t pi / T) / pi + t / T].
double slats_threshold(double final_threshold, std::size_t t, std::size_t total);

/// D * int_0^{t/T} h / int_0^1 h using adaptive quadrature.
double integral_scheduler(const LearningRateSpec& lr, double final_threshold,
                          std::size_t t, std::size_t total, double tol = 1e-13);

/// Normalized PGH schedule g(x) for beta in (0, 1]; beta == 1 is S-LATS.
double pgh_fraction(double beta, double x);

/// g'(x), differentiated from the closed form.
double pgh_fraction_derivative(double beta, double x);

double pgh_threshold(double final_threshold, double beta, std::size_t t,
                     std::size_t total);

/// Smallest x in (0, 1] with g'(x) < level, by bisection. Empty when the
/// derivative never falls below `level`.
std::optional<double> pgh_stop_fraction(double beta, double level = 0.1,
                                        double x_tol = 1e-12);

/// Limit beta -> 0: no threshold at t = 0, the full D from the first step on.
double prune_at_init_threshold(double final_threshold, double d0, std::size_t t);

enum class BaselineKind { kSine, kLinear, kLog2 };

double baseline_threshold(BaselineKind kind, double final_threshold, std::size_t t,
                          std::size_t total);

/// Threshold of a non-trainable scheduler after t of T steps.
double threshold_at(const SchedulerSpec& spec, const LearningRateSpec& lr,
                    std::size_t t);

/// d^(0..T) for a non-trainable scheduler.
std::vector<double> threshold_sequence(const SchedulerSpec& spec,
                                       const LearningRateSpec& lr);

struct PenaltyEntry {
  std::size_t iter = 0;
  double value = 0.0;
  /// False where the learning rate is zero and the quotient is undefined.
  bool defined = true;
};

/// Implicit L1 coefficients mu^(t) = (d^(t+1) - d^(t)) / eta^(t), one entry per
/// optimizer step t = 0..T-1.
struct PenaltyTrace {
  std::vector<PenaltyEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<double> values() const;
};

/// thresholds has T + 1 entries (t = 0..T); lr has T entries.
PenaltyTrace implicit_penalty(std::span<const double> thresholds,
                              std::span<const double> lr);

/// A threshold sequence kept as unevaluated sums hi[t] + lo[t], where lo
/// holds the rounding error of accumulating hi in doubles.
struct CompensatedSequence {
  std::vector<double> hi;
  std::vector<double> lo;

  std::size_t size() const { return hi.size(); }
};

/// LATS by the recursion d^(t+1) = d^(t) + mu eta^(t) for t = 0..T-1, with
/// error-free products and sums so the increments are not lost to rounding.
CompensatedSequence lats_threshold_compensated(const LearningRateSpec& lr, double mu, double d0,
                                               bool include_warmup = true);

/// Implicit penalty of a compensated sequence: the difference of successive
/// hi + lo pairs divided by eta, rounded once.
PenaltyTrace implicit_penalty(const CompensatedSequence& thresholds, std::span<const double> lr);

/// Inverse direction: d^(t+1) = d^(t) + mu^(t) eta^(t), starting from d0.
std::vector<double> thresholds_from_penalty(const PenaltyTrace& trace,
                                            std::span<const double> lr, double d0);

double sigmoid(double x);

struct StrThresholdStep {
  double logit;
  double threshold;
};

/// s' = s - eta (grad_s + lambda s), d' = sigmoid(s').
StrThresholdStep str_trainable_threshold_step(double s, double grad_s, double eta,
                                              double lambda);

/// dL/ds for w = S_{sigmoid(s)}(theta):
/// -sigmoid(s)(1 - sigmoid(s)) * sum_{w_i != 0} dL/dw_i * sign(theta_i).
double str_threshold_gradient(double s, std::span<const double> grad_w,
                              std::span<const double> theta,
                              std::span<const double> w);

}  // namespace softprune
