#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "softprune/core_math.hpp"
#include "softprune/models.hpp"
#include "softprune/schedulers.hpp"

namespace softprune {

/// How the hidden-weight gradient is formed from dL/dw.
enum class GradientMode {
  /// dL/dw masked by 1{|theta| > d}, the subgradient of the soft threshold.
  kStrSubgradient,
  /// dL/dw passed through unchanged (soft threshold treated as identity).
  kStdsIdentity,
};

std::string_view to_string(GradientMode mode);
GradientMode parse_gradient_mode(std::string_view name);

struct TrainerConfig {
  GradientMode mode = GradientMode::kStdsIdentity;
  SchedulerSpec scheduler;
  LearningRateSpec lr;
  double weight_decay = 0.0;
  /// Heavy-ball momentum. Non-zero values leave the vanilla SGD regime the
  /// equivalence checks assume.
  double momentum = 0.0;
  std::uint64_t seed = 0;
  /// Record metrics after every step instead of once per epoch.
  bool record_trace = false;

  void validate() const;
};

struct TrainState {
  Vector theta;  // hidden weights
  Vector w;      // actual weights, soft_threshold(theta, d)
  std::size_t t = 0;
  double d = 0.0;
  /// Sum of the learning rates of all completed steps.
  double lr_accum = 0.0;
  /// Threshold logit; only meaningful for trainable-str.
  double s = 0.0;
  Vector velocity;
};

/// Thrown by train_step once all T steps have been taken.
class RunComplete : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Non-finite loss or gradient; carries the state at the failing step.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, TrainState state)
      : std::runtime_error(what), state_(std::move(state)) {}
  const TrainState& state() const { return state_; }

 private:
  TrainState state_;
};

TrainState init(const Vector& w0, const TrainerConfig& cfg);

/// One iteration of reparameterized SGD:
///   theta' = theta - eta (g_hidden + lambda theta)
///   d'     = scheduled threshold at t + 1 (or the trained sigmoid(s'))
///   w'     = soft_threshold(theta', d')
TrainState train_step(const TrainState& state, const Vector& grad_w, const TrainerConfig& cfg);

struct MetricRow {
  std::size_t iter = 0;
  double loss = 0.0;
  double sparsity = 0.0;
  double threshold = 0.0;
  double penalty = 0.0;
};

struct StepEvent {
  const TrainState& before;
  const TrainState& after;
  const Vector& grad_w;
  double lr;
};

using StepObserver = std::function<void(const StepEvent&)>;

struct RunResult {
  Vector w;
  TrainState final_state;
  std::vector<MetricRow> metrics;
};

/// Runs T = N * B steps from model.params. Each epoch shuffles the sample
/// order with the configured seed and splits it into B contiguous batches.
///
/// With record_trace every row describes one step: the batch loss at the
/// step's starting weights, then sparsity, threshold and implicit penalty
/// after it. Otherwise one row per epoch carries the mean batch loss and the
/// epoch-level penalty (threshold growth over summed learning rate).
RunResult run(const TrainerConfig& cfg, const Model& model, const Dataset& data,
              const StepObserver& observer = {});

}  // namespace softprune
