#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "softprune/models.hpp"
#include "softprune/schedulers.hpp"
#include "softprune/trainer.hpp"

namespace softprune {

/// One (step, component) pair where the trainer disagreed with the ISTA form.
struct Mismatch {
  std::size_t step = 0;
  std::size_t component = 0;
  double trainer_value = 0.0;
  double ista_value = 0.0;

  bool operator==(const Mismatch&) const = default;
};

/// Outcome of checking the local update rule
///   w' = S_{d' - d}(w - eta dL/dw)
/// against every (step, component) pair of a training run. The three main
/// counts partition all pairs. The precondition breakdown explains which
/// requirement excluded a pair; a pair may fail more than one, and only the
/// first failing requirement is counted.
struct EquivalenceReport {
  std::size_t total_steps = 0;
  std::size_t components = 0;
  std::size_t verified_equal = 0;
  std::size_t precondition_violated = 0;
  std::size_t mismatch = 0;
  double max_abs_deviation = 0.0;
  double tolerance = 1e-12;

  std::size_t skipped_zero_weight = 0;
  std::size_t skipped_below_threshold = 0;
  std::size_t skipped_sign_change = 0;

  /// With weight decay, the shrinkage gains lambda * eta * |theta|. These
  /// count how often the scale-free form lambda * |theta| would also match.
  bool weight_decay_active = false;
  std::size_t unscaled_decay_matches = 0;
  std::size_t unscaled_decay_mismatches = 0;

  std::vector<Mismatch> mismatches;  // first few only

  bool passed() const { return mismatch == 0; }
  std::size_t total_pairs() const { return verified_equal + precondition_violated + mismatch; }

  bool operator==(const EquivalenceReport&) const = default;
};

struct StepCheckInput {
  double theta = 0.0;
  double theta_next = 0.0;
  double w = 0.0;
  double w_next = 0.0;
  double d = 0.0;
  double d_next = 0.0;
  double grad = 0.0;
  double lr = 0.0;
  double weight_decay = 0.0;
};

enum class StepVerdict { kVerified, kZeroWeight, kBelowThreshold, kSignChange, kMismatch };

struct StepCheck {
  StepVerdict verdict = StepVerdict::kVerified;
  double reference = 0.0;
  double deviation = 0.0;
  /// Weight decay only: whether the unscaled lambda |theta| form matches too.
  bool unscaled_matches = false;
};

/// Checks one component of one step against the ISTA reference.
StepCheck check_step(const StepCheckInput& in, double tolerance = 1e-12);

/// Runs the trainer and checks every step. Requires vanilla SGD (momentum 0).
EquivalenceReport verify_equivalence(const TrainerConfig& cfg, const Model& model,
                                     const Dataset& data, double tolerance = 1e-12,
                                     std::size_t max_recorded_mismatches = 16);

struct PenaltyFitReport {
  bool applicable = false;
  std::string message;
  std::size_t total_iterations = 0;
  double window_lo = 0.1;
  double window_hi = 0.9;
  double fitted_c = 0.0;
  double max_relative_deviation = 0.0;
  /// The trace blows up towards t = T (tan singularity) and is not fitted there.
  bool diverges_at_end = false;
  double tail_ratio = 0.0;

  bool operator==(const PenaltyFitReport&) const = default;
};

/// Fits mu^(t) ~ C tan(t pi / 2T) on t/T in [window_lo, window_hi] for the
/// sine scheduler under cosine annealing.
PenaltyFitReport penalty_shape_test(const SchedulerSpec& scheduler, const LearningRateSpec& lr,
                                    double window_lo = 0.1, double window_hi = 0.9);

struct EarlyPruningRow {
  double beta = 0.0;
  std::optional<double> stop_fraction;
  std::size_t stop_iteration = 0;
  /// (d(T) - d(stop)) / D, measured on the trainer's threshold trace.
  double threshold_growth_after_stop = 0.0;
  bool frozen = false;
  double sparsity_at_stop = 0.0;
  double final_sparsity = 0.0;

  bool operator==(const EarlyPruningRow&) const = default;
};

struct EarlyPruningSetup {
  double final_threshold = 0.5;
  LearningRateSpec lr{LrKind::kCosineAnnealing, 0.05, 0.9, 50, 10, 0};
  std::size_t samples = 200;
  std::size_t features = 50;
  std::size_t nonzero = 5;
  double noise = 0.1;
  std::uint64_t seed = 7;
  double freeze_fraction = 0.05;
};

struct EarlyPruningReport {
  double level = 0.1;
  std::vector<EarlyPruningRow> rows;

  bool operator==(const EarlyPruningReport&) const = default;
};

/// Stop fractions for each beta, plus a PGH training run per beta checking that
/// the threshold grows by less than `freeze_fraction` of D after the stop.
EarlyPruningReport early_pruning_report(const std::vector<double>& betas, double level,
                                        const EarlyPruningSetup& setup = {});

void to_json(nlohmann::json& j, const Mismatch& m);
void from_json(const nlohmann::json& j, Mismatch& m);
void to_json(nlohmann::json& j, const EquivalenceReport& r);
void from_json(const nlohmann::json& j, EquivalenceReport& r);
void to_json(nlohmann::json& j, const PenaltyFitReport& r);
void from_json(const nlohmann::json& j, PenaltyFitReport& r);
void to_json(nlohmann::json& j, const EarlyPruningRow& r);
void from_json(const nlohmann::json& j, EarlyPruningRow& r);
void to_json(nlohmann::json& j, const EarlyPruningReport& r);
void from_json(const nlohmann::json& j, EarlyPruningReport& r);

}  // namespace softprune
