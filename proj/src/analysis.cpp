#include "softprune/analysis.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace softprune {

namespace {

// The reference path below deliberately avoids the library's soft_threshold
// and sign helpers so that a defect there cannot hide in both paths.
double ref_sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double ref_shrink(double x, double amount) {
  const double magnitude = std::abs(x) - amount;
  return magnitude > 0.0 ? ref_sign(x) * magnitude : 0.0;
}

}  // namespace

StepCheck check_step(const StepCheckInput& in, double tolerance) {
  StepCheck out;
  if (in.w == 0.0) {
    out.verdict = StepVerdict::kZeroWeight;
    return out;
  }
  if (ref_sign(in.theta_next) != ref_sign(in.theta)) {
    out.verdict = StepVerdict::kSignChange;
    return out;
  }

  // SGD target without any regularization.
  const double target = in.w - in.lr * in.grad;
  const double decay = in.lr * in.weight_decay * std::abs(in.theta);
  // The target keeps theta's sign exactly when |theta'| + eta lambda |theta| > d.
  if (!(std::abs(in.theta_next) + decay > in.d)) {
    out.verdict = StepVerdict::kBelowThreshold;
    return out;
  }

  out.reference = ref_shrink(target, in.d_next - in.d + decay);
  out.deviation = std::abs(out.reference - in.w_next);
  out.verdict = out.deviation <= tolerance ? StepVerdict::kVerified : StepVerdict::kMismatch;

  if (in.weight_decay > 0.0) {
    const double unscaled =
        ref_shrink(target, in.d_next - in.d + in.weight_decay * std::abs(in.theta));
    out.unscaled_matches = std::abs(unscaled - in.w_next) <= tolerance;
  }
  return out;
}

EquivalenceReport verify_equivalence(const TrainerConfig& cfg, const Model& model,
                                     const Dataset& data, double tolerance,
                                     std::size_t max_recorded_mismatches) {
  if (cfg.momentum != 0.0) {
    throw std::invalid_argument("equivalence checks require vanilla SGD (momentum = 0)");
  }
  EquivalenceReport report;
  report.tolerance = tolerance;
  report.components = model.parameter_count();
  report.weight_decay_active = cfg.weight_decay > 0.0;

  const auto observer = [&](const StepEvent& ev) {
    ++report.total_steps;
    for (Eigen::Index i = 0; i < ev.grad_w.size(); ++i) {
      const StepCheckInput in{ev.before.theta[i], ev.after.theta[i], ev.before.w[i],
                              ev.after.w[i],     ev.before.d,        ev.after.d,
                              ev.grad_w[i],      ev.lr,              cfg.weight_decay};
      const StepCheck check = check_step(in, tolerance);
      switch (check.verdict) {
        case StepVerdict::kVerified:
          ++report.verified_equal;
          report.max_abs_deviation = std::max(report.max_abs_deviation, check.deviation);
          break;
        case StepVerdict::kMismatch:
          ++report.mismatch;
          if (report.mismatches.size() < max_recorded_mismatches) {
            report.mismatches.push_back({ev.before.t, static_cast<std::size_t>(i), in.w_next,
                                         check.reference});
          }
          break;
        case StepVerdict::kZeroWeight:
          ++report.precondition_violated;
          ++report.skipped_zero_weight;
          break;
        case StepVerdict::kBelowThreshold:
          ++report.precondition_violated;
          ++report.skipped_below_threshold;
          break;
        case StepVerdict::kSignChange:
          ++report.precondition_violated;
          ++report.skipped_sign_change;
          break;
      }
      if (report.weight_decay_active && (check.verdict == StepVerdict::kVerified ||
                                         check.verdict == StepVerdict::kMismatch)) {
        if (check.unscaled_matches) {
          ++report.unscaled_decay_matches;
        } else {
          ++report.unscaled_decay_mismatches;
        }
      }
    }
  };

  run(cfg, model, data, observer);
  return report;
}

PenaltyFitReport penalty_shape_test(const SchedulerSpec& scheduler, const LearningRateSpec& lr,
                                    double window_lo, double window_hi) {
  PenaltyFitReport report;
  report.window_lo = window_lo;
  report.window_hi = window_hi;
  report.total_iterations = lr.total_iterations();
  if (scheduler.kind == SchedulerKind::kLatsExact) {
    report.message = "constant penalty, tan fit inapplicable";
    return report;
  }
  if (scheduler.kind != SchedulerKind::kSine) {
    report.message = fmt::format("tan fit applies to the sine scheduler, not {}",
                                 to_string(scheduler.kind));
    return report;
  }
  if (lr.kind != LrKind::kCosineAnnealing) {
    report.message = "tan fit needs a cosine-annealing learning rate";
    return report;
  }
  if (!(0.0 < window_lo && window_lo < window_hi && window_hi < 1.0)) {
    throw std::invalid_argument("fit window must satisfy 0 < lo < hi < 1");
  }

  const auto thresholds = threshold_sequence(scheduler, lr);
  const auto rates = lr_sequence(lr);
  const PenaltyTrace trace = implicit_penalty(thresholds, rates);
  const double total = static_cast<double>(lr.total_iterations());

  std::vector<std::pair<double, double>> window;  // (tan shape, penalty)
  std::size_t last_in_window = 0;
  for (const auto& e : trace.entries) {
    const double x = static_cast<double>(e.iter) / total;
    if (x < window_lo || x > window_hi || !e.defined) continue;
    window.emplace_back(std::tan(static_cast<double>(e.iter) * std::numbers::pi / (2.0 * total)),
                        e.value);
    last_in_window = e.iter;
  }
  if (window.empty()) {
    report.message = "fit window contains no iterations";
    return report;
  }

  double num = 0.0;
  double den = 0.0;
  for (const auto& [shape, value] : window) {
    num += shape * value;
    den += shape * shape;
  }
  report.fitted_c = num / den;
  for (const auto& [shape, value] : window) {
    const double model = report.fitted_c * shape;
    report.max_relative_deviation =
        std::max(report.max_relative_deviation, std::abs(value - model) / std::abs(model));
  }

  const auto& tail = trace.entries.back();
  const double anchor = trace.entries[last_in_window].value;
  report.tail_ratio = tail.defined && anchor != 0.0 ? tail.value / anchor
                                                    : std::numeric_limits<double>::infinity();
  report.diverges_at_end = report.tail_ratio > 10.0;
  report.applicable = true;
  report.message = report.diverges_at_end
                       ? "fitted on window; penalty diverges towards t = T (not fitted there)"
                       : "fitted on window";
  return report;
}

EarlyPruningReport early_pruning_report(const std::vector<double>& betas, double level,
                                        const EarlyPruningSetup& setup) {
  EarlyPruningReport report;
  report.level = level;
  const Dataset data =
      gen_sparse_regression(setup.samples, setup.features, setup.nonzero, setup.noise, setup.seed);
  const std::size_t total = setup.lr.total_iterations();

  for (double beta : betas) {
    if (!(beta > 0.0 && beta <= 1.0)) {
      throw std::invalid_argument(fmt::format("beta {} outside (0, 1]", beta));
    }
    EarlyPruningRow row;
    row.beta = beta;
    row.stop_fraction = pgh_stop_fraction(beta, level);

    TrainerConfig cfg;
    cfg.mode = GradientMode::kStdsIdentity;
    cfg.scheduler.kind = SchedulerKind::kPgh;
    cfg.scheduler.beta = beta;
    cfg.scheduler.final_threshold = setup.final_threshold;
    cfg.lr = setup.lr;
    cfg.seed = setup.seed;
    cfg.record_trace = true;
    Model model = Model::linear(setup.features);
    const RunResult result = run(cfg, model, data);

    row.final_sparsity = result.metrics.back().sparsity;
    if (!row.stop_fraction) {
      row.stop_iteration = total;
      row.sparsity_at_stop = row.final_sparsity;
      row.frozen = false;
      report.rows.push_back(row);
      continue;
    }
    row.stop_iteration =
        static_cast<std::size_t>(std::ceil(*row.stop_fraction * static_cast<double>(total)));
    const double d_stop = row.stop_iteration == 0
                              ? cfg.scheduler.initial_threshold
                              : result.metrics[row.stop_iteration - 1].threshold;
    row.sparsity_at_stop = row.stop_iteration == 0
                               ? sparsity(model.params)
                               : result.metrics[row.stop_iteration - 1].sparsity;
    const double growth = result.metrics.back().threshold - d_stop;
    row.threshold_growth_after_stop =
        setup.final_threshold > 0.0 ? growth / setup.final_threshold : 0.0;
    row.frozen = row.threshold_growth_after_stop < setup.freeze_fraction;
    report.rows.push_back(row);
  }
  return report;
}

namespace {

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const Mismatch& m) {
  j = {{"step", m.step},
       {"component", m.component},
       {"trainer_value", m.trainer_value},
       {"ista_value", m.ista_value}};
}

void from_json(const nlohmann::json& j, Mismatch& m) {
  m.step = j.at("step").get<std::size_t>();
  m.component = j.at("component").get<std::size_t>();
  m.trainer_value = number_or_nan(j.at("trainer_value"));
  m.ista_value = number_or_nan(j.at("ista_value"));
}

void to_json(nlohmann::json& j, const EquivalenceReport& r) {
  j = {{"passed", r.passed()},
       {"total_steps", r.total_steps},
       {"components", r.components},
       {"verified_equal", r.verified_equal},
       {"precondition_violated", r.precondition_violated},
       {"mismatch", r.mismatch},
       {"max_abs_deviation", r.max_abs_deviation},
       {"tolerance", r.tolerance},
       {"skipped_zero_weight", r.skipped_zero_weight},
       {"skipped_below_threshold", r.skipped_below_threshold},
       {"skipped_sign_change", r.skipped_sign_change},
       {"weight_decay_active", r.weight_decay_active},
       {"unscaled_decay_matches", r.unscaled_decay_matches},
       {"unscaled_decay_mismatches", r.unscaled_decay_mismatches},
       {"mismatches", r.mismatches}};
}

void from_json(const nlohmann::json& j, EquivalenceReport& r) {
  r.total_steps = j.at("total_steps").get<std::size_t>();
  r.components = j.at("components").get<std::size_t>();
  r.verified_equal = j.at("verified_equal").get<std::size_t>();
  r.precondition_violated = j.at("precondition_violated").get<std::size_t>();
  r.mismatch = j.at("mismatch").get<std::size_t>();
  r.max_abs_deviation = number_or_nan(j.at("max_abs_deviation"));
  r.tolerance = number_or_nan(j.at("tolerance"));
  r.skipped_zero_weight = j.at("skipped_zero_weight").get<std::size_t>();
  r.skipped_below_threshold = j.at("skipped_below_threshold").get<std::size_t>();
  r.skipped_sign_change = j.at("skipped_sign_change").get<std::size_t>();
  r.weight_decay_active = j.at("weight_decay_active").get<bool>();
  r.unscaled_decay_matches = j.at("unscaled_decay_matches").get<std::size_t>();
  r.unscaled_decay_mismatches = j.at("unscaled_decay_mismatches").get<std::size_t>();
  r.mismatches = j.at("mismatches").get<std::vector<Mismatch>>();
}

void to_json(nlohmann::json& j, const PenaltyFitReport& r) {
  j = {{"applicable", r.applicable},
       {"message", r.message},
       {"total_iterations", r.total_iterations},
       {"window_lo", r.window_lo},
       {"window_hi", r.window_hi},
       {"fitted_c", r.fitted_c},
       {"max_relative_deviation", r.max_relative_deviation},
       {"diverges_at_end", r.diverges_at_end},
       {"tail_ratio", r.tail_ratio}};
}

void from_json(const nlohmann::json& j, PenaltyFitReport& r) {
  r.applicable = j.at("applicable").get<bool>();
  r.message = j.at("message").get<std::string>();
  r.total_iterations = j.at("total_iterations").get<std::size_t>();
  r.window_lo = number_or_nan(j.at("window_lo"));
  r.window_hi = number_or_nan(j.at("window_hi"));
  r.fitted_c = number_or_nan(j.at("fitted_c"));
  r.max_relative_deviation = number_or_nan(j.at("max_relative_deviation"));
  r.diverges_at_end = j.at("diverges_at_end").get<bool>();
  r.tail_ratio = number_or_nan(j.at("tail_ratio"));
}

void to_json(nlohmann::json& j, const EarlyPruningRow& r) {
  j = {{"beta", r.beta},
       {"stop_fraction", r.stop_fraction ? nlohmann::json(*r.stop_fraction) : nlohmann::json()},
       {"stop_iteration", r.stop_iteration},
       {"threshold_growth_after_stop", r.threshold_growth_after_stop},
       {"frozen", r.frozen},
       {"sparsity_at_stop", r.sparsity_at_stop},
       {"final_sparsity", r.final_sparsity}};
}

void from_json(const nlohmann::json& j, EarlyPruningRow& r) {
  r.beta = j.at("beta").get<double>();
  const auto& stop = j.at("stop_fraction");
  r.stop_fraction = stop.is_null() ? std::nullopt : std::optional<double>(stop.get<double>());
  r.stop_iteration = j.at("stop_iteration").get<std::size_t>();
  r.threshold_growth_after_stop = number_or_nan(j.at("threshold_growth_after_stop"));
  r.frozen = j.at("frozen").get<bool>();
  r.sparsity_at_stop = number_or_nan(j.at("sparsity_at_stop"));
  r.final_sparsity = number_or_nan(j.at("final_sparsity"));
}

void to_json(nlohmann::json& j, const EarlyPruningReport& r) {
  j = {{"level", r.level}, {"rows", r.rows}};
}

void from_json(const nlohmann::json& j, EarlyPruningReport& r) {
  r.level = j.at("level").get<double>();
  r.rows = j.at("rows").get<std::vector<EarlyPruningRow>>();
}

}  // namespace softprune
