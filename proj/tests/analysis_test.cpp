#include <cmath>
#include <numbers>
#include <stdexcept>

#include <gtest/gtest.h>

#include "softprune/analysis.hpp"

namespace softprune {
namespace {

TrainerConfig slats(double d_final, std::size_t epochs, std::size_t batches) {
  TrainerConfig c;
  c.scheduler.kind = SchedulerKind::kSlats;
  c.scheduler.final_threshold = d_final;
  c.lr = {LrKind::kCosineAnnealing, 0.05, 0.9, epochs, batches, 0};
  c.seed = 3;
  return c;
}

TEST(CheckStep, SingleWeightQuadratic) {
  // theta 2.5 -> 2.48, d 0.3 -> 0.4, eta 0.1, gradient 0.2 at w = 2.2.
  const StepCheckInput in{2.5, 2.48, 2.2, 2.08, 0.3, 0.4, 0.2, 0.1, 0.0};
  const StepCheck c = check_step(in);
  EXPECT_EQ(c.verdict, StepVerdict::kVerified);
  EXPECT_NEAR(c.reference, 2.08, 1e-15);
}

TEST(CheckStep, PreconditionVerdicts) {
  EXPECT_EQ(check_step({0.1, 0.2, 0.0, 0.0, 0.3, 0.3, -1.0, 0.1, 0.0}).verdict,
            StepVerdict::kZeroWeight);
  EXPECT_EQ(check_step({0.5, -0.1, 0.2, 0.0, 0.3, 0.3, 6.0, 0.1, 0.0}).verdict,
            StepVerdict::kSignChange);
  EXPECT_EQ(check_step({0.5, 0.25, 0.2, 0.0, 0.3, 0.3, 2.5, 0.1, 0.0}).verdict,
            StepVerdict::kBelowThreshold);
}

TEST(CheckStep, DetectsCorruptedUpdate) {
  const StepCheckInput in{2.5, 2.48, 2.2, 2.08 + 1e-9, 0.3, 0.4, 0.2, 0.1, 0.0};
  const StepCheck c = check_step(in);
  EXPECT_EQ(c.verdict, StepVerdict::kMismatch);
  EXPECT_NEAR(c.deviation, 1e-9, 1e-15);
}

TEST(CheckStep, WeightDecayUsesScaledShrinkage) {
  // theta' = theta - eta (g + lambda theta) = 2.5 - 0.1 (0.2 + 0.5 * 2.5) = 2.355.
  const double theta_next = 2.5 - 0.1 * (0.2 + 0.5 * 2.5);
  const double w_next = theta_next - 0.4;
  const StepCheck c = check_step({2.5, theta_next, 2.2, w_next, 0.3, 0.4, 0.2, 0.1, 0.5});
  EXPECT_EQ(c.verdict, StepVerdict::kVerified);
  EXPECT_FALSE(c.unscaled_matches);
}

TEST(VerifyEquivalence, ZeroThresholdRunVerifiesEverySurvivor) {
  const Dataset d = gen_sparse_regression(100, 20, 4, 0.1, 1);
  Model m = Model::linear(20);
  m.params = Vector::Constant(20, 0.01);
  const EquivalenceReport r = verify_equivalence(slats(0.0, 10, 5), m, d);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.total_steps, 50u);
  EXPECT_EQ(r.total_pairs(), 50u * 20u);
  EXPECT_EQ(r.skipped_below_threshold, 0u);
  EXPECT_GT(r.verified_equal, 0u);
}

TEST(VerifyEquivalence, FullSlatsRun) {
  const Dataset d = gen_sparse_regression(400, 50, 5, 0.1, 7);
  const EquivalenceReport r = verify_equivalence(slats(0.5, 100, 20), Model::linear(50), d);
  EXPECT_EQ(r.total_steps, 2000u);
  EXPECT_EQ(r.mismatch, 0u);
  EXPECT_LE(r.max_abs_deviation, 1e-12);
  EXPECT_GT(r.verified_equal, 0u);
  EXPECT_GT(r.precondition_violated, 0u);
  EXPECT_EQ(r.total_pairs(), 2000u * 50u);
  EXPECT_EQ(r.precondition_violated,
            r.skipped_zero_weight + r.skipped_below_threshold + r.skipped_sign_change);
}

TEST(VerifyEquivalence, StrSubgradientAndMlp) {
  const Dataset d = gen_sparse_regression(80, 6, 2, 0.1, 2);
  TrainerConfig c = slats(0.05, 10, 4);
  c.mode = GradientMode::kStrSubgradient;
  EXPECT_TRUE(verify_equivalence(c, Model::mlp2(6, 4, 5), d).passed());
}

TEST(VerifyEquivalence, WeightDecayNeedsScaledForm) {
  const Dataset d = gen_sparse_regression(100, 20, 4, 0.1, 1);
  TrainerConfig c = slats(0.3, 10, 5);
  c.weight_decay = 0.05;
  const EquivalenceReport r = verify_equivalence(c, Model::linear(20), d);
  EXPECT_TRUE(r.weight_decay_active);
  EXPECT_EQ(r.mismatch, 0u);
  EXPECT_GT(r.unscaled_decay_mismatches, 0u);
}

TEST(VerifyEquivalence, MomentumRejected) {
  const Dataset d = gen_sparse_regression(20, 4, 1, 0.1, 1);
  TrainerConfig c = slats(0.1, 2, 2);
  c.momentum = 0.9;
  EXPECT_THROW(verify_equivalence(c, Model::linear(4), d), std::invalid_argument);
}

TEST(PenaltyShape, SineUnderCosineFitsTangent) {
  SchedulerSpec s;
  s.kind = SchedulerKind::kSine;
  s.final_threshold = 1.0;
  const LearningRateSpec lr{LrKind::kCosineAnnealing, 0.1, 0.9, 1000, 1, 0};
  const PenaltyFitReport r = penalty_shape_test(s, lr);
  EXPECT_TRUE(r.applicable);
  EXPECT_EQ(r.total_iterations, 1000u);
  EXPECT_LT(r.max_relative_deviation, 0.01);
  EXPECT_TRUE(r.diverges_at_end);
  // Delta d = D sin(pi (2t + 1) / 2T) sin(pi / 2T) and eta = eta_max cos^2(pi t / 2T),
  // so C is close to 2 D sin(pi / 2T) / eta_max.
  EXPECT_NEAR(r.fitted_c / (2.0 * std::sin(std::numbers::pi / 2000.0) / 0.1), 1.0, 0.01);
}

TEST(PenaltyShape, LatsIsInapplicable) {
  SchedulerSpec s;
  s.kind = SchedulerKind::kLatsExact;
  s.mu = 1.0;
  const PenaltyFitReport r = penalty_shape_test(s, {LrKind::kCosineAnnealing, 0.1, 0.9, 10, 1, 0});
  EXPECT_FALSE(r.applicable);
  EXPECT_EQ(r.message, "constant penalty, tan fit inapplicable");
}

TEST(PenaltyShape, OtherInputsInapplicable) {
  SchedulerSpec s;
  s.kind = SchedulerKind::kSine;
  s.final_threshold = 1.0;
  EXPECT_FALSE(penalty_shape_test(s, {LrKind::kConstant, 0.1, 0.9, 10, 1, 0}).applicable);
  s.kind = SchedulerKind::kLinear;
  EXPECT_FALSE(penalty_shape_test(s, {LrKind::kCosineAnnealing, 0.1, 0.9, 10, 1, 0}).applicable);
}

TEST(EarlyPruning, StopFractionsAndFreeze) {
  const EarlyPruningReport r = early_pruning_report({0.1, 1e-10, 1.0}, 0.1);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_NEAR(*r.rows[0].stop_fraction, 0.743, 0.001);
  EXPECT_NEAR(*r.rows[1].stop_fraction, 0.231, 0.001);
  EXPECT_TRUE(r.rows[0].frozen);
  EXPECT_TRUE(r.rows[1].frozen);
  EXPECT_LE(r.rows[1].threshold_growth_after_stop, r.rows[0].threshold_growth_after_stop);
  // beta = 1 is reported, not asserted.
  EXPECT_EQ(r.rows[2].beta, 1.0);
}

TEST(Serialization, EquivalenceReportRoundTrips) {
  EquivalenceReport r;
  r.total_steps = 3;
  r.components = 2;
  r.verified_equal = 4;
  r.mismatch = 1;
  r.precondition_violated = 1;
  r.skipped_sign_change = 1;
  r.max_abs_deviation = 1.2345678901234567e-13;
  r.weight_decay_active = true;
  r.unscaled_decay_matches = 2;
  r.mismatches.push_back({1, 0, 0.1, 0.30000000000000004});
  const nlohmann::json j = r;
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<EquivalenceReport>(), r);
}

TEST(Serialization, FitAndEarlyPruningRoundTrip) {
  SchedulerSpec s;
  s.kind = SchedulerKind::kSine;
  s.final_threshold = 1.0;
  const PenaltyFitReport fit = penalty_shape_test(s, {LrKind::kCosineAnnealing, 0.1, 0.9, 200, 1, 0});
  EXPECT_EQ(nlohmann::json::parse(nlohmann::json(fit).dump()).get<PenaltyFitReport>(), fit);

  EarlyPruningReport ep;
  ep.level = 0.1;
  ep.rows.push_back({0.1, 0.743, 10, 0.01, true, 0.5, 0.9});
  ep.rows.push_back({1.0, std::nullopt, 20, 0.0, false, 0.8, 0.8});
  EXPECT_EQ(nlohmann::json::parse(nlohmann::json(ep).dump()).get<EarlyPruningReport>(), ep);
}

}  // namespace
}  // namespace softprune
