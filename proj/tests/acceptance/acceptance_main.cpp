#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "softprune/analysis.hpp"
#include "softprune/cli.hpp"
#include "softprune/core_math.hpp"
#include "softprune/io.hpp"
#include "softprune/ista.hpp"
#include "softprune/models.hpp"
#include "softprune/schedulers.hpp"
#include "softprune/trainer.hpp"

using namespace softprune;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds; 0 means untimed
  std::function<Outcome()> check;
};

LearningRateSpec cosine(std::size_t epochs, std::size_t batches, double eta_max) {
  return {LrKind::kCosineAnnealing, eta_max, 0.9, epochs, batches, 0};
}

Outcome lockstep_equivalence() {
  const Dataset data = gen_sparse_regression(400, 50, 5, 0.1, 7);
  TrainerConfig cfg;
  cfg.scheduler.kind = SchedulerKind::kSlats;
  cfg.scheduler.final_threshold = 0.5;
  cfg.lr = cosine(100, 20, 0.05);
  cfg.seed = 1;
  const EquivalenceReport r = verify_equivalence(cfg, Model::linear(50), data);
  const bool pass = r.total_steps == 2000 && r.mismatch == 0 && r.max_abs_deviation <= 1e-12;
  return {pass, fmt::format("steps={} verified={} precondition_violated={} ({:.1f}%) "
                            "mismatches={} max_dev={:.3g}",
                            r.total_steps, r.verified_equal, r.precondition_violated,
                            100.0 * static_cast<double>(r.precondition_violated) /
                                static_cast<double>(r.total_pairs()),
                            r.mismatch, r.max_abs_deviation)};
}

Outcome penalty_round_trip() {
  bool pass = true;
  std::size_t entries = 0;
  double plain_worst = 0.0;
  for (const LearningRateSpec& lr :
       {cosine(50, 20, 0.1), LearningRateSpec{LrKind::kConstant, 0.1, 0.9, 50, 20, 0}}) {
    const auto eta = lr_sequence(lr);
    for (double mu : {0.1, 1.0, 10.0}) {
      const auto trace = implicit_penalty(lats_threshold_compensated(lr, mu, 0.0), eta);
      for (const auto& e : trace.entries) {
        pass = pass && e.defined && e.value == mu;
        ++entries;
      }
      SchedulerSpec s;
      s.kind = SchedulerKind::kLatsExact;
      s.mu = mu;
      for (const auto& e : implicit_penalty(threshold_sequence(s, lr), eta).entries) {
        plain_worst = std::max(plain_worst, std::abs(e.value - mu) / mu);
      }
    }
  }
  return {pass, fmt::format("{} entries bit-equal to mu (compensated accumulation); "
                            "uncompensated doubles deviate up to {:.2g} relative",
                            entries, plain_worst)};
}

Outcome lats_closed_form() {
  double worst = 0.0;
  std::size_t points = 0;
  for (std::size_t epochs : {1, 2, 10, 100}) {
    for (std::size_t batches : {1, 4, 50}) {
      const LearningRateSpec lr = cosine(epochs, batches, 0.1);
      for (std::size_t n = 0; n < epochs; ++n) {
        for (std::size_t b = 0; b <= batches; ++b) {
          const double closed = lats_threshold_exact(lr, 1.0, 0.0, n, b);
          const double summed = static_cast<double>(
              oracle::lats_cosine_sum(0.1L, epochs, batches, 1.0L, 0.0L, n * batches + b));
          const double scale = std::max(std::abs(closed), std::abs(summed));
          if (scale > 0.0) worst = std::max(worst, std::abs(closed - summed) / scale);
          ++points;
        }
      }
    }
  }
  return {worst <= 1e-10, fmt::format("{} grid points, max relative error {:.3g}", points, worst)};
}

Outcome slats_checks() {
  const double big_d = 1.7;
  const std::size_t total = 1000;
  const bool ends = slats_threshold(big_d, 0, total) == 0.0 &&
                    slats_threshold(big_d, total, total) == big_d;
  const double mid_err =
      std::abs(slats_threshold(big_d, total / 2, total) / big_d - (1.0 / std::numbers::pi + 0.5));
  const LearningRateSpec lr = cosine(100, 1, 0.1);
  double integral_err = 0.0;
  for (std::size_t t = 1; t <= 100; ++t) {
    const double x = static_cast<double>(t) / 100.0;
    const double closed = std::sin(x * std::numbers::pi) / std::numbers::pi + x;
    integral_err = std::max(integral_err, std::abs(integral_scheduler(lr, 1.0, t, 100) - closed));
  }
  return {ends && mid_err <= 1e-12 && integral_err <= 1e-9,
          fmt::format("endpoints exact={} midpoint error={:.3g} integral vs closed form "
                      "max error={:.3g} over 100 points",
                      ends, mid_err, integral_err)};
}

Outcome pgh_roots() {
  const double expected[] = {0.743, 0.382, 0.231};
  const double betas[] = {0.1, 1e-5, 1e-10};
  bool pass = true;
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    const auto x = pgh_stop_fraction(betas[i], 0.1);
    pass = pass && x && std::abs(*x - expected[i]) <= 0.001;
    detail += fmt::format("beta={:g}: {:.4f}  ", betas[i], x ? *x : std::nan(""));
  }
  return {pass, detail};
}

Outcome pgh_limits() {
  double sup = 0.0;
  for (std::size_t t = 0; t < 1000; ++t) {
    sup = std::max(sup, std::abs(pgh_threshold(1.0, 1.0 - 1e-6, t, 999) -
                                 slats_threshold(1.0, t, 999)));
  }
  double init_gap = 0.0;
  for (std::size_t total : {10, 20, 40}) {
    for (std::size_t t = 0; t <= total; ++t) {
      init_gap = std::max(init_gap, std::abs(prune_at_init_threshold(1.0, 0.0, t) -
                                             pgh_threshold(1.0, 1e-300, t, total)));
    }
  }
  return {sup < 1e-4 && init_gap <= 1e-6,
          fmt::format("sup|g(1-1e-6) - g_slats|={:.3g}; prune-at-init vs beta=1e-300 for "
                      "T in {{10,20,40}}: {:.3g}",
                      sup, init_gap)};
}

Outcome tan_shape() {
  SchedulerSpec s;
  s.kind = SchedulerKind::kSine;
  s.final_threshold = 1.0;
  const PenaltyFitReport r = penalty_shape_test(s, cosine(1000, 1, 0.1), 0.1, 0.9);
  return {r.applicable && r.max_relative_deviation < 0.01,
          fmt::format("T={} C={:.6g} max relative deviation={:.3g} diverges_at_end={}",
                      r.total_iterations, r.fitted_c, r.max_relative_deviation,
                      r.diverges_at_end)};
}

Outcome ista_correctness() {
  // Orthonormal columns from a QR factorization.
  Rng rng(5);
  Matrix g(30, 12);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(30, 12);
  Vector b(30);
  for (Eigen::Index i = 0; i < 30; ++i) b(i) = 2.0 * rng.normal();
  IstaConfig unit;
  unit.step = 1.0;
  const LassoProblem ortho{q, b, 0.8};
  const double ortho_err =
      (solve_lasso(ortho, unit).x - soft_threshold(Vector(q.transpose() * b), 0.8)).norm();

  const Dataset d = gen_sparse_regression(20, 50, 5, 0.0, 1);
  LassoProblem p{d.inputs, d.targets, 0.0};
  const double top = (p.a.transpose() * p.b).cwiseAbs().maxCoeff();
  p.mu = 0.1 * top;
  IstaConfig cfg;
  cfg.record_objective = true;
  const IstaResult r = solve_lasso(p, cfg);
  const double cd_err = (r.x - oracle::coordinate_descent_lasso(p.a, p.b, p.mu)).norm();
  bool monotone = true;
  for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
    monotone = monotone && r.objective_history[k] <= r.objective_history[k - 1] + 1e-12;
  }

  LassoProblem null = p;
  null.mu = top;
  const bool zero = solve_lasso(null, IstaConfig{}).x.isZero(0.0);
  return {ortho_err <= 1e-10 && cd_err <= 1e-6 && zero && monotone,
          fmt::format("orthonormal error={:.3g}; vs coordinate descent={:.3g} ({} iterations, "
                      "converged={}); null solution={}; monotone descent={}",
                      ortho_err, cd_err, r.iterations, r.converged, zero, monotone)};
}

Outcome gradient_integrity() {
  double worst = 0.0;
  const auto check = [&](const Model& m, const Dataset& d, std::uint64_t seed) {
    Rng rng(seed);
    const auto batch = all_indices(d.size());
    for (int point = 0; point < 20; ++point) {
      Vector params(m.parameter_count());
      for (Eigen::Index i = 0; i < params.size(); ++i) params(i) = 0.5 * rng.normal();
      const Vector analytic = loss_and_grad(m, params, d, batch).grad;
      const Vector numeric = oracle::central_difference(
          [&](const Vector& x) { return loss_and_grad(m, x, d, batch).loss; }, params, 1e-5);
      worst = std::max(worst, oracle::max_relative_error(analytic, numeric, 1e-6));
    }
  };
  check(Model::linear(8), gen_sparse_regression(30, 8, 3, 0.1, 1), 11);
  check(Model::logistic(8), gen_sparse_classification(30, 8, 3, 2), 12);
  check(Model::mlp2(6, 5, 3), gen_sparse_regression(30, 6, 2, 0.1, 3), 13);
  return {worst <= 1e-5,
          fmt::format("3 models x 20 points, max per-coordinate relative error={:.3g}", worst)};
}

Outcome desk_pruning() {
  const Dataset data = gen_sparse_regression(200, 50, 5, 0.1, 7);
  const LearningRateSpec lr = cosine(50, 10, 0.05);

  // The trainer averages the loss over samples, which is the LASSO with A = X / sqrt(n).
  const double root_n = std::sqrt(static_cast<double>(data.size()));
  LassoProblem p{data.inputs / root_n, data.targets / root_n, 0.0};
  p.mu = 0.1 * (p.a.transpose() * p.b).cwiseAbs().maxCoeff();
  double lr_total = 0.0;
  for (double eta : lr_sequence(lr)) lr_total += eta;
  const double calibrated = p.mu * lr_total;

  const Vector lasso = oracle::coordinate_descent_lasso(p.a, p.b, p.mu);
  bool lasso_support = true;
  for (std::size_t j : data.true_support) lasso_support &= lasso(static_cast<Eigen::Index>(j)) != 0.0;

  std::vector<double> grid{0.0, 0.25 * calibrated, 0.5 * calibrated, calibrated, 2.0 * calibrated};
  std::vector<double> sparsities;
  bool support = false;
  for (double big_d : grid) {
    TrainerConfig cfg;
    cfg.scheduler.kind = SchedulerKind::kSlats;
    cfg.scheduler.final_threshold = big_d;
    cfg.lr = lr;
    cfg.seed = 3;
    const RunResult r = run(cfg, Model::linear(50), data);
    sparsities.push_back(sparsity(r.w));
    if (big_d == calibrated) {
      support = true;
      for (std::size_t j : data.true_support) support &= r.w(static_cast<Eigen::Index>(j)) != 0.0;
    }
  }
  bool monotone = true;
  for (std::size_t i = 1; i < sparsities.size(); ++i) monotone &= sparsities[i] >= sparsities[i - 1];
  std::string grid_text;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid_text += fmt::format("D={:.4g}:{:.2f} ", grid[i], sparsities[i]);
  }
  return {monotone && support,
          fmt::format("calibrated D={:.4g} (LASSO mu={:.4g} x sum eta={:.4g}, LASSO support ok={}); "
                      "sparsity {}; planted support kept={}",
                      calibrated, p.mu, lr_total, lasso_support, grid_text, support)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "softprune_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  int codes = 0;
  for (const char* tag : {"a", "b"}) {
    std::ostringstream out, err;
    codes += run_cli({"train", "--seed=11", "--trainer.record_trace=true", "--model.kind=mlp2",
                      "--output.path", (dir / (std::string(tag) + ".csv")).string(),
                      "--output.weights", (dir / (std::string(tag) + ".w")).string()},
                     out, err);
  }
  const std::string metrics = slurp(dir / "a.csv");
  const bool same = codes == 0 && !metrics.empty() && metrics == slurp(dir / "b.csv") &&
                    slurp(dir / "a.w") == slurp(dir / "b.w");
  const std::size_t bytes = metrics.size();
  fs::remove_all(dir);
  return {same, fmt::format("two train runs (seed 11, mlp2, per-step trace): exit codes sum={}, "
                            "metrics {} bytes, files byte-identical={}",
                            codes, bytes, same)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "lockstep equivalence", 10.0, lockstep_equivalence},
      {2, "implicit penalty round trip", 0.0, penalty_round_trip},
      {3, "LATS closed form vs summation", 0.0, lats_closed_form},
      {4, "S-LATS endpoints, midpoint, integral", 0.0, slats_checks},
      {5, "PGH stop fractions", 1.0, pgh_roots},
      {6, "PGH limits", 0.0, pgh_limits},
      {7, "sine penalty tan shape", 0.0, tan_shape},
      {8, "ISTA correctness", 0.0, ista_correctness},
      {9, "gradient integrity", 0.0, gradient_integrity},
      {10, "desk-scale pruning", 30.0, desk_pruning},
      {11, "determinism", 0.0, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing;
    if (c.time_limit > 0.0) {
      const bool in_time = secs < c.time_limit;
      o.pass = o.pass && in_time;
      timing = fmt::format(" [{:.3f} s, limit {:g} s]", secs, c.time_limit);
    }
    if (!o.pass) ++failures;
    fmt::print("{} {:>2} {}: {}{}\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail, timing);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
