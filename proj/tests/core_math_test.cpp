#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "softprune/core_math.hpp"

namespace softprune {
namespace {

Vector vec(std::initializer_list<double> v) { return make_vector(std::vector<double>(v)); }

TEST(SoftThreshold, ShrinksTowardsZero) {
  EXPECT_EQ(soft_threshold(vec({5, -1, 2}), 2.0), vec({3, 0, 0}));
}

TEST(SoftThreshold, ZeroThresholdIsIdentity) {
  const Vector x = vec({1.5, -2.25, 0.0, 1e-300});
  EXPECT_EQ(soft_threshold(x, 0.0), x);
}

TEST(SoftThreshold, BoundaryMapsToExactZero) {
  const Vector y = soft_threshold(vec({2, -2}), 2.0);
  EXPECT_EQ(y(0), 0.0);
  EXPECT_EQ(y(1), 0.0);
  EXPECT_FALSE(std::signbit(y(1)));
}

TEST(SoftThreshold, NegativeThresholdIsDomainError) {
  EXPECT_THROW(soft_threshold(vec({1.0}), -0.1), std::domain_error);
  EXPECT_THROW(soft_threshold(vec({1.0}), std::nan("")), std::domain_error);
}

TEST(Sign, Values) {
  EXPECT_EQ(sign(3.5), 1.0);
  EXPECT_EQ(sign(-2.0), -1.0);
  EXPECT_EQ(sign(0.0), 0.0);
  EXPECT_EQ(sign(-0.0), 0.0);
}

TEST(MakeVector, RejectsNonFinite) {
  EXPECT_THROW(make_vector(std::vector<double>{1.0, std::nan("")}), std::domain_error);
  EXPECT_THROW(make_vector(std::vector<double>{std::numeric_limits<double>::infinity()}),
               std::domain_error);
}

TEST(Sparsity, Examples) {
  EXPECT_DOUBLE_EQ(sparsity(vec({0, 0, 1, 0})), 0.75);
  EXPECT_DOUBLE_EQ(sparsity(Vector::Zero(7)), 1.0);
  EXPECT_DOUBLE_EQ(sparsity(vec({1e-9, 1.0}), 1e-8), 0.5);
}

TEST(SoftThresholdProperty, NonExpansive) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    Vector x(8), y(8);
    for (int i = 0; i < 8; ++i) {
      x(i) = 3.0 * rng.normal();
      y(i) = 3.0 * rng.normal();
    }
    const double d = 2.0 * rng.uniform();
    EXPECT_LE((soft_threshold(x, d) - soft_threshold(y, d)).norm(), (x - y).norm() + 1e-15);
  }
}

TEST(SoftThresholdProperty, LargerThresholdShrinksMore) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    Vector x(6);
    for (int i = 0; i < 6; ++i) x(i) = 2.0 * rng.normal();
    double d1 = rng.uniform(), d2 = rng.uniform();
    if (d1 > d2) std::swap(d1, d2);
    const Vector a = soft_threshold(x, d1), b = soft_threshold(x, d2);
    for (int i = 0; i < 6; ++i) EXPECT_LE(std::abs(b(i)), std::abs(a(i)));
  }
}

TEST(SoftThresholdProperty, SparsityCountsEntriesBelowThreshold) {
  Rng rng(13);
  Vector theta(200);
  for (int i = 0; i < 200; ++i) theta(i) = rng.normal();
  const double d = 0.7;
  const double expected =
      static_cast<double>((theta.array().abs() <= d).count()) / static_cast<double>(theta.size());
  EXPECT_DOUBLE_EQ(sparsity(soft_threshold(theta, d)), expected);
}

// Brute-force minimization of 1/2 (y - x)^2 + d |y| on a fine lattice.
TEST(SoftThresholdProperty, MinimizesProximalObjective) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = 4.0 * rng.normal();
    const double d = 2.0 * rng.uniform();
    auto obj = [&](double y) { return 0.5 * (y - x) * (y - x) + d * std::abs(y); };
    const double closed = soft_threshold(x, d);
    double best_y = 0.0, best = obj(0.0);
    for (int k = -200000; k <= 200000; ++k) {
      const double y = x + 1e-4 * k;
      if (obj(y) < best) {
        best = obj(y);
        best_y = y;
      }
    }
    EXPECT_LE(obj(closed), best + 1e-12);
    EXPECT_NEAR(closed, best_y, 2e-4);
  }
}

TEST(Integrate, Constant) {
  EXPECT_NEAR(integrate([](double) { return 1.0; }, 0.0, 1.0, 1e-12), 1.0, 1e-12);
}

TEST(Integrate, CosineAnnealingShape) {
  auto h = [](double x) { return 0.5 * (1.0 + std::cos(std::numbers::pi * x)); };
  EXPECT_NEAR(integrate(h, 0.0, 1.0, 1e-12), 0.5, 1e-12);
}

TEST(Integrate, PolynomialDecayShape) {
  auto h = [](double x) { return std::pow(1.0 - x, 0.9); };
  EXPECT_NEAR(integrate(h, 0.0, 1.0, 1e-10), 1.0 / 1.9, 1e-10);
}

TEST(Integrate, MatchesAntiderivativesOnSubintervals) {
  const double tol = 1e-11;
  auto cosine = [](double x) { return 0.5 * (1.0 + std::cos(std::numbers::pi * x)); };
  auto cosine_anti = [](double x) {
    return 0.5 * x + std::sin(std::numbers::pi * x) / (2.0 * std::numbers::pi);
  };
  auto poly = [](double x) { return std::pow(1.0 - x, 0.9); };
  auto poly_anti = [](double x) { return (1.0 - std::pow(1.0 - x, 1.9)) / 1.9; };
  for (double a : {0.0, 0.13, 0.5}) {
    for (double b : {0.61, 0.9, 1.0}) {
      EXPECT_NEAR(integrate(cosine, a, b, tol), cosine_anti(b) - cosine_anti(a), tol);
      EXPECT_NEAR(integrate(poly, a, b, tol), poly_anti(b) - poly_anti(a), tol);
      EXPECT_NEAR(integrate([](double) { return 1.0; }, a, b, tol), b - a, tol);
    }
  }
}

TEST(Integrate, JumpDiscontinuityConverges) {
  auto step = [](double x) { return x < 0.3 ? 0.0 : 1.0; };
  EXPECT_NEAR(integrate(step, 0.0, 1.0, 1e-9), 0.7, 1e-9);
}

TEST(Integrate, ExhaustedBudgetIsNumericError) {
  auto wild = [](double x) { return std::sin(1.0 / (x + 1e-9)); };
  EXPECT_THROW(integrate(wild, 0.0, 1.0, 1e-14, QuadratureOptions{8}), NumericError);
}

TEST(Integrate, RejectsBadBounds) {
  auto one = [](double) { return 1.0; };
  EXPECT_THROW(integrate(one, 0.5, 0.2, 1e-9), std::domain_error);
  EXPECT_THROW(integrate(one, 0.0, 1.5, 1e-9), std::domain_error);
  EXPECT_THROW(integrate(one, 0.0, 1.0, 0.0), std::domain_error);
}

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_EQ(a.normal(), b.normal());
    EXPECT_EQ(a.uniform(), b.uniform());
  }
}

TEST(RngTest, UniformRangeAndMoments) {
  Rng rng(3);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(RngTest, BelowStaysInRangeAndShuffleIsPermutation) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
  std::vector<int> items{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(items);
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

}  // namespace
}  // namespace softprune
