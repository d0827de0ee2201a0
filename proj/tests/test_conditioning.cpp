#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace rlw;

TEST(SmoothReward, NoMemoryTakesPrice) {
  RewardSmoother s(1, 0.0);
  s.set(0, 5.0);
  smooth_reward(s, GridCell{0, 0, 0}, 10.0);
  EXPECT_EQ(s[0], 10.0);
}

TEST(SmoothReward, FullMemoryKeepsState) {
  RewardSmoother s(1, 1.0);
  s.set(0, 5.0);
  smooth_reward(s, GridCell{0, 0, 0}, 10.0);
  EXPECT_EQ(s[0], 5.0);
}

TEST(SmoothReward, BlendsInitializedZero) {
  RewardSmoother s(1, 0.9);
  s.set(0, 0.0);
  smooth_reward(s, GridCell{0, 0, 0}, 10.0);
  EXPECT_NEAR(s[0], 1.0, 1e-15);
}

TEST(SmoothReward, FirstObservationInitializesUnlessLiteral) {
  RewardSmoother warm(2, 0.9), literal(2, 0.9, true);
  EXPECT_FALSE(warm.initialized(1));
  smooth_reward(warm, GridCell{1, 0, 1}, 10.0);
  smooth_reward(literal, GridCell{1, 0, 1}, 10.0);
  EXPECT_TRUE(warm.initialized(1));
  EXPECT_EQ(warm[1], 10.0);
  EXPECT_NEAR(literal[1], 1.0, 1e-15);
  EXPECT_EQ(warm[0], 0.0);
}

TEST(SmoothReward, RejectsNegativePriceAndBadBeta) {
  RewardSmoother s(1, 0.9);
  EXPECT_THROW(s.update(0, -1.0), std::invalid_argument);
  EXPECT_THROW(RewardSmoother(1, 1.5), std::invalid_argument);
}

TEST(SmoothReward, IsConvexCombination) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> price(0.0, 100.0), beta(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    RewardSmoother s(1, beta(rng));
    const double old = price(rng), p = price(rng);
    s.set(0, old);
    s.update(0, p);
    EXPECT_GE(s[0], std::min(old, p));
    EXPECT_LE(s[0], std::max(old, p));
  }
}

TEST(Standardizer, UpdateUsesFreshMean) {
  Standardizer s(0.9, 0.99);
  stdizer_update(s, 10.0);
  EXPECT_NEAR(s.mean(), 1.0, 1e-15);
  EXPECT_NEAR(s.var(), 0.81, 1e-15);
}

TEST(Standardizer, InputAtMeanOnlyDecaysVariance) {
  Standardizer s(0.9, 0.99);
  s.set_state(3.0, 2.0);
  s.update(3.0);
  EXPECT_EQ(s.mean(), 3.0);
  EXPECT_NEAR(s.var(), 0.99 * 2.0, 1e-15);
}

TEST(Standardizer, ConstantStreamConvergesToMidpoint) {
  Standardizer s(0.9, 0.99);
  for (int i = 0; i < 3000; ++i) s.update(7.0);
  EXPECT_NEAR(s.mean(), 7.0, 1e-9);
  EXPECT_LT(s.var(), 1e-6);
  EXPECT_NEAR(standardize(s, 7.0), 0.5, 1e-6);
}

TEST(Standardizer, OneDeviationEitherSide) {
  Standardizer s(0.99, 0.999);
  s.set_state(3.0, 4.0);
  EXPECT_EQ(standardize(s, 3.0), 0.5);
  EXPECT_NEAR(standardize(s, 5.0), 0.7310585786300049, 1e-15);
  EXPECT_NEAR(standardize(s, 1.0), 0.2689414213699951, 1e-15);
}

TEST(Standardizer, ZeroVarianceFallsBackToEpsilon) {
  Standardizer s(0.99, 0.999, 1e-9);
  s.set_state(1.0, 0.0);
  EXPECT_EQ(s.standardize(1.0), 0.5);
  EXPECT_NEAR(s.standardize(1.0 + 1e-9), 0.7310585786300049, 1e-6);
}

TEST(Standardizer, OutputStrictlyInsideUnitInterval) {
  Standardizer s(0.99, 0.999);
  for (double v : {0.0, 1e-300, 1.0}) {
    s.set_state(0.0, v);
    for (double x : {-1e300, -1e6, -40.0, 0.0, 40.0, 1e6, 1e300}) {
      const double y = s.standardize(x);
      EXPECT_GT(y, 0.0) << x;
      EXPECT_LT(y, 1.0) << x;
    }
  }
}

TEST(Standardizer, MonotoneInInput) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  Standardizer s(0.99, 0.999);
  s.set_state(1.5, 9.0);
  std::vector<double> xs(500);
  for (auto& x : xs) x = u(rng);
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 1; i < xs.size(); ++i) EXPECT_LE(s.standardize(xs[i - 1]), s.standardize(xs[i]));
}

TEST(Standardizer, PowerOfTwoScaleIsExact) {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> price(2.0, 0.7);
  std::vector<double> stream(2000);
  for (auto& x : stream) x = price(rng);
  for (double k : {0.25, 0.5, 2.0, 8.0}) {
    Standardizer a(0.99, 0.999), b(0.99, 0.999);
    for (double x : stream) {
      a.update(x);
      b.update(k * x);
      ASSERT_EQ(a.standardize(x), b.standardize(k * x)) << "k=" << k;
      ASSERT_EQ(a.standardize(x + 1.0), b.standardize(k * (x + 1.0))) << "k=" << k;
    }
  }
}

TEST(Standardizer, GeneralScaleIsInvariantToRounding) {
  std::mt19937_64 rng(6);
  std::lognormal_distribution<double> price(2.0, 0.7);
  for (double k : {0.3, 1.7, 13.0}) {
    Standardizer a(0.99, 0.999), b(0.99, 0.999);
    for (int i = 0; i < 2000; ++i) {
      const double x = price(rng);
      a.update(x);
      b.update(k * x);
      ASSERT_NEAR(a.standardize(x), b.standardize(k * x), 1e-9);
    }
  }
}

TEST(Standardizer, RejectsBadParameters) {
  EXPECT_THROW(Standardizer(1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(Standardizer(0.5, 0.5, 0.0), std::invalid_argument);
  Standardizer s(0.5, 0.5);
  EXPECT_THROW(s.update(std::nan("")), std::invalid_argument);
  EXPECT_THROW(s.set_state(0.0, -1.0), std::invalid_argument);
}
