#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "evorep/errors.hpp"
#include "evorep/stats.hpp"
#include "oracles.hpp"

namespace evorep::stats {
namespace {

TEST(Stats, MeanAndSampleVariance) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(mean(v), 2.5);
  EXPECT_DOUBLE_EQ(sample_variance(v), 5.0 / 3.0);
  EXPECT_EQ(sample_variance(std::vector<double>{1.0}), 0.0);
}

TEST(IncompleteBeta, ClosedForms) {
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    EXPECT_NEAR(incomplete_beta(1.0, 1.0, x), x, 1e-14);
    EXPECT_NEAR(incomplete_beta(3.0, 1.0, x), x * x * x, 1e-14);
    EXPECT_NEAR(incomplete_beta(1.0, 4.0, x), 1.0 - std::pow(1.0 - x, 4.0), 1e-14);
  }
  for (double a : {0.5, 2.0, 7.5, 60.0}) EXPECT_NEAR(incomplete_beta(a, a, 0.5), 0.5, 1e-13);
}

TEST(IncompleteBeta, Symmetry) {
  for (double x : {0.05, 0.3, 0.8}) {
    EXPECT_NEAR(incomplete_beta(2.5, 7.0, x), 1.0 - incomplete_beta(7.0, 2.5, 1.0 - x), 1e-14);
  }
}

TEST(IncompleteBeta, RejectsBadArguments) {
  EXPECT_THROW(incomplete_beta(0.0, 1.0, 0.5), ConfigError);
  EXPECT_THROW(incomplete_beta(1.0, 1.0, 1.5), ConfigError);
}

TEST(StudentT, KnownTails) {
  EXPECT_DOUBLE_EQ(student_t_two_sided_p(0.0, 5.0), 1.0);
  EXPECT_NEAR(student_t_two_sided_p(1.0, 1.0), 0.5, 1e-14);  // Cauchy
  for (double t : {0.3, 1.7, 4.0}) {
    EXPECT_NEAR(student_t_two_sided_p(t, 2.0), 1.0 - t / std::sqrt(t * t + 2.0), 1e-14);
    EXPECT_NEAR(student_t_two_sided_p(-t, 2.0), student_t_two_sided_p(t, 2.0), 1e-15);
  }
}

TEST(PairedTTest, WorkedExample) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{0.0, 0.0, 0.0};
  const TTestResult r = paired_t_test(a, b);
  EXPECT_NEAR(r.t, 2.0 * std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(r.p, 1.0 - std::sqrt(6.0 / 7.0), 1e-12);
  EXPECT_NEAR(r.p, 0.0742, 5e-5);
  EXPECT_EQ(r.df, 2.0);
  EXPECT_EQ(r.n, 3u);
  EXPECT_FALSE(r.degenerate);
}

TEST(PairedTTest, IdenticalSamples) {
  const std::vector<double> a{0.3, 0.1, 0.9};
  const TTestResult r = paired_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  EXPECT_TRUE(r.degenerate);
}

TEST(PairedTTest, ZeroMeanDifferences) {
  const std::vector<double> a{1.0, -1.0, 1.0, -1.0};
  const std::vector<double> b{0.0, 0.0, 0.0, 0.0};
  const TTestResult r = paired_t_test(a, b);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_NEAR(r.p, 1.0, 1e-15);
  EXPECT_FALSE(r.degenerate);
}

TEST(PairedTTest, ConstantNonzeroDifference) {
  const std::vector<double> a{2.0, 3.0, 4.0};
  const std::vector<double> b{1.0, 2.0, 3.0};
  const TTestResult r = paired_t_test(a, b);
  EXPECT_TRUE(std::isinf(r.t));
  EXPECT_GT(r.t, 0.0);
  EXPECT_EQ(r.p, 0.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_LT(paired_t_test(b, a).t, 0.0);
}

TEST(PairedTTest, RejectsBadInput) {
  const std::vector<double> three{1.0, 2.0, 3.0};
  const std::vector<double> two{1.0, 2.0};
  const std::vector<double> one{1.0};
  EXPECT_THROW(paired_t_test(three, two), ConfigError);
  EXPECT_THROW(paired_t_test(one, one), ConfigError);
}

TEST(PairedTTest, MatchesSeriesOracleOnRandomCases) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(2, 201);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  for (int c = 0; c < 100; ++c) {
    const int n = size(rng);
    const double delta = shift(rng);
    std::vector<double> a(static_cast<std::size_t>(n));
    std::vector<double> b(static_cast<std::size_t>(n));
    long double sum = 0.0L;
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = noise(rng) + delta;
      b[static_cast<std::size_t>(i)] = noise(rng);
      sum += static_cast<long double>(a[static_cast<std::size_t>(i)]) - b[static_cast<std::size_t>(i)];
    }
    const long double m = sum / n;
    long double ss = 0.0L;
    for (int i = 0; i < n; ++i) {
      const long double d = static_cast<long double>(a[static_cast<std::size_t>(i)]) - b[static_cast<std::size_t>(i)];
      ss += (d - m) * (d - m);
    }
    const double t = static_cast<double>(m / (std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<long double>(n))));
    const TTestResult r = paired_t_test(a, b);
    EXPECT_NEAR(r.t, t, 1e-9 * std::max(1.0, std::fabs(t)));
    EXPECT_NEAR(r.p, oracle::student_t_two_sided_p(t, n - 1), 1e-8) << "n=" << n << " t=" << t;
  }
}

TEST(StudentT, MatchesSeriesOracleAcrossDf) {
  for (int df = 1; df <= 200; df += 7) {
    for (double t : {0.01, 0.5, 1.0, 2.0, 3.5, 8.0}) {
      EXPECT_NEAR(student_t_two_sided_p(t, df), oracle::student_t_two_sided_p(t, df), 1e-8)
          << "df=" << df << " t=" << t;
    }
  }
}

}  // namespace
}  // namespace evorep::stats
