#pragma once

#include <cstddef>
#include <span>

namespace evorep::stats {

double mean(std::span<const double> values);

/// Sample variance (divisor n-1). Zero for fewer than two values.
double sample_variance(std::span<const double> values);

/// Regularized incomplete beta function I_x(a, b), evaluated with a
/// modified-Lentz continued fraction after the usual symmetry reduction
/// I_x(a,b) = 1 - I_{1-x}(b,a).
double incomplete_beta(double a, double b, double x);

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df`
/// degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  std::size_t n = 0;
  /// The differences had zero spread; t and p are the conventional limits.
  bool degenerate = false;
};

/// Paired two-sided t-test of mean(a - b) = 0.
/// Throws ConfigError on unequal lengths or fewer than two pairs.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace evorep::stats
