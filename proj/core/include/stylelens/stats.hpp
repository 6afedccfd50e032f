#pragma once

#include <span>
#include <vector>

namespace stylelens {

double mean(std::span<const double> values);
/// Divides by n. Zero for fewer than two values.
double population_variance(std::span<const double> values);
/// Divides by n - 1. Zero for fewer than two values.
double sample_variance(std::span<const double> values);

/// Quantile by inclusive linear interpolation: position h = (n - 1) * p
/// in the sorted sample, interpolated between floor(h) and ceil(h).
double quantile_inclusive(std::span<const double> sorted, double p);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Welch's unequal-variance two-sample t-test with Satterthwaite degrees of
/// freedom. Each sample needs at least two values. Two constant samples
/// with different means give t = +-inf and p = 0; identical constants give
/// t = 0 and p = 1.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace stylelens
