#pragma once

#include <array>
#include <span>
#include <string_view>

#include "stylelens/trajectory.hpp"

namespace stylelens {

/// Per-trajectory kinematic statistics. Variances are population
/// variances (divide by n).
struct KinematicFeatures {
  double mean_speed = 0.0;
  double max_speed = 0.0;
  double var_speed = 0.0;
  double mean_accel = 0.0;
  double max_abs_accel = 0.0;
  double var_accel = 0.0;
  double mean_jerk = 0.0;
  double var_jerk = 0.0;
  double gamma = 0.0;

  friend bool operator==(const KinematicFeatures&, const KinematicFeatures&) = default;
};

/// Column names, in CSV order.
inline constexpr std::array<std::string_view, 9> kFeatureNames = {
    "mean_speed", "max_speed", "var_speed",  "mean_accel", "max_abs_accel",
    "var_accel",  "mean_jerk", "var_jerk",   "gamma"};

/// Value of the named field; throws Error for unknown names.
double feature_value(const KinematicFeatures& f, std::string_view name);
void set_feature_value(KinematicFeatures& f, std::string_view name, double value);
bool is_feature_name(std::string_view name);

/// Floor applied to the peak speed inside gamma, m/s.
inline constexpr double kGammaSpeedFloor = 0.1;

/// Tag written into report headers so outputs carry the gamma definition.
inline constexpr std::string_view kGammaDefinition =
    "gamma=sqrt(T^4*mean(j^2))/max(v_peak,0.1); j=second difference of speed/dt^2; "
    "T=duration";

struct FeatureOptions {
  /// Include the one-sided endpoint jerk samples in the jerk moments.
  bool include_endpoints = false;
};

/// Dimensionless RMS jerk of a uniformly sampled speed profile:
/// sqrt(T^4 / max(v_peak^2, eps^2) * mean(j^2)), where j is the second
/// difference of speed divided by dt^2, T the total duration and v_peak
/// the largest speed. Zero when every j is zero.
double jerk_gamma(std::span<const double> speed, double dt);

KinematicFeatures extract_features(const TrajectorySample& traj, FeatureOptions options = {});

}  // namespace stylelens
