#include "stylelens/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stylelens/stats.hpp"

namespace stylelens {

namespace {

double* field_ptr(KinematicFeatures& f, std::string_view name) {
  if (name == "mean_speed") return &f.mean_speed;
  if (name == "max_speed") return &f.max_speed;
  if (name == "var_speed") return &f.var_speed;
  if (name == "mean_accel") return &f.mean_accel;
  if (name == "max_abs_accel") return &f.max_abs_accel;
  if (name == "var_accel") return &f.var_accel;
  if (name == "mean_jerk") return &f.mean_jerk;
  if (name == "var_jerk") return &f.var_jerk;
  if (name == "gamma") return &f.gamma;
  return nullptr;
}

}  // namespace

bool is_feature_name(std::string_view name) {
  return std::find(kFeatureNames.begin(), kFeatureNames.end(), name) != kFeatureNames.end();
}

double feature_value(const KinematicFeatures& f, std::string_view name) {
  auto copy = f;
  const double* p = field_ptr(copy, name);
  if (p == nullptr) throw Error("unknown kinematic feature '" + std::string(name) + "'");
  return *p;
}

void set_feature_value(KinematicFeatures& f, std::string_view name, double value) {
  double* p = field_ptr(f, name);
  if (p == nullptr) throw Error("unknown kinematic feature '" + std::string(name) + "'");
  *p = value;
}

double jerk_gamma(std::span<const double> speed, double dt) {
  if (!(dt > 0.0)) throw Error("gamma needs dt > 0");
  if (speed.size() < 4) throw Error("gamma needs at least 4 speed samples");
  const std::size_t n = speed.size();
  double sum_sq = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double j = (speed[i + 1] - 2.0 * speed[i] + speed[i - 1]) / (dt * dt);
    sum_sq += j * j;
  }
  if (sum_sq == 0.0) return 0.0;
  const double mean_sq = sum_sq / static_cast<double>(n - 2);
  const double duration = static_cast<double>(n - 1) * dt;
  const double v_peak = std::max(*std::max_element(speed.begin(), speed.end()), kGammaSpeedFloor);
  const double t2 = duration * duration;
  return std::sqrt(t2 * t2 * mean_sq) / v_peak;
}

KinematicFeatures extract_features(const TrajectorySample& traj, FeatureOptions options) {
  const Derivatives d = derivatives(traj);
  KinematicFeatures f;
  f.mean_speed = mean(d.speed);
  f.max_speed = *std::max_element(d.speed.begin(), d.speed.end());
  f.var_speed = population_variance(d.speed);
  f.mean_accel = mean(d.accel);
  f.max_abs_accel = 0.0;
  for (double a : d.accel) f.max_abs_accel = std::max(f.max_abs_accel, std::abs(a));
  f.var_accel = population_variance(d.accel);

  std::span<const double> jerk(d.jerk);
  if (!options.include_endpoints) jerk = jerk.subspan(1, jerk.size() - 2);
  f.mean_jerk = mean(jerk);
  f.var_jerk = population_variance(jerk);
  f.gamma = jerk_gamma(d.speed, d.dt);
  return f;
}

}  // namespace stylelens
