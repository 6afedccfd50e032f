#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "stylelens/kinematics.hpp"

namespace stylelens {
namespace {

TrajectorySample random_track(std::uint64_t seed, std::size_t n, double dt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a1 = u(rng), a2 = u(rng), w = 1.0 + u(rng) * 0.5;
  TrajectorySample s;
  s.agent_id = "a";
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    s.t.push_back(t);
    s.pos.push_back({12.0 * t + a1 * std::sin(w * t) * 3.0, a2 * t * t});
  }
  return s;
}

// Straight-line recomputation of every feature.
KinematicFeatures oracle(const TrajectorySample& s) {
  const std::size_t n = s.size();
  const double h = s.t[1] - s.t[0];
  auto diff = [&](const std::vector<double>& v) {
    std::vector<double> d(n);
    d[0] = (v[1] - v[0]) / h;
    d[n - 1] = (v[n - 1] - v[n - 2]) / h;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2 * h);
    return d;
  };
  std::vector<double> xs, ys;
  for (const auto& p : s.pos) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const auto vx = diff(xs), vy = diff(ys);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::sqrt(vx[i] * vx[i] + vy[i] * vy[i]);
  const auto a = diff(v);
  const auto j = diff(a);
  auto mean = [](const std::vector<double>& x, std::size_t lo, std::size_t hi) {
    double m = 0;
    for (std::size_t i = lo; i < hi; ++i) m += x[i];
    return m / static_cast<double>(hi - lo);
  };
  auto var = [&](const std::vector<double>& x, std::size_t lo, std::size_t hi) {
    const double m = mean(x, lo, hi);
    double s2 = 0;
    for (std::size_t i = lo; i < hi; ++i) s2 += (x[i] - m) * (x[i] - m);
    return s2 / static_cast<double>(hi - lo);
  };
  KinematicFeatures f;
  f.mean_speed = mean(v, 0, n);
  f.max_speed = *std::max_element(v.begin(), v.end());
  f.var_speed = var(v, 0, n);
  f.mean_accel = mean(a, 0, n);
  for (double x : a) f.max_abs_accel = std::max(f.max_abs_accel, std::abs(x));
  f.var_accel = var(a, 0, n);
  f.mean_jerk = mean(j, 1, n - 1);
  f.var_jerk = var(j, 1, n - 1);
  double ss = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double jj = (v[i + 1] - 2 * v[i] + v[i - 1]) / (h * h);
    ss += jj * jj;
  }
  const double T = h * static_cast<double>(n - 1);
  f.gamma = T * T * std::sqrt(ss / static_cast<double>(n - 2)) / std::max(f.max_speed, 0.1);
  return f;
}

TEST(ExtractFeatures, MatchesStraightLineOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto track = random_track(seed, 60, 0.1);
    const auto got = extract_features(track);
    const auto want = oracle(track);
    for (auto name : kFeatureNames) {
      const double w = feature_value(want, name);
      EXPECT_NEAR(feature_value(got, name), w, 1e-9 * std::max(1.0, std::abs(w))) << name;
    }
  }
}

TEST(ExtractFeatures, ConstantVelocityHasNoAccelOrJerk) {
  TrajectorySample s;
  s.agent_id = "a";
  for (int i = 0; i < 20; ++i) {
    s.t.push_back(i * 0.5);
    s.pos.push_back({3.0 * i * 0.5, 4.0 * i * 0.5});
  }
  const auto f = extract_features(s);
  EXPECT_NEAR(f.mean_speed, 5.0, 1e-12);
  EXPECT_NEAR(f.var_speed, 0.0, 1e-12);
  EXPECT_NEAR(f.max_abs_accel, 0.0, 1e-12);
  EXPECT_NEAR(f.var_jerk, 0.0, 1e-12);
  EXPECT_EQ(f.gamma, 0.0);
}

TEST(ExtractFeatures, EndpointOptionChangesOnlyJerkMoments) {
  const auto track = random_track(3, 40, 0.1);
  const auto inner = extract_features(track);
  const auto all = extract_features(track, FeatureOptions{true});
  EXPECT_EQ(inner.mean_speed, all.mean_speed);
  EXPECT_EQ(inner.var_accel, all.var_accel);
  EXPECT_EQ(inner.gamma, all.gamma);
  EXPECT_NE(inner.var_jerk, all.var_jerk);
}

TEST(JerkGamma, QuadraticSpeedHasConstantSecondDifference) {
  // v = 1 + t^2 on [0, 2]: j = 2 everywhere, v_peak = 5.
  std::vector<double> v;
  const double dt = 0.25;
  for (int i = 0; i <= 8; ++i) v.push_back(1.0 + (i * dt) * (i * dt));
  EXPECT_NEAR(jerk_gamma(v, dt), 2.0 * 4.0 / 5.0, 1e-12);
}

TEST(JerkGamma, ScaleFreeInTime) {
  // Stretching time by s scales jerk by s^-2 and T^2 by s^2.
  std::vector<double> v{0.0, 1.0, 3.0, 2.0, 5.0, 4.0};
  EXPECT_NEAR(jerk_gamma(v, 0.1), jerk_gamma(v, 0.7), 1e-9);
}

TEST(JerkGamma, SpeedFloorGuardsStandstill) {
  std::vector<double> v{0.0, 0.01, 0.0, 0.01, 0.0};
  const double T = 0.4;
  const double j = 0.02 / 0.01;
  EXPECT_NEAR(jerk_gamma(v, 0.1), T * T * j / kGammaSpeedFloor, 1e-9);
}

TEST(FeatureNames, GetSetRoundTrip) {
  KinematicFeatures f;
  double x = 1.0;
  for (auto name : kFeatureNames) {
    EXPECT_TRUE(is_feature_name(name));
    set_feature_value(f, name, x);
    EXPECT_EQ(feature_value(f, name), x);
    x += 1.0;
  }
  EXPECT_FALSE(is_feature_name("speed"));
  EXPECT_THROW(feature_value(f, "speed"), Error);
}

}  // namespace
}  // namespace stylelens
