#include "stylelens/tdbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "stylelens/stats.hpp"

namespace stylelens {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumStyleClasses> kStyleNames = {
    "aggressive", "reckless", "threatening", "careful", "cautious", "timid"};

constexpr double kSpanTolerance = 1e-9;

// Another agent resampled on its own span, with a speed profile.
struct NeighborTrack {
  TrajectorySample traj;
  std::vector<double> speed;

  bool covers(double time) const {
    return time >= traj.t.front() - kSpanTolerance && time <= traj.t.back() + kSpanTolerance;
  }

  double speed_at(double time) const {
    if (speed.size() == 1) return speed.front();
    const double dt = traj.t[1] - traj.t[0];
    const double h = std::clamp((time - traj.t.front()) / dt, 0.0,
                                static_cast<double>(speed.size() - 1));
    const auto lo = std::min(static_cast<std::size_t>(h), speed.size() - 2);
    const double w = h - static_cast<double>(lo);
    return speed[lo] + w * (speed[lo + 1] - speed[lo]);
  }
};

double default_step(const TrajectorySample& traj) {
  return traj.duration() / static_cast<double>(traj.size() - 1);
}

std::vector<double> focal_headings(const TrajectorySample& traj, double dt) {
  const std::size_t n = traj.size();
  std::vector<double> xs(n);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = traj.pos[i].x;
    ys[i] = traj.pos[i].y;
  }
  const auto vx = differentiate(xs, dt);
  const auto vy = differentiate(ys, dt);
  std::vector<double> heading(n, 0.0);
  double last = traj.heading ? traj.heading->front() : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::hypot(vx[i], vy[i]) > 1e-6) {
      last = std::atan2(vy[i], vx[i]);
    } else if (traj.heading) {
      last = (*traj.heading)[i];
    }
    heading[i] = last;
  }
  return heading;
}

double center_deviation_rms(const TrajectorySample& traj, double dt, double window_s) {
  const std::size_t n = traj.size();
  const auto window = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(window_s / dt)));
  const std::size_t half = window / 2;
  std::vector<Vec2> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    Vec2 acc;
    for (std::size_t k = lo; k <= hi; ++k) acc = acc + traj.pos[k];
    smooth[i] = acc / static_cast<double>(hi - lo + 1);
  }
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 tangent = i == 0       ? smooth[1] - smooth[0]
                         : i + 1 == n ? smooth[n - 1] - smooth[n - 2]
                                      : smooth[i + 1] - smooth[i - 1];
    const Vec2 off = traj.pos[i] - smooth[i];
    const double len = tangent.norm();
    const double lateral = len > 1e-9 ? tangent.cross(off) / len : off.norm();
    sum_sq += lateral * lateral;
  }
  return std::sqrt(sum_sq / static_cast<double>(n));
}

}  // namespace

std::string_view to_string(StyleClass style) { return kStyleNames[index_of(style)]; }

std::optional<StyleClass> parse_style_class(std::string_view name) {
  for (std::size_t i = 0; i < kNumStyleClasses; ++i) {
    if (kStyleNames[i] == name) return static_cast<StyleClass>(i);
  }
  return std::nullopt;
}

json to_json(const TdbmConfig& c) {
  return json{{"v_ref", c.v_ref},
              {"d_ref", c.d_ref},
              {"w_ref", c.w_ref},
              {"j_ref", c.j_ref},
              {"neighbor_radius", c.neighbor_radius},
              {"front_cone_deg", c.front_cone_deg},
              {"smoothing_window_s", c.smoothing_window_s},
              {"dt", c.dt}};
}

TdbmConfig tdbm_config_from_json(const json& j) {
  if (!j.is_object()) throw Error("TDBM config must be a JSON object");
  TdbmConfig c;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw Error("TDBM config '" + key + "' must be a number");
    const double v = value.get<double>();
    if (key == "v_ref") c.v_ref = v;
    else if (key == "d_ref") c.d_ref = v;
    else if (key == "w_ref") c.w_ref = v;
    else if (key == "j_ref") c.j_ref = v;
    else if (key == "neighbor_radius") c.neighbor_radius = v;
    else if (key == "front_cone_deg") c.front_cone_deg = v;
    else if (key == "smoothing_window_s") c.smoothing_window_s = v;
    else if (key == "dt") c.dt = v;
    else throw Error("unknown TDBM config key '" + key + "'");
  }
  if (!(c.v_ref > 0 && c.d_ref > 0 && c.w_ref > 0 && c.j_ref > 0 && c.neighbor_radius >= 0 &&
        c.smoothing_window_s > 0 && c.dt >= 0)) {
    throw Error("TDBM config references must be positive");
  }
  return c;
}

TdbmFeatureVector build_tdbm_features(const Scene& scene, const TdbmConfig& config) {
  const TrajectorySample& raw_focal = scene.focal();
  if (raw_focal.size() < 2) throw Error("scene '" + scene.scene_id + "': focal agent too short");
  const double step = config.dt > 0.0 ? config.dt : default_step(raw_focal);
  const TrajectorySample focal = resample_uniform(raw_focal, step);
  const Derivatives d = derivatives(focal);
  const std::size_t n = focal.size();

  std::vector<NeighborTrack> others;
  for (const auto& a : scene.agents) {
    if (a.agent_id == scene.focal_agent_id || a.size() < 2) continue;
    NeighborTrack track;
    track.traj = a.duration() >= step ? resample_uniform(a, step) : a;
    track.speed = track.traj.size() >= 2 && a.duration() >= step
                      ? speed_profile(track.traj)
                      : std::vector<double>(track.traj.size(),
                                            (a.pos.back() - a.pos.front()).norm() / a.duration());
    others.push_back(std::move(track));
  }

  const auto heading = focal_headings(focal, d.dt);
  const double cos_cone = std::cos(config.front_cone_deg * std::numbers::pi / 180.0);

  TdbmFeatureVector x;
  double rel_sum = 0.0;
  double front_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double time = focal.t[i];
    const Vec2 p = focal.pos[i];
    const Vec2 dir{std::cos(heading[i]), std::sin(heading[i])};
    double nei_speed_sum = 0.0;
    std::size_t nei_count = 0;
    double nearest_front = std::numeric_limits<double>::infinity();
    for (const auto& other : others) {
      if (!other.covers(time)) continue;
      const Vec2 q = position_at(other.traj, std::clamp(time, other.traj.t.front(),
                                                        other.traj.t.back()));
      const Vec2 rel = q - p;
      const double dist = rel.norm();
      if (dist <= config.neighbor_radius) {
        nei_speed_sum += other.speed_at(time);
        ++nei_count;
      }
      if (dist > 0.0 && dir.dot(rel) / dist >= cos_cone) {
        nearest_front = std::min(nearest_front, dist);
      }
    }
    if (nei_count > 0) {
      x.had_neighbors = true;
      rel_sum += d.speed[i] - nei_speed_sum / static_cast<double>(nei_count);
    }
    front_sum += std::min(nearest_front / config.d_ref, 1.0);
  }

  x.v_avg = mean(d.speed) / config.v_ref;
  x.s_center = center_deviation_rms(focal, d.dt, config.smoothing_window_s) / config.w_ref;
  double abs_jerk = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) abs_jerk += std::abs(d.jerk[i]);
  x.j_l = abs_jerk / static_cast<double>(n - 2) / config.j_ref;
  if (x.had_neighbors) {
    x.v_nei = rel_sum / static_cast<double>(n) / config.v_ref;
    x.s_front = front_sum / static_cast<double>(n);
  } else {
    x.v_nei = 0.0;
    x.s_front = 1.0;
  }
  return x;
}

StyleScores tdbm_score(const TdbmFeatureVector& x) {
  const std::array<double, 6> column = {x.s_center, x.v_nei, x.s_front, x.v_avg, x.j_l, 1.0};
  for (double v : column) {
    if (!std::isfinite(v)) throw Error("TDBM features must be finite");
  }
  StyleScores s;
  for (std::size_t r = 0; r < kNumStyleClasses; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < column.size(); ++c) acc += kTdbmMatrix[r][c] * column[c];
    s.scores[r] = acc;
  }
  return s;
}

StyleClass tdbm_classify(const StyleScores& scores, bool had_neighbors) {
  if (!had_neighbors) return StyleClass::kThreatening;
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumStyleClasses; ++i) {
    if (scores.scores[i] > scores.scores[best]) best = i;
  }
  return static_cast<StyleClass>(best);
}

TdbmResult tdbm_evaluate(const Scene& scene, const TdbmConfig& config) {
  TdbmResult r;
  r.features = build_tdbm_features(scene, config);
  r.scores = tdbm_score(r.features);
  r.style = tdbm_classify(r.scores, r.features.had_neighbors);
  return r;
}

}  // namespace stylelens
