#include "stylelens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stylelens/io.hpp"

namespace stylelens {

using nlohmann::json;

namespace {

constexpr double kFeasibilityTolerance = 1e-6;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 scene_rng(std::uint64_t seed, std::size_t i) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i))));
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double truncated_gaussian(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  std::normal_distribution<double> dist(0.0, sigma);
  for (;;) {
    const double v = dist(rng);
    if (std::abs(v) <= 3.0 * sigma) return v;
  }
}

// Longitudinal motion as piecewise-constant jerk, integrated exactly.
class JerkProfile {
 public:
  JerkProfile(double x0, double v0) : x0_(x0), v0_(v0) {}

  void add(double duration, double jerk) {
    if (duration > 0.0) segments_.push_back({duration, jerk});
  }
  void hold(double duration) { add(duration, 0.0); }

  // Trapezoidal (or triangular) acceleration pulse changing speed by dv
  // with peak |accel| <= accel_limit and |jerk| = jerk_limit.
  void change_speed(double dv, double accel_limit, double jerk_limit) {
    if (dv == 0.0) return;
    const double sign = dv > 0.0 ? 1.0 : -1.0;
    const double mag = std::abs(dv);
    double peak = accel_limit;
    double plateau = 0.0;
    if (mag >= accel_limit * accel_limit / jerk_limit) {
      plateau = mag / accel_limit - accel_limit / jerk_limit;
    } else {
      peak = std::sqrt(mag * jerk_limit);
    }
    const double ramp = peak / jerk_limit;
    add(ramp, sign * jerk_limit);
    add(plateau, 0.0);
    add(ramp, -sign * jerk_limit);
  }

  double end_time() const {
    double t = 0.0;
    for (const auto& s : segments_) t += s.duration;
    return t;
  }

  struct State {
    double x, v, a;
  };

  State at(double time) const {
    State s{x0_, v0_, 0.0};
    double remaining = time;
    for (const auto& seg : segments_) {
      const double h = std::min(remaining, seg.duration);
      advance(s, h, seg.jerk);
      remaining -= h;
      if (remaining <= 0.0) return s;
    }
    advance(s, remaining, 0.0);
    return s;
  }

 private:
  struct Segment {
    double duration;
    double jerk;
  };

  static void advance(State& s, double h, double jerk) {
    s.x += s.v * h + 0.5 * s.a * h * h + jerk * h * h * h / 6.0;
    s.v += s.a * h + 0.5 * jerk * h * h;
    s.a += jerk * h;
  }

  double x0_;
  double v0_;
  std::vector<Segment> segments_;
};

std::string pick_label(const StyleMix& mix, std::mt19937_64& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  std::string last;
  for (const auto& [label, frac] : mix) {
    if (frac <= 0.0) continue;
    acc += frac;
    last = label;
    if (u < acc) return label;
  }
  return last;
}

void validate_mix(const StyleMix& mix, const std::map<std::string, StyleParams>& params) {
  if (mix.empty()) throw Error("style mix is empty");
  double total = 0.0;
  for (const auto& [label, frac] : mix) {
    if (!(frac >= 0.0) || !std::isfinite(frac)) throw Error("mix fraction for '" + label + "' is invalid");
    if (!params.contains(label)) throw Error("mix references unknown style '" + label + "'");
    total += frac;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("mix fractions must sum to 1");
}

std::optional<std::string> sample_mdsi(const std::string& label, std::mt19937_64& rng) {
  // Self-report confusion model: true style -> MDSI factor label.
  static const std::map<std::string, std::vector<std::pair<std::string, double>>> kConfusion = {
      {"aggressive", {{"angry", 0.35}, {"risky", 0.35}, {"high-velocity", 0.2}, {"patient", 0.1}}},
      {"normal", {{"patient", 0.5}, {"careful", 0.3}, {"risky", 0.1}, {"anxious", 0.1}}},
      {"timid", {{"anxious", 0.5}, {"careful", 0.3}, {"patient", 0.2}}},
  };
  auto it = kConfusion.find(label);
  if (it == kConfusion.end()) return std::nullopt;
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  for (const auto& [name, p] : it->second) {
    acc += p;
    if (u < acc) return name;
  }
  return it->second.back().first;
}

TrajectorySample sample_track(const std::string& id, const JerkProfile& profile, double lane_y,
                              double duration, double dt) {
  TrajectorySample traj;
  traj.agent_id = id;
  const auto count = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) * dt;
    traj.t.push_back(t);
    traj.pos.push_back({profile.at(t).x, lane_y});
  }
  return traj;
}

void add_noise(TrajectorySample& traj, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return;
  for (auto& p : traj.pos) {
    p.x += truncated_gaussian(rng, sigma);
    p.y += truncated_gaussian(rng, sigma);
  }
}

const StyleParams& params_for(const SynthOptions& options, const std::string& label) {
  auto it = options.params.find(label);
  if (it == options.params.end()) throw Error("no parameters for style '" + label + "'");
  return it->second;
}

// Smaller positive root of c2 a^2 - c1 a + c0 = 0, or nullopt.
std::optional<double> smaller_root(double c2, double c1, double c0) {
  const double disc = c1 * c1 - 4.0 * c2 * c0;
  if (disc < 0.0) return std::nullopt;
  return (c1 - std::sqrt(disc)) / (2.0 * c2);
}

}  // namespace

void StyleParams::validate() const {
  if (!(a_max > 0.0 && b_max > 0.0 && j_max > 0.0)) {
    throw Error("style '" + label + "': a_max, b_max and j_max must be positive");
  }
  if (!(noise_sigma >= 0.0)) throw Error("style '" + label + "': noise_sigma must be >= 0");
  if (!(cruise_speed_hi >= cruise_speed_lo && cruise_speed_lo > speed_swing)) {
    throw Error("style '" + label + "': cruise speed range must exceed the swing");
  }
}

std::map<std::string, StyleParams> default_style_params() {
  std::map<std::string, StyleParams> p;
  p["aggressive"] = {"aggressive", 1.0, 3.5, 6.0, 10.0, 0.001, 22.0, 30.0, 4.0};
  p["normal"] = {"normal", 0.5, 1.2, 5.0, 5.0, 0.001, 16.0, 24.0, 2.0};
  p["timid"] = {"timid", 0.0, 0.8, 4.5, 4.0, 0.001, 12.0, 20.0, 1.5};
  return p;
}

StyleMix parse_style_mix(const std::string& text) {
  StyleMix mix;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("mix entry '" + item + "' must be label=fraction");
    try {
      mix[item.substr(0, eq)] = parse_double(item.substr(eq + 1));
    } catch (const std::invalid_argument&) {
      throw Error("mix entry '" + item + "' has a non-numeric fraction");
    }
  }
  return mix;
}

StyleClass label_style_class(std::string_view label) {
  if (label == "aggressive") return StyleClass::kAggressive;
  if (label == "normal") return StyleClass::kCareful;
  if (label == "timid") return StyleClass::kTimid;
  throw Error("no style class for label '" + std::string(label) + "'");
}

Split synth_split(std::size_t scene_number) {
  const std::size_t r = scene_number % 10;
  if (r < 7) return Split::kTrain;
  if (r == 7) return Split::kVal;
  return Split::kTest;
}

NoiseSlack noise_slack(double sigma, double dt) {
  const double root2 = std::sqrt(2.0);
  return {4.0 * root2 * sigma / (dt * dt), 8.0 * root2 * sigma / (dt * dt * dt)};
}

void check_feasibility(const TrajectorySample& traj, const StyleParams& params) {
  const Derivatives d = derivatives(traj);
  const NoiseSlack slack = noise_slack(params.noise_sigma, d.dt);
  const double accel_slack = 3.0 * slack.accel + kFeasibilityTolerance;
  const double jerk_bound = params.j_max + 3.0 * slack.jerk + kFeasibilityTolerance;
  for (std::size_t i = 0; i < d.accel.size(); ++i) {
    if (d.accel[i] > params.a_max + accel_slack || d.accel[i] < -params.b_max - accel_slack) {
      throw Error("agent '" + traj.agent_id + "': accel " + std::to_string(d.accel[i]) +
                  " exceeds limits at sample " + std::to_string(i));
    }
    if (std::abs(d.jerk[i]) > jerk_bound) {
      throw Error("agent '" + traj.agent_id + "': |jerk| " + std::to_string(d.jerk[i]) +
                  " exceeds bound at sample " + std::to_string(i));
    }
  }
}

std::vector<SynthScene> gen_yellow_light(std::size_t n, const StyleMix& mix,
                                         const SynthOptions& options,
                                         const YellowLightConfig& config) {
  validate_mix(mix, options.params);
  for (const auto& [label, p] : options.params) p.validate();
  std::vector<SynthScene> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = scene_rng(options.seed, i);
    SynthScene s;
    s.label = pick_label(mix, rng);
    const StyleParams& p = params_for(options, s.label);
    s.d0 = uniform(rng, config.d0_lo, config.d0_hi);
    s.v0 = uniform(rng, config.v0_lo, config.v0_hi);
    s.t_red = uniform(rng, config.tr_lo, config.tr_hi);
    const double onset_x = s.v0 * config.onset;
    s.stop_line_x = onset_x + s.d0;

    // Gentlest symmetric-trapezoid braking that rests before the line
    // and within the remaining scene time.
    const double stop_dist = s.d0 - config.stop_margin;
    const double time_avail = config.duration - config.onset - config.settle;
    const auto a_line = smaller_root(s.v0 / (2.0 * p.j_max), stop_dist, 0.5 * s.v0 * s.v0);
    const auto a_time = smaller_root(1.0 / p.j_max, time_avail, s.v0);
    bool can_stop = a_line && a_time;
    double decel = 0.0;
    if (can_stop) {
      decel = std::max(*a_line, *a_time);
      can_stop = decel <= p.b_max;
    }

    const bool wants_go = s.v0 * s.t_red + p.go_bias * s.d0 >= s.d0;
    s.go = wants_go || !can_stop;
    s.forced_go = !wants_go && !can_stop;

    JerkProfile profile(0.0, s.v0);
    profile.hold(config.onset);
    if (s.go) {
      profile.change_speed(config.go_speed_gain, p.a_max, p.j_max);
    } else {
      s.brake_decel = decel;
      profile.change_speed(-s.v0, decel, p.j_max);
    }

    Scene& scene = s.scene;
    scene.scene_id = "yellow-" + std::to_string(i);
    scene.focal_agent_id = "ego";
    scene.highway = false;
    scene.split = synth_split(i);
    TrajectorySample ego = sample_track("ego", profile, 0.0, config.duration, config.dt);
    check_feasibility(ego, p);
    add_noise(ego, p.noise_sigma, rng);
    check_feasibility(ego, p);
    scene.agents.push_back(std::move(ego));

    if (config.with_neighbor) {
      const double v = uniform(rng, config.v0_lo, config.v0_hi);
      JerkProfile other(uniform(rng, -10.0, 10.0), v);
      scene.agents.push_back(sample_track("adjacent", other, 3.5, config.duration, config.dt));
    }
    if (options.mdsi_labels) scene.mdsi_label = sample_mdsi(s.label, rng);
    scene.validate();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SynthScene> gen_cruise(std::size_t n, const StyleMix& mix, const SynthOptions& options,
                                   const CruiseConfig& config) {
  validate_mix(mix, options.params);
  for (const auto& [label, p] : options.params) p.validate();
  std::vector<SynthScene> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = scene_rng(options.seed ^ 0x5bd1e995ULL, i);
    SynthScene s;
    s.label = pick_label(mix, rng);
    const StyleParams& p = params_for(options, s.label);
    const double cruise = uniform(rng, p.cruise_speed_lo, p.cruise_speed_hi);

    // Alternate above and below the cruise speed so the gap stays bounded.
    JerkProfile profile(0.0, cruise);
    double speed = cruise;
    double sign = uniform(rng, 0.0, 1.0) < 0.5 ? 1.0 : -1.0;
    while (profile.end_time() < config.duration) {
      profile.hold(uniform(rng, config.dwell_lo, config.dwell_hi));
      const double target = cruise + sign * p.speed_swing * uniform(rng, 0.5, 1.0);
      profile.change_speed(target - speed, p.a_max, p.j_max);
      speed = target;
      sign = -sign;
    }

    Scene& scene = s.scene;
    scene.scene_id = "cruise-" + std::to_string(i);
    scene.focal_agent_id = "ego";
    scene.split = synth_split(i);
    TrajectorySample ego = sample_track("ego", profile, 0.0, config.duration, config.dt);
    check_feasibility(ego, p);
    add_noise(ego, p.noise_sigma, rng);
    check_feasibility(ego, p);
    scene.agents.push_back(std::move(ego));

    JerkProfile lead(uniform(rng, config.gap_lo, config.gap_hi), cruise);
    scene.agents.push_back(sample_track("lead", lead, 0.0, config.duration, config.dt));
    if (config.with_neighbor) {
      JerkProfile other(uniform(rng, -15.0, 15.0), cruise + uniform(rng, -2.0, 2.0));
      scene.agents.push_back(sample_track("adjacent", other, 3.5, config.duration, config.dt));
    }
    if (options.mdsi_labels) scene.mdsi_label = sample_mdsi(s.label, rng);
    scene.validate();
    out.push_back(std::move(s));
  }
  return out;
}

json to_json(const StyleParams& p) {
  return json{{"label", p.label},           {"go_bias", p.go_bias},
              {"a_max", p.a_max},           {"b_max", p.b_max},
              {"j_max", p.j_max},           {"noise_sigma", p.noise_sigma},
              {"cruise_speed_lo", p.cruise_speed_lo}, {"cruise_speed_hi", p.cruise_speed_hi},
              {"speed_swing", p.speed_swing}};
}

json to_json(const YellowLightConfig& c) {
  return json{{"duration", c.duration},       {"dt", c.dt},
              {"onset", c.onset},             {"d0", {c.d0_lo, c.d0_hi}},
              {"v0", {c.v0_lo, c.v0_hi}},     {"t_red", {c.tr_lo, c.tr_hi}},
              {"stop_margin", c.stop_margin}, {"settle", c.settle},
              {"go_speed_gain", c.go_speed_gain}, {"with_neighbor", c.with_neighbor}};
}

json to_json(const CruiseConfig& c) {
  return json{{"duration", c.duration},
              {"dt", c.dt},
              {"gap", {c.gap_lo, c.gap_hi}},
              {"dwell", {c.dwell_lo, c.dwell_hi}},
              {"aggressive_var_accel_threshold", c.aggressive_var_accel_threshold},
              {"with_neighbor", c.with_neighbor}};
}

json to_json(const SynthConfig& c) {
  json params = json::object();
  for (const auto& [label, p] : c.params) params[label] = to_json(p);
  return json{{"params", params},
              {"yellow_light", to_json(c.yellow_light)},
              {"cruise", to_json(c.cruise)}};
}

namespace {

double number(const json& v, const std::string& key) {
  if (!v.is_number()) throw Error("synth config '" + key + "' must be a number");
  return v.get<double>();
}

void range(const json& v, const std::string& key, double& lo, double& hi) {
  if (!v.is_array() || v.size() != 2) throw Error("synth config '" + key + "' must be [lo, hi]");
  lo = number(v[0], key);
  hi = number(v[1], key);
  if (hi < lo) throw Error("synth config '" + key + "' has hi < lo");
}

bool flag(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw Error("synth config '" + key + "' must be a boolean");
  return v.get<bool>();
}

StyleParams style_params_from_json(const json& j, const std::string& label, StyleParams p) {
  if (!j.is_object()) throw Error("style params for '" + label + "' must be an object");
  p.label = label;
  for (const auto& [key, v] : j.items()) {
    if (key == "label") {
      if (v != label) throw Error("style params label mismatch for '" + label + "'");
    } else if (key == "go_bias") p.go_bias = number(v, key);
    else if (key == "a_max") p.a_max = number(v, key);
    else if (key == "b_max") p.b_max = number(v, key);
    else if (key == "j_max") p.j_max = number(v, key);
    else if (key == "noise_sigma") p.noise_sigma = number(v, key);
    else if (key == "cruise_speed_lo") p.cruise_speed_lo = number(v, key);
    else if (key == "cruise_speed_hi") p.cruise_speed_hi = number(v, key);
    else if (key == "speed_swing") p.speed_swing = number(v, key);
    else throw Error("unknown style params key '" + key + "'");
  }
  p.validate();
  return p;
}

}  // namespace

SynthConfig synth_config_from_json(const json& j) {
  if (!j.is_object()) throw Error("synth config must be a JSON object");
  SynthConfig c;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw Error("synth config '" + section + "' must be an object");
    if (section == "params") {
      for (const auto& [label, pj] : body.items()) {
        auto it = c.params.find(label);
        StyleParams base = it != c.params.end() ? it->second : StyleParams{};
        c.params[label] = style_params_from_json(pj, label, base);
      }
    } else if (section == "yellow_light") {
      auto& y = c.yellow_light;
      for (const auto& [key, v] : body.items()) {
        if (key == "duration") y.duration = number(v, key);
        else if (key == "dt") y.dt = number(v, key);
        else if (key == "onset") y.onset = number(v, key);
        else if (key == "d0") range(v, key, y.d0_lo, y.d0_hi);
        else if (key == "v0") range(v, key, y.v0_lo, y.v0_hi);
        else if (key == "t_red") range(v, key, y.tr_lo, y.tr_hi);
        else if (key == "stop_margin") y.stop_margin = number(v, key);
        else if (key == "settle") y.settle = number(v, key);
        else if (key == "go_speed_gain") y.go_speed_gain = number(v, key);
        else if (key == "with_neighbor") y.with_neighbor = flag(v, key);
        else throw Error("unknown yellow_light key '" + key + "'");
      }
      if (!(y.dt > 0.0 && y.duration > y.onset && y.onset >= 0.0)) {
        throw Error("yellow_light timing is inconsistent");
      }
    } else if (section == "cruise") {
      auto& cr = c.cruise;
      for (const auto& [key, v] : body.items()) {
        if (key == "duration") cr.duration = number(v, key);
        else if (key == "dt") cr.dt = number(v, key);
        else if (key == "gap") range(v, key, cr.gap_lo, cr.gap_hi);
        else if (key == "dwell") range(v, key, cr.dwell_lo, cr.dwell_hi);
        else if (key == "aggressive_var_accel_threshold") cr.aggressive_var_accel_threshold = number(v, key);
        else if (key == "with_neighbor") cr.with_neighbor = flag(v, key);
        else throw Error("unknown cruise key '" + key + "'");
      }
      if (!(cr.dt > 0.0 && cr.duration > 0.0 && cr.dwell_lo > 0.0)) {
        throw Error("cruise timing is inconsistent");
      }
    } else {
      throw Error("unknown synth config section '" + section + "'");
    }
  }
  return c;
}

}  // namespace stylelens
