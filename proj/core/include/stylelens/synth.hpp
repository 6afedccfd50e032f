#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stylelens/tdbm.hpp"
#include "stylelens/trajectory.hpp"

namespace stylelens {

/// Controller parameters of one ground-truth style.
struct StyleParams {
  std::string label;
  double go_bias = 0.0;      // yellow-light decision offset (fraction of d0)
  double a_max = 1.0;        // m/s^2
  double b_max = 4.0;        // m/s^2, braking
  double j_max = 4.0;        // m/s^3
  double noise_sigma = 0.0;  // m, per axis, truncated at 3 sigma
  double cruise_speed_lo = 16.0;  // m/s
  double cruise_speed_hi = 24.0;  // m/s
  double speed_swing = 2.0;       // m/s, cruise oscillation amplitude

  void validate() const;
};

/// aggressive / normal / timid defaults.
std::map<std::string, StyleParams> default_style_params();

using StyleMix = std::map<std::string, double>;

/// Parses "aggressive=0.3,normal=0.5,timid=0.2".
StyleMix parse_style_mix(const std::string& text);

struct YellowLightConfig {
  double duration = 6.0;   // s
  double dt = 0.1;         // s
  double onset = 1.4;      // s of constant-speed approach before the light changes
  double d0_lo = 30.0, d0_hi = 60.0;  // m, distance to the line at onset
  double v0_lo = 10.0, v0_hi = 18.0;  // m/s
  double tr_lo = 1.0, tr_hi = 3.0;    // s until red
  double stop_margin = 1.0;           // m short of the line
  double settle = 0.2;                // s at rest before the scene ends
  double go_speed_gain = 6.0;         // m/s gained when going
  bool with_neighbor = false;         // add a vehicle in the adjacent lane
};

struct CruiseConfig {
  double duration = 20.0;  // s
  double dt = 0.1;         // s
  double gap_lo = 25.0, gap_hi = 40.0;  // m, initial gap to the lead vehicle
  double dwell_lo = 1.0, dwell_hi = 3.0;  // s between speed changes
  /// var_accel of a noise-free normal scene stays below this (m^2/s^4).
  double aggressive_var_accel_threshold = 1.5;
  bool with_neighbor = false;
};

struct SynthOptions {
  std::uint64_t seed = 7;
  bool mdsi_labels = false;  // sample self-report labels from a confusion model
  std::map<std::string, StyleParams> params = default_style_params();
};

/// A generated scene with its ground truth.
struct SynthScene {
  Scene scene;
  std::string label;
  // Yellow-light ground truth (zero for cruise scenes).
  double v0 = 0.0;
  double d0 = 0.0;
  double t_red = 0.0;
  double stop_line_x = 0.0;
  bool go = false;
  bool forced_go = false;   // stopping was infeasible under b_max / j_max
  double brake_decel = 0.0; // plateau deceleration of a stop, m/s^2
};

std::vector<SynthScene> gen_yellow_light(std::size_t n, const StyleMix& mix,
                                         const SynthOptions& options = {},
                                         const YellowLightConfig& config = {});

std::vector<SynthScene> gen_cruise(std::size_t n, const StyleMix& mix,
                                   const SynthOptions& options = {},
                                   const CruiseConfig& config = {});

/// TDBM class standing in for a ground-truth label: aggressive ->
/// Aggressive, normal -> Careful, timid -> Timid. Throws for other labels.
StyleClass label_style_class(std::string_view label);

/// Split assignment used by the generators: 70% train, 10% val, 20% test.
Split synth_split(std::size_t scene_number);

/// Worst-case acceleration and jerk perturbation bounds for position noise
/// of standard deviation sigma truncated at 3 sigma, sampled at dt.
struct NoiseSlack {
  double accel = 0.0;
  double jerk = 0.0;
};
NoiseSlack noise_slack(double sigma, double dt);

/// Throws Error when the focal trajectory exceeds the style's accel or
/// jerk limits plus noise slack.
void check_feasibility(const TrajectorySample& traj, const StyleParams& params);

/// Every generator constant, as read from or echoed into a config file.
struct SynthConfig {
  std::map<std::string, StyleParams> params = default_style_params();
  YellowLightConfig yellow_light;
  CruiseConfig cruise;
};

nlohmann::json to_json(const StyleParams& params);
nlohmann::json to_json(const YellowLightConfig& config);
nlohmann::json to_json(const CruiseConfig& config);
nlohmann::json to_json(const SynthConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& j);

}  // namespace stylelens
