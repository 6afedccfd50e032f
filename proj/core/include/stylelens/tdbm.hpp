#pragma once

#include <array>
#include <optional>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "stylelens/trajectory.hpp"

namespace stylelens {

/// Ordinal driving-style classes, most to least aggressive.
enum class StyleClass : int {
  kAggressive = 0,
  kReckless = 1,
  kThreatening = 2,
  kCareful = 3,
  kCautious = 4,
  kTimid = 5,
};

inline constexpr std::size_t kNumStyleClasses = 6;
inline constexpr std::array<StyleClass, kNumStyleClasses> kAllStyleClasses = {
    StyleClass::kAggressive, StyleClass::kReckless, StyleClass::kThreatening,
    StyleClass::kCareful,    StyleClass::kCautious, StyleClass::kTimid};

/// Lower-case class name ("aggressive", ..., "timid").
std::string_view to_string(StyleClass style);
/// Case-sensitive inverse of to_string; nullopt for unknown names.
std::optional<StyleClass> parse_style_class(std::string_view name);
inline std::size_t index_of(StyleClass style) { return static_cast<std::size_t>(style); }

/// Normalization references and neighbor geometry for the TDBM features.
struct TdbmConfig {
  double v_ref = 15.0;             // m/s
  double d_ref = 50.0;             // m
  double w_ref = 1.5;              // m
  double j_ref = 2.0;              // m/s^3
  double neighbor_radius = 30.0;   // m
  double front_cone_deg = 30.0;    // half-angle of the leading cone
  double smoothing_window_s = 2.0;
  double dt = 0.0;                 // resample step; 0 uses the focal agent's mean spacing
};

nlohmann::json to_json(const TdbmConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
TdbmConfig tdbm_config_from_json(const nlohmann::json& j);

/// The five normalized features plus the no-neighbor flag. When
/// had_neighbors is false, v_nei is 0 and s_front is 1.
struct TdbmFeatureVector {
  double s_center = 0.0;
  double v_nei = 0.0;
  double s_front = 1.0;
  double v_avg = 0.0;
  double j_l = 0.0;
  bool had_neighbors = false;
};

struct StyleScores {
  std::array<double, kNumStyleClasses> scores{};
};

/// Rows: Aggressive .. Timid. Columns: s_center, v_nei, s_front, v_avg, j_l, bias.
inline constexpr std::array<std::array<double, 6>, kNumStyleClasses> kTdbmMatrix = {{
    {1.63, 4.04, -0.46, -0.82, 0.88, -2.58},
    {1.58, 3.08, -0.45, 0.02, -0.10, -1.67},
    {1.35, 4.08, -0.58, -0.43, -0.28, -1.99},
    {-1.51, -3.17, 1.06, 0.51, -0.51, 1.39},
    {-2.47, -2.60, 1.43, 0.98, -0.82, 1.27},
    {-3.59, -2.19, 1.75, 1.73, -0.30, 0.61},
}};

TdbmFeatureVector build_tdbm_features(const Scene& scene, const TdbmConfig& config = {});

/// s = B * (s_center, v_nei, s_front, v_avg, j_l, 1). Throws on non-finite input.
StyleScores tdbm_score(const TdbmFeatureVector& x);

/// Threatening when the agent never had neighbors; otherwise the argmax
/// score, ties resolved toward the more aggressive class.
StyleClass tdbm_classify(const StyleScores& scores, bool had_neighbors);

/// Features, scores and class for one scene's focal agent.
struct TdbmResult {
  TdbmFeatureVector features;
  StyleScores scores;
  StyleClass style = StyleClass::kThreatening;
};

TdbmResult tdbm_evaluate(const Scene& scene, const TdbmConfig& config = {});

}  // namespace stylelens
