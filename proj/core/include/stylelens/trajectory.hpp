#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stylelens/common.hpp"

namespace stylelens {

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
/// Parses "train" | "val" | "test"; throws Error otherwise.
Split parse_split(std::string_view text);

/// Timestamped 2-D positions of one agent.
///
/// Invariants (checked by validate()): at least one sample, timestamps
/// strictly increasing, positions/heading the same length as timestamps,
/// every value finite.
struct TrajectorySample {
  std::string agent_id;
  std::vector<double> t;
  std::vector<Vec2> pos;
  std::optional<std::vector<double>> heading;

  std::size_t size() const { return t.size(); }
  double duration() const { return t.empty() ? 0.0 : t.back() - t.front(); }

  void validate() const;
};

struct Scene {
  std::string scene_id;
  std::string focal_agent_id;
  std::vector<TrajectorySample> agents;
  std::optional<bool> highway;
  std::optional<std::string> mdsi_label;
  Split split = Split::kTrain;

  /// The agent whose id equals focal_agent_id; throws Error if missing.
  const TrajectorySample& focal() const;
  void validate() const;
};

enum class SceneFormat { kJsonl, kCsv };

/// Reads scenes from the interchange format. For CSV input the scene
/// metadata lives in a sidecar file; when `csv_metadata` is empty the
/// sidecar is `<stem>.meta.csv` next to `path`.
std::vector<Scene> load_scenes(const std::filesystem::path& path, SceneFormat format,
                               const std::filesystem::path& csv_metadata = {});

std::vector<Scene> parse_scenes_jsonl(std::istream& in);
std::vector<Scene> parse_scenes_csv(std::istream& samples, std::istream& metadata);

/// Converts one JSON record to a validated Scene. `line` is used only in
/// error messages.
Scene scene_from_json(const nlohmann::json& record, std::size_t line = 0);
nlohmann::json scene_to_json(const Scene& scene);

void write_scenes_jsonl(std::ostream& out, std::span<const Scene> scenes);
/// Long-format CSV plus its metadata sidecar.
void write_scenes_csv(std::ostream& samples, std::ostream& metadata, std::span<const Scene> scenes);

/// Linear interpolation of position at time `time`, which must lie in
/// [t.front(), t.back()].
Vec2 position_at(const TrajectorySample& traj, double time);

/// Resamples onto t0, t0+dt, ... up to the last input timestamp.
/// A trajectory that is already uniform at `dt` is returned unchanged.
TrajectorySample resample_uniform(const TrajectorySample& traj, double dt);

/// Spacing of a uniformly sampled trajectory. Throws when spacing varies
/// by more than 1e-9 s or fewer than two samples exist.
double uniform_step(const TrajectorySample& traj);

/// Speed, longitudinal acceleration and jerk of a uniformly sampled
/// trajectory. Speed is the norm of the central-difference velocity;
/// accel and jerk are central differences of the scalar speed and accel.
/// Endpoints use one-sided first-order differences, so all three
/// sequences have the trajectory's length.
struct Derivatives {
  double dt = 0.0;
  std::vector<double> speed;
  std::vector<double> accel;
  std::vector<double> jerk;
};

Derivatives derivatives(const TrajectorySample& traj);

/// Speed profile only; needs two samples instead of four.
std::vector<double> speed_profile(const TrajectorySample& traj);

/// Finite-difference derivative of a uniformly sampled scalar signal
/// (central inside, one-sided first-order at the ends).
std::vector<double> differentiate(std::span<const double> values, double dt);

}  // namespace stylelens
