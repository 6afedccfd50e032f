#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stylelens/kdsc.hpp"
#include "stylelens/kinematics.hpp"
#include "stylelens/stats.hpp"
#include "stylelens/tdbm.hpp"
#include "stylelens/trajectory.hpp"

namespace stylelens {

struct ReportConfig {
  TdbmConfig tdbm;
  FeatureOptions features;
  std::size_t n_min = 5;     // minimum samples for a boxplot group
  double bin_width = 0.5;    // m/s
  double bin_lo = 0.0;       // m/s
  double bin_hi = 40.0;      // m/s
};

nlohmann::json to_json(const ReportConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ReportConfig report_config_from_json(const nlohmann::json& j);

enum class Classifier { kTdbm, kKdsc };

// ---- Style histogram --------------------------------------------------------

struct StyleHistogram {
  std::string classifier;            // "tdbm" or "kdsc"
  std::vector<std::string> classes;  // every class, including empty ones
  std::vector<std::string> tags;     // splits present, then "all"
  /// counts[tag][class]
  std::vector<std::vector<std::size_t>> counts;
};

/// Counts scenes per style class and split. kdsc needs a labeled model.
StyleHistogram style_histogram(std::span<const Scene> scenes, Classifier classifier,
                               const ReportConfig& config, const ClusterModel* model = nullptr);

// ---- Kinematics boxplots ----------------------------------------------------

struct BoxplotStats {
  std::string metric;
  std::string style;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

BoxplotStats boxplot(std::string metric, std::string style, std::vector<double> values);

struct KinematicsReport {
  std::vector<BoxplotStats> rows;
  std::vector<std::string> notes;
};

/// One row per metric and retained style. Styles appear in `style_order`;
/// styles missing from it follow in lexical order. Groups smaller than
/// n_min are dropped with a note.
KinematicsReport kinematics_by_style(std::span<const KinematicFeatures> features,
                                     std::span<const std::string> styles,
                                     std::span<const std::string> style_order, std::size_t n_min);

// ---- MDSI vs TDBM heatmap ---------------------------------------------------

struct Heatmap {
  std::vector<std::string> rows;  // MDSI labels, lexical order
  /// counts[row][tdbm class]
  std::vector<std::array<std::size_t, kNumStyleClasses>> counts;
  std::size_t unlabeled = 0;
};

Heatmap mdsi_tdbm_heatmap(std::span<const Scene> scenes, std::span<const StyleClass> classes);

// ---- Cluster mean-speed distribution ----------------------------------------

struct SpeedHistogram {
  Split split = Split::kTrain;
  std::vector<std::string> clusters;
  /// counts[cluster][bin]
  std::vector<std::vector<std::size_t>> counts;
  std::vector<double> cluster_means;
  std::vector<std::size_t> cluster_sizes;
  /// Between the two clusters; absent when either has fewer than two scenes.
  std::optional<WelchResult> welch;
};

struct ClusterSpeedReport {
  double bin_lo = 0.0;
  double bin_width = 0.5;
  std::size_t bins = 0;
  std::vector<SpeedHistogram> splits;
};

/// mean_speed histograms per cluster for each requested split. Values
/// outside the range land in the edge bins. Throws Error naming a split
/// that has no scenes.
ClusterSpeedReport cluster_speed_distribution(std::span<const Scene> scenes,
                                              std::span<const KinematicFeatures> features,
                                              const ClusterModel& model,
                                              std::span<const Split> splits,
                                              const ReportConfig& config);

// ---- Output -----------------------------------------------------------------

/// "# key: value" lines carrying the config, gamma tag and conventions.
std::string report_header(const ReportConfig& config, const std::string& title);

std::string style_histogram_csv(std::span<const StyleHistogram> histograms,
                                const ReportConfig& config);
std::string kinematics_csv(const KinematicsReport& report, const ReportConfig& config);
std::string heatmap_csv(const Heatmap& heatmap, const ReportConfig& config);
std::string cluster_speed_csv(const ClusterSpeedReport& report, const ReportConfig& config);

std::string style_histogram_svg(std::span<const StyleHistogram> histograms);
std::string kinematics_svg(const KinematicsReport& report);
std::string heatmap_svg(const Heatmap& heatmap);
std::string cluster_speed_svg(const ClusterSpeedReport& report);

}  // namespace stylelens
