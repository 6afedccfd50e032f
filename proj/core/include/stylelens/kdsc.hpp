#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "stylelens/kinematics.hpp"

namespace stylelens {

/// Default clustering columns: accel extremes, accel and speed spread, gamma.
std::vector<std::string> default_kdsc_features();

struct Standardization {
  double mean = 0.0;
  double std = 1.0;
};

/// One dendrogram merge. Ids below n are input points; id n + i is the
/// cluster created by merge i. `a < b`.
struct Merge {
  std::size_t a = 0;
  std::size_t b = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

/// Ward-linkage dendrogram of the rows of `points`, built with the
/// nearest-neighbor chain and Lance-Williams updates. Merges are sorted by
/// distance (non-decreasing); `distance` uses the scipy convention
/// sqrt(2 |A| |B| / (|A| + |B|)) * |c_A - c_B|.
std::vector<Merge> ward_linkage(const Eigen::MatrixXd& points);

/// Applies the first n - k merges and returns a cluster id per point.
/// Ids are 0..k-1, numbered by each cluster's smallest member index.
std::vector<std::size_t> cut_dendrogram(std::span<const Merge> merges, std::size_t n, std::size_t k);

struct ClusterModel {
  std::vector<std::string> feature_names;
  std::vector<Standardization> standardization;
  std::vector<Merge> merge_history;
  std::size_t k = 0;
  /// k rows in standardized feature space.
  Eigen::MatrixXd centroids;
  std::map<std::size_t, std::string> labels;
  /// Dendrogram-cut membership of the fitted points (not serialized).
  std::vector<std::size_t> fitted_assignments;
  std::size_t n_fitted = 0;
  /// Fraction of fitted points where assign() agrees with the cut.
  double assign_agreement = 1.0;
  std::vector<std::string> warnings;

  /// Standardized feature row for `f`; throws on non-finite values.
  Eigen::VectorXd standardize(const KinematicFeatures& f) const;
};

/// z-scores the selected columns, runs Ward agglomerative clustering and
/// cuts the dendrogram at k clusters. Constant columns get their std
/// floored at 1e-12 and a warning in the model.
ClusterModel fit_kdsc(std::span<const KinematicFeatures> features, std::size_t k,
                      const std::vector<std::string>& feature_subset = default_kdsc_features());

/// Names the two clusters of a k = 2 model: the one with the larger mean
/// standardized max_abs_accel is "aggressive", the other "normal". Exact
/// ties go to the lower cluster id and are recorded in warnings.
ClusterModel label_clusters(ClusterModel model, std::span<const KinematicFeatures> features);

/// Nearest centroid in standardized space; ties go to the lower id.
std::size_t assign(const ClusterModel& model, const KinematicFeatures& f);

nlohmann::json to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const nlohmann::json& j);

/// Seeded reservoir sample of `count` indices out of [0, n), sorted.
std::vector<std::size_t> reservoir_sample(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace stylelens
