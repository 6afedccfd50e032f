#include "stylelens/kdsc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

namespace stylelens {

using nlohmann::json;

namespace {

constexpr double kStdFloor = 1e-12;

// Packed upper-triangular matrix of pairwise values over n slots.
class CondensedMatrix {
 public:
  explicit CondensedMatrix(std::size_t n) : n_(n), data_(n * (n - 1) / 2, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data_[offset(i, j)]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[offset(i, j)]; }

 private:
  std::size_t offset(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return n_ * i - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n_;
  std::vector<double> data_;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

struct RawMerge {
  std::size_t slot_a;
  std::size_t slot_b;
  double distance;
};

}  // namespace

std::vector<std::string> default_kdsc_features() {
  return {"max_abs_accel", "var_accel", "var_speed", "gamma"};
}

std::vector<Merge> ward_linkage(const Eigen::MatrixXd& points) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2) return {};

  CondensedMatrix d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d2(i, j) = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j)))
                     .squaredNorm();
    }
  }

  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> chain;
  std::vector<RawMerge> raw;
  raw.reserve(n - 1);

  while (raw.size() + 1 < n) {
    if (chain.empty()) {
      chain.push_back(static_cast<std::size_t>(std::find(active.begin(), active.end(), true) -
                                               active.begin()));
    }
    std::size_t a = 0;
    std::size_t b = 0;
    double best = 0.0;
    for (;;) {
      a = chain.back();
      const bool has_prev = chain.size() >= 2;
      b = has_prev ? chain[chain.size() - 2] : n;
      best = has_prev ? d2(a, b) : std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n; ++c) {
        if (!active[c] || c == a) continue;
        const double dc = d2(a, c);
        if (dc < best) {
          best = dc;
          b = c;
        }
      }
      if (has_prev && b == chain[chain.size() - 2]) break;
      chain.push_back(b);
    }
    chain.pop_back();
    chain.pop_back();

    // The merged cluster lives in the lower slot.
    const std::size_t keep = std::min(a, b);
    const std::size_t drop = std::max(a, b);
    raw.push_back({keep, drop, std::sqrt(std::max(best, 0.0))});

    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      const double nk = static_cast<double>(size[k]);
      d2(keep, k) = ((na + nk) * d2(a, k) + (nb + nk) * d2(b, k) - nk * best) / (na + nb + nk);
    }
    size[keep] = size[a] + size[b];
    active[drop] = false;
  }

  std::stable_sort(raw.begin(), raw.end(),
                   [](const RawMerge& l, const RawMerge& r) { return l.distance < r.distance; });

  // Relabel slots into dendrogram ids.
  std::vector<std::size_t> slot_id(n);
  std::iota(slot_id.begin(), slot_id.end(), 0);
  std::vector<std::size_t> id_size(2 * n - 1, 1);
  std::vector<Merge> merges;
  merges.reserve(raw.size());
  for (const auto& m : raw) {
    std::size_t ia = slot_id[m.slot_a];
    std::size_t ib = slot_id[m.slot_b];
    if (ia > ib) std::swap(ia, ib);
    const std::size_t new_id = n + merges.size();
    id_size[new_id] = id_size[ia] + id_size[ib];
    merges.push_back({ia, ib, m.distance, id_size[new_id]});
    slot_id[m.slot_a] = new_id;
  }
  return merges;
}

std::vector<std::size_t> cut_dendrogram(std::span<const Merge> merges, std::size_t n, std::size_t k) {
  if (k == 0 || k > n) throw Error("cluster count must be in [1, n]");
  if (n > 0 && merges.size() != n - 1) throw Error("dendrogram must have n - 1 merges");
  // Representative original point for every dendrogram id.
  std::vector<std::size_t> rep(2 * n, 0);
  std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), 0);
  DisjointSets sets(n);
  for (std::size_t i = 0; i < n - k; ++i) {
    const Merge& m = merges[i];
    sets.unite(rep[m.a], rep[m.b]);
    rep[n + i] = rep[m.a];
  }
  std::vector<std::size_t> label(n);
  std::vector<std::size_t> root_label(n, n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = sets.find(i);
    if (root_label[r] == n) root_label[r] = next++;
    label[i] = root_label[r];
  }
  return label;
}

Eigen::VectorXd ClusterModel::standardize(const KinematicFeatures& f) const {
  Eigen::VectorXd z(static_cast<Eigen::Index>(feature_names.size()));
  for (std::size_t c = 0; c < feature_names.size(); ++c) {
    const double v = feature_value(f, feature_names[c]);
    if (!std::isfinite(v)) throw Error("feature '" + feature_names[c] + "' is not finite");
    z[static_cast<Eigen::Index>(c)] = (v - standardization[c].mean) / standardization[c].std;
  }
  return z;
}

ClusterModel fit_kdsc(std::span<const KinematicFeatures> features, std::size_t k,
                      const std::vector<std::string>& feature_subset) {
  const std::size_t n = features.size();
  if (k == 0) throw Error("k must be at least 1");
  if (n < k) {
    throw Error("cannot fit " + std::to_string(k) + " clusters to " + std::to_string(n) + " points");
  }
  if (feature_subset.empty()) throw Error("feature subset is empty");
  for (const auto& name : feature_subset) {
    if (!is_feature_name(name)) throw Error("unknown kinematic feature '" + name + "'");
  }

  ClusterModel model;
  model.feature_names = feature_subset;
  model.k = k;
  model.n_fitted = n;
  const auto d = static_cast<Eigen::Index>(feature_subset.size());
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index c = 0; c < d; ++c) {
    const auto& name = feature_subset[static_cast<std::size_t>(c)];
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = feature_value(features[i], name);
      if (!std::isfinite(v)) {
        throw Error("feature '" + name + "' is not finite at row " + std::to_string(i));
      }
      z(static_cast<Eigen::Index>(i), c) = v;
      sum += v;
    }
    const double m = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = z(static_cast<Eigen::Index>(i), c) - m;
      ss += dv * dv;
    }
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd < kStdFloor) {
      sd = kStdFloor;
      model.warnings.push_back("feature '" + name + "' is constant; std floored at 1e-12");
    }
    model.standardization.push_back({m, sd});
    z.col(c) = (z.col(c).array() - m) / sd;
  }

  model.merge_history = ward_linkage(z);
  model.fitted_assignments = cut_dendrogram(model.merge_history, n, k);

  model.centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), d);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(model.fitted_assignments[i]);
    model.centroids.row(c) += z.row(static_cast<Eigen::Index>(i));
    ++counts[model.fitted_assignments[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    model.centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  }

  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (assign(model, features[i]) == model.fitted_assignments[i]) ++agree;
  }
  model.assign_agreement = static_cast<double>(agree) / static_cast<double>(n);
  return model;
}

ClusterModel label_clusters(ClusterModel model, std::span<const KinematicFeatures> features) {
  if (model.k != 2) throw Error("semantic labels are defined only for k = 2");
  if (features.empty()) throw Error("labeling needs at least one feature row");

  auto column = std::find(model.feature_names.begin(), model.feature_names.end(), "max_abs_accel");
  Standardization scale;
  if (column != model.feature_names.end()) {
    scale = model.standardization[static_cast<std::size_t>(column - model.feature_names.begin())];
  } else {
    double sum = 0.0;
    for (const auto& f : features) sum += f.max_abs_accel;
    scale.mean = sum / static_cast<double>(features.size());
    double ss = 0.0;
    for (const auto& f : features) ss += (f.max_abs_accel - scale.mean) * (f.max_abs_accel - scale.mean);
    scale.std = std::max(std::sqrt(ss / static_cast<double>(features.size())), kStdFloor);
  }

  std::array<double, 2> sum{0.0, 0.0};
  std::array<std::size_t, 2> count{0, 0};
  for (const auto& f : features) {
    const std::size_t c = assign(model, f);
    sum[c] += (f.max_abs_accel - scale.mean) / scale.std;
    ++count[c];
  }
  std::array<double, 2> avg{};
  for (std::size_t c = 0; c < 2; ++c) {
    avg[c] = count[c] > 0 ? sum[c] / static_cast<double>(count[c])
                          : -std::numeric_limits<double>::infinity();
  }
  std::size_t aggressive = avg[1] > avg[0] ? 1 : 0;
  if (avg[0] == avg[1]) {
    aggressive = 0;
    model.warnings.push_back("label tie: equal mean max_abs_accel; cluster 0 labeled aggressive");
  }
  model.labels.clear();
  model.labels[aggressive] = "aggressive";
  model.labels[1 - aggressive] = "normal";
  return model;
}

std::size_t assign(const ClusterModel& model, const KinematicFeatures& f) {
  if (model.k == 0 || model.centroids.rows() == 0) throw Error("cluster model is not fitted");
  const Eigen::VectorXd z = model.standardize(f);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < model.centroids.rows(); ++c) {
    const double dist = (model.centroids.row(c).transpose() - z).squaredNorm();
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

json to_json(const ClusterModel& model) {
  json standardization = json::array();
  for (const auto& s : model.standardization) standardization.push_back({{"mean", s.mean}, {"std", s.std}});
  json centroids = json::array();
  for (Eigen::Index r = 0; r < model.centroids.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < model.centroids.cols(); ++c) row.push_back(model.centroids(r, c));
    centroids.push_back(std::move(row));
  }
  json labels = json::object();
  for (const auto& [id, name] : model.labels) labels[std::to_string(id)] = name;
  json merges = json::array();
  for (const auto& m : model.merge_history) merges.push_back({m.a, m.b, m.distance, m.size});
  return json{{"feature_names", model.feature_names},
              {"standardization", std::move(standardization)},
              {"k", model.k},
              {"centroids", std::move(centroids)},
              {"labels", std::move(labels)},
              {"n_fitted", model.n_fitted},
              {"assign_agreement", model.assign_agreement},
              {"warnings", model.warnings},
              {"merge_history", std::move(merges)}};
}

ClusterModel cluster_model_from_json(const json& j) {
  try {
    ClusterModel model;
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& name : model.feature_names) {
      if (!is_feature_name(name)) throw Error("unknown kinematic feature '" + name + "'");
    }
    for (const auto& s : j.at("standardization")) {
      model.standardization.push_back({s.at("mean").get<double>(), s.at("std").get<double>()});
    }
    if (model.standardization.size() != model.feature_names.size()) {
      throw Error("standardization length differs from feature_names");
    }
    model.k = j.at("k").get<std::size_t>();
    const auto& centroids = j.at("centroids");
    if (centroids.size() != model.k) throw Error("centroid count differs from k");
    const auto d = static_cast<Eigen::Index>(model.feature_names.size());
    model.centroids.resize(static_cast<Eigen::Index>(model.k), d);
    for (std::size_t r = 0; r < model.k; ++r) {
      if (centroids[r].size() != model.feature_names.size()) throw Error("centroid width mismatch");
      for (Eigen::Index c = 0; c < d; ++c) {
        model.centroids(static_cast<Eigen::Index>(r), c) =
            centroids[r][static_cast<std::size_t>(c)].get<double>();
      }
    }
    if (auto it = j.find("labels"); it != j.end()) {
      for (const auto& [key, value] : it->items()) {
        model.labels[static_cast<std::size_t>(std::stoul(key))] = value.get<std::string>();
      }
    }
    model.n_fitted = j.value("n_fitted", std::size_t{0});
    model.assign_agreement = j.value("assign_agreement", 1.0);
    if (auto it = j.find("warnings"); it != j.end()) {
      model.warnings = it->get<std::vector<std::string>>();
    }
    if (auto it = j.find("merge_history"); it != j.end()) {
      for (const auto& m : *it) {
        model.merge_history.push_back({m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(),
                                       m.at(2).get<double>(), m.at(3).get<std::size_t>()});
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed cluster model JSON: ") + e.what());
  }
}

std::vector<std::size_t> reservoir_sample(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> out;
  if (count >= n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  std::mt19937_64 rng(seed);
  out.resize(count);
  std::iota(out.begin(), out.end(), 0);
  for (std::size_t i = count; i < n; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i)(rng);
    if (j < count) out[j] = i;
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace stylelens
