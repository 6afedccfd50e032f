#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "stylelens/kdsc.hpp"
#include "stylelens/tdbm.hpp"

namespace stylelens {

inline constexpr std::size_t kNumContexts = 2;  // 0 = non-highway, 1 = highway

/// (style slot, intra-style cluster, context) address into the bank.
struct StyleIndex {
  std::size_t z = 0;
  std::size_t k = 0;
  std::size_t c = 0;

  friend bool operator==(const StyleIndex&, const StyleIndex&) = default;
};

/// Factor pair of one style: e_k is K x D, e_c is 2 x D.
struct StyleFactors {
  Eigen::MatrixXd e_k;
  Eigen::MatrixXd e_c;
};

/// Per-style factorized embedding tables. The K x 2 table of style z is
/// E_z = e_k * e_c^T; the conditioning vector for (z, k, c) is the
/// elementwise product e_k[k] .* e_c[c], whose sum is E_z(k, c).
class EmbeddingBank {
 public:
  EmbeddingBank() = default;
  /// Entries drawn uniformly from [-0.1, 0.1] with a seeded generator.
  EmbeddingBank(std::size_t num_styles, std::size_t clusters, std::size_t width, std::uint64_t seed);

  std::size_t num_styles() const { return styles_.size(); }
  std::size_t clusters() const { return clusters_; }
  std::size_t width() const { return width_; }
  std::uint64_t seed() const { return seed_; }

  const StyleFactors& factors(std::size_t z) const;
  StyleFactors& factors(std::size_t z);

  /// Materialized E_z (K x 2).
  Eigen::MatrixXd table(std::size_t z) const;

  bool contains(const StyleIndex& idx) const;
  /// Throws when the index is outside the bank.
  void check(const StyleIndex& idx) const;

  friend bool operator==(const EmbeddingBank& a, const EmbeddingBank& b);

 private:
  std::size_t clusters_ = 0;
  std::size_t width_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<StyleFactors> styles_;
};

nlohmann::json to_json(const EmbeddingBank& bank);
EmbeddingBank embedding_bank_from_json(const nlohmann::json& j);

struct EmbeddingLookup {
  Eigen::VectorXd vector;  // D entries
  double scalar = 0.0;     // E_z(k, c)
};

EmbeddingLookup lookup(const EmbeddingBank& bank, const StyleIndex& idx);

/// Gradients of loss w.r.t. row k of e_k and row c of e_c given the
/// upstream gradient of the lookup vector. All other rows get zero.
struct BankGradient {
  StyleIndex idx;
  Eigen::VectorXd e_k_row;
  Eigen::VectorXd e_c_row;
};

BankGradient bank_gradients(const EmbeddingBank& bank, const StyleIndex& idx,
                            const Eigen::VectorXd& upstream);

/// Plain gradient-descent step on the two touched rows.
void apply_gradient(EmbeddingBank& bank, const BankGradient& grad, double learning_rate);

struct ContextConfig {
  double v_highway = 16.7;  // m/s
};

/// Highway flag when present, otherwise mean focal speed >= v_highway.
std::size_t context_classify(const Scene& scene, const ContextConfig& config = {});

/// Intra-style cluster models, one per style class with enough samples.
/// Styles without a model share the pooled fallback model and one shared
/// embedding slot so that indexing is total.
struct StyleModels {
  std::size_t clusters = 3;
  std::array<std::optional<ClusterModel>, kNumStyleClasses> per_style;
  ClusterModel fallback;
  std::size_t fallback_slot = 0;

  const ClusterModel& model_for(StyleClass style) const;
  /// Bank slot of a style: its own index, or fallback_slot.
  std::size_t slot(StyleClass style) const;
};

/// Fits K-cluster Ward models per style. A style needs at least
/// max(min_samples, K) rows for its own model.
StyleModels fit_style_models(std::span<const KinematicFeatures> features,
                             std::span<const StyleClass> styles, std::size_t clusters,
                             std::size_t min_samples = 5,
                             const std::vector<std::string>& feature_subset = default_kdsc_features());

nlohmann::json to_json(const StyleModels& models);
StyleModels style_models_from_json(const nlohmann::json& j);

struct IndexConfig {
  TdbmConfig tdbm;
  ContextConfig context;
};

/// Focal trajectory resampled to the step the TDBM config prescribes.
TrajectorySample focal_uniform(const Scene& scene, const TdbmConfig& config);

/// TDBM class -> slot, nearest intra-style centroid -> k, context -> c.
StyleIndex style_index(const Scene& scene, const StyleModels& models, const IndexConfig& config = {});

}  // namespace stylelens
