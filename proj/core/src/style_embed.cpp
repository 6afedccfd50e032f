#include "stylelens/style_embed.hpp"

#include <random>

#include <nlohmann/json.hpp>

#include "stylelens/stats.hpp"

namespace stylelens {

using nlohmann::json;

namespace {

Eigen::MatrixXd uniform_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows) throw Error(std::string(what) + ": wrong row count");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error(std::string(what) + ": wrong width");
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = j[r][c].get<double>();
      if (!std::isfinite(v)) throw Error(std::string(what) + ": non-finite entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

}  // namespace

EmbeddingBank::EmbeddingBank(std::size_t num_styles, std::size_t clusters, std::size_t width,
                             std::uint64_t seed)
    : clusters_(clusters), width_(width), seed_(seed) {
  if (num_styles == 0 || clusters == 0 || width == 0) {
    throw Error("embedding bank dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  styles_.reserve(num_styles);
  for (std::size_t z = 0; z < num_styles; ++z) {
    StyleFactors f;
    f.e_k = uniform_matrix(clusters, width, rng);
    f.e_c = uniform_matrix(kNumContexts, width, rng);
    styles_.push_back(std::move(f));
  }
}

const StyleFactors& EmbeddingBank::factors(std::size_t z) const {
  if (z >= styles_.size()) throw Error("style slot out of range");
  return styles_[z];
}

StyleFactors& EmbeddingBank::factors(std::size_t z) {
  if (z >= styles_.size()) throw Error("style slot out of range");
  return styles_[z];
}

Eigen::MatrixXd EmbeddingBank::table(std::size_t z) const {
  const auto& f = factors(z);
  return f.e_k * f.e_c.transpose();
}

bool EmbeddingBank::contains(const StyleIndex& idx) const {
  return idx.z < styles_.size() && idx.k < clusters_ && idx.c < kNumContexts;
}

void EmbeddingBank::check(const StyleIndex& idx) const {
  if (!contains(idx)) {
    throw Error("style index (" + std::to_string(idx.z) + ", " + std::to_string(idx.k) + ", " +
                std::to_string(idx.c) + ") outside bank");
  }
}

bool operator==(const EmbeddingBank& a, const EmbeddingBank& b) {
  if (a.clusters_ != b.clusters_ || a.width_ != b.width_ || a.seed_ != b.seed_ ||
      a.styles_.size() != b.styles_.size()) {
    return false;
  }
  for (std::size_t z = 0; z < a.styles_.size(); ++z) {
    if (a.styles_[z].e_k != b.styles_[z].e_k || a.styles_[z].e_c != b.styles_[z].e_c) return false;
  }
  return true;
}

json to_json(const EmbeddingBank& bank) {
  json styles = json::array();
  for (std::size_t z = 0; z < bank.num_styles(); ++z) {
    styles.push_back({{"e_k", matrix_to_json(bank.factors(z).e_k)},
                      {"e_c", matrix_to_json(bank.factors(z).e_c)}});
  }
  return json{{"num_styles", bank.num_styles()},
              {"K", bank.clusters()},
              {"D", bank.width()},
              {"seed", bank.seed()},
              {"styles", std::move(styles)}};
}

EmbeddingBank embedding_bank_from_json(const json& j) {
  try {
    const auto num_styles = j.at("num_styles").get<std::size_t>();
    const auto clusters = j.at("K").get<std::size_t>();
    const auto width = j.at("D").get<std::size_t>();
    EmbeddingBank bank(num_styles, clusters, width, j.at("seed").get<std::uint64_t>());
    const auto& styles = j.at("styles");
    if (styles.size() != num_styles) throw Error("bank 'styles' length differs from num_styles");
    for (std::size_t z = 0; z < num_styles; ++z) {
      bank.factors(z).e_k = matrix_from_json(styles[z].at("e_k"), clusters, width, "e_k");
      bank.factors(z).e_c = matrix_from_json(styles[z].at("e_c"), kNumContexts, width, "e_c");
    }
    return bank;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed embedding bank JSON: ") + e.what());
  }
}

EmbeddingLookup lookup(const EmbeddingBank& bank, const StyleIndex& idx) {
  bank.check(idx);
  const auto& f = bank.factors(idx.z);
  EmbeddingLookup out;
  out.vector = f.e_k.row(static_cast<Eigen::Index>(idx.k)).transpose().cwiseProduct(
      f.e_c.row(static_cast<Eigen::Index>(idx.c)).transpose());
  out.scalar = out.vector.sum();
  return out;
}

BankGradient bank_gradients(const EmbeddingBank& bank, const StyleIndex& idx,
                            const Eigen::VectorXd& upstream) {
  bank.check(idx);
  if (static_cast<std::size_t>(upstream.size()) != bank.width()) {
    throw Error("upstream gradient width differs from bank width");
  }
  const auto& f = bank.factors(idx.z);
  BankGradient g;
  g.idx = idx;
  g.e_k_row = upstream.cwiseProduct(f.e_c.row(static_cast<Eigen::Index>(idx.c)).transpose());
  g.e_c_row = upstream.cwiseProduct(f.e_k.row(static_cast<Eigen::Index>(idx.k)).transpose());
  return g;
}

void apply_gradient(EmbeddingBank& bank, const BankGradient& grad, double learning_rate) {
  bank.check(grad.idx);
  auto& f = bank.factors(grad.idx.z);
  f.e_k.row(static_cast<Eigen::Index>(grad.idx.k)) -= learning_rate * grad.e_k_row.transpose();
  f.e_c.row(static_cast<Eigen::Index>(grad.idx.c)) -= learning_rate * grad.e_c_row.transpose();
}

std::size_t context_classify(const Scene& scene, const ContextConfig& config) {
  if (scene.highway) return *scene.highway ? 1 : 0;
  const TrajectorySample& focal = scene.focal();
  if (focal.size() < 2) throw Error("scene '" + scene.scene_id + "': focal agent too short");
  const double step = focal.duration() / static_cast<double>(focal.size() - 1);
  const auto speeds = speed_profile(resample_uniform(focal, step));
  return mean(speeds) >= config.v_highway ? 1 : 0;
}

const ClusterModel& StyleModels::model_for(StyleClass style) const {
  const auto& own = per_style[index_of(style)];
  return own ? *own : fallback;
}

std::size_t StyleModels::slot(StyleClass style) const {
  return per_style[index_of(style)] ? index_of(style) : fallback_slot;
}

StyleModels fit_style_models(std::span<const KinematicFeatures> features,
                             std::span<const StyleClass> styles, std::size_t clusters,
                             std::size_t min_samples,
                             const std::vector<std::string>& feature_subset) {
  if (features.size() != styles.size()) throw Error("features and styles differ in length");
  if (features.size() < clusters) throw Error("too few samples for the fallback cluster model");
  StyleModels models;
  models.clusters = clusters;
  std::array<std::vector<KinematicFeatures>, kNumStyleClasses> grouped;
  for (std::size_t i = 0; i < features.size(); ++i) grouped[index_of(styles[i])].push_back(features[i]);
  const std::size_t needed = std::max(min_samples, clusters);
  bool fallback_set = false;
  for (std::size_t s = 0; s < kNumStyleClasses; ++s) {
    if (grouped[s].size() >= needed) {
      models.per_style[s] = fit_kdsc(grouped[s], clusters, feature_subset);
    } else if (!fallback_set) {
      models.fallback_slot = s;
      fallback_set = true;
    }
  }
  models.fallback = fit_kdsc(features, clusters, feature_subset);
  return models;
}

json to_json(const StyleModels& models) {
  json per_style = json::array();
  for (const auto& m : models.per_style) per_style.push_back(m ? to_json(*m) : json(nullptr));
  return json{{"K", models.clusters},
              {"fallback_slot", models.fallback_slot},
              {"fallback", to_json(models.fallback)},
              {"per_style", std::move(per_style)}};
}

StyleModels style_models_from_json(const json& j) {
  try {
    StyleModels models;
    models.clusters = j.at("K").get<std::size_t>();
    models.fallback_slot = j.at("fallback_slot").get<std::size_t>();
    models.fallback = cluster_model_from_json(j.at("fallback"));
    const auto& per_style = j.at("per_style");
    if (per_style.size() != kNumStyleClasses) throw Error("per_style must have 6 entries");
    for (std::size_t s = 0; s < kNumStyleClasses; ++s) {
      if (!per_style[s].is_null()) models.per_style[s] = cluster_model_from_json(per_style[s]);
    }
    return models;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed style models JSON: ") + e.what());
  }
}

TrajectorySample focal_uniform(const Scene& scene, const TdbmConfig& config) {
  const TrajectorySample& focal = scene.focal();
  if (focal.size() < 2) throw Error("scene '" + scene.scene_id + "': focal agent too short");
  const double step =
      config.dt > 0.0 ? config.dt : focal.duration() / static_cast<double>(focal.size() - 1);
  return resample_uniform(focal, step);
}

StyleIndex style_index(const Scene& scene, const StyleModels& models, const IndexConfig& config) {
  const StyleClass style = tdbm_evaluate(scene, config.tdbm).style;
  const KinematicFeatures f = extract_features(focal_uniform(scene, config.tdbm));
  StyleIndex idx;
  idx.z = models.slot(style);
  idx.k = assign(models.model_for(style), f);
  idx.c = context_classify(scene, config.context);
  return idx;
}

}  // namespace stylelens
