#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "stylelens/style_embed.hpp"
#include "stylelens/tdbm.hpp"
#include "stylelens/trajectory.hpp"

namespace stylelens {

/// Where the projected style vector enters the network.
enum class Fusion { kNone, kEarly, kLate };

std::string_view to_string(Fusion fusion);
Fusion parse_fusion(std::string_view text);

struct ForecastConfig {
  std::size_t history = 8;   // H past steps
  std::size_t future = 12;   // T future steps
  std::size_t modes = 6;     // M
  std::size_t hidden = 64;
  std::size_t style_width = 16;  // D
  Fusion fusion = Fusion::kNone;
  std::uint64_t seed = 0;
  double dt = 0.2;               // resample step of the focal track, s
  std::size_t window_start = 0;  // first resampled sample of the window
  double position_scale = 10.0;  // metres per network unit
  double learning_rate = 1e-2;
  std::size_t epochs = 200;
  std::size_t batch_size = 4;
  double miss_threshold = 2.0;   // m
};

nlohmann::json to_json(const ForecastConfig& config);
ForecastConfig forecast_config_from_json(const nlohmann::json& j);

/// Single tanh hidden layer over the flattened history, M linear
/// regression heads and a linear mode-logit head. Early fusion adds the
/// projected style vector to the hidden pre-activation; late fusion adds it
/// to the decoder input.
struct ForecastModel {
  ForecastConfig config;
  Eigen::MatrixXd enc_w;    // hidden x 2H
  Eigen::VectorXd enc_b;    // hidden
  Eigen::MatrixXd style_w;  // hidden x D
  Eigen::MatrixXd dec_w;    // M*2T x hidden
  Eigen::VectorXd dec_b;    // M*2T
  Eigen::MatrixXd logit_w;  // M x hidden
  Eigen::VectorXd logit_b;  // M

  /// Seeded Glorot-uniform weights, zero biases.
  static ForecastModel initialize(const ForecastConfig& config);
  static ForecastModel zeros(const ForecastConfig& config);

  void check_shapes() const;
};

nlohmann::json to_json(const ForecastModel& model);
ForecastModel forecast_model_from_json(const nlohmann::json& j);

/// M future offset sequences relative to the last observed position, with
/// mode probabilities (softmax of `logits`).
struct Forecast {
  std::vector<std::vector<Vec2>> modes;
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;

  /// Builds a forecast whose probs are softmax(logits).
  static Forecast from_logits(std::vector<std::vector<Vec2>> modes, Eigen::VectorXd logits);
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// `history` holds H offsets relative to the last observed position;
/// `style` is required exactly when the model uses fusion.
Forecast predict(const ForecastModel& model, std::span<const Vec2> history,
                 const std::optional<Eigen::VectorXd>& style = std::nullopt);

/// Winner-takes-all loss: mean squared displacement of the best mode plus
/// cross-entropy of the mode probabilities against the best mode.
struct WtaLoss {
  double loss = 0.0;
  std::size_t best_mode = 0;
  bool tie = false;  // another mode had the same displacement
  /// Per mode, per step d loss / d offset; zero except for the best mode.
  std::vector<std::vector<Vec2>> mode_gradients;
  /// d loss / d logits.
  Eigen::VectorXd logit_gradients;
};

WtaLoss wta_loss(const Forecast& forecast, std::span<const Vec2> ground_truth);

/// One training or evaluation window cut from a scene's focal track.
struct ForecastSample {
  std::string scene_id;
  std::size_t scene_index = 0;  // position in the scene list it was cut from
  std::vector<Vec2> history;  // H offsets relative to the last observed position
  std::vector<Vec2> future;   // T offsets relative to the same origin
  std::optional<StyleIndex> index;
  StyleClass style = StyleClass::kThreatening;
};

struct SampleSet {
  std::vector<ForecastSample> samples;
  std::size_t skipped = 0;  // scenes whose focal track was too short
};

/// Resamples each focal track at config.dt and cuts the H + T window
/// starting at config.window_start. Scenes without enough samples are
/// skipped and counted.
SampleSet make_forecast_samples(std::span<const Scene> scenes, const ForecastConfig& config);

/// Sets each sample's style to styles[scene_index] and its index to
/// (slot of that style, nearest intra-style cluster, context).
void attach_indices(std::span<ForecastSample> samples, std::span<const Scene> scenes,
                    std::span<const StyleClass> styles, const StyleModels& models,
                    const IndexConfig& config);

struct TrainResult {
  ForecastModel model;
  std::optional<EmbeddingBank> bank;
  std::vector<double> epoch_loss;
};

/// Mini-batch gradient descent with a fixed step and seeded shuffling.
/// With fusion, every sample needs an index and the bank rows it touches
/// are updated through bank_gradients. A bank is created from the config
/// (6 styles, `clusters` rows) when none is supplied.
TrainResult train(std::span<const ForecastSample> samples, const ForecastConfig& config,
                  std::optional<EmbeddingBank> bank = std::nullopt, std::size_t clusters = 3);

/// Per-scene displacement summary.
struct SceneMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  std::size_t best_mode = 0;  // argmin final displacement
  double p_best = 0.0;
  bool miss = false;
};

SceneMetrics scene_metrics(const Forecast& forecast, std::span<const Vec2> ground_truth,
                           double miss_threshold);

struct MetricsRow {
  std::optional<StyleClass> style;  // nullopt = Overall
  double brier_fde = 0.0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  std::size_t n = 0;
};

/// Averages per-scene metrics by style (styles with n >= 1, ordinal
/// order) followed by the Overall row over every scene.
std::vector<MetricsRow> aggregate_metrics(std::span<const SceneMetrics> scenes,
                                          std::span<const StyleClass> styles);

/// Runs the model over the samples, using each sample's style for the
/// rows and its index for the bank lookup.
std::vector<MetricsRow> evaluate(std::span<const ForecastSample> samples, const ForecastModel& model,
                                 const std::optional<EmbeddingBank>& bank);

/// CSV with columns style,model,brierFDE,minADE,minFDE,MissRate,n.
std::string metrics_csv(std::span<const MetricsRow> rows, std::string_view model_name,
                        bool with_header = true);

}  // namespace stylelens
