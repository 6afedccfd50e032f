#include "stylelens/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stylelens/kinematics.hpp"

namespace stylelens {

using nlohmann::json;

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

struct ForwardCache {
  VectorXd input;
  VectorXd hidden;   // tanh activation
  VectorXd decoder;  // decoder input (hidden plus late style term)
  VectorXd offsets;  // M*2T, network units
  VectorXd logits;
};

struct Gradients {
  MatrixXd enc_w;
  VectorXd enc_b;
  MatrixXd style_w;
  MatrixXd dec_w;
  VectorXd dec_b;
  MatrixXd logit_w;
  VectorXd logit_b;

  explicit Gradients(const ForecastModel& m)
      : enc_w(MatrixXd::Zero(m.enc_w.rows(), m.enc_w.cols())),
        enc_b(VectorXd::Zero(m.enc_b.size())),
        style_w(MatrixXd::Zero(m.style_w.rows(), m.style_w.cols())),
        dec_w(MatrixXd::Zero(m.dec_w.rows(), m.dec_w.cols())),
        dec_b(VectorXd::Zero(m.dec_b.size())),
        logit_w(MatrixXd::Zero(m.logit_w.rows(), m.logit_w.cols())),
        logit_b(VectorXd::Zero(m.logit_b.size())) {}
};

MatrixXd glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  MatrixXd m(idx(rows), idx(cols));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
  return m;
}

VectorXd flatten_history(std::span<const Vec2> history, double scale) {
  VectorXd x(idx(2 * history.size()));
  for (std::size_t i = 0; i < history.size(); ++i) {
    x[idx(2 * i)] = history[i].x / scale;
    x[idx(2 * i + 1)] = history[i].y / scale;
  }
  return x;
}

bool uses_style(const ForecastModel& model) { return model.config.fusion != Fusion::kNone; }

ForwardCache forward(const ForecastModel& model, VectorXd input, const VectorXd* style) {
  ForwardCache c;
  c.input = std::move(input);
  VectorXd pre = model.enc_w * c.input + model.enc_b;
  if (style != nullptr && model.config.fusion == Fusion::kEarly) pre += model.style_w * *style;
  c.hidden = pre.array().tanh().matrix();
  c.decoder = c.hidden;
  if (style != nullptr && model.config.fusion == Fusion::kLate) c.decoder += model.style_w * *style;
  c.offsets = model.dec_w * c.decoder + model.dec_b;
  c.logits = model.logit_w * c.decoder + model.logit_b;
  return c;
}

std::vector<std::vector<Vec2>> unpack_modes(const VectorXd& offsets, std::size_t modes,
                                            std::size_t steps, double scale) {
  std::vector<std::vector<Vec2>> out(modes, std::vector<Vec2>(steps));
  for (std::size_t m = 0; m < modes; ++m) {
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t base = 2 * (m * steps + t);
      out[m][t] = {offsets[idx(base)] * scale, offsets[idx(base + 1)] * scale};
    }
  }
  return out;
}

void check_style(const ForecastModel& model, const std::optional<VectorXd>& style) {
  if (uses_style(model)) {
    if (!style) throw Error("model uses style fusion; a style vector is required");
    if (static_cast<std::size_t>(style->size()) != model.config.style_width) {
      throw Error("style vector width " + std::to_string(style->size()) + " differs from model D " +
                  std::to_string(model.config.style_width));
    }
  } else if (style) {
    throw Error("model has no style fusion; style vector must be absent");
  }
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, Index rows, Index cols, const char* name) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw Error(std::string("model weight '") + name + "' has the wrong shape");
  }
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw Error(std::string("model weight '") + name + "' has the wrong shape");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

VectorXd vector_from_json(const json& j, Index size, const char* name) {
  if (!j.is_array() || static_cast<Index>(j.size()) != size) {
    throw Error(std::string("model weight '") + name + "' has the wrong shape");
  }
  VectorXd v(size);
  for (Index i = 0; i < size; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

std::string capitalized(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace

std::string_view to_string(Fusion fusion) {
  switch (fusion) {
    case Fusion::kNone: return "none";
    case Fusion::kEarly: return "early";
    case Fusion::kLate: return "late";
  }
  return "none";
}

Fusion parse_fusion(std::string_view text) {
  if (text == "none") return Fusion::kNone;
  if (text == "early") return Fusion::kEarly;
  if (text == "late") return Fusion::kLate;
  throw Error("fusion must be none|early|late, got '" + std::string(text) + "'");
}

json to_json(const ForecastConfig& c) {
  return json{{"history", c.history},
              {"future", c.future},
              {"modes", c.modes},
              {"hidden", c.hidden},
              {"style_width", c.style_width},
              {"fusion", std::string(to_string(c.fusion))},
              {"seed", c.seed},
              {"dt", c.dt},
              {"window_start", c.window_start},
              {"position_scale", c.position_scale},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"miss_threshold", c.miss_threshold}};
}

ForecastConfig forecast_config_from_json(const json& j) {
  ForecastConfig c;
  try {
    c.history = j.value("history", c.history);
    c.future = j.value("future", c.future);
    c.modes = j.value("modes", c.modes);
    c.hidden = j.value("hidden", c.hidden);
    c.style_width = j.value("style_width", c.style_width);
    c.fusion = parse_fusion(j.value("fusion", std::string("none")));
    c.seed = j.value("seed", c.seed);
    c.dt = j.value("dt", c.dt);
    c.window_start = j.value("window_start", c.window_start);
    c.position_scale = j.value("position_scale", c.position_scale);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.miss_threshold = j.value("miss_threshold", c.miss_threshold);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed forecast config: ") + e.what());
  }
  return c;
}

ForecastModel ForecastModel::initialize(const ForecastConfig& config) {
  if (config.history == 0 || config.future == 0 || config.modes == 0 || config.hidden == 0 ||
      config.style_width == 0) {
    throw Error("forecast dimensions must be positive");
  }
  if (!(config.position_scale > 0.0)) throw Error("position_scale must be positive");
  std::mt19937_64 rng(config.seed);
  ForecastModel m;
  m.config = config;
  m.enc_w = glorot(config.hidden, 2 * config.history, rng);
  m.enc_b = VectorXd::Zero(idx(config.hidden));
  m.style_w = glorot(config.hidden, config.style_width, rng);
  m.dec_w = glorot(2 * config.future * config.modes, config.hidden, rng);
  m.dec_b = VectorXd::Zero(idx(2 * config.future * config.modes));
  m.logit_w = glorot(config.modes, config.hidden, rng);
  m.logit_b = VectorXd::Zero(idx(config.modes));
  return m;
}

ForecastModel ForecastModel::zeros(const ForecastConfig& config) {
  ForecastModel m = initialize(config);
  m.enc_w.setZero();
  m.style_w.setZero();
  m.dec_w.setZero();
  m.logit_w.setZero();
  return m;
}

void ForecastModel::check_shapes() const {
  const auto& c = config;
  const bool ok = enc_w.rows() == idx(c.hidden) && enc_w.cols() == idx(2 * c.history) &&
                  enc_b.size() == idx(c.hidden) && style_w.rows() == idx(c.hidden) &&
                  style_w.cols() == idx(c.style_width) &&
                  dec_w.rows() == idx(2 * c.future * c.modes) && dec_w.cols() == idx(c.hidden) &&
                  dec_b.size() == idx(2 * c.future * c.modes) && logit_w.rows() == idx(c.modes) &&
                  logit_w.cols() == idx(c.hidden) && logit_b.size() == idx(c.modes);
  if (!ok) throw Error("forecast model weights do not match its configuration");
}

json to_json(const ForecastModel& m) {
  return json{{"config", to_json(m.config)},
              {"enc_w", matrix_to_json(m.enc_w)},
              {"enc_b", std::vector<double>(m.enc_b.begin(), m.enc_b.end())},
              {"style_w", matrix_to_json(m.style_w)},
              {"dec_w", matrix_to_json(m.dec_w)},
              {"dec_b", std::vector<double>(m.dec_b.begin(), m.dec_b.end())},
              {"logit_w", matrix_to_json(m.logit_w)},
              {"logit_b", std::vector<double>(m.logit_b.begin(), m.logit_b.end())}};
}

ForecastModel forecast_model_from_json(const json& j) {
  try {
    ForecastModel m;
    m.config = forecast_config_from_json(j.at("config"));
    const auto& c = m.config;
    m.enc_w = matrix_from_json(j.at("enc_w"), idx(c.hidden), idx(2 * c.history), "enc_w");
    m.enc_b = vector_from_json(j.at("enc_b"), idx(c.hidden), "enc_b");
    m.style_w = matrix_from_json(j.at("style_w"), idx(c.hidden), idx(c.style_width), "style_w");
    m.dec_w = matrix_from_json(j.at("dec_w"), idx(2 * c.future * c.modes), idx(c.hidden), "dec_w");
    m.dec_b = vector_from_json(j.at("dec_b"), idx(2 * c.future * c.modes), "dec_b");
    m.logit_w = matrix_from_json(j.at("logit_w"), idx(c.modes), idx(c.hidden), "logit_w");
    m.logit_b = vector_from_json(j.at("logit_b"), idx(c.modes), "logit_b");
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed forecast model JSON: ") + e.what());
  }
}

VectorXd softmax(const VectorXd& logits) {
  if (logits.size() == 0) return logits;
  const double peak = logits.maxCoeff();
  VectorXd e = (logits.array() - peak).exp().matrix();
  return e / e.sum();
}

Forecast Forecast::from_logits(std::vector<std::vector<Vec2>> modes, VectorXd logits) {
  if (modes.size() != static_cast<std::size_t>(logits.size())) {
    throw Error("forecast needs one logit per mode");
  }
  Forecast f;
  f.modes = std::move(modes);
  f.probs = softmax(logits);
  f.logits = std::move(logits);
  return f;
}

Forecast predict(const ForecastModel& model, std::span<const Vec2> history,
                 const std::optional<VectorXd>& style) {
  if (history.size() != model.config.history) {
    throw Error("history must have " + std::to_string(model.config.history) + " steps, got " +
                std::to_string(history.size()));
  }
  check_style(model, style);
  const double scale = model.config.position_scale;
  const ForwardCache c = forward(model, flatten_history(history, scale), style ? &*style : nullptr);
  return Forecast::from_logits(unpack_modes(c.offsets, model.config.modes, model.config.future, scale),
                               c.logits);
}

WtaLoss wta_loss(const Forecast& forecast, std::span<const Vec2> ground_truth) {
  const std::size_t modes = forecast.modes.size();
  if (modes == 0) throw Error("forecast has no modes");
  if (static_cast<std::size_t>(forecast.probs.size()) != modes) {
    throw Error("forecast probabilities do not match modes");
  }
  const std::size_t steps = ground_truth.size();
  if (steps == 0) throw Error("ground truth is empty");
  for (const auto& m : forecast.modes) {
    if (m.size() != steps) throw Error("forecast and ground truth lengths differ");
  }

  WtaLoss out;
  double best_sq = std::numeric_limits<double>::infinity();
  std::vector<double> sq(modes, 0.0);
  for (std::size_t m = 0; m < modes; ++m) {
    for (std::size_t t = 0; t < steps; ++t) {
      const Vec2 d = forecast.modes[m][t] - ground_truth[t];
      sq[m] += d.dot(d);
    }
    if (sq[m] < best_sq) {
      best_sq = sq[m];
      out.best_mode = m;
    }
  }
  for (std::size_t m = 0; m < modes; ++m) {
    if (m != out.best_mode && sq[m] == best_sq) out.tie = true;
  }

  const double n = static_cast<double>(steps);
  const double p_best = forecast.probs[idx(out.best_mode)];
  out.loss = best_sq / n - std::log(std::max(p_best, std::numeric_limits<double>::min()));

  out.mode_gradients.assign(modes, std::vector<Vec2>(steps));
  for (std::size_t t = 0; t < steps; ++t) {
    out.mode_gradients[out.best_mode][t] = (2.0 / n) * (forecast.modes[out.best_mode][t] - ground_truth[t]);
  }
  out.logit_gradients = forecast.probs;
  out.logit_gradients[idx(out.best_mode)] -= 1.0;
  return out;
}

SampleSet make_forecast_samples(std::span<const Scene> scenes, const ForecastConfig& config) {
  SampleSet set;
  const std::size_t window = config.history + config.future;
  for (const auto& scene : scenes) {
    const TrajectorySample& focal = scene.focal();
    if (focal.size() < 2) {
      ++set.skipped;
      continue;
    }
    const double step =
        config.dt > 0.0 ? config.dt : focal.duration() / static_cast<double>(focal.size() - 1);
    const TrajectorySample track = resample_uniform(focal, step);
    if (track.size() < config.window_start + window) {
      ++set.skipped;
      continue;
    }
    ForecastSample s;
    s.scene_id = scene.scene_id;
    s.scene_index = static_cast<std::size_t>(&scene - scenes.data());
    const Vec2 origin = track.pos[config.window_start + config.history - 1];
    for (std::size_t i = 0; i < config.history; ++i) {
      s.history.push_back(track.pos[config.window_start + i] - origin);
    }
    for (std::size_t i = 0; i < config.future; ++i) {
      s.future.push_back(track.pos[config.window_start + config.history + i] - origin);
    }
    set.samples.push_back(std::move(s));
  }
  return set;
}

void attach_indices(std::span<ForecastSample> samples, std::span<const Scene> scenes,
                    std::span<const StyleClass> styles, const StyleModels& models,
                    const IndexConfig& config) {
  if (scenes.size() != styles.size()) throw Error("scenes and styles differ in length");
  for (auto& s : samples) {
    if (s.scene_index >= scenes.size()) throw Error("sample '" + s.scene_id + "' has no scene");
    const Scene& scene = scenes[s.scene_index];
    const StyleClass style = styles[s.scene_index];
    const KinematicFeatures f = extract_features(focal_uniform(scene, config.tdbm));
    s.style = style;
    s.index = StyleIndex{models.slot(style), assign(models.model_for(style), f),
                         context_classify(scene, config.context)};
  }
}

TrainResult train(std::span<const ForecastSample> samples, const ForecastConfig& config,
                  std::optional<EmbeddingBank> bank, std::size_t clusters) {
  if (samples.empty()) throw Error("training set is empty");
  if (config.batch_size == 0) throw Error("batch size must be positive");
  TrainResult result;
  result.model = ForecastModel::initialize(config);
  ForecastModel& model = result.model;
  const bool fused = config.fusion != Fusion::kNone;
  if (fused) {
    if (!bank) bank = EmbeddingBank(kNumStyleClasses, clusters, config.style_width, config.seed);
    if (bank->width() != config.style_width) throw Error("bank width differs from model D");
    for (const auto& s : samples) {
      if (!s.index) throw Error("scene '" + s.scene_id + "' has no style index");
      bank->check(*s.index);
    }
  }
  for (const auto& s : samples) {
    if (s.history.size() != config.history || s.future.size() != config.future) {
      throw Error("scene '" + s.scene_id + "' window does not match H/T");
    }
  }

  const double scale = config.position_scale;
  const double lr = config.learning_rate;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<Vec2> gt(config.future);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      Gradients grad(model);
      std::vector<BankGradient> bank_grads;
      for (std::size_t b = start; b < stop; ++b) {
        const ForecastSample& s = samples[order[b]];
        std::optional<VectorXd> style;
        if (fused) style = lookup(*bank, *s.index).vector;
        const ForwardCache c =
            forward(model, flatten_history(s.history, scale), style ? &*style : nullptr);
        for (std::size_t t = 0; t < config.future; ++t) gt[t] = s.future[t] / scale;
        const Forecast fc =
            Forecast::from_logits(unpack_modes(c.offsets, config.modes, config.future, 1.0), c.logits);
        const WtaLoss l = wta_loss(fc, gt);
        loss_sum += l.loss;

        VectorXd d_offsets = VectorXd::Zero(c.offsets.size());
        for (std::size_t t = 0; t < config.future; ++t) {
          const std::size_t base = 2 * (l.best_mode * config.future + t);
          d_offsets[idx(base)] = l.mode_gradients[l.best_mode][t].x;
          d_offsets[idx(base + 1)] = l.mode_gradients[l.best_mode][t].y;
        }
        grad.dec_w.noalias() += d_offsets * c.decoder.transpose();
        grad.dec_b += d_offsets;
        grad.logit_w.noalias() += l.logit_gradients * c.decoder.transpose();
        grad.logit_b += l.logit_gradients;
        const VectorXd d_decoder =
            model.dec_w.transpose() * d_offsets + model.logit_w.transpose() * l.logit_gradients;
        const VectorXd d_pre =
            d_decoder.cwiseProduct((1.0 - c.hidden.array().square()).matrix());
        grad.enc_w.noalias() += d_pre * c.input.transpose();
        grad.enc_b += d_pre;
        if (fused) {
          const VectorXd& d_injected = config.fusion == Fusion::kEarly ? d_pre : d_decoder;
          grad.style_w.noalias() += d_injected * style->transpose();
          const VectorXd d_style = model.style_w.transpose() * d_injected;
          bank_grads.push_back(bank_gradients(*bank, *s.index, d_style));
        }
      }
      const double step = lr / static_cast<double>(stop - start);
      model.enc_w -= step * grad.enc_w;
      model.enc_b -= step * grad.enc_b;
      model.dec_w -= step * grad.dec_w;
      model.dec_b -= step * grad.dec_b;
      model.logit_w -= step * grad.logit_w;
      model.logit_b -= step * grad.logit_b;
      if (fused) {
        model.style_w -= step * grad.style_w;
        for (const auto& g : bank_grads) apply_gradient(*bank, g, step);
      }
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(samples.size()));
  }
  result.bank = std::move(bank);
  return result;
}

SceneMetrics scene_metrics(const Forecast& forecast, std::span<const Vec2> ground_truth,
                           double miss_threshold) {
  if (forecast.modes.empty() || ground_truth.empty()) throw Error("empty forecast or ground truth");
  SceneMetrics out;
  out.min_ade = std::numeric_limits<double>::infinity();
  out.min_fde = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < forecast.modes.size(); ++m) {
    const auto& mode = forecast.modes[m];
    if (mode.size() != ground_truth.size()) throw Error("forecast and ground truth lengths differ");
    double ade = 0.0;
    for (std::size_t t = 0; t < mode.size(); ++t) ade += (mode[t] - ground_truth[t]).norm();
    ade /= static_cast<double>(mode.size());
    const double fde = (mode.back() - ground_truth.back()).norm();
    out.min_ade = std::min(out.min_ade, ade);
    if (fde < out.min_fde) {
      out.min_fde = fde;
      out.best_mode = m;
    }
  }
  out.p_best = forecast.probs[idx(out.best_mode)];
  out.miss = out.min_fde > miss_threshold;
  return out;
}

std::vector<MetricsRow> aggregate_metrics(std::span<const SceneMetrics> scenes,
                                          std::span<const StyleClass> styles) {
  if (scenes.empty()) throw Error("cannot evaluate an empty dataset");
  if (scenes.size() != styles.size()) throw Error("metrics and styles differ in length");
  auto summarize = [&](std::optional<StyleClass> only) {
    MetricsRow row;
    row.style = only;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      if (only && styles[i] != *only) continue;
      const auto& s = scenes[i];
      row.brier_fde += s.min_fde + (1.0 - s.p_best) * (1.0 - s.p_best);
      row.min_ade += s.min_ade;
      row.min_fde += s.min_fde;
      row.miss_rate += s.miss ? 1.0 : 0.0;
      ++row.n;
    }
    if (row.n > 0) {
      const double n = static_cast<double>(row.n);
      row.brier_fde /= n;
      row.min_ade /= n;
      row.min_fde /= n;
      row.miss_rate /= n;
    }
    return row;
  };
  std::vector<MetricsRow> rows;
  for (StyleClass style : kAllStyleClasses) {
    MetricsRow row = summarize(style);
    if (row.n > 0) rows.push_back(row);
  }
  rows.push_back(summarize(std::nullopt));
  return rows;
}

std::vector<MetricsRow> evaluate(std::span<const ForecastSample> samples, const ForecastModel& model,
                                 const std::optional<EmbeddingBank>& bank) {
  if (samples.empty()) throw Error("cannot evaluate an empty dataset");
  const bool fused = model.config.fusion != Fusion::kNone;
  if (fused && !bank) throw Error("model uses style fusion; an embedding bank is required");
  std::vector<SceneMetrics> metrics;
  std::vector<StyleClass> styles;
  metrics.reserve(samples.size());
  for (const auto& s : samples) {
    std::optional<VectorXd> style;
    if (fused) {
      if (!s.index) throw Error("scene '" + s.scene_id + "' has no style index");
      style = lookup(*bank, *s.index).vector;
    }
    metrics.push_back(scene_metrics(predict(model, s.history, style), s.future,
                                    model.config.miss_threshold));
    styles.push_back(s.style);
  }
  return aggregate_metrics(metrics, styles);
}

std::string metrics_csv(std::span<const MetricsRow> rows, std::string_view model_name,
                        bool with_header) {
  std::string out;
  if (with_header) out += "style,model,brierFDE,minADE,minFDE,MissRate,n\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n",
                       r.style ? capitalized(to_string(*r.style)) : std::string("Overall"),
                       model_name, r.brier_fde, r.min_ade, r.min_fde, r.miss_rate, r.n);
  }
  return out;
}

}  // namespace stylelens
