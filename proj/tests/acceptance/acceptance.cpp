#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stylelens/forecast.hpp"
#include "stylelens/kdsc.hpp"
#include "stylelens/kinematics.hpp"
#include "stylelens/stats.hpp"
#include "stylelens/style_embed.hpp"
#include "stylelens/synth.hpp"
#include "stylelens/tdbm.hpp"

namespace fs = std::filesystem;
using namespace stylelens;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

const StyleMix kMix = {{"aggressive", 0.3}, {"normal", 0.5}, {"timid", 0.2}};

// ---------------------------------------------------------------------------

Outcome tdbm_oracle() {
  const auto start = Clock::now();
  // Coefficients typed in again by hand, one row per class.
  const double table[6][6] = {
      {1.63, 4.04, -0.46, -0.82, 0.88, -2.58},  {1.58, 3.08, -0.45, 0.02, -0.10, -1.67},
      {1.35, 4.08, -0.58, -0.43, -0.28, -1.99}, {-1.51, -3.17, 1.06, 0.51, -0.51, 1.39},
      {-2.47, -2.60, 1.43, 0.98, -0.82, 1.27},  {-3.59, -2.19, 1.75, 1.73, -0.30, 0.61}};
  std::mt19937_64 rng(601);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const TdbmFeatureVector x{u(rng), u(rng), u(rng), u(rng), u(rng), true};
    const double col[6] = {x.s_center, x.v_nei, x.s_front, x.v_avg, x.j_l, 1.0};
    const StyleScores got = tdbm_score(x);
    for (int r = 0; r < 6; ++r) {
      double want = 0.0;
      for (int c = 0; c < 6; ++c) want += table[r][c] * col[c];
      worst = std::max(worst, std::abs(got.scores[static_cast<std::size_t>(r)] - want));
    }
  }
  TdbmFeatureVector zero{0.0, 0.0, 0.0, 0.0, 0.0, true};
  const StyleClass with_neighbors = tdbm_classify(tdbm_score(zero), true);
  const StyleClass alone = tdbm_classify(tdbm_score(zero), false);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = worst <= 1e-12 && with_neighbors == StyleClass::kCareful &&
           alone == StyleClass::kThreatening && elapsed < 1.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "max |diff| %.2e on 1000 vectors, zero input -> %s / %s, %.4f s",
                worst, std::string(to_string(with_neighbors)).c_str(),
                std::string(to_string(alone)).c_str(), elapsed);
  o.detail = buf;
  return o;
}

// ---------------------------------------------------------------------------

struct CruiseCorpus {
  std::vector<KinematicFeatures> features;
  std::vector<bool> aggressive;
};

CruiseCorpus cruise_corpus() {
  SynthOptions options;
  options.seed = 42;
  CruiseCorpus c;
  for (const auto& s : gen_cruise(400, kMix, options)) {
    c.features.push_back(extract_features(s.scene.focal()));
    c.aggressive.push_back(s.label == "aggressive");
  }
  return c;
}

// Greedy Ward agglomeration from members' sums of squares.
std::vector<std::vector<std::size_t>> brute_force_partitions(const Eigen::MatrixXd& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto sse = [&](const std::vector<std::size_t>& members) {
    Eigen::RowVectorXd centre = Eigen::RowVectorXd::Zero(x.cols());
    for (auto m : members) centre += x.row(static_cast<Eigen::Index>(m));
    centre /= static_cast<double>(members.size());
    double s = 0.0;
    for (auto m : members) s += (x.row(static_cast<Eigen::Index>(m)) - centre).squaredNorm();
    return s;
  };
  const auto canonical = [n](std::vector<std::vector<std::size_t>> groups) {
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end());
    std::vector<std::size_t> label(n);
    for (std::size_t id = 0; id < groups.size(); ++id)
      for (auto p : groups[id]) label[p] = id;
    return label;
  };
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups.push_back({i});
  std::vector<std::vector<std::size_t>> partitions(n + 1);
  partitions[n] = canonical(groups);
  while (groups.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        auto merged = groups[i];
        merged.insert(merged.end(), groups[j].begin(), groups[j].end());
        const double delta = sse(merged) - sse(groups[i]) - sse(groups[j]);
        if (delta < best) {
          best = delta;
          bi = i;
          bj = j;
        }
      }
    }
    groups[bi].insert(groups[bi].end(), groups[bj].begin(), groups[bj].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bj));
    partitions[groups.size()] = canonical(groups);
  }
  return partitions;
}

Outcome clustering_fidelity(const CruiseCorpus& corpus) {
  const auto start = Clock::now();
  const ClusterModel model = fit_kdsc(corpus.features, 2);
  std::size_t same = 0;
  for (std::size_t i = 0; i < corpus.features.size(); ++i) {
    same += (model.fitted_assignments[i] == 1) == corpus.aggressive[i];
  }
  const double n = static_cast<double>(corpus.features.size());
  const double agreement = std::max(same / n, 1.0 - same / n);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::size_t instances = 0, mismatches = 0;
  for (int trial = 0; trial < 700; ++trial) {
    const std::size_t rows = 1 + static_cast<std::size_t>(trial % 8);
    const std::size_t cols = 1 + static_cast<std::size_t>(trial % 5);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (auto& v : x.reshaped()) v = g(rng);
    const auto merges = ward_linkage(x);
    const auto oracle = brute_force_partitions(x);
    for (std::size_t k = 1; k <= rows; ++k) {
      ++instances;
      mismatches += cut_dendrogram(merges, rows, k) != oracle[k];
    }
  }
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = agreement >= 0.9 && mismatches == 0 && elapsed < 30.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "agreement %.2f%%, brute-force partition mismatches %zu/%zu, %.3f s",
                agreement * 100.0, mismatches, instances, elapsed);
  o.detail = buf;
  return o;
}

Outcome speed_separation(const CruiseCorpus& corpus) {
  const auto subset = default_kdsc_features();
  const bool speed_free = std::find(subset.begin(), subset.end(), "mean_speed") == subset.end();
  const ClusterModel model = fit_kdsc(corpus.features, 2, subset);
  std::array<std::vector<double>, 2> speeds;
  for (std::size_t i = 0; i < corpus.features.size(); ++i) {
    speeds[model.fitted_assignments[i]].push_back(corpus.features[i].mean_speed);
  }
  Outcome o;
  if (speeds[0].size() < 2 || speeds[1].size() < 2) {
    o.detail = "a cluster has fewer than two members";
    return o;
  }
  const WelchResult w = welch_t_test(speeds[0], speeds[1]);
  o.pass = speed_free && w.p_value < 0.01;
  char buf[160];
  std::snprintf(buf, sizeof buf, "Welch t %.3f df %.1f p %.3g (cluster means %.2f / %.2f m/s)",
                w.t, w.df, w.p_value, mean(speeds[0]), mean(speeds[1]));
  o.detail = buf;
  return o;
}

// ---------------------------------------------------------------------------

Outcome fusion_benefit() {
  const auto start = Clock::now();
  SynthOptions options;
  options.seed = 7;
  const auto generated = gen_yellow_light(600, kMix, options);
  std::vector<Scene> scenes;
  std::vector<StyleClass> styles;
  for (const auto& s : generated) {
    scenes.push_back(s.scene);
    styles.push_back(label_style_class(s.label));
  }

  // One intra-style cluster, so the index is a function of the label alone.
  const IndexConfig index_config;
  std::vector<KinematicFeatures> train_features;
  std::vector<StyleClass> train_styles;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].split != Split::kTrain) continue;
    train_features.push_back(extract_features(focal_uniform(scenes[i], index_config.tdbm)));
    train_styles.push_back(styles[i]);
  }
  const StyleModels models = fit_style_models(train_features, train_styles, 1);

  ForecastConfig config;
  config.modes = 1;
  config.epochs = 200;
  auto set = make_forecast_samples(scenes, config);
  attach_indices(set.samples, scenes, styles, models, index_config);
  std::vector<ForecastSample> train_set, test_set;
  for (const auto& s : set.samples) {
    const Split split = scenes[s.scene_index].split;
    if (split == Split::kTrain) train_set.push_back(s);
    if (split == Split::kTest) test_set.push_back(s);
  }

  std::map<Fusion, double> min_fde;
  for (Fusion fusion : {Fusion::kNone, Fusion::kEarly, Fusion::kLate}) {
    ForecastConfig c = config;
    c.fusion = fusion;
    const TrainResult r = train(train_set, c, std::nullopt, 1);
    min_fde[fusion] = evaluate(test_set, r.model, r.bank).back().min_fde;
  }
  const double elapsed = seconds_since(start);
  const double none = min_fde[Fusion::kNone];
  const double early = min_fde[Fusion::kEarly];
  const double late = min_fde[Fusion::kLate];
  Outcome o;
  o.pass = early <= 0.7 * none && early <= late && elapsed < 300.0;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "test minFDE none %.3f early %.3f (%.3fx) late %.3f; %zu train / %zu test, %.1f s",
                none, early, early / none, late, train_set.size(), test_set.size(), elapsed);
  o.detail = buf;
  return o;
}

// ---------------------------------------------------------------------------

double relative_error(double numeric, double analytic) {
  const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
  return std::abs(numeric - analytic) / scale;
}

Outcome gradient_integrity() {
  const double h = 1e-5;
  std::mt19937_64 rng(605);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(1, 6);
  double worst_bank = 0.0, worst_wta = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    // Scalar loss L = u . lookup(bank, idx).vector
    const std::size_t clusters = pick(rng), width = pick(rng);
    EmbeddingBank bank(kNumStyleClasses, clusters, width, static_cast<std::uint64_t>(trial));
    const StyleIndex idx{pick(rng) - 1, pick(rng) % clusters, pick(rng) % kNumContexts};
    Eigen::VectorXd upstream(static_cast<Eigen::Index>(width));
    for (auto& v : upstream) v = g(rng);
    const auto loss = [&](const EmbeddingBank& b) { return upstream.dot(lookup(b, idx).vector); };
    const BankGradient grad = bank_gradients(bank, idx, upstream);
    for (int table = 0; table < 2; ++table) {
      const auto row = static_cast<Eigen::Index>(table == 0 ? idx.k : idx.c);
      for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(width); ++d) {
        EmbeddingBank plus = bank, minus = bank;
        auto& p = table == 0 ? plus.factors(idx.z).e_k : plus.factors(idx.z).e_c;
        auto& m = table == 0 ? minus.factors(idx.z).e_k : minus.factors(idx.z).e_c;
        p(row, d) += h;
        m(row, d) -= h;
        const double numeric = (loss(plus) - loss(minus)) / (2 * h);
        const double analytic = table == 0 ? grad.e_k_row(d) : grad.e_c_row(d);
        worst_bank = std::max(worst_bank, relative_error(numeric, analytic));
      }
    }

    const std::size_t modes = pick(rng), steps = pick(rng) + 2;
    std::vector<std::vector<Vec2>> offsets(modes, std::vector<Vec2>(steps));
    for (auto& mode : offsets)
      for (auto& p : mode) p = {3.0 * g(rng), 3.0 * g(rng)};
    std::vector<Vec2> truth(steps);
    for (auto& p : truth) p = {3.0 * g(rng), 3.0 * g(rng)};
    Eigen::VectorXd logits(static_cast<Eigen::Index>(modes));
    for (auto& v : logits) v = g(rng);
    const auto wta = [&](const std::vector<std::vector<Vec2>>& m, const Eigen::VectorXd& l) {
      return wta_loss(Forecast::from_logits(m, l), truth).loss;
    };
    const WtaLoss analytic = wta_loss(Forecast::from_logits(offsets, logits), truth);
    for (std::size_t m = 0; m < modes; ++m) {
      for (std::size_t t = 0; t < steps; ++t) {
        for (int axis = 0; axis < 2; ++axis) {
          auto plus = offsets, minus = offsets;
          (axis == 0 ? plus[m][t].x : plus[m][t].y) += h;
          (axis == 0 ? minus[m][t].x : minus[m][t].y) -= h;
          const double numeric = (wta(plus, logits) - wta(minus, logits)) / (2 * h);
          const Vec2 a = analytic.mode_gradients[m][t];
          worst_wta = std::max(worst_wta, relative_error(numeric, axis == 0 ? a.x : a.y));
        }
      }
    }
    for (Eigen::Index k = 0; k < logits.size(); ++k) {
      Eigen::VectorXd plus = logits, minus = logits;
      plus(k) += h;
      minus(k) -= h;
      const double numeric = (wta(offsets, plus) - wta(offsets, minus)) / (2 * h);
      worst_wta = std::max(worst_wta, relative_error(numeric, analytic.logit_gradients(k)));
    }
  }
  Outcome o;
  o.pass = worst_bank < 1e-4 && worst_wta < 1e-4;
  char buf[160];
  std::snprintf(buf, sizeof buf, "max relative error bank %.2e, wta %.2e over 100 configurations",
                worst_bank, worst_wta);
  o.detail = buf;
  return o;
}

// ---------------------------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      files[fs::relative(entry.path(), root).string()] = read_file(entry.path());
    }
  }
  return files;
}

Outcome cli_determinism() {
#ifndef STYLELENS_CLI_PATH
  return {false, "CLI path not compiled in"};
#else
  const std::string cli = STYLELENS_CLI_PATH;
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"synth", "synth --kind yellow-light --n 60 --seed 3 --mdsi --neighbors --out scenes.jsonl "
                "--labels labels.csv"},
      {"synth", "synth --kind cruise --n 80 --seed 4 --mdsi --out cruise.jsonl "
                "--labels cruise_labels.csv"},
      {"features", "features --in cruise.jsonl --out features.csv"},
      {"tdbm", "tdbm --in scenes.jsonl --out tdbm.csv"},
      {"kdsc", "kdsc --features features.csv --k 2 --out kdsc.json --assignments assign.csv"},
      {"train-embed", "train-embed --in scenes.jsonl --fusion early --labels labels.csv "
                      "--epochs 5 --modes 2 --seed 5 --bank bank.json --model model.json"},
      {"eval", "eval --in scenes.jsonl --model model.json --bank bank.json --labels labels.csv "
               "--out metrics.csv"},
      {"report", "report --in cruise.jsonl --kdsc-model kdsc.json --out-dir report --svg"},
  };
  const fs::path base = fs::temp_directory_path() /
                        ("stylelens_determinism_" + std::to_string(std::random_device{}()));
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = base / ("run" + std::to_string(run));
    fs::create_directories(dir);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const std::string cmd = "cd \"" + dir.string() + "\" && \"" + cli + "\" " + steps[i].second +
                              " > stdout_" + std::to_string(i) + ".txt 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        fs::remove_all(base);
        return {false, "'" + steps[i].first + "' exited nonzero"};
      }
    }
    runs.push_back(snapshot(dir));
  }
  fs::remove_all(base);
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : runs[0]) {
    auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) differing.push_back(name);
  }
  if (runs[0].size() != runs[1].size()) differing.push_back("<file set>");
  Outcome o;
  o.pass = differing.empty() && runs[0].size() > steps.size();
  o.detail = std::to_string(steps.size()) + " invocations, " + std::to_string(runs[0].size()) +
             " files compared";
  for (const auto& d : differing) o.detail += ", differs: " + d;
  return o;
#endif
}

// ---------------------------------------------------------------------------

Outcome metrics_oracle() {
  // A model with zero weights emits its biases, which encode the example.
  ForecastConfig c;
  c.history = 2;
  c.future = 2;
  c.modes = 2;
  c.hidden = 3;
  c.position_scale = 1.0;
  ForecastModel model = ForecastModel::zeros(c);
  const double modes[2][2][2] = {{{0, 0}, {11, 0}}, {{0, 0}, {15, 0}}};
  for (int m = 0; m < 2; ++m)
    for (int t = 0; t < 2; ++t)
      for (int k = 0; k < 2; ++k) model.dec_b(2 * (2 * m + t) + k) = modes[m][t][k];
  model.logit_b << std::log(0.6), std::log(0.4);
  ForecastSample sample;
  sample.scene_id = "worked";
  sample.history = {{-2, 0}, {0, 0}};
  sample.future = {{0, 0}, {10, 0}};
  sample.style = StyleClass::kCareful;
  const auto rows = evaluate(std::span(&sample, 1), model, std::nullopt);
  const MetricsRow& overall = rows.back();
  const bool worked = std::abs(overall.min_fde - 1.0) < 1e-12 &&
                      std::abs(overall.brier_fde - 1.16) < 1e-12 && overall.miss_rate == 0.0;

  std::mt19937_64 rng(607);
  std::normal_distribution<double> g(0.0, 4.0);
  std::uniform_int_distribution<std::size_t> count(1, 6);
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = count(rng), steps = count(rng);
    std::vector<std::vector<Vec2>> offsets(m, std::vector<Vec2>(steps));
    for (auto& mode : offsets)
      for (auto& p : mode) p = {g(rng), g(rng)};
    std::vector<Vec2> truth(steps);
    for (auto& p : truth) p = {g(rng), g(rng)};
    Eigen::VectorXd logits(static_cast<Eigen::Index>(m));
    for (auto& v : logits) v = g(rng);
    const SceneMetrics sm = scene_metrics(Forecast::from_logits(offsets, logits), truth, 2.0);
    const std::vector<SceneMetrics> one{sm};
    const std::vector<StyleClass> style{StyleClass::kTimid};
    const MetricsRow r = aggregate_metrics(one, style).back();
    if (!(r.min_fde <= r.brier_fde && r.brier_fde <= r.min_fde + 1.0)) ++violations;
  }
  Outcome o;
  o.pass = worked && violations == 0;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "worked example minFDE %.6f brierFDE %.6f MissRate %.1f; bound violations %zu/1000",
                overall.min_fde, overall.brier_fde, overall.miss_rate, violations);
  o.detail = buf;
  return o;
}

// ---------------------------------------------------------------------------

double interior_accel_error(double h, int power) {
  const std::size_t n = static_cast<std::size_t>(std::llround(2.0 / h)) + 1;
  TrajectorySample traj;
  traj.agent_id = "probe";
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 1.0 + static_cast<double>(i) * h;
    traj.t.push_back(t);
    traj.pos.push_back({std::pow(t, power), 0.0});
  }
  const Derivatives d = derivatives(traj);
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const double exact = power * (power - 1) * std::pow(traj.t[i], power - 2);
    worst = std::max(worst, std::abs(d.accel[i] - exact));
  }
  return worst;
}

Outcome derivative_convergence() {
  // Dyadic steps keep the cubic's samples exact, so its error is pure
  // rounding; the quartic exposes the second-order term.
  const double h = 0.125;
  const double cubic_h = interior_accel_error(h, 3);
  const double cubic_half = interior_accel_error(h / 2, 3);
  const double quartic_h = interior_accel_error(h, 4);
  const double quartic_half = interior_accel_error(h / 2, 4);
  const double quartic_ratio = quartic_h / quartic_half;
  Outcome o;
  o.pass = cubic_h >= 3.9 * cubic_half && quartic_ratio >= 3.9;
  char buf[200];
  std::snprintf(buf, sizeof buf, "t^3 error %.3g -> %.3g; t^4 error %.3g -> %.3g (ratio %.3f)",
                cubic_h, cubic_half, quartic_h, quartic_half, quartic_ratio);
  o.detail = buf;
  return o;
}

}  // namespace

int main() {
  const CruiseCorpus corpus = cruise_corpus();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"tdbm-oracle-equivalence", tdbm_oracle},
      {"clustering-fidelity", [&] { return clustering_fidelity(corpus); }},
      {"speed-separation", [&] { return speed_separation(corpus); }},
      {"fusion-benefit", fusion_benefit},
      {"gradient-integrity", gradient_integrity},
      {"cli-determinism", cli_determinism},
      {"metrics-oracle", metrics_oracle},
      {"derivative-convergence", derivative_convergence},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
