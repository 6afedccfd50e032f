// style-lens: command-line front end for the stylelens library.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stylelens/forecast.hpp"
#include "stylelens/io.hpp"
#include "stylelens/kdsc.hpp"
#include "stylelens/kinematics.hpp"
#include "stylelens/report.hpp"
#include "stylelens/style_embed.hpp"
#include "stylelens/synth.hpp"
#include "stylelens/tdbm.hpp"
#include "stylelens/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stylelens;

namespace {

std::string num(double v) { return fmt::format("{}", v); }

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<Scene> load_input(const fs::path& path) {
  const auto ext = path.extension().string();
  return load_scenes(path, ext == ".csv" ? SceneFormat::kCsv : SceneFormat::kJsonl);
}

// scene_id -> ground-truth label, from a synth labels CSV.
std::map<std::string, std::string> read_labels(const fs::path& path) {
  const CsvTable table = read_csv_file(path);
  const std::size_t id_col = table.column("scene_id");
  const std::size_t label_col = table.column("label");
  std::map<std::string, std::string> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (!out.emplace(row.at(id_col), row.at(label_col)).second) {
      throw ParseError(table.row_lines[r], "scene_id", "duplicate scene '" + row[id_col] + "'");
    }
  }
  return out;
}

// Style class per scene: ground-truth labels when given, TDBM otherwise.
std::vector<StyleClass> scene_styles(std::span<const Scene> scenes, const TdbmConfig& tdbm,
                                     const std::optional<fs::path>& labels_path) {
  std::vector<StyleClass> styles;
  styles.reserve(scenes.size());
  if (labels_path) {
    const auto labels = read_labels(*labels_path);
    for (const auto& s : scenes) {
      auto it = labels.find(s.scene_id);
      if (it == labels.end()) throw Error("no label for scene '" + s.scene_id + "'");
      styles.push_back(label_style_class(it->second));
    }
  } else {
    for (const auto& s : scenes) styles.push_back(tdbm_evaluate(s, tdbm).style);
  }
  return styles;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "yellow-light";
  std::size_t n = 500;
  std::string mix = "aggressive=0.3,normal=0.5,timid=0.2";
  std::uint64_t seed = 7;
  fs::path out;
  fs::path labels;
  std::optional<fs::path> config;
  bool mdsi = false;
  bool neighbors = false;
};

void run_synth(const SynthArgs& a) {
  SynthConfig config = a.config ? synth_config_from_json(read_json_file(*a.config)) : SynthConfig{};
  if (a.neighbors) {
    config.yellow_light.with_neighbor = true;
    config.cruise.with_neighbor = true;
  }
  const StyleMix mix = parse_style_mix(a.mix);
  SynthOptions options{a.seed, a.mdsi, config.params};
  std::vector<SynthScene> corpus;
  if (a.kind == "yellow-light") {
    corpus = gen_yellow_light(a.n, mix, options, config.yellow_light);
  } else if (a.kind == "cruise") {
    corpus = gen_cruise(a.n, mix, options, config.cruise);
  } else {
    throw Error("unknown --kind '" + a.kind + "'");
  }

  std::ostringstream scenes;
  for (const auto& s : corpus) scenes << scene_to_json(s.scene).dump() << '\n';
  write_text_file(a.out, scenes.str());

  json echo = to_json(config);
  echo["kind"] = a.kind;
  echo["mix"] = mix;
  echo["seed"] = a.seed;
  echo["mdsi_labels"] = a.mdsi;
  std::string labels = "# config: " + echo.dump() + "\n";
  labels += "scene_id,label,split,go,forced_go,v0,d0,t_red,stop_line_x,brake_decel\n";
  for (const auto& s : corpus) {
    labels += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", csv_escape(s.scene.scene_id), s.label,
                          to_string(s.scene.split), s.go ? 1 : 0, s.forced_go ? 1 : 0, num(s.v0),
                          num(s.d0), num(s.t_red), num(s.stop_line_x), num(s.brake_decel));
  }
  if (!a.labels.empty()) write_text_file(a.labels, labels);
}

// ---- features ---------------------------------------------------------------

struct FeaturesArgs {
  fs::path in;
  fs::path out;
  bool all_agents = false;
  bool include_endpoints = false;
};

void run_features(const FeaturesArgs& a) {
  const auto scenes = load_input(a.in);
  const FeatureOptions options{a.include_endpoints};
  std::string out = "scene_id,agent_id";
  for (auto name : kFeatureNames) out += fmt::format(",{}", name);
  out += '\n';
  const auto emit = [&](const Scene& scene, const TrajectorySample& agent) {
    const double step = agent.duration() / static_cast<double>(agent.size() - 1);
    const KinematicFeatures f = extract_features(resample_uniform(agent, step), options);
    out += csv_escape(scene.scene_id) + "," + csv_escape(agent.agent_id);
    for (auto name : kFeatureNames) out += "," + num(feature_value(f, name));
    out += '\n';
  };
  for (const auto& scene : scenes) {
    if (!a.all_agents) {
      emit(scene, scene.focal());
      continue;
    }
    for (const auto& agent : scene.agents) {
      if (agent.size() >= 4) emit(scene, agent);
    }
  }
  write_text_file(a.out, out);
}

// ---- tdbm -------------------------------------------------------------------

struct TdbmArgs {
  fs::path in;
  std::optional<fs::path> config;
  fs::path out;
};

void run_tdbm(const TdbmArgs& a) {
  const TdbmConfig config = a.config ? tdbm_config_from_json(read_json_file(*a.config)) : TdbmConfig{};
  const auto scenes = load_input(a.in);
  std::string out = "scene_id,agent_id,s_center,v_nei,s_front,v_avg,j_l,had_neighbors";
  for (StyleClass s : kAllStyleClasses) out += fmt::format(",score_{}", to_string(s));
  out += ",class\n";
  for (const auto& scene : scenes) {
    const TdbmResult r = tdbm_evaluate(scene, config);
    const auto& x = r.features;
    out += fmt::format("{},{},{},{},{},{},{},{}", csv_escape(scene.scene_id),
                       csv_escape(scene.focal_agent_id), num(x.s_center), num(x.v_nei),
                       num(x.s_front), num(x.v_avg), num(x.j_l), x.had_neighbors ? 1 : 0);
    for (double s : r.scores.scores) out += "," + num(s);
    out += fmt::format(",{}\n", to_string(r.style));
  }
  write_text_file(a.out, out);
}

// ---- kdsc -------------------------------------------------------------------

struct KdscArgs {
  fs::path features;
  std::size_t k = 2;
  std::string subset = "max_abs_accel,var_accel,var_speed,gamma";
  fs::path out;
  std::optional<fs::path> assignments;
  std::size_t sample = 0;
  std::uint64_t seed = 0;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void run_kdsc(const KdscArgs& a) {
  const CsvTable table = read_csv_file(a.features);
  const std::size_t id_col = table.column("scene_id");
  const std::size_t agent_col = table.column("agent_id");
  std::vector<KinematicFeatures> rows(table.rows.size());
  for (auto name : kFeatureNames) {
    const std::size_t col = table.column(name);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      try {
        set_feature_value(rows[r], name, parse_double(table.rows[r].at(col)));
      } catch (const std::exception& e) {
        throw ParseError(table.row_lines[r], std::string(name), e.what());
      }
    }
  }

  std::vector<KinematicFeatures> fit_rows = rows;
  if (a.sample > 0 && a.sample < rows.size()) {
    fit_rows.clear();
    for (std::size_t i : reservoir_sample(rows.size(), a.sample, a.seed)) fit_rows.push_back(rows[i]);
  }
  ClusterModel model = fit_kdsc(fit_rows, a.k, split_list(a.subset));
  if (a.k == 2) model = label_clusters(std::move(model), fit_rows);
  for (const auto& w : model.warnings) std::cerr << "warning: " << w << '\n';
  write_text_file(a.out, to_json(model).dump(2) + "\n");

  if (a.assignments) {
    std::string out = "scene_id,agent_id,cluster,label\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t c = assign(model, rows[r]);
      auto it = model.labels.find(c);
      out += fmt::format("{},{},{},{}\n", csv_escape(table.rows[r][id_col]),
                         csv_escape(table.rows[r][agent_col]), c,
                         it == model.labels.end() ? "" : it->second);
    }
    write_text_file(*a.assignments, out);
  }
}

// ---- train-embed / eval -----------------------------------------------------

struct TrainArgs {
  fs::path in;
  std::string fusion = "early";
  fs::path bank;
  fs::path model;
  std::optional<fs::path> config;
  std::optional<fs::path> labels;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> modes;
  std::size_t clusters = 3;
  std::size_t min_samples = 5;
  double v_highway = ContextConfig{}.v_highway;
};

void run_train(const TrainArgs& a) {
  ForecastConfig config =
      a.config ? forecast_config_from_json(read_json_file(*a.config)) : ForecastConfig{};
  config.fusion = parse_fusion(a.fusion);
  if (a.epochs) config.epochs = *a.epochs;
  if (a.seed) config.seed = *a.seed;
  if (a.modes) config.modes = *a.modes;
  IndexConfig index_config;
  index_config.context.v_highway = a.v_highway;

  const auto all = load_input(a.in);
  std::vector<Scene> scenes;
  for (const auto& s : all) {
    if (s.split == Split::kTrain) scenes.push_back(s);
  }
  if (scenes.empty()) throw Error("no training scenes (split 'train') in " + a.in.string());
  const auto styles = scene_styles(scenes, index_config.tdbm, a.labels);

  std::vector<KinematicFeatures> features;
  for (const auto& s : scenes) features.push_back(extract_features(focal_uniform(s, index_config.tdbm)));
  const StyleModels models = fit_style_models(features, styles, a.clusters, a.min_samples);

  SampleSet set = make_forecast_samples(scenes, config);
  if (set.skipped > 0) std::cerr << "skipped " << set.skipped << " scenes shorter than H + T\n";
  attach_indices(set.samples, scenes, styles, models, index_config);
  const TrainResult result = train(set.samples, config, std::nullopt, a.clusters);

  json model = {{"forecast", to_json(result.model)},
                {"style_models", to_json(models)},
                {"tdbm", to_json(index_config.tdbm)},
                {"context", {{"v_highway", index_config.context.v_highway}}},
                {"epoch_loss", result.epoch_loss},
                {"skipped_scenes", set.skipped}};
  write_text_file(a.model, model.dump(2) + "\n");
  const EmbeddingBank bank =
      result.bank ? *result.bank
                  : EmbeddingBank(kNumStyleClasses, a.clusters, config.style_width, config.seed);
  write_text_file(a.bank, to_json(bank).dump(2) + "\n");
}

struct EvalArgs {
  fs::path in;
  fs::path model;
  std::optional<fs::path> bank;
  std::optional<fs::path> labels;
  std::string split = "test";
  std::string name;
  fs::path out;
};

void run_eval(const EvalArgs& a) {
  const json model_json = read_json_file(a.model);
  const ForecastModel model = forecast_model_from_json(model_json.at("forecast"));
  const StyleModels models = style_models_from_json(model_json.at("style_models"));
  IndexConfig index_config;
  index_config.tdbm = tdbm_config_from_json(model_json.at("tdbm"));
  index_config.context.v_highway = model_json.at("context").at("v_highway").get<double>();
  std::optional<EmbeddingBank> bank;
  if (model.config.fusion != Fusion::kNone) {
    if (!a.bank) throw Error("a fused model needs --bank");
    bank = embedding_bank_from_json(read_json_file(*a.bank));
  }

  const Split split = parse_split(a.split);
  std::vector<Scene> scenes;
  for (const auto& s : load_input(a.in)) {
    if (s.split == split) scenes.push_back(s);
  }
  if (scenes.empty()) throw Error("no scenes in split '" + a.split + "'");
  const auto styles = scene_styles(scenes, index_config.tdbm, a.labels);
  SampleSet set = make_forecast_samples(scenes, model.config);
  if (set.skipped > 0) std::cerr << "skipped " << set.skipped << " scenes shorter than H + T\n";
  attach_indices(set.samples, scenes, styles, models, index_config);
  const auto rows = evaluate(set.samples, model, bank);
  const std::string name =
      a.name.empty() ? "mlp-" + std::string(to_string(model.config.fusion)) : a.name;
  write_text_file(a.out, metrics_csv(rows, name));
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  fs::path in;
  std::optional<fs::path> tdbm_config;
  std::optional<fs::path> kdsc_model;
  std::optional<fs::path> config;
  fs::path out_dir;
  std::string splits = "train,test";
  bool svg = false;
};

void run_report(const ReportArgs& a) {
  ReportConfig config = a.config ? report_config_from_json(read_json_file(*a.config)) : ReportConfig{};
  if (a.tdbm_config) config.tdbm = tdbm_config_from_json(read_json_file(*a.tdbm_config));
  std::optional<ClusterModel> kdsc;
  if (a.kdsc_model) kdsc = cluster_model_from_json(read_json_file(*a.kdsc_model));

  const auto scenes = load_input(a.in);
  if (scenes.empty()) throw Error("no scenes in " + a.in.string());
  std::vector<KinematicFeatures> features;
  std::vector<StyleClass> classes;
  std::vector<std::string> class_names;
  for (const auto& s : scenes) {
    features.push_back(extract_features(focal_uniform(s, config.tdbm), config.features));
    classes.push_back(tdbm_evaluate(s, config.tdbm).style);
    class_names.emplace_back(to_string(classes.back()));
  }
  const auto write = [&](const std::string& stem, const std::string& csv, const std::string& svg) {
    write_text_file(a.out_dir / (stem + ".csv"), csv);
    if (a.svg) write_text_file(a.out_dir / (stem + ".svg"), svg);
  };

  std::vector<StyleHistogram> histograms{style_histogram(scenes, Classifier::kTdbm, config)};
  if (kdsc) histograms.push_back(style_histogram(scenes, Classifier::kKdsc, config, &*kdsc));
  write("style_histogram", style_histogram_csv(histograms, config), style_histogram_svg(histograms));

  std::vector<std::string> order;
  for (StyleClass s : kAllStyleClasses) order.emplace_back(to_string(s));
  const KinematicsReport kin = kinematics_by_style(features, class_names, order, config.n_min);
  for (const auto& note : kin.notes) std::cerr << "note: " << note << '\n';
  write("kinematics_boxplots", kinematics_csv(kin, config), kinematics_svg(kin));

  const bool any_mdsi = std::any_of(scenes.begin(), scenes.end(),
                                    [](const Scene& s) { return s.mdsi_label.has_value(); });
  if (any_mdsi) {
    const Heatmap heat = mdsi_tdbm_heatmap(scenes, classes);
    write("mdsi_tdbm_heatmap", heatmap_csv(heat, config), heatmap_svg(heat));
  } else {
    std::cerr << "note: no scene carries an mdsi_label; mdsi_tdbm_heatmap skipped\n";
  }

  if (kdsc) {
    std::vector<Split> splits;
    for (const auto& name : split_list(a.splits)) {
      const Split split = parse_split(name);
      const bool present = std::any_of(scenes.begin(), scenes.end(),
                                       [split](const Scene& s) { return s.split == split; });
      if (present) {
        splits.push_back(split);
      } else {
        std::cerr << "note: split '" << name << "' has no scenes; omitted from cluster_speed_hist\n";
      }
    }
    if (splits.empty()) throw Error("none of the requested splits has scenes");
    const ClusterSpeedReport speed =
        cluster_speed_distribution(scenes, features, *kdsc, splits, config);
    write("cluster_speed_hist", cluster_speed_csv(speed, config), cluster_speed_svg(speed));
  } else {
    std::cerr << "note: no --kdsc-model; kdsc histogram and cluster_speed_hist skipped\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"style-lens: driving-style analytics for vehicle trajectories"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* sc = app.add_subcommand("synth", "generate a labeled synthetic corpus");
  sc->add_option("--kind", synth.kind, "yellow-light | cruise")
      ->check(CLI::IsMember({"yellow-light", "cruise"}));
  sc->add_option("--n", synth.n, "number of scenes");
  sc->add_option("--mix", synth.mix, "label=fraction,...");
  sc->add_option("--seed", synth.seed);
  sc->add_option("--out", synth.out, "scenes JSONL")->required();
  sc->add_option("--labels", synth.labels, "ground-truth labels CSV");
  sc->add_option("--config", synth.config, "generator config JSON");
  sc->add_flag("--mdsi", synth.mdsi, "sample MDSI-style labels");
  sc->add_flag("--neighbors", synth.neighbors, "add an adjacent-lane vehicle");

  FeaturesArgs feat;
  auto* fc = app.add_subcommand("features", "per-trajectory kinematic features");
  fc->add_option("--in", feat.in)->required();
  fc->add_option("--out", feat.out)->required();
  fc->add_flag("--all-agents", feat.all_agents, "every agent with >= 4 samples, not just the focal");
  fc->add_flag("--include-endpoints", feat.include_endpoints, "use endpoint jerk samples");

  TdbmArgs tdbm;
  auto* tc = app.add_subcommand("tdbm", "TDBM scores and classes");
  tc->add_option("--in", tdbm.in)->required();
  tc->add_option("--config", tdbm.config, "TDBM config JSON");
  tc->add_option("--out", tdbm.out)->required();

  KdscArgs kd;
  auto* kc = app.add_subcommand("kdsc", "Ward clustering of kinematic features");
  kc->add_option("--features", kd.features)->required();
  kc->add_option("--k", kd.k);
  kc->add_option("--subset", kd.subset, "comma-separated feature names");
  kc->add_option("--out", kd.out, "cluster model JSON")->required();
  kc->add_option("--assignments", kd.assignments, "per-row cluster CSV");
  kc->add_option("--sample", kd.sample, "fit on a seeded sample of this many rows");
  kc->add_option("--seed", kd.seed, "sampling seed");

  TrainArgs tr;
  auto* trc = app.add_subcommand("train-embed", "train the forecaster and style bank");
  trc->add_option("--in", tr.in)->required();
  trc->add_option("--fusion", tr.fusion)->check(CLI::IsMember({"none", "early", "late"}));
  trc->add_option("--bank", tr.bank, "bank JSON output")->required();
  trc->add_option("--model", tr.model, "model JSON output")->required();
  trc->add_option("--config", tr.config, "forecast config JSON");
  trc->add_option("--labels", tr.labels, "ground-truth labels CSV used for style indices");
  trc->add_option("--epochs", tr.epochs);
  trc->add_option("--seed", tr.seed);
  trc->add_option("--modes", tr.modes);
  trc->add_option("--clusters", tr.clusters, "intra-style clusters K");
  trc->add_option("--min-samples", tr.min_samples, "samples needed for a per-style model");
  trc->add_option("--v-highway", tr.v_highway, "context speed threshold, m/s");

  EvalArgs ev;
  auto* evc = app.add_subcommand("eval", "forecast metrics by style");
  evc->add_option("--in", ev.in)->required();
  evc->add_option("--model", ev.model)->required();
  evc->add_option("--bank", ev.bank);
  evc->add_option("--labels", ev.labels, "ground-truth labels CSV used for style indices");
  evc->add_option("--split", ev.split)->check(CLI::IsMember({"train", "val", "test"}));
  evc->add_option("--name", ev.name, "model column value");
  evc->add_option("--out", ev.out)->required();

  ReportArgs rep;
  auto* rc = app.add_subcommand("report", "distribution reports");
  rc->add_option("--in", rep.in)->required();
  rc->add_option("--tdbm-config", rep.tdbm_config);
  rc->add_option("--kdsc-model", rep.kdsc_model);
  rc->add_option("--config", rep.config, "report config JSON");
  rc->add_option("--out-dir", rep.out_dir)->required();
  rc->add_option("--splits", rep.splits, "splits for cluster_speed_hist");
  rc->add_flag("--svg", rep.svg, "also write SVG figures");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sc->parsed()) run_synth(synth);
    else if (fc->parsed()) run_features(feat);
    else if (tc->parsed()) run_tdbm(tdbm);
    else if (kc->parsed()) run_kdsc(kd);
    else if (trc->parsed()) run_train(tr);
    else if (evc->parsed()) run_eval(ev);
    else if (rc->parsed()) run_report(rep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
