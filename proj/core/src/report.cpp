#include "stylelens/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "stylelens/style_embed.hpp"
#include "stylelens/svg.hpp"

namespace stylelens {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  return fmt::format("{}", v);
}

std::string cluster_name(const ClusterModel& model, std::size_t id) {
  auto it = model.labels.find(id);
  return it != model.labels.end() ? it->second : "cluster" + std::to_string(id);
}

KinematicFeatures focal_features(const Scene& scene, const ReportConfig& config) {
  return extract_features(focal_uniform(scene, config.tdbm), config.features);
}

}  // namespace

json to_json(const ReportConfig& config) {
  return json{{"tdbm", to_json(config.tdbm)},
              {"include_endpoint_jerk", config.features.include_endpoints},
              {"n_min", config.n_min},
              {"bin_width", config.bin_width},
              {"bin_range", {config.bin_lo, config.bin_hi}}};
}

ReportConfig report_config_from_json(const json& j) {
  if (!j.is_object()) throw Error("report config must be a JSON object");
  ReportConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "tdbm") {
      c.tdbm = tdbm_config_from_json(v);
    } else if (key == "include_endpoint_jerk") {
      if (!v.is_boolean()) throw Error("report config 'include_endpoint_jerk' must be a boolean");
      c.features.include_endpoints = v.get<bool>();
    } else if (key == "n_min") {
      if (!v.is_number_unsigned()) throw Error("report config 'n_min' must be a count");
      c.n_min = v.get<std::size_t>();
    } else if (key == "bin_width") {
      if (!v.is_number()) throw Error("report config 'bin_width' must be a number");
      c.bin_width = v.get<double>();
    } else if (key == "bin_range") {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw Error("report config 'bin_range' must be [lo, hi]");
      }
      c.bin_lo = v[0].get<double>();
      c.bin_hi = v[1].get<double>();
    } else {
      throw Error("unknown report config key '" + key + "'");
    }
  }
  if (!(c.bin_width > 0.0 && c.bin_hi > c.bin_lo)) throw Error("invalid speed histogram range");
  return c;
}

StyleHistogram style_histogram(std::span<const Scene> scenes, Classifier classifier,
                               const ReportConfig& config, const ClusterModel* model) {
  if (scenes.empty()) throw Error("style histogram needs at least one scene");
  StyleHistogram h;
  if (classifier == Classifier::kTdbm) {
    h.classifier = "tdbm";
    for (StyleClass s : kAllStyleClasses) h.classes.emplace_back(to_string(s));
  } else {
    if (model == nullptr) throw Error("kdsc histogram needs a cluster model");
    h.classifier = "kdsc";
    for (std::size_t c = 0; c < model->k; ++c) h.classes.push_back(cluster_name(*model, c));
  }

  std::vector<std::size_t> class_of(scenes.size());
  std::set<Split> present;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    class_of[i] = classifier == Classifier::kTdbm
                      ? index_of(tdbm_evaluate(scenes[i], config.tdbm).style)
                      : assign(*model, focal_features(scenes[i], config));
    present.insert(scenes[i].split);
  }
  for (Split s : present) h.tags.emplace_back(to_string(s));
  h.tags.emplace_back("all");
  h.counts.assign(h.tags.size(), std::vector<std::size_t>(h.classes.size(), 0));
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto tag = static_cast<std::size_t>(
        std::distance(present.begin(), present.find(scenes[i].split)));
    ++h.counts[tag][class_of[i]];
    ++h.counts.back()[class_of[i]];
  }
  return h;
}

BoxplotStats boxplot(std::string metric, std::string style, std::vector<double> values) {
  if (values.empty()) throw Error("boxplot of '" + metric + "' needs at least one value");
  std::sort(values.begin(), values.end());
  BoxplotStats b;
  b.metric = std::move(metric);
  b.style = std::move(style);
  b.min = values.front();
  b.q1 = quantile_inclusive(values, 0.25);
  b.median = quantile_inclusive(values, 0.5);
  b.q3 = quantile_inclusive(values, 0.75);
  b.max = values.back();
  b.n = values.size();
  return b;
}

KinematicsReport kinematics_by_style(std::span<const KinematicFeatures> features,
                                     std::span<const std::string> styles,
                                     std::span<const std::string> style_order, std::size_t n_min) {
  if (features.empty()) throw Error("kinematics report needs at least one scene");
  if (features.size() != styles.size()) throw Error("features and styles differ in length");

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < styles.size(); ++i) members[styles[i]].push_back(i);

  std::vector<std::string> order(style_order.begin(), style_order.end());
  for (const auto& [style, idx] : members) {
    if (std::find(order.begin(), order.end(), style) == order.end()) order.push_back(style);
  }

  KinematicsReport report;
  std::vector<std::string> kept;
  for (const auto& style : order) {
    auto it = members.find(style);
    if (it == members.end()) continue;
    if (it->second.size() < n_min) {
      report.notes.push_back(fmt::format("style '{}' omitted: {} samples < n_min {}", style,
                                         it->second.size(), n_min));
      continue;
    }
    kept.push_back(style);
  }
  for (std::string_view metric : kFeatureNames) {
    for (const auto& style : kept) {
      std::vector<double> values;
      for (std::size_t i : members[style]) values.push_back(feature_value(features[i], metric));
      report.rows.push_back(boxplot(std::string(metric), style, std::move(values)));
    }
  }
  return report;
}

Heatmap mdsi_tdbm_heatmap(std::span<const Scene> scenes, std::span<const StyleClass> classes) {
  if (scenes.size() != classes.size()) throw Error("scenes and classes differ in length");
  std::map<std::string, std::array<std::size_t, kNumStyleClasses>> cells;
  Heatmap h;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (!scenes[i].mdsi_label) {
      ++h.unlabeled;
      continue;
    }
    auto [it, inserted] = cells.try_emplace(*scenes[i].mdsi_label);
    if (inserted) it->second.fill(0);
    ++it->second[index_of(classes[i])];
  }
  if (cells.empty()) throw Error("heatmap needs at least one scene with an mdsi_label");
  for (const auto& [label, row] : cells) {
    h.rows.push_back(label);
    h.counts.push_back(row);
  }
  return h;
}

ClusterSpeedReport cluster_speed_distribution(std::span<const Scene> scenes,
                                              std::span<const KinematicFeatures> features,
                                              const ClusterModel& model,
                                              std::span<const Split> splits,
                                              const ReportConfig& config) {
  if (scenes.size() != features.size()) throw Error("scenes and features differ in length");
  if (model.labels.size() != model.k) throw Error("cluster model is not labeled");
  if (!(config.bin_width > 0.0 && config.bin_hi > config.bin_lo)) {
    throw Error("invalid speed histogram range");
  }
  ClusterSpeedReport report;
  report.bin_lo = config.bin_lo;
  report.bin_width = config.bin_width;
  report.bins = static_cast<std::size_t>(
      std::ceil((config.bin_hi - config.bin_lo) / config.bin_width - 1e-9));

  std::vector<std::size_t> cluster(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) cluster[i] = assign(model, features[i]);

  for (Split split : splits) {
    SpeedHistogram h;
    h.split = split;
    for (std::size_t c = 0; c < model.k; ++c) h.clusters.push_back(cluster_name(model, c));
    h.counts.assign(model.k, std::vector<std::size_t>(report.bins, 0));
    std::vector<std::vector<double>> speeds(model.k);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      if (scenes[i].split != split) continue;
      const double v = features[i].mean_speed;
      const double pos = std::floor((v - config.bin_lo) / config.bin_width);
      const auto bin = static_cast<std::size_t>(
          std::clamp(pos, 0.0, static_cast<double>(report.bins - 1)));
      ++h.counts[cluster[i]][bin];
      speeds[cluster[i]].push_back(v);
    }
    std::size_t total = 0;
    for (std::size_t c = 0; c < model.k; ++c) {
      h.cluster_sizes.push_back(speeds[c].size());
      h.cluster_means.push_back(speeds[c].empty() ? std::nan("") : mean(speeds[c]));
      total += speeds[c].size();
    }
    if (total == 0) throw Error(fmt::format("split '{}' has no scenes", to_string(split)));
    if (model.k == 2 && speeds[0].size() >= 2 && speeds[1].size() >= 2) {
      h.welch = welch_t_test(speeds[0], speeds[1]);
    }
    report.splits.push_back(std::move(h));
  }
  return report;
}

std::string report_header(const ReportConfig& config, const std::string& title) {
  std::string out;
  out += "# report: " + title + "\n";
  out += "# config: " + to_json(config).dump() + "\n";
  out += "# gamma: " + std::string(kGammaDefinition) + "\n";
  out += "# quantiles: inclusive linear interpolation h=(n-1)p; whiskers: min/max\n";
  return out;
}

std::string style_histogram_csv(std::span<const StyleHistogram> histograms,
                                const ReportConfig& config) {
  std::string out = report_header(config, "style_histogram");
  out += "classifier,tag,class,count\n";
  for (const auto& h : histograms) {
    for (std::size_t t = 0; t < h.tags.size(); ++t) {
      for (std::size_t c = 0; c < h.classes.size(); ++c) {
        out += fmt::format("{},{},{},{}\n", h.classifier, h.tags[t], h.classes[c], h.counts[t][c]);
      }
    }
  }
  return out;
}

std::string kinematics_csv(const KinematicsReport& report, const ReportConfig& config) {
  std::string out = report_header(config, "kinematics_boxplots");
  for (const auto& note : report.notes) out += "# note: " + note + "\n";
  out += "metric,style,min,q1,median,q3,max,n\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.metric, r.style, num(r.min), num(r.q1),
                       num(r.median), num(r.q3), num(r.max), r.n);
  }
  return out;
}

std::string heatmap_csv(const Heatmap& heatmap, const ReportConfig& config) {
  std::string out = report_header(config, "mdsi_tdbm_heatmap");
  out += fmt::format("# unlabeled_scenes: {}\n", heatmap.unlabeled);
  out += "mdsi_label";
  for (StyleClass s : kAllStyleClasses) out += fmt::format(",{}", to_string(s));
  out += "\n";
  for (std::size_t r = 0; r < heatmap.rows.size(); ++r) {
    out += heatmap.rows[r];
    for (std::size_t v : heatmap.counts[r]) out += fmt::format(",{}", v);
    out += "\n";
  }
  return out;
}

std::string cluster_speed_csv(const ClusterSpeedReport& report, const ReportConfig& config) {
  std::string out = report_header(config, "cluster_speed_hist");
  for (const auto& h : report.splits) {
    out += fmt::format("# split {}:", to_string(h.split));
    for (std::size_t c = 0; c < h.clusters.size(); ++c) {
      out += fmt::format(" {} n={} mean={};", h.clusters[c], h.cluster_sizes[c],
                         num(h.cluster_means[c]));
    }
    if (h.welch) {
      out += fmt::format(" welch t={} df={} p={}", num(h.welch->t), num(h.welch->df),
                         num(h.welch->p_value));
    } else {
      out += " welch NA";
    }
    out += "\n";
  }
  out += "split,cluster,bin_lo,bin_hi,count\n";
  for (const auto& h : report.splits) {
    for (std::size_t c = 0; c < h.clusters.size(); ++c) {
      for (std::size_t b = 0; b < report.bins; ++b) {
        const double lo = report.bin_lo + static_cast<double>(b) * report.bin_width;
        out += fmt::format("{},{},{},{},{}\n", to_string(h.split), h.clusters[c], num(lo),
                           num(lo + report.bin_width), h.counts[c][b]);
      }
    }
  }
  return out;
}

// ---- SVG renderings ---------------------------------------------------------

namespace {

constexpr double kMargin = 50.0;
const char* const kPalette[] = {"#d7191c", "#fdae61", "#abd9e9", "#2c7bb6", "#1a9641", "#7b3294"};

const char* palette(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

}  // namespace

std::string style_histogram_svg(std::span<const StyleHistogram> histograms) {
  const double panel_h = 180.0;
  const double width = 640.0;
  SvgDocument doc(width, kMargin + static_cast<double>(histograms.size()) * (panel_h + kMargin));
  double top = kMargin;
  for (const auto& h : histograms) {
    const auto& all = h.counts.back();
    const std::size_t peak = std::max<std::size_t>(1, *std::max_element(all.begin(), all.end()));
    const double bar_w = (width - 2 * kMargin) / static_cast<double>(h.classes.size());
    doc.text(kMargin, top - 10.0, h.classifier + " styles (all splits)", 12.0);
    for (std::size_t c = 0; c < h.classes.size(); ++c) {
      const double bh = panel_h * static_cast<double>(all[c]) / static_cast<double>(peak);
      const double x = kMargin + static_cast<double>(c) * bar_w;
      doc.rect(x + 4.0, top + panel_h - bh, bar_w - 8.0, bh, palette(c), "black");
      doc.text(x + bar_w / 2, top + panel_h - bh - 3.0, std::to_string(all[c]), 10.0, "middle");
      doc.text(x + bar_w / 2, top + panel_h + 14.0, h.classes[c], 10.0, "middle");
    }
    doc.line(kMargin, top + panel_h, width - kMargin, top + panel_h, "black");
    top += panel_h + kMargin;
  }
  return doc.str();
}

std::string kinematics_svg(const KinematicsReport& report) {
  std::vector<std::string> metrics;
  for (const auto& r : report.rows) {
    if (metrics.empty() || metrics.back() != r.metric) metrics.push_back(r.metric);
  }
  const double panel_h = 140.0;
  const double width = 640.0;
  SvgDocument doc(width, kMargin + static_cast<double>(std::max<std::size_t>(metrics.size(), 1)) *
                                       (panel_h + kMargin));
  double top = kMargin;
  for (const auto& metric : metrics) {
    std::vector<const BoxplotStats*> rows;
    for (const auto& r : report.rows) {
      if (r.metric == metric) rows.push_back(&r);
    }
    double lo = rows.front()->min;
    double hi = rows.front()->max;
    for (const auto* r : rows) {
      lo = std::min(lo, r->min);
      hi = std::max(hi, r->max);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    const auto y = [&](double v) { return top + panel_h - panel_h * (v - lo) / span; };
    const double slot = (width - 2 * kMargin) / static_cast<double>(rows.size());
    doc.text(kMargin, top - 10.0, metric + " (whiskers: min/max)", 12.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = *rows[i];
      const double cx = kMargin + (static_cast<double>(i) + 0.5) * slot;
      const double bw = std::min(40.0, slot * 0.6);
      doc.line(cx, y(r.min), cx, y(r.max), "black");
      doc.rect(cx - bw / 2, y(r.q3), bw, y(r.q1) - y(r.q3), palette(i), "black");
      doc.line(cx - bw / 2, y(r.median), cx + bw / 2, y(r.median), "black", 2.0);
      doc.text(cx, top + panel_h + 14.0, fmt::format("{} (n={})", r.style, r.n), 10.0, "middle");
    }
    doc.text(kMargin - 4.0, top + 4.0, fmt::format("{:.3g}", hi), 9.0, "end");
    doc.text(kMargin - 4.0, top + panel_h, fmt::format("{:.3g}", lo), 9.0, "end");
    top += panel_h + kMargin;
  }
  return doc.str();
}

std::string heatmap_svg(const Heatmap& heatmap) {
  const double cell = 60.0;
  const double left = 120.0;
  SvgDocument doc(left + cell * kNumStyleClasses + kMargin,
                  kMargin + cell * static_cast<double>(heatmap.rows.size()) + kMargin);
  std::size_t peak = 1;
  for (const auto& row : heatmap.counts) peak = std::max(peak, *std::max_element(row.begin(), row.end()));
  for (std::size_t c = 0; c < kNumStyleClasses; ++c) {
    doc.text(left + (static_cast<double>(c) + 0.5) * cell, kMargin - 8.0,
             to_string(kAllStyleClasses[c]), 10.0, "middle");
  }
  for (std::size_t r = 0; r < heatmap.rows.size(); ++r) {
    const double y = kMargin + static_cast<double>(r) * cell;
    doc.text(left - 6.0, y + cell / 2 + 4.0, heatmap.rows[r], 10.0, "end");
    for (std::size_t c = 0; c < kNumStyleClasses; ++c) {
      const std::size_t v = heatmap.counts[r][c];
      const double x = left + static_cast<double>(c) * cell;
      doc.rect(x, y, cell, cell, heat_color(static_cast<double>(v) / static_cast<double>(peak)),
               "#888888");
      doc.text(x + cell / 2, y + cell / 2 + 4.0, std::to_string(v), 11.0, "middle");
    }
  }
  return doc.str();
}

std::string cluster_speed_svg(const ClusterSpeedReport& report) {
  const double panel_h = 160.0;
  const double width = 720.0;
  SvgDocument doc(width, kMargin + static_cast<double>(report.splits.size()) * (panel_h + kMargin));
  double top = kMargin;
  const double bar_w = (width - 2 * kMargin) / static_cast<double>(std::max<std::size_t>(report.bins, 1));
  for (const auto& h : report.splits) {
    std::size_t peak = 1;
    for (const auto& row : h.counts) peak = std::max(peak, *std::max_element(row.begin(), row.end()));
    std::string title = fmt::format("mean speed by cluster ({})", to_string(h.split));
    if (h.welch) title += fmt::format(", Welch p={:.3g}", h.welch->p_value);
    doc.text(kMargin, top - 10.0, title, 12.0);
    for (std::size_t c = 0; c < h.clusters.size(); ++c) {
      const double sub = bar_w / static_cast<double>(h.clusters.size());
      for (std::size_t b = 0; b < report.bins; ++b) {
        const std::size_t v = h.counts[c][b];
        if (v == 0) continue;
        const double bh = panel_h * static_cast<double>(v) / static_cast<double>(peak);
        doc.rect(kMargin + static_cast<double>(b) * bar_w + static_cast<double>(c) * sub,
                 top + panel_h - bh, sub, bh, palette(c));
      }
      doc.rect(width - kMargin - 110.0, top + 14.0 * static_cast<double>(c), 10.0, 10.0, palette(c));
      doc.text(width - kMargin - 95.0, top + 9.0 + 14.0 * static_cast<double>(c), h.clusters[c], 10.0);
    }
    doc.line(kMargin, top + panel_h, width - kMargin, top + panel_h, "black");
    doc.text(kMargin, top + panel_h + 14.0, num(report.bin_lo), 9.0, "middle");
    doc.text(width - kMargin, top + panel_h + 14.0,
             num(report.bin_lo + report.bin_width * static_cast<double>(report.bins)), 9.0, "middle");
    top += panel_h + kMargin;
  }
  return doc.str();
}

}  // namespace stylelens
