#include "stylelens/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "stylelens/io.hpp"

namespace stylelens {

using nlohmann::json;

namespace {

constexpr double kUniformTolerance = 1e-9;

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw Error("split must be train|val|test, got '" + std::string(text) + "'");
}

void TrajectorySample::validate() const {
  if (t.empty()) throw Error("agent '" + agent_id + "': trajectory has no samples");
  if (pos.size() != t.size()) {
    throw Error("agent '" + agent_id + "': " + std::to_string(t.size()) + " timestamps but " +
                std::to_string(pos.size()) + " positions");
  }
  if (heading && heading->size() != t.size()) {
    throw Error("agent '" + agent_id + "': heading length differs from timestamps");
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(pos[i].x) || !std::isfinite(pos[i].y)) {
      throw Error("agent '" + agent_id + "': non-finite value at sample " + std::to_string(i));
    }
    if (heading && !std::isfinite((*heading)[i])) {
      throw Error("agent '" + agent_id + "': non-finite heading at sample " + std::to_string(i));
    }
    if (i > 0 && !(t[i] > t[i - 1])) {
      throw Error("agent '" + agent_id + "': timestamps not strictly increasing at sample " +
                  std::to_string(i));
    }
  }
}

const TrajectorySample& Scene::focal() const {
  for (const auto& a : agents) {
    if (a.agent_id == focal_agent_id) return a;
  }
  throw Error("scene '" + scene_id + "': focal agent '" + focal_agent_id + "' not found");
}

void Scene::validate() const {
  std::unordered_set<std::string> seen;
  std::size_t focal_count = 0;
  for (const auto& a : agents) {
    if (!seen.insert(a.agent_id).second) {
      throw Error("scene '" + scene_id + "': duplicate agent_id '" + a.agent_id + "'");
    }
    if (a.agent_id == focal_agent_id) ++focal_count;
    a.validate();
  }
  if (focal_count != 1) {
    throw Error("scene '" + scene_id + "': focal agent '" + focal_agent_id + "' not found");
  }
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

const json& require(const json& obj, const char* key, std::size_t line, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, path + key, "missing");
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line,
                           const std::string& path = "") {
  const json& v = require(obj, key, line, path);
  if (!v.is_string()) throw ParseError(line, path + key, "expected string");
  return v.get<std::string>();
}

std::vector<double> require_numbers(const json& obj, const char* key, std::size_t line,
                                    const std::string& path) {
  const json& v = require(obj, key, line, path);
  if (!v.is_array()) throw ParseError(line, path + key, "expected array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw ParseError(line, path + key, "expected array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

Scene scene_from_json(const json& record, std::size_t line) {
  if (!record.is_object()) throw ParseError(line, "<record>", "expected JSON object");
  Scene scene;
  scene.scene_id = require_string(record, "scene_id", line);
  scene.focal_agent_id = require_string(record, "focal_agent_id", line);
  try {
    scene.split = parse_split(require_string(record, "split", line));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(line, "split", e.what());
  }
  if (auto it = record.find("highway"); it != record.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError(line, "highway", "expected bool or null");
    scene.highway = it->get<bool>();
  }
  if (auto it = record.find("mdsi_label"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(line, "mdsi_label", "expected string or null");
    scene.mdsi_label = it->get<std::string>();
  }
  const json& agents = require(record, "agents", line, "");
  if (!agents.is_array()) throw ParseError(line, "agents", "expected array");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const json& a = agents[i];
    const std::string path = "agents[" + std::to_string(i) + "].";
    if (!a.is_object()) throw ParseError(line, path, "expected object");
    TrajectorySample traj;
    traj.agent_id = require_string(a, "agent_id", line, path);
    if (!seen.insert(traj.agent_id).second) {
      throw ParseError(line, path + "agent_id", "duplicate agent_id '" + traj.agent_id + "'");
    }
    traj.t = require_numbers(a, "t", line, path);
    auto xs = require_numbers(a, "x", line, path);
    auto ys = require_numbers(a, "y", line, path);
    if (xs.size() != traj.t.size()) throw ParseError(line, path + "x", "length differs from t");
    if (ys.size() != traj.t.size()) throw ParseError(line, path + "y", "length differs from t");
    traj.pos.resize(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) traj.pos[k] = {xs[k], ys[k]};
    if (auto it = a.find("heading"); it != a.end() && !it->is_null()) {
      traj.heading = require_numbers(a, "heading", line, path);
      if (traj.heading->size() != traj.t.size()) {
        throw ParseError(line, path + "heading", "length differs from t");
      }
    }
    if (traj.t.empty()) throw ParseError(line, path + "t", "trajectory has no samples");
    for (std::size_t k = 1; k < traj.t.size(); ++k) {
      if (!(traj.t[k] > traj.t[k - 1])) {
        throw ParseError(line, path + "t",
                         "timestamps not strictly increasing at index " + std::to_string(k));
      }
    }
    scene.agents.push_back(std::move(traj));
  }
  try {
    scene.validate();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(line, "agents", e.what());
  }
  return scene;
}

json scene_to_json(const Scene& scene) {
  json agents = json::array();
  for (const auto& a : scene.agents) {
    json xs = json::array();
    json ys = json::array();
    for (const auto& p : a.pos) {
      xs.push_back(p.x);
      ys.push_back(p.y);
    }
    json rec = json::object();
    rec["agent_id"] = a.agent_id;
    rec["t"] = a.t;
    rec["x"] = std::move(xs);
    rec["y"] = std::move(ys);
    rec["heading"] = a.heading ? json(*a.heading) : json(nullptr);
    agents.push_back(std::move(rec));
  }
  json out = json::object();
  out["scene_id"] = scene.scene_id;
  out["focal_agent_id"] = scene.focal_agent_id;
  out["split"] = std::string(to_string(scene.split));
  out["highway"] = scene.highway ? json(*scene.highway) : json(nullptr);
  out["mdsi_label"] = scene.mdsi_label ? json(*scene.mdsi_label) : json(nullptr);
  out["agents"] = std::move(agents);
  return out;
}

std::vector<Scene> parse_scenes_jsonl(std::istream& in) {
  std::vector<Scene> scenes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, "<record>", std::string("invalid JSON: ") + e.what());
    }
    scenes.push_back(scene_from_json(record, lineno));
  }
  return scenes;
}

void write_scenes_jsonl(std::ostream& out, std::span<const Scene> scenes) {
  for (const auto& s : scenes) out << scene_to_json(s).dump() << '\n';
}

// ---------------------------------------------------------------------------
// CSV

std::vector<Scene> parse_scenes_csv(std::istream& samples, std::istream& metadata) {
  CsvTable meta = read_csv(metadata);
  const std::size_t c_scene = meta.column("scene_id");
  const std::size_t c_focal = meta.column("focal_agent_id");
  const std::size_t c_split = meta.column("split");
  const bool has_highway = meta.has_column("highway");
  const bool has_mdsi = meta.has_column("mdsi_label");

  std::vector<Scene> scenes;
  std::map<std::string, std::size_t> scene_index;
  for (std::size_t r = 0; r < meta.rows.size(); ++r) {
    const auto& row = meta.rows[r];
    const std::size_t line = meta.row_lines[r];
    Scene s;
    s.scene_id = row[c_scene];
    s.focal_agent_id = row[c_focal];
    try {
      s.split = parse_split(row[c_split]);
    } catch (const Error& e) {
      throw ParseError(line, "split", e.what());
    }
    if (has_highway) {
      const auto& h = row[meta.column("highway")];
      if (h == "true" || h == "1") {
        s.highway = true;
      } else if (h == "false" || h == "0") {
        s.highway = false;
      } else if (!h.empty() && h != "null") {
        throw ParseError(line, "highway", "expected true|false|empty");
      }
    }
    if (has_mdsi) {
      const auto& m = row[meta.column("mdsi_label")];
      if (!m.empty()) s.mdsi_label = m;
    }
    if (!scene_index.emplace(s.scene_id, scenes.size()).second) {
      throw ParseError(line, "scene_id", "duplicate scene '" + s.scene_id + "'");
    }
    scenes.push_back(std::move(s));
  }

  CsvTable table = read_csv(samples);
  const std::size_t c_sid = table.column("scene_id");
  const std::size_t c_aid = table.column("agent_id");
  const std::size_t c_t = table.column("t");
  const std::size_t c_x = table.column("x");
  const std::size_t c_y = table.column("y");
  const bool has_heading = table.has_column("heading");
  const std::size_t c_h = has_heading ? table.column("heading") : 0;

  // Per scene, agents in order of first appearance.
  std::vector<std::map<std::string, std::size_t>> agent_index(scenes.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.row_lines[r];
    auto sit = scene_index.find(row[c_sid]);
    if (sit == scene_index.end()) {
      throw ParseError(line, "scene_id", "scene '" + row[c_sid] + "' missing from metadata");
    }
    Scene& scene = scenes[sit->second];
    auto& index = agent_index[sit->second];
    auto [ait, inserted] = index.emplace(row[c_aid], scene.agents.size());
    if (inserted) {
      TrajectorySample traj;
      traj.agent_id = row[c_aid];
      if (has_heading) traj.heading.emplace();
      scene.agents.push_back(std::move(traj));
    }
    TrajectorySample& traj = scene.agents[ait->second];
    auto number = [&](std::size_t col, const char* name) {
      try {
        return parse_double(row[col]);
      } catch (const std::invalid_argument& e) {
        throw ParseError(line, name, e.what());
      }
    };
    const double t = number(c_t, "t");
    if (!traj.t.empty() && !(t > traj.t.back())) {
      throw ParseError(line, "t", "timestamps not strictly increasing for agent '" +
                                      traj.agent_id + "'");
    }
    traj.t.push_back(t);
    traj.pos.push_back({number(c_x, "x"), number(c_y, "y")});
    if (has_heading) traj.heading->push_back(number(c_h, "heading"));
  }
  for (auto& s : scenes) s.validate();
  return scenes;
}

void write_scenes_csv(std::ostream& samples, std::ostream& metadata,
                      std::span<const Scene> scenes) {
  metadata << "scene_id,focal_agent_id,split,highway,mdsi_label\n";
  samples << "scene_id,agent_id,t,x,y\n";
  for (const auto& s : scenes) {
    metadata << csv_escape(s.scene_id) << ',' << csv_escape(s.focal_agent_id) << ','
             << to_string(s.split) << ',' << (s.highway ? (*s.highway ? "true" : "false") : "")
             << ',' << csv_escape(s.mdsi_label.value_or("")) << '\n';
    for (const auto& a : s.agents) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        samples << csv_escape(s.scene_id) << ',' << csv_escape(a.agent_id) << ','
                << json(a.t[i]).dump() << ',' << json(a.pos[i].x).dump() << ','
                << json(a.pos[i].y).dump() << '\n';
      }
    }
  }
}

std::vector<Scene> load_scenes(const std::filesystem::path& path, SceneFormat format,
                               const std::filesystem::path& csv_metadata) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  if (format == SceneFormat::kJsonl) return parse_scenes_jsonl(in);

  std::filesystem::path meta_path = csv_metadata;
  if (meta_path.empty()) {
    meta_path = path;
    meta_path.replace_extension(".meta.csv");
  }
  std::ifstream meta(meta_path);
  if (!meta) throw Error("cannot open scene metadata " + meta_path.string());
  return parse_scenes_csv(in, meta);
}

// ---------------------------------------------------------------------------
// Resampling and derivatives

Vec2 position_at(const TrajectorySample& traj, double time) {
  const auto& t = traj.t;
  if (t.empty() || time < t.front() - kUniformTolerance || time > t.back() + kUniformTolerance) {
    throw Error("time outside trajectory span");
  }
  if (time <= t.front()) return traj.pos.front();
  if (time >= t.back()) return traj.pos.back();
  auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t hi = static_cast<std::size_t>(it - t.begin());
  const std::size_t lo = hi - 1;
  const double w = (time - t[lo]) / (t[hi] - t[lo]);
  return traj.pos[lo] + w * (traj.pos[hi] - traj.pos[lo]);
}

double uniform_step(const TrajectorySample& traj) {
  if (traj.size() < 2) throw Error("need at least 2 samples to define a step");
  const double dt = (traj.t.back() - traj.t.front()) / static_cast<double>(traj.size() - 1);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (std::abs((traj.t[i] - traj.t[i - 1]) - dt) > kUniformTolerance) {
      throw Error("agent '" + traj.agent_id + "': non-uniform sampling at sample " +
                  std::to_string(i));
    }
  }
  return dt;
}

TrajectorySample resample_uniform(const TrajectorySample& traj, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("resample step must be positive");
  if (traj.size() < 2) throw Error("resampling needs at least 2 samples");

  bool already_uniform = true;
  for (std::size_t i = 1; i < traj.size() && already_uniform; ++i) {
    already_uniform = std::abs((traj.t[i] - traj.t[i - 1]) - dt) <= kUniformTolerance;
  }
  if (already_uniform) return traj;

  const double t0 = traj.t.front();
  const double span = traj.t.back() - t0;
  const auto count = static_cast<std::size_t>(std::floor(span / dt + kUniformTolerance)) + 1;

  TrajectorySample out;
  out.agent_id = traj.agent_id;
  out.t.reserve(count);
  out.pos.reserve(count);
  if (traj.heading) out.heading.emplace().reserve(count);

  std::size_t seg = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double time = t0 + static_cast<double>(i) * dt;
    while (seg + 2 < traj.size() && traj.t[seg + 1] <= time) ++seg;
    const double w = std::clamp((time - traj.t[seg]) / (traj.t[seg + 1] - traj.t[seg]), 0.0, 1.0);
    out.t.push_back(time);
    out.pos.push_back(traj.pos[seg] + w * (traj.pos[seg + 1] - traj.pos[seg]));
    if (traj.heading) {
      const double h0 = (*traj.heading)[seg];
      const double dh = wrap_angle((*traj.heading)[seg + 1] - h0);
      out.heading->push_back(wrap_angle(h0 + w * dh));
    }
  }
  return out;
}

std::vector<double> differentiate(std::span<const double> values, double dt) {
  const std::size_t n = values.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  out[0] = (values[1] - values[0]) / dt;
  out[n - 1] = (values[n - 1] - values[n - 2]) / dt;
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (values[i + 1] - values[i - 1]) / (2.0 * dt);
  return out;
}

std::vector<double> speed_profile(const TrajectorySample& traj) {
  const double dt = uniform_step(traj);
  const std::size_t n = traj.size();
  std::vector<double> xs(n);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = traj.pos[i].x;
    ys[i] = traj.pos[i].y;
  }
  const auto vx = differentiate(xs, dt);
  const auto vy = differentiate(ys, dt);
  std::vector<double> speed(n);
  for (std::size_t i = 0; i < n; ++i) speed[i] = std::hypot(vx[i], vy[i]);
  return speed;
}

Derivatives derivatives(const TrajectorySample& traj) {
  if (traj.size() < 4) {
    throw Error("derivatives need at least 4 samples, got " + std::to_string(traj.size()));
  }
  Derivatives d;
  d.dt = uniform_step(traj);
  d.speed = speed_profile(traj);
  d.accel = differentiate(d.speed, d.dt);
  d.jerk = differentiate(d.accel, d.dt);
  return d;
}

}  // namespace stylelens
