#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "stylelens/kinematics.hpp"
#include "stylelens/stats.hpp"
#include "stylelens/synth.hpp"

namespace stylelens {
namespace {

const StyleMix kEven = {{"aggressive", 1.0 / 3}, {"normal", 1.0 / 3}, {"timid", 1.0 / 3}};

std::string fingerprint(const std::vector<SynthScene>& scenes) {
  std::string out;
  for (const auto& s : scenes) {
    out += s.label + s.scene.scene_id;
    for (const auto& a : s.scene.agents) {
      for (const auto& p : a.pos) out += std::to_string(p.x) + "," + std::to_string(p.y) + ";";
    }
  }
  return out;
}

SynthOptions noiseless(std::uint64_t seed = 7) {
  SynthOptions o;
  o.seed = seed;
  for (auto& [label, p] : o.params) p.noise_sigma = 0.0;
  return o;
}

TEST(Synth, SameSeedSameScenes) {
  SynthOptions o;
  o.seed = 99;
  EXPECT_EQ(fingerprint(gen_yellow_light(20, kEven, o)), fingerprint(gen_yellow_light(20, kEven, o)));
  EXPECT_EQ(fingerprint(gen_cruise(10, kEven, o)), fingerprint(gen_cruise(10, kEven, o)));
  SynthOptions other = o;
  other.seed = 100;
  EXPECT_NE(fingerprint(gen_yellow_light(20, kEven, o)),
            fingerprint(gen_yellow_light(20, kEven, other)));
}

TEST(Synth, SceneIsIndependentOfBatchSize) {
  const auto small = gen_yellow_light(5, kEven);
  const auto large = gen_yellow_light(12, kEven);
  for (std::size_t i = 0; i < small.size(); ++i) {
    EXPECT_EQ(small[i].scene.agents[0].pos, large[i].scene.agents[0].pos);
  }
}

TEST(Synth, ZeroScenes) {
  EXPECT_TRUE(gen_yellow_light(0, kEven).empty());
  EXPECT_TRUE(gen_cruise(0, kEven).empty());
}

TEST(Synth, SingleStyleMix) {
  const auto scenes = gen_yellow_light(30, {{"aggressive", 1.0}});
  for (const auto& s : scenes) EXPECT_EQ(s.label, "aggressive");
}

TEST(Synth, RejectsBadMixes) {
  EXPECT_THROW(gen_yellow_light(3, {{"aggressive", 0.5}, {"timid", 0.4}}), Error);
  EXPECT_THROW(gen_yellow_light(3, {{"reckless", 1.0}}), Error);
  EXPECT_THROW(gen_cruise(3, {{"normal", -0.5}, {"timid", 1.5}}), Error);
  EXPECT_THROW(parse_style_mix("aggressive=abc"), Error);
  const StyleMix m = parse_style_mix("aggressive=0.3,normal=0.5,timid=0.2");
  EXPECT_DOUBLE_EQ(m.at("normal"), 0.5);
}

TEST(Synth, MixProportionsAreRespected) {
  const auto scenes = gen_yellow_light(3000, {{"aggressive", 0.3}, {"normal", 0.5}, {"timid", 0.2}});
  std::map<std::string, double> counts;
  for (const auto& s : scenes) counts[s.label] += 1.0;
  EXPECT_NEAR(counts["aggressive"] / 3000, 0.3, 0.03);
  EXPECT_NEAR(counts["normal"] / 3000, 0.5, 0.03);
  EXPECT_NEAR(counts["timid"] / 3000, 0.2, 0.03);
}

TEST(YellowLight, TimidStopsShortOfTheLineAtTheClosedFormPosition) {
  YellowLightConfig c;
  const auto options = noiseless();
  const auto scenes = gen_yellow_light(200, {{"timid", 1.0}}, options, c);
  const double j = options.params.at("timid").j_max;
  std::size_t stops = 0;
  for (const auto& s : scenes) {
    if (s.go) continue;
    ++stops;
    const auto& ego = s.scene.focal();
    const double a = s.brake_decel;
    const double expected = s.v0 * c.onset + 0.5 * s.v0 * (s.v0 / a + a / j);
    EXPECT_NEAR(ego.pos.back().x, expected, 1e-6) << s.scene.scene_id;
    EXPECT_LE(ego.pos.back().x, s.stop_line_x - c.stop_margin + 1e-6);
    const auto n = ego.pos.size();
    const double speed = std::hypot(ego.pos[n - 1].x - ego.pos[n - 2].x,
                                    ego.pos[n - 1].y - ego.pos[n - 2].y) / c.dt;
    EXPECT_LT(speed, 0.1);
    EXPECT_LE(a, options.params.at("timid").b_max);
  }
  EXPECT_GT(stops, 50u);
}

TEST(YellowLight, AggressiveCrossesTheLine) {
  const auto scenes = gen_yellow_light(200, {{"aggressive", 1.0}});
  for (const auto& s : scenes) {
    EXPECT_TRUE(s.go);
    EXPECT_FALSE(s.forced_go);
    EXPECT_GT(s.scene.focal().pos.back().x, s.stop_line_x) << s.scene.scene_id;
  }
}

TEST(YellowLight, ForcedGoOnlyWhenStoppingIsInfeasible) {
  YellowLightConfig c;
  c.v0_lo = 25.0;
  c.v0_hi = 26.0;
  c.d0_lo = 30.0;
  c.d0_hi = 31.0;
  c.tr_lo = 0.1;
  c.tr_hi = 0.2;
  const auto scenes = gen_yellow_light(20, {{"timid", 1.0}}, {}, c);
  for (const auto& s : scenes) {
    // 25 m/s inside 30 m needs more than 10 m/s^2.
    EXPECT_TRUE(s.forced_go);
    EXPECT_TRUE(s.go);
  }
}

TEST(YellowLight, NeighborAndLabels) {
  YellowLightConfig c;
  c.with_neighbor = true;
  SynthOptions o;
  o.mdsi_labels = true;
  const auto scenes = gen_yellow_light(10, kEven, o, c);
  for (const auto& s : scenes) {
    ASSERT_EQ(s.scene.agents.size(), 2u);
    EXPECT_EQ(s.scene.agents[1].pos.front().y, 3.5);
    EXPECT_TRUE(s.scene.mdsi_label.has_value());
    EXPECT_EQ(s.scene.highway, false);
  }
}

TEST(Feasibility, GeneratedTracksPass) {
  const auto options = SynthOptions{};
  for (const auto& s : gen_yellow_light(100, kEven, options)) {
    EXPECT_NO_THROW(check_feasibility(s.scene.focal(), options.params.at(s.label)));
  }
  for (const auto& s : gen_cruise(50, kEven, options)) {
    EXPECT_NO_THROW(check_feasibility(s.scene.focal(), options.params.at(s.label)));
  }
}

TEST(Feasibility, ViolationThrows) {
  TrajectorySample t;
  t.agent_id = "ego";
  for (int i = 0; i < 30; ++i) {
    const double ti = i * 0.1;
    t.t.push_back(ti);
    t.pos.push_back({0.5 * 8.0 * ti * ti, 0.0});  // 8 m/s^2 throughout
  }
  StyleParams p = default_style_params().at("normal");
  EXPECT_THROW(check_feasibility(t, p), Error);
  p.a_max = 8.5;
  p.j_max = 100.0;
  EXPECT_NO_THROW(check_feasibility(t, p));
}

TEST(Feasibility, NoiseSlackScalesWithSigma) {
  const NoiseSlack a = noise_slack(0.001, 0.1);
  const NoiseSlack b = noise_slack(0.002, 0.1);
  EXPECT_NEAR(b.accel, 2 * a.accel, 1e-12);
  EXPECT_NEAR(b.jerk, 2 * a.jerk, 1e-12);
  EXPECT_EQ(noise_slack(0.0, 0.1).accel, 0.0);
}

TEST(Cruise, NoiselessNormalScenesHaveModestAccelVariance) {
  const CruiseConfig c;
  for (const auto& s : gen_cruise(60, {{"normal", 1.0}}, noiseless(3), c)) {
    const auto f = extract_features(s.scene.focal());
    EXPECT_LT(f.var_accel, c.aggressive_var_accel_threshold) << s.scene.scene_id;
  }
}

TEST(Cruise, AggressiveAndNormalDifferInPeakAcceleration) {
  std::vector<double> aggressive, normal;
  for (const auto& s : gen_cruise(200, {{"aggressive", 0.5}, {"normal", 0.5}})) {
    const double v = extract_features(s.scene.focal()).max_abs_accel;
    (s.label == "aggressive" ? aggressive : normal).push_back(v);
  }
  ASSERT_GT(aggressive.size(), 20u);
  ASSERT_GT(normal.size(), 20u);
  EXPECT_LT(welch_t_test(aggressive, normal).p_value, 0.01);
  EXPECT_GT(mean(aggressive), mean(normal));
}

TEST(Cruise, LeadVehicleAhead) {
  for (const auto& s : gen_cruise(10, kEven)) {
    ASSERT_GE(s.scene.agents.size(), 2u);
    const auto& ego = s.scene.focal();
    const auto& lead = s.scene.agents[1];
    EXPECT_EQ(lead.agent_id, "lead");
    EXPECT_GT(lead.pos.front().x, ego.pos.front().x);
    EXPECT_FALSE(s.scene.highway.has_value());
  }
}

TEST(Labels, StyleClassMapping) {
  EXPECT_EQ(label_style_class("aggressive"), StyleClass::kAggressive);
  EXPECT_EQ(label_style_class("normal"), StyleClass::kCareful);
  EXPECT_EQ(label_style_class("timid"), StyleClass::kTimid);
  EXPECT_THROW(label_style_class("sleepy"), Error);
}

TEST(Splits, SeventyTenTwenty) {
  std::map<Split, int> counts;
  for (std::size_t i = 0; i < 1000; ++i) ++counts[synth_split(i)];
  EXPECT_EQ(counts[Split::kTrain], 700);
  EXPECT_EQ(counts[Split::kVal], 100);
  EXPECT_EQ(counts[Split::kTest], 200);
}

TEST(SynthConfigJson, RoundTripAndUnknownKeys) {
  SynthConfig c;
  c.params["timid"].b_max = 3.25;
  c.yellow_light.d0_hi = 70.0;
  c.cruise.with_neighbor = true;
  const nlohmann::json j = to_json(c);
  EXPECT_EQ(to_json(synth_config_from_json(j)), j);
  nlohmann::json bad = j;
  bad["cruise"]["warp"] = 9;
  EXPECT_THROW(synth_config_from_json(bad), Error);
  const SynthConfig partial = synth_config_from_json(nlohmann::json::parse(R"({"yellow_light":{"onset":2.0}})"));
  EXPECT_EQ(partial.yellow_light.onset, 2.0);
  EXPECT_EQ(partial.yellow_light.d0_lo, 30.0);
}

}  // namespace
}  // namespace stylelens
