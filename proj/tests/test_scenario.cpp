#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "riskmap/geometry.hpp"
#include "riskmap/scenario.hpp"
#include "riskmap/scenario_gen.hpp"
#include "test_support.hpp"

using namespace riskmap;
using Catch::Approx;

TEST_CASE("scenario json round trip", "[scenario]") {
  const Scenario s = testsupport::straight_scenario();
  const nlohmann::json j = scenario_to_json(s);
  const Scenario back = scenario_from_json(j);
  CHECK(scenario_to_json(back).dump() == j.dump());
  CHECK(back.agents.size() == s.agents.size());
  CHECK(back.demo.size() == s.demo.size());
  CHECK(back.ego_now().speed == Approx(s.ego_now().speed));
  CHECK(back.agents[0].future_truth[5].x() ==
        Approx(s.agents[0].future_truth[5].x()));
}

TEST_CASE("scenario with a single lane and no agents loads", "[scenario]") {
  Scenario s = testsupport::straight_scenario(8.0, /*with_agent=*/false);
  REQUIRE(s.agents.empty());
  const Scenario back = scenario_from_json(scenario_to_json(s));
  CHECK(back.agents.empty());
  CHECK(back.map.reference_lanes.size() == 1);
}

TEST_CASE("validation names the offending field", "[scenario]") {
  SECTION("short demo") {
    Scenario s = testsupport::straight_scenario();
    s.demo.pop_back();
    try {
      validate_scenario(s);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("demo") != std::string::npos);
    }
  }
  SECTION("clockwise obstacle rejected") {
    Scenario s = testsupport::straight_scenario();
    Polygon box = testsupport::unit_box(60.0, 0.0, 1.0);
    std::reverse(box.begin(), box.end());
    s.map.static_obstacles.push_back(box);
    CHECK_THROWS_AS(validate_scenario(s), ConfigError);
  }
  SECTION("heading outside the principal range") {
    Scenario s = testsupport::straight_scenario();
    s.ego_history.back().heading = 7.0;
    CHECK_THROWS_AS(validate_scenario(s), ConfigError);
  }
}

TEST_CASE("file io surfaces the path on failure", "[scenario]") {
  CHECK_THROWS_AS(load_scenario("/nonexistent/path/scenario.json"), IoError);
  const Scenario s = testsupport::straight_scenario();
  const std::string path =
      (std::filesystem::temp_directory_path() / "riskmap_roundtrip.json").string();
  save_scenario(s, path);
  const Scenario back = load_scenario(path);
  CHECK(scenario_to_json(back).dump() == scenario_to_json(s).dump());
  std::remove(path.c_str());
}

TEST_CASE("generator is deterministic per seed", "[scenario_gen]") {
  const auto a = generate_scenarios(ScenarioKind::straight, 10, 7);
  const auto b = generate_scenarios(ScenarioKind::straight, 10, 7);
  REQUIRE(a.size() == 10);
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(scenario_to_json(a[i]).dump() == scenario_to_json(b[i]).dump());
  // Per-index sub-seeding: the first scenarios match regardless of count.
  const auto c = generate_scenarios(ScenarioKind::straight, 3, 7);
  for (size_t i = 0; i < c.size(); ++i)
    CHECK(scenario_to_json(c[i]).dump() == scenario_to_json(a[i]).dump());
}

TEST_CASE("every kind generates valid scenarios", "[scenario_gen]") {
  for (ScenarioKind kind : {ScenarioKind::straight, ScenarioKind::curve,
                            ScenarioKind::cut_in, ScenarioKind::blocked_lane,
                            ScenarioKind::red_light}) {
    const auto list = generate_scenarios(kind, 5, 3);
    for (const auto& s : list) {
      CHECK(s.demo.size() == static_cast<size_t>(kHorizonSteps));
      CHECK(s.ego_history.size() == static_cast<size_t>(kHistorySteps));
      CHECK_NOTHROW(validate_scenario(s));
      for (const auto& agent : s.agents) {
        CHECK(agent.future_truth.size() == static_cast<size_t>(kHorizonSteps));
        for (const auto& st : agent.history) CHECK(st.speed <= 10.5 + 1e-9);
      }
    }
  }
}

TEST_CASE("red light demos stop before the line", "[scenario_gen]") {
  const auto list = generate_scenarios(ScenarioKind::red_light, 5, 0);
  for (const auto& s : list) {
    REQUIRE(s.map.traffic_lights.size() == 1);
    CHECK(s.demo.back().speed < 0.1);
    // The last demo point stays on the approach side of the stop line.
    const auto& light = s.map.traffic_lights[0];
    const Vec2 line_mid = 0.5 * (light.line_a + light.line_b);
    const Vec2 dir{std::cos(s.demo.back().heading), std::sin(s.demo.back().heading)};
    CHECK((line_mid - s.demo.back().position()).dot(dir) > 0.0);
  }
}

TEST_CASE("blocked lane demos clear the obstacle", "[scenario_gen]") {
  const auto list = generate_scenarios(ScenarioKind::blocked_lane, 5, 0);
  for (const auto& s : list) {
    REQUIRE(s.map.static_obstacles.size() == 1);
    for (const auto& p : s.demo) {
      CHECK(polygon_signed_distance(p.position(), s.map.static_obstacles[0]) > 0.0);
    }
  }
}

TEST_CASE("generated demos are kinematically consistent", "[scenario_gen]") {
  // Stored demo speed/heading must match finite differences of the positions,
  // since losses and metrics re-derive kinematics the same way.
  const auto list = generate_scenarios(ScenarioKind::curve, 3, 5);
  for (const auto& s : list) {
    const TrajectorySample demo = demo_as_sample(s);
    CHECK(kinematic_inconsistency(demo, s.ego_now(), s.dt) < 1e-9);
    for (size_t t = 0; t < s.demo.size(); ++t) {
      CHECK(demo.states[t].speed == Approx(s.demo[t].speed).margin(1e-9));
      CHECK(demo.states[t].heading == Approx(s.demo[t].heading).margin(1e-9));
    }
  }
}
