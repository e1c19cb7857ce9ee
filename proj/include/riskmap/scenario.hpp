#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskmap/common.hpp"
#include "riskmap/errors.hpp"

namespace riskmap {

struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double yaw_rate = 0.0;

  Pose pose() const { return {x, y, heading}; }
};

struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double length = 0.0;
  double width = 0.0;
};

struct AgentTrack {
  int id = 0;
  std::vector<AgentState> history;   // length T_h
  std::vector<Vec2> future_truth;    // length T in training scenarios, else empty

  const AgentState& current() const { return history.back(); }
};

enum class LightState { red, yellow, green };

inline const char* to_string(LightState s) {
  switch (s) {
    case LightState::red: return "red";
    case LightState::yellow: return "yellow";
    default: return "green";
  }
}

inline LightState light_state_from_string(const std::string& s) {
  if (s == "red") return LightState::red;
  if (s == "yellow") return LightState::yellow;
  if (s == "green") return LightState::green;
  throw ConfigError("unknown light state '" + s + "'");
}

struct TrafficLight {
  Vec2 line_a{0, 0};
  Vec2 line_b{0, 0};
  LightState state = LightState::green;
};

using Polyline = std::vector<Vec2>;
using Polygon = std::vector<Vec2>;  // convex, counter-clockwise

struct MapContext {
  std::vector<Polyline> reference_lanes;
  std::vector<Polygon> static_obstacles;
  std::vector<TrafficLight> traffic_lights;
};

struct DemoPoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;

  Vec2 position() const { return {x, y}; }
};

struct Scenario {
  double dt = kDefaultDt;
  std::vector<EgoState> ego_history;  // length T_h, last entry is "now"
  std::vector<AgentTrack> agents;
  MapContext map;
  std::vector<DemoPoint> demo;        // length T, expert future

  const EgoState& ego_now() const { return ego_history.back(); }
  int horizon() const { return static_cast<int>(demo.size()); }
};

namespace detail {

inline double polygon_cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace detail

// Throws ConfigError naming the first violated field.
inline void validate_scenario(const Scenario& s,
                              int expected_history = kHistorySteps,
                              int expected_horizon = kHorizonSteps) {
  if (!(s.dt > 0)) throw ConfigError("dt must be > 0");
  if (static_cast<int>(s.ego_history.size()) != expected_history)
    throw ConfigError("ego_history length must be " +
                      std::to_string(expected_history) + ", got " +
                      std::to_string(s.ego_history.size()));
  if (static_cast<int>(s.demo.size()) != expected_horizon)
    throw ConfigError("demo length must be " + std::to_string(expected_horizon) +
                      ", got " + std::to_string(s.demo.size()));
  for (const auto& e : s.ego_history)
    if (!(e.heading > -std::numbers::pi - 1e-12 && e.heading <= std::numbers::pi + 1e-12))
      throw ConfigError("ego_history heading out of (-pi, pi]");
  for (const auto& a : s.agents) {
    if (static_cast<int>(a.history.size()) != expected_history)
      throw ConfigError("agents: history length must be " +
                        std::to_string(expected_history));
    for (const auto& st : a.history) {
      if (!(st.length > 0)) throw ConfigError("agents: length must be > 0");
      if (!(st.width > 0)) throw ConfigError("agents: width must be > 0");
    }
    if (!a.future_truth.empty() &&
        static_cast<int>(a.future_truth.size()) != expected_horizon)
      throw ConfigError("agents: future length must be " +
                        std::to_string(expected_horizon) + " or empty");
  }
  for (const auto& lane : s.map.reference_lanes)
    if (lane.size() < 2) throw ConfigError("map.lanes: polyline needs >= 2 points");
  for (const auto& poly : s.map.static_obstacles) {
    if (poly.size() < 3) throw ConfigError("map.obstacles: polygon needs >= 3 vertices");
    const int n = static_cast<int>(poly.size());
    for (int i = 0; i < n; ++i) {
      const double c = detail::polygon_cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
      if (c < -1e-9)
        throw ConfigError("map.obstacles: polygon must be convex with counter-clockwise winding");
    }
  }
}

namespace detail {

inline nlohmann::json vec2_json(const Vec2& v) { return {v.x(), v.y()}; }

inline Vec2 json_vec2(const nlohmann::json& j, const char* field) {
  if (!j.is_array() || j.size() != 2)
    throw ConfigError(std::string(field) + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["schema"] = 1;
  j["dt"] = s.dt;
  auto& eh = j["ego_history"] = nlohmann::json::array();
  for (const auto& e : s.ego_history)
    eh.push_back({e.x, e.y, e.heading, e.speed, e.yaw_rate});
  auto& ag = j["agents"] = nlohmann::json::array();
  for (const auto& a : s.agents) {
    nlohmann::json ja;
    ja["id"] = a.id;
    auto& h = ja["history"] = nlohmann::json::array();
    for (const auto& st : a.history)
      h.push_back({st.x, st.y, st.heading, st.speed, st.length, st.width});
    auto& f = ja["future"] = nlohmann::json::array();
    for (const auto& p : a.future_truth) f.push_back(detail::vec2_json(p));
    ag.push_back(std::move(ja));
  }
  nlohmann::json jm;
  auto& lanes = jm["lanes"] = nlohmann::json::array();
  for (const auto& lane : s.map.reference_lanes) {
    nlohmann::json jl = nlohmann::json::array();
    for (const auto& p : lane) jl.push_back(detail::vec2_json(p));
    lanes.push_back(std::move(jl));
  }
  auto& obs = jm["obstacles"] = nlohmann::json::array();
  for (const auto& poly : s.map.static_obstacles) {
    nlohmann::json jp = nlohmann::json::array();
    for (const auto& p : poly) jp.push_back(detail::vec2_json(p));
    obs.push_back(std::move(jp));
  }
  auto& lights = jm["lights"] = nlohmann::json::array();
  for (const auto& l : s.map.traffic_lights) {
    nlohmann::json jl;
    jl["line"] = {detail::vec2_json(l.line_a), detail::vec2_json(l.line_b)};
    jl["state"] = to_string(l.state);
    lights.push_back(std::move(jl));
  }
  j["map"] = std::move(jm);
  auto& demo = j["demo"] = nlohmann::json::array();
  for (const auto& p : s.demo) demo.push_back({p.x, p.y, p.heading, p.speed});
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    if (j.value("schema", 0) != 1)
      throw ConfigError("schema: expected 1");
    s.dt = j.at("dt").get<double>();
    for (const auto& e : j.at("ego_history")) {
      if (!e.is_array() || e.size() != 5)
        throw ConfigError("ego_history: expected [x,y,heading,speed,yaw_rate]");
      s.ego_history.push_back({e[0], e[1], e[2], e[3], e[4]});
    }
    for (const auto& ja : j.at("agents")) {
      AgentTrack a;
      a.id = ja.at("id").get<int>();
      for (const auto& st : ja.at("history")) {
        if (!st.is_array() || st.size() != 6)
          throw ConfigError("agents.history: expected [x,y,heading,speed,length,width]");
        a.history.push_back({st[0], st[1], st[2], st[3], st[4], st[5]});
      }
      if (ja.contains("future"))
        for (const auto& p : ja.at("future"))
          a.future_truth.push_back(detail::json_vec2(p, "agents.future"));
      s.agents.push_back(std::move(a));
    }
    const auto& jm = j.at("map");
    for (const auto& jl : jm.at("lanes")) {
      Polyline lane;
      for (const auto& p : jl) lane.push_back(detail::json_vec2(p, "map.lanes"));
      s.map.reference_lanes.push_back(std::move(lane));
    }
    if (jm.contains("obstacles"))
      for (const auto& jp : jm.at("obstacles")) {
        Polygon poly;
        for (const auto& p : jp) poly.push_back(detail::json_vec2(p, "map.obstacles"));
        s.map.static_obstacles.push_back(std::move(poly));
      }
    if (jm.contains("lights"))
      for (const auto& jl : jm.at("lights")) {
        TrafficLight l;
        const auto& line = jl.at("line");
        l.line_a = detail::json_vec2(line.at(0), "map.lights.line");
        l.line_b = detail::json_vec2(line.at(1), "map.lights.line");
        l.state = light_state_from_string(jl.at("state").get<std::string>());
        s.map.traffic_lights.push_back(l);
      }
    for (const auto& p : j.at("demo")) {
      if (!p.is_array() || p.size() != 4)
        throw ConfigError("demo: expected [x,y,heading,speed]");
      s.demo.push_back({p[0], p[1], p[2], p[3]});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario json: ") + e.what());
  }
  validate_scenario(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("parse error in " + path + ": " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scenario file: " + path);
  out << scenario_to_json(s).dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace riskmap
