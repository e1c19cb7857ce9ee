#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/geometry.hpp"
#include "riskmap/rng.hpp"
#include "riskmap/scenario.hpp"

namespace riskmap {

enum class ScenarioKind { straight, curve, cut_in, blocked_lane, red_light };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::straight: return "straight";
    case ScenarioKind::curve: return "curve";
    case ScenarioKind::cut_in: return "cut_in";
    case ScenarioKind::blocked_lane: return "blocked_lane";
    default: return "red_light";
  }
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "straight") return ScenarioKind::straight;
  if (s == "curve") return ScenarioKind::curve;
  if (s == "cut_in") return ScenarioKind::cut_in;
  if (s == "blocked_lane") return ScenarioKind::blocked_lane;
  if (s == "red_light") return ScenarioKind::red_light;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

namespace gen {

// Straight line or constant-curvature arc, parametrized by arc length.
struct ArcPath {
  Vec2 origin{0, 0};
  double heading0 = 0.0;
  double curvature = 0.0;

  double heading(double s) const { return heading0 + curvature * s; }

  Vec2 position(double s, double lateral = 0.0) const {
    Vec2 p;
    if (std::abs(curvature) < 1e-12) {
      p = origin + s * Vec2{std::cos(heading0), std::sin(heading0)};
    } else {
      const double h = heading(s);
      p = origin + Vec2{(std::sin(h) - std::sin(heading0)) / curvature,
                        (std::cos(heading0) - std::cos(h)) / curvature};
    }
    const double h = heading(s);
    return p + lateral * Vec2{-std::sin(h), std::cos(h)};
  }

  Polyline sample(double s_begin, double s_end, double step) const {
    Polyline line;
    for (double s = s_begin; s < s_end + step / 2; s += step)
      line.push_back(position(s));
    return line;
  }
};

// 10x^3 - 15x^4 + 6x^5: zero velocity and acceleration at both ends.
inline double quintic_blend(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

// Smooth 8 -> 0 speed ramp used by the stopping demo; integral is 1/2.
inline double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Surrounding traffic stays below this speed at every point of its track,
// including the history segment reconstructed by integrating backwards.
constexpr double kAgentSpeedCap = 10.5;

struct AgentPlan {
  double s0 = 0.0;
  double lateral = 0.0;
  double speed = 0.0;
  double accel = 0.0;      // longitudinal behavior
  double yaw_rate = 0.0;   // heading drift relative to path
  double length = 4.5;
  double width = 1.8;
};

inline Vec2 agent_position(const ArcPath& path, const AgentPlan& plan, double t) {
  // Integrate speed with the accel floor at zero, then drift laterally if the
  // agent curves away from the path.
  double v = plan.speed, s = plan.s0;
  double lat = plan.lateral, head_off = 0.0;
  const double step = 0.1;
  const int n = static_cast<int>(std::round(std::abs(t) / step));
  const double dir = t >= 0 ? 1.0 : -1.0;
  for (int i = 0; i < n; ++i) {
    if (dir > 0) {
      s += v * std::cos(head_off) * step;
      lat += v * std::sin(head_off) * step;
      v = std::clamp(v + plan.accel * step, 0.0, kAgentSpeedCap);
      head_off += plan.yaw_rate * step;
    } else {
      head_off -= plan.yaw_rate * step;
      v = std::clamp(v - plan.accel * step, 0.0, kAgentSpeedCap);
      lat -= v * std::sin(head_off) * step;
      s -= v * std::cos(head_off) * step;
    }
  }
  return path.position(s, lat);
}

inline AgentState agent_state(const ArcPath& path, const AgentPlan& plan, double t) {
  const Vec2 p = agent_position(path, plan, t);
  const Vec2 p2 = agent_position(path, plan, t + 0.05);
  const Vec2 d = p2 - p;
  const double v = std::clamp(plan.speed + plan.accel * t, 0.0, kAgentSpeedCap);
  double heading = d.norm() > 1e-6 ? std::atan2(d.y(), d.x()) : path.heading(plan.s0);
  AgentState st;
  st.x = p.x();
  st.y = p.y();
  st.heading = wrap_angle(heading);
  st.speed = v;
  st.length = plan.length;
  st.width = plan.width;
  return st;
}

}  // namespace gen

inline std::vector<Scenario> generate_scenarios(ScenarioKind kind, int count, uint64_t seed);

namespace gen {

inline Scenario generate_one(ScenarioKind kind, Rng& rng) {
  Scenario s;
  s.dt = kDefaultDt;
  const int T = kHorizonSteps;
  const int Th = kHistorySteps;
  const double horizon_s = T * s.dt;

  ArcPath path;
  path.origin = {rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
  path.heading0 = rng.uniform(-std::numbers::pi, std::numbers::pi);
  if (kind == ScenarioKind::curve) {
    const double radius = rng.uniform(35.0, 80.0);
    path.curvature = (rng.uniform() < 0.5 ? 1.0 : -1.0) / radius;
  }

  const double s_ego = 20.0;
  const double v0 = kind == ScenarioKind::red_light ? rng.uniform(7.0, 10.0)
                                                    : rng.uniform(6.0, 12.0);

  s.map.reference_lanes.push_back(path.sample(0.0, 120.0, 2.5));

  // Ego history: lane following at constant speed.
  for (int k = Th - 1; k >= 0; --k) {
    const double sk = s_ego - v0 * k * s.dt;
    EgoState e;
    const Vec2 p = path.position(sk);
    e.x = p.x();
    e.y = p.y();
    e.heading = wrap_angle(path.heading(sk));
    e.speed = v0;
    e.yaw_rate = v0 * path.curvature;
    s.ego_history.push_back(e);
  }

  // Demo profiles per kind: arc-length and lateral offset as functions of
  // time, sampled at t = dt .. T*dt and re-differenced below.
  double swerve = 0.0, s_obstacle = 0.0;
  double stop_distance = 0.0, t_stop = 0.0;
  double demo_speed_scale = 1.0;
  switch (kind) {
    case ScenarioKind::blocked_lane: {
      swerve = (rng.uniform() < 0.5 ? 1.0 : -1.0) * rng.uniform(2.3, 2.7);
      s_obstacle = s_ego + 0.62 * v0 * horizon_s + rng.uniform(4.0, 6.0);
      break;
    }
    case ScenarioKind::red_light: {
      stop_distance = rng.uniform(1.1, 1.4) * v0;  // reachable with a smooth stop
      t_stop = 2.0 * stop_distance / v0;
      break;
    }
    case ScenarioKind::cut_in:
      demo_speed_scale = rng.uniform(0.75, 0.9);
      break;
    default:
      break;
  }

  std::vector<Vec2> demo_pos(T);
  for (int i = 1; i <= T; ++i) {
    const double t = i * s.dt;
    double arc = 0.0, lat = 0.0;
    switch (kind) {
      case ScenarioKind::straight:
      case ScenarioKind::curve:
        arc = v0 * t;
        break;
      case ScenarioKind::cut_in: {
        // Linear ramp from v0 down to the reduced cruise speed.
        const double v_end = v0 * demo_speed_scale;
        arc = v0 * t + (v_end - v0) * t * t / (2.0 * horizon_s);
        break;
      }
      case ScenarioKind::blocked_lane:
        arc = v0 * t;
        lat = swerve * quintic_blend(t / horizon_s);
        break;
      case ScenarioKind::red_light: {
        // v(t) = v0 * (1 - smoothstep(t/t_stop)); closed-form distance.
        const double x = std::min(1.0, t / t_stop);
        const double dist = v0 * t_stop * (x - (x * x * x - x * x * x * x / 2.0));
        arc = t < t_stop ? dist : v0 * t_stop * 0.5;
        break;
      }
    }
    demo_pos[i - 1] = path.position(s_ego + arc, lat);
  }

  // Store demo with speed/heading recomputed from the positions, so stored
  // kinematics match finite differences exactly.
  s.demo.resize(T);
  Vec2 prev = path.position(s_ego);
  double prev_heading = wrap_angle(path.heading(s_ego));
  for (int i = 0; i < T; ++i) {
    const Vec2 step = demo_pos[i] - prev;
    s.demo[i].x = demo_pos[i].x();
    s.demo[i].y = demo_pos[i].y();
    s.demo[i].speed = step.norm() / s.dt;
    s.demo[i].heading =
        step.norm() > 1e-9 ? std::atan2(step.y(), step.x()) : prev_heading;
    prev = demo_pos[i];
    prev_heading = s.demo[i].heading;
  }

  // Map furniture per kind.
  if (kind == ScenarioKind::blocked_lane) {
    const double half_len = rng.uniform(0.9, 1.2);
    const double half_w = rng.uniform(0.6, 0.8);
    const Vec2 c = path.position(s_obstacle);
    const double h = path.heading(s_obstacle);
    const Vec2 u{std::cos(h), std::sin(h)};
    const Vec2 n{-std::sin(h), std::cos(h)};
    s.map.static_obstacles.push_back(
        {c + half_len * u + half_w * n, c - half_len * u + half_w * n,
         c - half_len * u - half_w * n, c + half_len * u - half_w * n});
  }
  if (kind == ScenarioKind::red_light) {
    const double s_line = s_ego + stop_distance + rng.uniform(1.2, 1.8);
    const double h = path.heading(s_line);
    const Vec2 c = path.position(s_line);
    const Vec2 n{-std::sin(h), std::cos(h)};
    s.map.traffic_lights.push_back({c - 4.0 * n, c + 4.0 * n, LightState::red});
  }

  // Agents. Same-lane agents ahead pull away; adjacent-lane agents are free.
  const int n_agents = rng.uniform_int(2, 4) + (kind == ScenarioKind::cut_in ? 1 : 0);
  int next_id = 1;
  for (int a = 0; a < n_agents; ++a) {
    AgentPlan plan;
    bool is_cut_in_actor = kind == ScenarioKind::cut_in && a == 0;
    for (int attempt = 0; attempt < 20; ++attempt) {
      if (is_cut_in_actor) {
        plan.s0 = s_ego + rng.uniform(14.0, 20.0);
        plan.lateral = rng.uniform() < 0.5 ? 3.5 : -3.5;
        plan.speed = std::min(kAgentSpeedCap, v0 * rng.uniform(0.95, 1.15));
        plan.accel = 0.0;
        // Drift toward the ego lane.
        plan.yaw_rate = (plan.lateral > 0 ? -1.0 : 1.0) * rng.uniform(0.04, 0.07);
      } else if (rng.uniform() < 0.4) {
        plan.s0 = s_ego + rng.uniform(25.0, 45.0);
        plan.lateral = 0.0;
        plan.speed = std::min(kAgentSpeedCap, v0 + rng.uniform(0.5, 2.5));
        plan.accel = 0.0;
        plan.yaw_rate = 0.0;
      } else {
        plan.s0 = s_ego + rng.uniform(-20.0, 40.0);
        plan.lateral = rng.uniform() < 0.5 ? 3.5 : -3.5;
        plan.speed = rng.uniform(3.0, 10.0);
        const double r = rng.uniform();
        plan.accel = r < 0.3 ? -1.0 : 0.0;
        plan.yaw_rate = r > 0.8 ? rng.uniform(-0.05, 0.05) : 0.0;
      }
      plan.length = rng.uniform(4.0, 5.0);
      plan.width = rng.uniform(1.7, 2.0);

      // Expert quality: the demo keeps clear of every agent's true future.
      double min_gap = 1e9;
      for (int i = 1; i <= T; ++i) {
        const Vec2 ap = gen::agent_position(path, plan, i * s.dt);
        min_gap = std::min(min_gap, (ap - demo_pos[i - 1]).norm());
      }
      if (min_gap > 4.0) break;
      if (attempt == 19) plan.speed = -1.0;  // drop this agent
    }
    if (plan.speed < 0) continue;

    AgentTrack track;
    track.id = next_id++;
    for (int k = Th - 1; k >= 0; --k)
      track.history.push_back(agent_state(path, plan, -k * s.dt));
    for (int i = 1; i <= T; ++i) {
      Vec2 p = agent_position(path, plan, i * s.dt);
      p.x() += rng.normal(0.0, 0.12);
      p.y() += rng.normal(0.0, 0.12);
      track.future_truth.push_back(p);
    }
    s.agents.push_back(std::move(track));
  }

  validate_scenario(s);
  return s;
}

}  // namespace gen

inline std::vector<Scenario> generate_scenarios(ScenarioKind kind, int count,
                                                uint64_t seed) {
  if (count < 1) throw ConfigError("generate_scenarios: count must be >= 1");
  std::vector<Scenario> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    // Per-index sub-seed: scenario i does not depend on count.
    Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(i + 1)));
    out.push_back(gen::generate_one(kind, rng));
  }
  return out;
}

}  // namespace riskmap
