#pragma once

// Shared fixtures: deterministic hand-built scenarios and small helpers used
// across the test files. Everything here is plain data construction.

#include <cmath>
#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/scenario.hpp"
#include "riskmap/trajectory.hpp"

namespace testsupport {

// Straight lane along +x from (0,0) to (120,0), one point every 2.5 m.
inline riskmap::Polyline straight_lane() {
  riskmap::Polyline lane;
  for (double x = 0.0; x <= 120.0 + 1e-9; x += 2.5) lane.push_back({x, 0.0});
  return lane;
}

inline riskmap::AgentTrack constant_velocity_agent(int id, double x0, double y0,
                                                   double speed, double dt,
                                                   int history_steps,
                                                   int future_steps) {
  riskmap::AgentTrack track;
  track.id = id;
  for (int k = history_steps - 1; k >= 0; --k) {
    riskmap::AgentState s;
    s.x = x0 - speed * k * dt;
    s.y = y0;
    s.heading = 0.0;
    s.speed = speed;
    s.length = 4.5;
    s.width = 1.8;
    track.history.push_back(s);
  }
  for (int i = 1; i <= future_steps; ++i)
    track.future_truth.push_back({x0 + speed * i * dt, y0});
  return track;
}

// Ego cruising at constant speed down the straight lane with a matching
// constant-speed demo and one constant-velocity agent ahead.
inline riskmap::Scenario straight_scenario(double ego_speed = 8.0,
                                           bool with_agent = true) {
  riskmap::Scenario s;
  s.dt = riskmap::kDefaultDt;
  s.map.reference_lanes.push_back(straight_lane());
  const double x_ego = 20.0;
  for (int k = riskmap::kHistorySteps - 1; k >= 0; --k) {
    riskmap::EgoState e;
    e.x = x_ego - ego_speed * k * s.dt;
    e.y = 0.0;
    e.heading = 0.0;
    e.speed = ego_speed;
    e.yaw_rate = 0.0;
    s.ego_history.push_back(e);
  }
  s.demo.resize(riskmap::kHorizonSteps);
  for (int i = 0; i < riskmap::kHorizonSteps; ++i) {
    s.demo[i].x = x_ego + ego_speed * (i + 1) * s.dt;
    s.demo[i].y = 0.0;
    s.demo[i].heading = 0.0;
    s.demo[i].speed = ego_speed;
  }
  if (with_agent)
    s.agents.push_back(constant_velocity_agent(1, 45.0, 0.0, 9.0, s.dt,
                                               riskmap::kHistorySteps,
                                               riskmap::kHorizonSteps));
  return s;
}

// Straight trajectory sample with hand-set kinematic fields (not derived),
// handy for closed-form smoothness / velocity checks.
inline riskmap::TrajectorySample straight_sample(double x0, double speed,
                                                 double accel, double yaw_rate,
                                                 int steps, double dt) {
  riskmap::TrajectorySample sample;
  sample.states.resize(steps);
  for (int t = 0; t < steps; ++t) {
    auto& st = sample.states[t];
    st.x = x0 + speed * (t + 1) * dt;
    st.y = 0.0;
    st.heading = 0.0;
    st.speed = speed;
    st.accel = accel;
    st.yaw_rate = yaw_rate;
  }
  return sample;
}

inline riskmap::Polygon unit_box(double cx, double cy, double half) {
  return {{cx + half, cy + half}, {cx - half, cy + half},
          {cx - half, cy - half}, {cx + half, cy - half}};
}

}  // namespace testsupport
