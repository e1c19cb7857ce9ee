#pragma once

#include <cmath>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/scenario.hpp"

namespace riskmap {

struct TrajectoryState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  double yaw_rate = 0.0;

  Pose pose() const { return {x, y, heading}; }
  Vec2 position() const { return {x, y}; }
};

// One lattice candidate: T future states at t = dt .. T*dt. The rollout is
// anchored at the current ego state, which is not stored as a row; speed,
// accel and yaw rate are backward finite differences using that anchor.
struct TrajectorySample {
  std::vector<TrajectoryState> states;
  double target_speed = 0.0;    // lattice coordinate
  double lateral_offset = 0.0;  // lattice coordinate

  int horizon() const { return static_cast<int>(states.size()); }
};

// Fills heading/speed/accel/yaw_rate from positions, anchored at the ego
// state. Positions (x, y) of every state must already be set.
inline void derive_kinematics(TrajectorySample& traj, const EgoState& ego, double dt) {
  Vec2 prev_pos = {ego.x, ego.y};
  double prev_speed = ego.speed;
  double prev_heading = ego.heading;
  for (auto& st : traj.states) {
    const Vec2 pos = st.position();
    const Vec2 step = pos - prev_pos;
    st.speed = step.norm() / dt;
    st.heading = step.norm() > 1e-9 ? std::atan2(step.y(), step.x()) : prev_heading;
    st.accel = (st.speed - prev_speed) / dt;
    st.yaw_rate = wrap_angle(st.heading - prev_heading) / dt;
    prev_pos = pos;
    prev_speed = st.speed;
    prev_heading = st.heading;
  }
}

// The expert future rendered as a sample so it can be scored by the same
// cost pipeline as the lattice candidates.
inline TrajectorySample demo_as_sample(const Scenario& s) {
  TrajectorySample traj;
  traj.states.resize(s.demo.size());
  for (size_t t = 0; t < s.demo.size(); ++t) {
    traj.states[t].x = s.demo[t].x;
    traj.states[t].y = s.demo[t].y;
  }
  derive_kinematics(traj, s.ego_now(), s.dt);
  return traj;
}

// Max deviation between stored speed/accel and their position-based finite
// differences; 0 for anything produced by derive_kinematics.
inline double kinematic_inconsistency(const TrajectorySample& traj,
                                      const EgoState& ego, double dt) {
  double worst = 0.0;
  Vec2 prev_pos = {ego.x, ego.y};
  double prev_speed = ego.speed;
  for (const auto& st : traj.states) {
    const double fd_speed = (st.position() - prev_pos).norm() / dt;
    worst = std::max(worst, std::abs(fd_speed - st.speed));
    const double fd_accel = (st.speed - prev_speed) / dt;
    worst = std::max(worst, std::abs(fd_accel - st.accel));
    prev_pos = st.position();
    prev_speed = st.speed;
  }
  return worst;
}

}  // namespace riskmap
