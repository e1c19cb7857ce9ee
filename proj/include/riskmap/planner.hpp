#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/encoder.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/geometry.hpp"
#include "riskmap/predictor.hpp"
#include "riskmap/riskfield.hpp"
#include "riskmap/scenario.hpp"
#include "riskmap/trajectory.hpp"

namespace riskmap {

// Curvilinear coordinates along a polyline: s is arc length from the first
// vertex, l is the signed lateral offset (left of travel positive).
class FrenetFrame {
 public:
  explicit FrenetFrame(const Polyline& line) : line_(line) {
    if (line.size() < 2) throw ConfigError("frenet frame needs >= 2 polyline points");
    arc_.resize(line.size(), 0.0);
    for (size_t i = 1; i < line.size(); ++i)
      arc_[i] = arc_[i - 1] + (line[i] - line[i - 1]).norm();
  }

  struct Projection {
    double s = 0.0;
    double l = 0.0;
    double heading = 0.0;  // tangent direction at the foot point
  };

  Projection project(const Eigen::Vector2d& p) const {
    Projection best;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < line_.size(); ++i) {
      const Eigen::Vector2d q = closest_point_on_segment(p, line_[i], line_[i + 1]);
      const double d = (p - q).norm();
      if (d >= best_d) continue;
      best_d = d;
      const Eigen::Vector2d dir = (line_[i + 1] - line_[i]).normalized();
      const Eigen::Vector2d rel = p - q;
      best.s = arc_[i] + (q - line_[i]).norm();
      best.l = dir.x() * rel.y() - dir.y() * rel.x();
      best.heading = std::atan2(dir.y(), dir.x());
    }
    return best;
  }

  Eigen::Vector2d position(double s, double l) const {
    size_t i = 0;
    while (i + 2 < line_.size() && arc_[i + 1] < s) ++i;
    const Eigen::Vector2d dir = (line_[i + 1] - line_[i]).normalized();
    const Eigen::Vector2d normal(-dir.y(), dir.x());
    return line_[i] + dir * (s - arc_[i]) + normal * l;
  }

  double length() const { return arc_.back(); }

 private:
  Polyline line_;
  std::vector<double> arc_;
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  for (int i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return v;
}

// Quintic coefficients c3..c5 on top of c0 + c1 t (c2 = 0), reaching the end
// offset with zero end velocity and acceleration.
inline Eigen::Vector3d quintic_tail(double delta, double v0, double tf) {
  Eigen::Matrix3d m;
  const double t2 = tf * tf, t3 = t2 * tf, t4 = t3 * tf, t5 = t4 * tf;
  m << t3, t4, t5,
       3 * t2, 4 * t3, 5 * t4,
       6 * tf, 12 * t2, 20 * t3;
  return m.colPivHouseholderQr().solve(Eigen::Vector3d(delta, -v0, 0.0));
}

}  // namespace detail

// Grid of target speed x final lateral offset, each rolled out as a smooth
// longitudinal speed blend plus a quintic lateral polynomial in the Frenet
// frame of the nearest lane.
inline std::vector<TrajectorySample> sample_lattice(const EgoState& ego,
                                                    const std::vector<Polyline>& lanes,
                                                    int count,
                                                    int horizon = kHorizonSteps,
                                                    double dt = kDefaultDt) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
  if (count < 1 || k * k != count)
    throw ConfigError("sampling count " + std::to_string(count) +
                      " is not a perfect square");
  if (lanes.empty()) throw ConfigError("no_reference: lane list is empty");

  const Eigen::Vector2d pos(ego.x, ego.y);
  size_t nearest = 0;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < lanes.size(); ++i) {
    const double d = point_polyline_distance(pos, lanes[i]);
    if (d < nearest_d) {
      nearest_d = d;
      nearest = i;
    }
  }
  if (nearest_d > 50.0) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", nearest_d);
    throw ConfigError("off_map: ego is " + std::string(buf) +
                      " m from the nearest lane");
  }

  const FrenetFrame frame(lanes[nearest]);
  const auto proj = frame.project(pos);
  const double rel_heading = wrap_angle(ego.heading - proj.heading);
  const double s_vel = ego.speed * std::cos(rel_heading);
  const double l_vel = ego.speed * std::sin(rel_heading);
  const double tf = horizon * dt;

  const std::vector<double> speeds = detail::linspace(0.0, kMaxSpeed, k);
  const std::vector<double> offsets =
      detail::linspace(-kLateralRange, kLateralRange, k);

  std::vector<TrajectorySample> out;
  out.reserve(static_cast<size_t>(count));
  for (const double vt : speeds)
    for (const double le : offsets) {
      const Eigen::Vector3d tail =
          detail::quintic_tail(le - (proj.l + l_vel * tf), l_vel, tf);
      TrajectorySample traj;
      traj.target_speed = vt;
      traj.lateral_offset = le;
      traj.states.resize(horizon);
      for (int t = 0; t < horizon; ++t) {
        const double tau = (t + 1) * dt;
        const double x = tau / tf;
        const double s =
            proj.s + s_vel * tau + (vt - s_vel) * tf * (x * x * x - 0.5 * x * x * x * x);
        const double l = proj.l + l_vel * tau +
                         tail[0] * tau * tau * tau + tail[1] * tau * tau * tau * tau +
                         tail[2] * tau * tau * tau * tau * tau;
        const Eigen::Vector2d p = frame.position(s, l);
        traj.states[t].x = p.x();
        traj.states[t].y = p.y();
      }
      derive_kinematics(traj, ego, dt);
      out.push_back(std::move(traj));
    }
  return out;
}

// (mean squared acceleration, mean squared yaw rate).
inline Eigen::Vector2d smoothness_cost(const TrajectorySample& traj) {
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (const auto& s : traj.states) {
    out[0] += sq(s.accel);
    out[1] += sq(s.yaw_rate);
  }
  return out / static_cast<double>(traj.states.size());
}

inline double velocity_term(const TrajectorySample& traj, const Eigen::VectorXd& v_bar) {
  if (v_bar.size() != static_cast<int>(traj.states.size()))
    throw ConfigError("velocity_term: v_bar length " + std::to_string(v_bar.size()) +
                      " does not match horizon " + std::to_string(traj.states.size()));
  double out = 0.0;
  for (size_t t = 0; t < traj.states.size(); ++t)
    out += sq(v_bar[static_cast<int>(t)] - traj.states[t].speed);
  return out / static_cast<double>(traj.states.size());
}

struct CostBreakdown {
  double risk_ref = 0.0;
  double risk_sdf = 0.0;
  double risk_tl = 0.0;
  double risk_col = 0.0;
  Eigen::Vector2d c_smooth = Eigen::Vector2d::Zero();
  double d_v = 0.0;       // raw mean squared speed gap
  double d_v_term = 0.0;  // w_d * d_v
  double total = 0.0;
};

// Time-summed risk channels plus weighted smoothness and velocity terms.
// Risk channels already carry their learned scale through beta; optional
// per-channel weights are available for experiments.
inline CostBreakdown trajectory_cost(const TrajectorySample& traj,
                                     const RiskMapValues& riskmap, int row,
                                     const RiskParams& params,
                                     const Eigen::Vector4d& channel_weights =
                                         Eigen::Vector4d::Ones()) {
  CostBreakdown cost;
  for (int t = 0; t < riskmap.horizon(); ++t) {
    cost.risk_ref += channel_weights[0] * riskmap.at(row, t, 0);
    cost.risk_sdf += channel_weights[1] * riskmap.at(row, t, 1);
    cost.risk_tl += channel_weights[2] * riskmap.at(row, t, 2);
    cost.risk_col += channel_weights[3] * riskmap.at(row, t, 3);
  }
  const Eigen::Vector2d smooth = smoothness_cost(traj);
  cost.c_smooth = smooth.cwiseProduct(params.w_smooth);
  cost.d_v = velocity_term(traj, params.v_bar);
  cost.d_v_term = params.w_d * cost.d_v;
  cost.total = cost.risk_ref + cost.risk_sdf + cost.risk_tl + cost.risk_col +
               cost.c_smooth.sum() + cost.d_v_term;
  return cost;
}

inline int select(const std::vector<CostBreakdown>& costs) {
  if (costs.empty()) throw ConfigError("select: empty cost list");
  int best = 0;
  for (int i = 1; i < static_cast<int>(costs.size()); ++i)
    if (costs[i].total < costs[best].total) best = i;
  return best;
}

struct PlanResult {
  int selected = 0;
  std::vector<TrajectorySample> samples;
  std::vector<CostBreakdown> costs;
  RiskParams params;
  double wall_ms = 0.0;

  const TrajectorySample& trajectory() const { return samples[selected]; }
};

inline PlanResult plan(const Scenario& scenario, const PredictorModel& predictor,
                       const PlannerHeads& heads, int count,
                       ColMode mode = ColMode::integrated) {
  const auto start = std::chrono::steady_clock::now();
  PlanResult result;
  const SeqMvnPrediction pred = predict(scenario, predictor);
  const Eigen::VectorXd features = extract_features(scenario);
  result.params = forward_heads(heads, features, scenario.horizon());
  result.samples = sample_lattice(scenario.ego_now(), scenario.map.reference_lanes, count,
                                  scenario.horizon(), scenario.dt);
  const RiskMapValues riskmap =
      build_riskmap(result.samples, scenario, pred, result.params, mode);
  result.costs.reserve(result.samples.size());
  for (size_t i = 0; i < result.samples.size(); ++i)
    result.costs.push_back(trajectory_cost(result.samples[i], riskmap,
                                           static_cast<int>(i), result.params));
  result.selected = select(result.costs);
  result.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return result;
}

}  // namespace riskmap
