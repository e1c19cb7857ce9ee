#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/geometry.hpp"
#include "riskmap/mlp.hpp"
#include "riskmap/scenario.hpp"

namespace riskmap {

inline constexpr int kFeatureDim = 32;

// Learned cost-shaping parameters. beta/lambda hold one column when constant
// over the horizon and kHorizonSteps columns in time-varying mode; accessors
// broadcast either way.
struct RiskParams {
  Eigen::MatrixXd beta;     // 3 channels x time
  Eigen::MatrixXd lambda;   // 3 channels x time
  Eigen::Vector2d w_smooth = Eigen::Vector2d::Zero();
  double w_d = 0.0;
  Eigen::VectorXd v_bar;    // per-step target speed, length T

  int time_dim() const { return static_cast<int>(beta.cols()); }
  double beta_at(int channel, int t) const {
    return beta(channel, beta.cols() == 1 ? 0 : t);
  }
  double lambda_at(int channel, int t) const {
    return lambda(channel, lambda.cols() == 1 ? 0 : t);
  }
};

struct RiskParamsGrad {
  Eigen::MatrixXd d_beta;
  Eigen::MatrixXd d_lambda;
  Eigen::Vector2d d_w_smooth = Eigen::Vector2d::Zero();
  double d_w_d = 0.0;
  Eigen::VectorXd d_v_bar;

  explicit RiskParamsGrad(const RiskParams& p)
      : d_beta(Eigen::MatrixXd::Zero(p.beta.rows(), p.beta.cols())),
        d_lambda(Eigen::MatrixXd::Zero(p.lambda.rows(), p.lambda.cols())),
        d_v_bar(Eigen::VectorXd::Zero(p.v_bar.size())) {}
};

namespace detail {

struct LaneProjection {
  double distance = kSentinelDistance;  // unsigned center distance
  double signed_offset = 0.0;           // left of travel positive
  double lane_heading = 0.0;
  double curvature = 0.0;
  double heading_ahead = 0.0;  // lane heading ~15 m further along
  bool found = false;
};

inline LaneProjection project_to_lanes(const Eigen::Vector2d& p,
                                       const std::vector<Polyline>& lanes) {
  LaneProjection best;
  for (const auto& lane : lanes) {
    for (size_t i = 0; i + 1 < lane.size(); ++i) {
      const Eigen::Vector2d q = closest_point_on_segment(p, lane[i], lane[i + 1]);
      const double d = (p - q).norm();
      if (d >= best.distance) continue;
      best.found = true;
      best.distance = d;
      const Eigen::Vector2d dir = (lane[i + 1] - lane[i]).normalized();
      best.lane_heading = std::atan2(dir.y(), dir.x());
      const Eigen::Vector2d rel = p - q;
      best.signed_offset = dir.x() * rel.y() - dir.y() * rel.x();
      // Local curvature from the heading change into the next segment.
      best.curvature = 0.0;
      if (i + 2 < lane.size()) {
        const Eigen::Vector2d dir2 = (lane[i + 2] - lane[i + 1]).normalized();
        const double seg_len = (lane[i + 1] - lane[i]).norm();
        if (seg_len > 1e-9)
          best.curvature =
              wrap_angle(std::atan2(dir2.y(), dir2.x()) - best.lane_heading) / seg_len;
      }
      // Heading roughly 15 m further along the polyline.
      double remaining = 15.0 - (q - lane[i]).norm();
      size_t j = i;
      while (j + 2 < lane.size() && remaining > (lane[j + 1] - lane[j]).norm()) {
        remaining -= (lane[j + 1] - lane[j]).norm();
        ++j;
      }
      const Eigen::Vector2d dir_ahead = (lane[j + 1] - lane[j]).normalized();
      best.heading_ahead = std::atan2(dir_ahead.y(), dir_ahead.x());
    }
  }
  return best;
}

}  // namespace detail

// Fixed-length scene summary: ego kinematics, nearest-lane geometry, static
// obstacles, light state, agent aggregates. Aggregation keeps the vector
// invariant to agent ordering and ids; trailing entries stay zero.
inline Eigen::VectorXd extract_features(const Scenario& scenario) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatureDim);
  const EgoState ego = scenario.ego_now();
  const Eigen::Vector2d pos(ego.x, ego.y);
  const Eigen::Vector2d heading_dir(std::cos(ego.heading), std::sin(ego.heading));

  f[0] = ego.speed / kMaxSpeed;
  f[1] = ego.yaw_rate;
  if (scenario.ego_history.size() >= 2) {
    const auto& prev = scenario.ego_history[scenario.ego_history.size() - 2];
    f[2] = (ego.speed - prev.speed) / scenario.dt / 5.0;
  }

  const auto lane = detail::project_to_lanes(pos, scenario.map.reference_lanes);
  if (lane.found) {
    f[3] = std::sin(ego.heading - lane.lane_heading);
    f[4] = std::cos(ego.heading - lane.lane_heading);
    f[5] = lane.signed_offset / kLateralRange;
    f[6] = lane.curvature * 10.0;
    f[7] = wrap_angle(lane.heading_ahead - lane.lane_heading);
  }

  const EgoCircles circles = ego_circles(ego.pose(), kEgoLength, kEgoWidth);
  f[8] = std::min(sdf_static(circles, scenario.map.static_obstacles), 50.0) / 50.0;

  bool red = false, yellow = false, green = false;
  for (const auto& light : scenario.map.traffic_lights) {
    if (light.state == LightState::red) red = true;
    if (light.state == LightState::yellow) yellow = true;
    if (light.state == LightState::green) green = true;
  }
  f[9] = red ? 1.0 : 0.0;
  f[10] = yellow ? 1.0 : 0.0;
  f[11] = green ? 1.0 : 0.0;
  f[12] = std::min(distance_to_traffic_light(circles, scenario.map.traffic_lights, heading_dir),
                   100.0) /
          100.0;

  if (!scenario.agents.empty()) {
    const double n = static_cast<double>(scenario.agents.size());
    double min_dist = kSentinelDistance, min_dist_ahead = kSentinelDistance;
    double mean_speed = 0.0, mean_along = 0.0, mean_heading = 0.0;
    double ahead = 0.0, near = 0.0;
    for (const auto& agent : scenario.agents) {
      const AgentState s = agent.current();
      const Eigen::Vector2d rel(s.x - ego.x, s.y - ego.y);
      const double d = rel.norm();
      min_dist = std::min(min_dist, d);
      const bool is_ahead = rel.dot(heading_dir) > 0.0;
      if (is_ahead) {
        ahead += 1.0;
        min_dist_ahead = std::min(min_dist_ahead, d);
      }
      if (d < 15.0) near += 1.0;
      mean_speed += s.speed;
      mean_along += s.speed * std::cos(s.heading - ego.heading);
      mean_heading += std::abs(wrap_angle(s.heading - ego.heading));
    }
    f[13] = n / 8.0;
    f[14] = std::exp(-min_dist / 10.0);
    f[15] = mean_speed / n / kMaxSpeed;
    f[16] = ahead / n;
    f[17] = near / n;
    f[18] = mean_heading / n / M_PI;
    f[19] = std::exp(-min_dist_ahead / 10.0);
    f[20] = mean_along / n / kMaxSpeed;
  }
  return f;
}

// The five trainable heads that turn scene features into RiskParams.
struct PlannerHeads {
  MlpHead beta;
  MlpHead lambda;
  MlpHead w_smooth;
  MlpHead w_d;
  MlpHead v_bar;
  bool tv = false;

  PlannerHeads() = default;

  explicit PlannerHeads(bool time_varying, int horizon = kHorizonSteps,
                        int feature_dim = kFeatureDim, int hidden = 32)
      : tv(time_varying) {
    const int tb = time_varying ? horizon : 1;
    const std::vector<int> h{hidden, hidden};
    beta = MlpHead(feature_dim, h, 3 * tb, Transform::exp);
    lambda = MlpHead(feature_dim, h, 3 * tb, Transform::identity);
    w_smooth = MlpHead(feature_dim, h, 2, Transform::softplus);
    w_d = MlpHead(feature_dim, h, 1, Transform::softplus);
    v_bar = MlpHead(feature_dim, h, horizon, Transform::softplus);
  }

  void randomize(Rng& rng, double scale = 0.1) {
    beta.randomize(rng, scale);
    lambda.randomize(rng, scale);
    w_smooth.randomize(rng, scale);
    w_d.randomize(rng, scale);
    v_bar.randomize(rng, scale);
  }

  int parameter_count() const {
    return beta.parameter_count() + lambda.parameter_count() +
           w_smooth.parameter_count() + w_d.parameter_count() +
           v_bar.parameter_count();
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(parameter_count());
    int k = 0;
    for (const MlpHead* head : {&beta, &lambda, &w_smooth, &w_d, &v_bar}) {
      v.segment(k, head->parameter_count()) = head->flatten();
      k += head->parameter_count();
    }
    return v;
  }

  void unflatten(const Eigen::VectorXd& v) {
    if (v.size() != parameter_count())
      throw ConfigError("planner heads: expected " + std::to_string(parameter_count()) +
                        " parameters, got " + std::to_string(v.size()));
    int k = 0;
    for (MlpHead* head : {&beta, &lambda, &w_smooth, &w_d, &v_bar}) {
      head->unflatten(v.segment(k, head->parameter_count()));
      k += head->parameter_count();
    }
  }
};

struct HeadsTrace {
  MlpHead::Trace beta, lambda, w_smooth, w_d, v_bar;
};

struct PlannerHeadsGrad {
  MlpHead::Grad beta, lambda, w_smooth, w_d, v_bar;

  explicit PlannerHeadsGrad(const PlannerHeads& h)
      : beta(h.beta), lambda(h.lambda), w_smooth(h.w_smooth), w_d(h.w_d),
        v_bar(h.v_bar) {}

  void scale(double k) {
    beta.scale(k);
    lambda.scale(k);
    w_smooth.scale(k);
    w_d.scale(k);
    v_bar.scale(k);
  }

  void add(const PlannerHeadsGrad& o) {
    beta.add(o.beta);
    lambda.add(o.lambda);
    w_smooth.add(o.w_smooth);
    w_d.add(o.w_d);
    v_bar.add(o.v_bar);
  }

  Eigen::VectorXd flatten() const {
    const Eigen::VectorXd parts[] = {
        MlpHead::flatten_grad(beta), MlpHead::flatten_grad(lambda),
        MlpHead::flatten_grad(w_smooth), MlpHead::flatten_grad(w_d),
        MlpHead::flatten_grad(v_bar)};
    int n = 0;
    for (const auto& p : parts) n += static_cast<int>(p.size());
    Eigen::VectorXd v(n);
    int k = 0;
    for (const auto& p : parts) {
      v.segment(k, p.size()) = p;
      k += static_cast<int>(p.size());
    }
    return v;
  }
};

namespace detail {

inline void check_head(const MlpHead& head, const char* name, int feature_dim,
                       int expected_out) {
  if (head.input_dim() != feature_dim)
    throw ConfigError(std::string(name) + " head: input dim " +
                      std::to_string(head.input_dim()) + " does not match features " +
                      std::to_string(feature_dim));
  if (head.output_dim() != expected_out)
    throw ConfigError(std::string(name) + " head: output dim " +
                      std::to_string(head.output_dim()) + ", expected " +
                      std::to_string(expected_out));
}

}  // namespace detail

inline RiskParams forward_heads(const PlannerHeads& heads,
                                const Eigen::VectorXd& features,
                                int horizon = kHorizonSteps,
                                HeadsTrace* trace = nullptr) {
  const int fd = static_cast<int>(features.size());
  const int tb = heads.tv ? horizon : 1;
  detail::check_head(heads.beta, "beta", fd, 3 * tb);
  detail::check_head(heads.lambda, "lambda", fd, 3 * tb);
  detail::check_head(heads.w_smooth, "w_smooth", fd, 2);
  detail::check_head(heads.w_d, "w_d", fd, 1);
  detail::check_head(heads.v_bar, "v_bar", fd, horizon);

  auto run = [&](const MlpHead& head, MlpHead::Trace* tr) {
    if (tr == nullptr) return head.forward(features);
    *tr = head.forward_trace(features);
    Eigen::VectorXd y = tr->raw_out;
    for (int i = 0; i < y.size(); ++i) y[i] = apply_transform(head.transform, y[i]);
    return y;
  };

  const Eigen::VectorXd yb = run(heads.beta, trace ? &trace->beta : nullptr);
  const Eigen::VectorXd yl = run(heads.lambda, trace ? &trace->lambda : nullptr);
  const Eigen::VectorXd yw = run(heads.w_smooth, trace ? &trace->w_smooth : nullptr);
  const Eigen::VectorXd yd = run(heads.w_d, trace ? &trace->w_d : nullptr);
  const Eigen::VectorXd yv = run(heads.v_bar, trace ? &trace->v_bar : nullptr);

  RiskParams params;
  params.beta.resize(3, tb);
  params.lambda.resize(3, tb);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < tb; ++t) {
      params.beta(c, t) = yb[c * tb + t];
      params.lambda(c, t) = yl[c * tb + t];
    }
  params.w_smooth = yw;
  params.w_d = yd[0];
  params.v_bar = yv;
  return params;
}

inline void backward_heads(const PlannerHeads& heads, const HeadsTrace& trace,
                           const RiskParamsGrad& d_params, PlannerHeadsGrad& grad) {
  const int tb = static_cast<int>(d_params.d_beta.cols());
  Eigen::VectorXd ub(3 * tb), ul(3 * tb);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < tb; ++t) {
      ub[c * tb + t] = d_params.d_beta(c, t);
      ul[c * tb + t] = d_params.d_lambda(c, t);
    }
  heads.beta.backward(trace.beta, ub, grad.beta);
  heads.lambda.backward(trace.lambda, ul, grad.lambda);
  heads.w_smooth.backward(trace.w_smooth, d_params.d_w_smooth, grad.w_smooth);
  heads.w_d.backward(trace.w_d, Eigen::VectorXd::Constant(1, d_params.d_w_d),
                     grad.w_d);
  heads.v_bar.backward(trace.v_bar, d_params.d_v_bar, grad.v_bar);
}

}  // namespace riskmap
