#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskmap/common.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/geometry.hpp"
#include "riskmap/scenario.hpp"
#include "riskmap/trajectory.hpp"

namespace riskmap {

inline double ade(const TrajectorySample& plan, const TrajectorySample& demo) {
  if (plan.states.size() != demo.states.size() || plan.states.empty())
    throw ConfigError("ade: trajectory lengths differ");
  double sum = 0.0;
  for (size_t t = 0; t < plan.states.size(); ++t)
    sum += (plan.states[t].position() - demo.states[t].position()).norm();
  return sum / static_cast<double>(plan.states.size());
}

// Final displacement split in the demo's final heading frame: x = |lateral|,
// y = |longitudinal|.
inline Eigen::Vector2d fde_lat_lon(const TrajectorySample& plan,
                                   const TrajectorySample& demo) {
  if (plan.states.size() != demo.states.size() || plan.states.empty())
    throw ConfigError("fde: trajectory lengths differ");
  const Eigen::Vector2d diff =
      plan.states.back().position() - demo.states.back().position();
  const double h = demo.states.back().heading;
  const double lon = std::cos(h) * diff.x() + std::sin(h) * diff.y();
  const double lat = -std::sin(h) * diff.x() + std::cos(h) * diff.y();
  return {std::abs(lat), std::abs(lon)};
}

namespace detail {

inline Polygon rectangle_corners(const Pose& pose, double length, double width) {
  const Eigen::Vector2d c = pose.position();
  const Eigen::Vector2d fwd = pose.direction();
  const Eigen::Vector2d left(-fwd.y(), fwd.x());
  const double hl = 0.5 * length, hw = 0.5 * width;
  return {c + fwd * hl + left * hw, c - fwd * hl + left * hw,
          c - fwd * hl - left * hw, c + fwd * hl - left * hw};
}

}  // namespace detail

// True when any ego circle of the planned trajectory overlaps a ground-truth
// agent rectangle or a static obstacle at any step up to the horizon. Agent
// footprint headings follow the motion direction of the true future points,
// holding the last heading while nearly stationary.
inline bool collides_within(const TrajectorySample& plan, const Scenario& scenario,
                            double horizon_s) {
  const int steps = std::min(static_cast<int>(plan.states.size()),
                             static_cast<int>(std::floor(horizon_s / scenario.dt + 1e-9)));
  std::vector<std::vector<Polygon>> agent_polys(scenario.agents.size());
  for (size_t a = 0; a < scenario.agents.size(); ++a) {
    const AgentTrack& agent = scenario.agents[a];
    const AgentState& now = agent.current();
    Vec2 prev{now.x, now.y};
    double heading = now.heading;
    const int n = std::min(steps, static_cast<int>(agent.future_truth.size()));
    agent_polys[a].reserve(n);
    for (int t = 0; t < n; ++t) {
      const Vec2 p = agent.future_truth[t];
      const Vec2 step = p - prev;
      if (step.norm() > 1e-6) heading = std::atan2(step.y(), step.x());
      agent_polys[a].push_back(detail::rectangle_corners(Pose{p.x(), p.y(), heading},
                                                         now.length, now.width));
      prev = p;
    }
  }
  for (int t = 0; t < steps; ++t) {
    const EgoCircles circles =
        ego_circles(plan.states[t].pose(), kEgoLength, kEgoWidth);
    for (const auto& circle : circles) {
      for (const auto& obstacle : scenario.map.static_obstacles)
        if (polygon_signed_distance(circle.center, obstacle) < circle.radius)
          return true;
      for (const auto& polys : agent_polys) {
        if (t >= static_cast<int>(polys.size())) continue;
        if (polygon_signed_distance(circle.center, polys[t]) < circle.radius)
          return true;
      }
    }
  }
  return false;
}

inline double collision_rate(const std::vector<TrajectorySample>& plans,
                             const std::vector<Scenario>& scenarios,
                             double horizon_s) {
  if (plans.size() != scenarios.size())
    throw ConfigError("collision_rate: plans and scenarios must align");
  if (plans.empty()) return 0.0;
  int hits = 0;
  for (size_t i = 0; i < plans.size(); ++i)
    if (collides_within(plans[i], scenarios[i], horizon_s)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(plans.size());
}

// Mean absolute second finite difference of speed over dt^2 (longitudinal).
inline double jerk(const TrajectorySample& plan, double dt) {
  if (plan.states.size() < 4)
    throw ConfigError("jerk: needs at least 4 states");
  double sum = 0.0;
  const int n = static_cast<int>(plan.states.size()) - 2;
  for (int t = 0; t < n; ++t)
    sum += std::abs(plan.states[t + 2].speed - 2.0 * plan.states[t + 1].speed +
                    plan.states[t].speed);
  return sum / n / sq(dt);
}

struct EvalRow {
  std::string scenario;
  double ade = 0.0;
  double fde_lat = 0.0;
  double fde_lon = 0.0;
  double col_1s = 0.0;
  double col_2s = 0.0;
  double col_3s = 0.0;
  double jerk = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalRow aggregate;  // means over rows; collision columns become fractions
};

inline EvalReport evaluate(const std::vector<TrajectorySample>& plans,
                           const std::vector<Scenario>& scenarios,
                           const std::vector<std::string>& names) {
  if (plans.size() != scenarios.size() || plans.size() != names.size())
    throw ConfigError("evaluate: plans, scenarios and names must align");
  EvalReport report;
  report.aggregate.scenario = "aggregate";
  for (size_t i = 0; i < plans.size(); ++i) {
    const TrajectorySample demo = demo_as_sample(scenarios[i]);
    EvalRow row;
    row.scenario = names[i];
    row.ade = ade(plans[i], demo);
    const Eigen::Vector2d fde = fde_lat_lon(plans[i], demo);
    row.fde_lat = fde.x();
    row.fde_lon = fde.y();
    row.col_1s = collides_within(plans[i], scenarios[i], 1.0) ? 1.0 : 0.0;
    row.col_2s = collides_within(plans[i], scenarios[i], 2.0) ? 1.0 : 0.0;
    row.col_3s = collides_within(plans[i], scenarios[i], 3.0) ? 1.0 : 0.0;
    row.jerk = jerk(plans[i], scenarios[i].dt);
    report.aggregate.ade += row.ade;
    report.aggregate.fde_lat += row.fde_lat;
    report.aggregate.fde_lon += row.fde_lon;
    report.aggregate.col_1s += row.col_1s;
    report.aggregate.col_2s += row.col_2s;
    report.aggregate.col_3s += row.col_3s;
    report.aggregate.jerk += row.jerk;
    report.rows.push_back(std::move(row));
  }
  if (!report.rows.empty()) {
    const double inv = 1.0 / static_cast<double>(report.rows.size());
    report.aggregate.ade *= inv;
    report.aggregate.fde_lat *= inv;
    report.aggregate.fde_lon *= inv;
    report.aggregate.col_1s *= inv;
    report.aggregate.col_2s *= inv;
    report.aggregate.col_3s *= inv;
    report.aggregate.jerk *= inv;
  }
  return report;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void append_row_csv(std::string& out, const EvalRow& row) {
  out += row.scenario;
  for (double v : {row.ade, row.fde_lat, row.fde_lon, row.col_1s, row.col_2s,
                   row.col_3s, row.jerk}) {
    out += ',';
    out += format_double(v);
  }
  out += '\n';
}

inline nlohmann::json row_to_json(const EvalRow& row) {
  return {{"scenario", row.scenario}, {"ade", row.ade},   {"fde_lat", row.fde_lat},
          {"fde_lon", row.fde_lon},   {"col_1s", row.col_1s}, {"col_2s", row.col_2s},
          {"col_3s", row.col_3s},     {"jerk", row.jerk}};
}

}  // namespace detail

inline std::string report_to_csv(const EvalReport& report) {
  std::string out = "scenario,ade,fde_lat,fde_lon,col_1s,col_2s,col_3s,jerk\n";
  for (const auto& row : report.rows) detail::append_row_csv(out, row);
  detail::append_row_csv(out, report.aggregate);
  return out;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : report.rows) j["rows"].push_back(detail::row_to_json(row));
  j["aggregate"] = detail::row_to_json(report.aggregate);
  return j;
}

inline void save_report(const std::string& csv_path, const EvalReport& report) {
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot open '" + csv_path + "' for writing");
  out << report_to_csv(report);
  if (!out) throw IoError("failed writing '" + csv_path + "'");
}

}  // namespace riskmap
