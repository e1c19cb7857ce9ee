#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/scenario.hpp"
#include "riskmap/trajectory.hpp"

namespace riskmap {

struct Circle {
  Vec2 center{0, 0};
  double radius = 0.0;
};

using EgoCircles = std::vector<Circle>;

// Raw context distances per sample point, channels (d_ref, d_sdf, d_tl).
using DistanceMatrix = PointGrid<3>;

// n = max(1, ceil(length/width)) circles of radius width/2*sqrt(2), centers
// evenly spaced along the heading axis. Covers the footprint rectangle.
inline EgoCircles ego_circles(const Pose& pose, double length, double width) {
  const int n = std::max(1, static_cast<int>(std::ceil(length / width)));
  const double radius = width / 2.0 * std::numbers::sqrt2;
  const Vec2 axis = pose.direction();
  EgoCircles circles(n);
  for (int i = 0; i < n; ++i) {
    const double offset = -length / 2.0 + length / (2.0 * n) + i * length / n;
    circles[i] = {pose.position() + offset * axis, radius};
  }
  return circles;
}

inline Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return a;
  const double u = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + u * ab;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  return (p - closest_point_on_segment(p, a, b)).norm();
}

inline double point_polyline_distance(const Vec2& p, const Polyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < line.size(); ++i)
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  return best;
}

// Signed distance to a convex CCW polygon: negative inside.
inline double polygon_signed_distance(const Vec2& p, const Polygon& poly) {
  const int n = static_cast<int>(poly.size());
  double boundary = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (int i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    boundary = std::min(boundary, point_segment_distance(p, a, b));
    const Vec2 edge = b - a;
    if (edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x()) < 0) inside = false;
  }
  return inside ? -boundary : boundary;
}

inline double distance_to_reference(const EgoCircles& circles,
                                    const std::vector<Polyline>& lanes) {
  if (lanes.empty()) throw ConfigError("no_reference: lane list is empty");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : circles)
    for (const auto& lane : lanes)
      best = std::min(best, point_polyline_distance(c.center, lane) - c.radius);
  return best;
}

inline double sdf_static(const EgoCircles& circles,
                         const std::vector<Polygon>& obstacles) {
  if (obstacles.empty()) return kSentinelDistance;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : circles)
    for (const auto& poly : obstacles)
      best = std::min(best, polygon_signed_distance(c.center, poly) - c.radius);
  return best;
}

// Longitudinal distance to the nearest red/yellow stop line, measured along
// the travel direction; negative once past the line.
inline double distance_to_traffic_light(const EgoCircles& circles,
                                        const std::vector<TrafficLight>& lights,
                                        const Vec2& travel_dir) {
  double best = kSentinelDistance;
  for (const auto& l : lights) {
    if (l.state == LightState::green) continue;
    for (const auto& c : circles) {
      const Vec2 q = closest_point_on_segment(c.center, l.line_a, l.line_b);
      best = std::min(best, (q - c.center).dot(travel_dir) - c.radius);
    }
  }
  return best;
}

inline void measure_pose(const Pose& pose, const MapContext& map,
                         double ego_length, double ego_width,
                         double& d_ref, double& d_sdf, double& d_tl) {
  const EgoCircles circles = ego_circles(pose, ego_length, ego_width);
  d_ref = distance_to_reference(circles, map.reference_lanes);
  d_sdf = sdf_static(circles, map.static_obstacles);
  d_tl = distance_to_traffic_light(circles, map.traffic_lights, pose.direction());
}

inline DistanceMatrix measure(const std::vector<TrajectorySample>& trajectories,
                              const MapContext& map,
                              double ego_length = kEgoLength,
                              double ego_width = kEgoWidth) {
  const int n = static_cast<int>(trajectories.size());
  const int horizon = n > 0 ? trajectories[0].horizon() : 0;
  DistanceMatrix out(n, horizon);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < horizon; ++t) {
      measure_pose(trajectories[i].states[t].pose(), map, ego_length, ego_width,
                   out.at(i, t, 0), out.at(i, t, 1), out.at(i, t, 2));
    }
  }
  return out;
}

}  // namespace riskmap
