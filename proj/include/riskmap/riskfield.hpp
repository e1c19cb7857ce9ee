#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/encoder.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/geometry.hpp"
#include "riskmap/predictor.hpp"
#include "riskmap/trajectory.hpp"

namespace riskmap {

// Channel order: risk_ref, risk_sdf, risk_tl, risk_col.
using RiskMapValues = PointGrid<4>;
using StaticRisk = PointGrid<3>;

enum class ColMode { density, integrated, max };

inline const char* to_string(ColMode m) {
  switch (m) {
    case ColMode::density: return "density";
    case ColMode::max: return "max";
    default: return "integrated";
  }
}

inline ColMode col_mode_from_string(const std::string& s) {
  if (s == "density") return ColMode::density;
  if (s == "integrated") return ColMode::integrated;
  if (s == "max") return ColMode::max;
  throw ConfigError("unknown col_mode '" + s + "'");
}

// Exponential risk shaping: risk = beta * exp(lambda * distance), exponent
// capped so far-away sentinels with positive lambda saturate instead of
// overflowing.
inline StaticRisk map_risk(const DistanceMatrix& d, const RiskParams& params) {
  StaticRisk risk(d.samples(), d.horizon());
  for (int i = 0; i < d.samples(); ++i)
    for (int t = 0; t < d.horizon(); ++t)
      for (int c = 0; c < 3; ++c) {
        const double e = std::min(params.lambda_at(c, t) * d.at(i, t, c), kRiskExpCap);
        risk.at(i, t, c) = params.beta_at(c, t) * std::exp(e);
      }
  return risk;
}

// Accumulates d(loss)/d(beta, lambda) given upstream d(loss)/d(risk value).
// Where the exponent cap is active the lambda path is flat.
inline void map_risk_backward(const DistanceMatrix& d, const RiskParams& params,
                              const StaticRisk& upstream, RiskParamsGrad& grad) {
  const bool tv = params.beta.cols() > 1;
  for (int i = 0; i < d.samples(); ++i)
    for (int t = 0; t < d.horizon(); ++t)
      for (int c = 0; c < 3; ++c) {
        const int tb = tv ? t : 0;
        const double up = upstream.at(i, t, c);
        if (up == 0.0) continue;
        const double dist = d.at(i, t, c);
        const double e = params.lambda_at(c, t) * dist;
        if (e < kRiskExpCap) {
          const double ex = std::exp(e);
          grad.d_beta(c, tb) += up * ex;
          grad.d_lambda(c, tb) += up * params.beta_at(c, t) * dist * ex;
        } else {
          grad.d_beta(c, tb) += up * std::exp(kRiskExpCap);
        }
      }
}

namespace detail {

struct GaussComponent {
  double mu_x, mu_y;
  double a, b, c;      // inverse-covariance quadratic form coefficients
  double weight;       // cls / (2 pi sx sy sqrt(1 - rho^2))
  double skip_sq;      // squared center distance beyond which density ~ 0
};

inline GaussComponent make_component(const MvnTuple& tp, double cls) {
  GaussComponent g;
  g.mu_x = tp.mu_x;
  g.mu_y = tp.mu_y;
  const double q = 1.0 - tp.rho * tp.rho;
  g.a = 1.0 / (q * sq(tp.sigma_x));
  g.b = -tp.rho / (q * tp.sigma_x * tp.sigma_y);
  g.c = 1.0 / (q * sq(tp.sigma_y));
  g.weight = cls / (2.0 * M_PI * tp.sigma_x * tp.sigma_y * std::sqrt(q));
  g.skip_sq = 36.0 * (sq(tp.sigma_x) + sq(tp.sigma_y));
  return g;
}

inline double component_density(const GaussComponent& g, double x, double y) {
  const double dx = x - g.mu_x;
  const double dy = y - g.mu_y;
  if (dx * dx + dy * dy > g.skip_sq) return 0.0;
  return g.weight * std::exp(-0.5 * (g.a * dx * dx + 2.0 * g.b * dx * dy + g.c * dy * dy));
}

}  // namespace detail

// Precomputed mixture components per timestep for the planner hot path.
class CollisionEvaluator {
 public:
  CollisionEvaluator() = default;

  CollisionEvaluator(const SeqMvnPrediction& pred, ColMode mode)
      : mode_(mode), horizon_(pred.horizon) {
    comps_.resize(static_cast<size_t>(pred.horizon));
    for (int t = 0; t < pred.horizon; ++t) {
      auto& slot = comps_[t];
      slot.reserve(static_cast<size_t>(pred.num_agents) * pred.modals);
      for (int a = 0; a < pred.num_agents; ++a)
        for (int m = 0; m < pred.modals; ++m)
          slot.push_back(detail::make_component(pred.at(a, m, t), pred.cls(a, m)));
    }
  }

  double at(const EgoCircles& circles, int t) const {
    if (t < 0 || t >= horizon_) throw std::out_of_range("collision risk: t out of range");
    const auto& slot = comps_[t];
    double value = 0.0;
    for (const auto& circle : circles) {
      double density = 0.0;
      for (const auto& g : slot)
        density += detail::component_density(g, circle.center.x(), circle.center.y());
      const double area = M_PI * sq(circle.radius);
      switch (mode_) {
        case ColMode::density: value += density; break;
        case ColMode::integrated: value += density * area; break;
        case ColMode::max: value = std::max(value, density * area); break;
      }
    }
    return std::clamp(value, 0.0, 1.0);
  }

 private:
  ColMode mode_ = ColMode::integrated;
  int horizon_ = 0;
  std::vector<std::vector<detail::GaussComponent>> comps_;
};

inline double collision_risk(const EgoCircles& circles, int t,
                             const SeqMvnPrediction& pred,
                             ColMode mode = ColMode::integrated) {
  return CollisionEvaluator(pred, mode).at(circles, t);
}

// Full 4-channel field on every trajectory point: mapped static distances
// plus dynamic collision risk.
inline RiskMapValues build_riskmap(const std::vector<TrajectorySample>& trajectories,
                                   const Scenario& scenario,
                                   const SeqMvnPrediction& pred,
                                   const RiskParams& params,
                                   ColMode mode = ColMode::integrated,
                                   const DistanceMatrix* distances = nullptr) {
  DistanceMatrix local(0, 0);
  if (distances == nullptr) {
    local = measure(trajectories, scenario.map);
    distances = &local;
  }
  const StaticRisk static_risk = map_risk(*distances, params);
  const int n = static_cast<int>(trajectories.size());
  const int steps = n > 0 ? static_cast<int>(trajectories[0].states.size()) : 0;
  RiskMapValues out(n, steps);
  const CollisionEvaluator evaluator(pred, mode);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < steps; ++t) {
      for (int c = 0; c < 3; ++c) out.at(i, t, c) = static_risk.at(i, t, c);
      const EgoCircles circles =
          ego_circles(trajectories[i].states[t].pose(), kEgoLength, kEgoWidth);
      out.at(i, t, 3) = evaluator.at(circles, t);
    }
  return out;
}

}  // namespace riskmap
