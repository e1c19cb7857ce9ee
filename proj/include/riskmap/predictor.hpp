#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/mlp.hpp"
#include "riskmap/scenario.hpp"

namespace riskmap {

inline constexpr int kModals = 3;
inline constexpr int kAgentFeatureDim = 8;

// One bivariate Gaussian: mean plus regularized scale/correlation.
struct MvnTuple {
  double mu_x = 0.0;
  double mu_y = 0.0;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double rho = 0.0;
};

inline MvnTuple decode_regularize(const Eigen::Matrix<double, 5, 1>& raw) {
  MvnTuple t;
  t.mu_x = raw[0];
  t.mu_y = raw[1];
  t.sigma_x = std::exp(raw[2]);
  t.sigma_y = std::exp(raw[3]);
  // tanh rounds to exactly +-1 for |raw| > ~19; keep the covariance invertible.
  constexpr double kRhoLimit = 1.0 - 1e-9;
  t.rho = std::clamp(std::tanh(raw[4]), -kRhoLimit, kRhoLimit);
  return t;
}

inline double log_mvn_density(double x, double y, const MvnTuple& t) {
  const double dx = x - t.mu_x;
  const double dy = y - t.mu_y;
  const double q = 1.0 - t.rho * t.rho;
  const double z = sq(dx / t.sigma_x) - 2.0 * t.rho * dx * dy / (t.sigma_x * t.sigma_y) +
                   sq(dy / t.sigma_y);
  return -std::log(2.0 * M_PI) - std::log(t.sigma_x) - std::log(t.sigma_y) -
         0.5 * std::log(q) - z / (2.0 * q);
}

inline double mvn_density(double x, double y, const MvnTuple& t) {
  return std::exp(log_mvn_density(x, y, t));
}

// Multi-modal per-timestep Gaussians with per-agent modal probabilities.
struct SeqMvnPrediction {
  int num_agents = 0;
  int modals = kModals;
  int horizon = kHorizonSteps;
  std::vector<MvnTuple> tuples;  // [(agent * modals + modal) * horizon + t]
  Eigen::MatrixXd cls;           // agents x modals, rows sum to 1

  SeqMvnPrediction() = default;
  SeqMvnPrediction(int agents, int m, int t)
      : num_agents(agents), modals(m), horizon(t),
        tuples(static_cast<size_t>(agents) * m * t),
        cls(Eigen::MatrixXd::Constant(agents, m, agents > 0 ? 1.0 / m : 0.0)) {}

  size_t index(int a, int m, int t) const {
    return (static_cast<size_t>(a) * modals + m) * horizon + t;
  }
  const MvnTuple& at(int a, int m, int t) const { return tuples[index(a, m, t)]; }
  MvnTuple& at(int a, int m, int t) { return tuples[index(a, m, t)]; }
};

inline double weighted_likelihood(const Eigen::Vector2d& point,
                                  const SeqMvnPrediction& pred, int agent, int modal,
                                  int t) {
  if (agent < 0 || agent >= pred.num_agents || modal < 0 || modal >= pred.modals ||
      t < 0 || t >= pred.horizon)
    throw std::out_of_range("weighted_likelihood: index out of range");
  return pred.cls(agent, modal) * mvn_density(point.x(), point.y(), pred.at(agent, modal, t));
}

// point_t = mu_t + L_t * noise_t with L the lower Cholesky factor of the
// covariance; noise rows are standard-normal draws owned by the caller.
inline Eigen::MatrixX2d sample_reparameterized(const SeqMvnPrediction& pred, int agent,
                                               int modal,
                                               const Eigen::MatrixX2d& noise) {
  Eigen::MatrixX2d out(noise.rows(), 2);
  for (int t = 0; t < noise.rows(); ++t) {
    const MvnTuple& tp = pred.at(agent, modal, t);
    const double l00 = tp.sigma_x;
    const double l10 = tp.rho * tp.sigma_y;
    const double l11 = tp.sigma_y * std::sqrt(1.0 - tp.rho * tp.rho);
    out(t, 0) = tp.mu_x + l00 * noise(t, 0);
    out(t, 1) = tp.mu_y + l10 * noise(t, 0) + l11 * noise(t, 1);
  }
  return out;
}

// Gradient of the prediction loss wrt every tuple field and cls entry.
struct PredictionGrad {
  std::vector<std::array<double, 5>> d_tuples;  // (mu_x, mu_y, sigma_x, sigma_y, rho)
  Eigen::MatrixXd d_cls;

  explicit PredictionGrad(const SeqMvnPrediction& pred)
      : d_tuples(pred.tuples.size(), {0, 0, 0, 0, 0}),
        d_cls(Eigen::MatrixXd::Zero(pred.cls.rows(), pred.cls.cols())) {}
};

// Negative log likelihood over all modals plus a classification term pushing
// probability onto the modal closest to the truth; mean over agents. Per-point
// log densities are floored at kLogFloor so degenerate tuples stay finite.
inline double prediction_loss(const SeqMvnPrediction& pred,
                              const std::vector<Eigen::MatrixX2d>& truth,
                              PredictionGrad* grad = nullptr) {
  if (static_cast<int>(truth.size()) != pred.num_agents)
    throw ConfigError("prediction_loss: truth covers " + std::to_string(truth.size()) +
                      " agents, prediction has " + std::to_string(pred.num_agents));
  if (pred.num_agents == 0) return 0.0;
  const double inv_n = 1.0 / pred.num_agents;
  double total = 0.0;
  for (int a = 0; a < pred.num_agents; ++a) {
    if (truth[a].rows() != pred.horizon)
      throw ConfigError("prediction_loss: truth for agent " + std::to_string(a) +
                        " has " + std::to_string(truth[a].rows()) + " steps, expected " +
                        std::to_string(pred.horizon));
    int best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (int m = 0; m < pred.modals; ++m) {
      double s = 0.0;
      for (int t = 0; t < pred.horizon; ++t) {
        const MvnTuple& tp = pred.at(a, m, t);
        s += sq(tp.mu_x - truth[a](t, 0)) + sq(tp.mu_y - truth[a](t, 1));
      }
      if (s < best_sq) {
        best_sq = s;
        best = m;
      }
    }
    for (int m = 0; m < pred.modals; ++m) {
      const double c = pred.cls(a, m);
      for (int t = 0; t < pred.horizon; ++t) {
        const MvnTuple& tp = pred.at(a, m, t);
        const double logn = log_mvn_density(truth[a](t, 0), truth[a](t, 1), tp);
        total += -(std::log(c) + std::max(logn, kLogFloor)) * inv_n;
        if (grad != nullptr) {
          grad->d_cls(a, m) += -inv_n / c;
          if (logn > kLogFloor) {
            const double dx = truth[a](t, 0) - tp.mu_x;
            const double dy = truth[a](t, 1) - tp.mu_y;
            const double q = 1.0 - tp.rho * tp.rho;
            const double sx = tp.sigma_x, sy = tp.sigma_y;
            const double z =
                sq(dx / sx) - 2.0 * tp.rho * dx * dy / (sx * sy) + sq(dy / sy);
            auto& g = grad->d_tuples[pred.index(a, m, t)];
            // d(-logN)/d(theta); dx is truth minus mean.
            g[0] += -inv_n * (dx / sq(sx) - tp.rho * dy / (sx * sy)) / q;
            g[1] += -inv_n * (dy / sq(sy) - tp.rho * dx / (sx * sy)) / q;
            g[2] += -inv_n * (-1.0 / sx + (sq(dx) / (sx * sx * sx) -
                                           tp.rho * dx * dy / (sq(sx) * sy)) / q);
            g[3] += -inv_n * (-1.0 / sy + (sq(dy) / (sy * sy * sy) -
                                           tp.rho * dx * dy / (sq(sy) * sx)) / q);
            g[4] += -inv_n * (tp.rho / q + dx * dy / (sx * sy * q) -
                              z * tp.rho / sq(q));
          }
        }
      }
    }
    total += -std::log(pred.cls(a, best)) * inv_n;
    if (grad != nullptr) grad->d_cls(a, best) += -inv_n / pred.cls(a, best);
  }
  return total;
}

// Per-agent inputs to the trunk, expressed in the agent's own frame so the
// predictor is placement-invariant.
inline Eigen::VectorXd agent_features(const AgentTrack& track, double dt) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kAgentFeatureDim);
  const AgentState& now = track.current();
  f[0] = now.speed / kMaxSpeed;
  double mean_speed = 0.0;
  for (const auto& s : track.history) mean_speed += s.speed;
  if (!track.history.empty()) mean_speed /= static_cast<double>(track.history.size());
  if (track.history.size() >= 2) {
    const AgentState& prev = track.history[track.history.size() - 2];
    f[1] = wrap_angle(now.heading - prev.heading) / dt;
    f[2] = (now.speed - prev.speed) / dt / 5.0;
    f[4] = wrap_angle(now.heading - track.history.front().heading);
  }
  f[3] = mean_speed / kMaxSpeed;
  f[5] = now.length / 10.0;
  f[6] = now.width / 3.0;
  f[7] = 1.0;
  return f;
}

// Trunk MLP: agent features -> raw modal tuples + cls logits. Means come from
// a constant-velocity rollout corrected through a bounded per-axis velocity
// term, so every mean sequence stays within v_max reach of the current state.
struct PredictorModel {
  MlpHead trunk;
  int modals = kModals;
  int horizon = kHorizonSteps;

  PredictorModel()
      : trunk(kAgentFeatureDim, {32, 32},
              kModals * kHorizonSteps * 5 + kModals, Transform::identity) {}

  int raw_dim() const { return modals * horizon * 5 + modals; }
};

struct AgentPredictTrace {
  MlpHead::Trace trace;
  Eigen::MatrixXd vlx, vly;  // modals x horizon local-frame velocities
  double heading = 0.0;
};

namespace detail {

inline double velocity_bound() { return kMaxSpeed / std::sqrt(2.0); }

inline double clamped_atanh(double x) {
  const double c = std::clamp(x, -1.0 + 1e-9, 1.0 - 1e-9);
  return std::atanh(c);
}

}  // namespace detail

inline SeqMvnPrediction predict(const Scenario& scenario, const PredictorModel& model,
                                std::vector<AgentPredictTrace>* traces = nullptr) {
  const int n = static_cast<int>(scenario.agents.size());
  SeqMvnPrediction pred(n, model.modals, model.horizon);
  if (traces != nullptr) traces->assign(n, AgentPredictTrace{});
  const double b = detail::velocity_bound();
  for (int a = 0; a < n; ++a) {
    const AgentTrack& track = scenario.agents[a];
    const AgentState& now = track.current();
    const Eigen::VectorXd feats = agent_features(track, scenario.dt);
    MlpHead::Trace trace = model.trunk.forward_trace(feats);
    const Eigen::VectorXd& raw = trace.raw_out;
    const double ch = std::cos(now.heading), sh = std::sin(now.heading);
    const double anchor_x = detail::clamped_atanh(now.speed / b);
    Eigen::MatrixXd vlx(model.modals, model.horizon), vly(model.modals, model.horizon);
    for (int m = 0; m < model.modals; ++m) {
      double px = now.x, py = now.y;
      for (int t = 0; t < model.horizon; ++t) {
        const int base = (m * model.horizon + t) * 5;
        const double vx = b * std::tanh(anchor_x + raw[base + 0]);
        const double vy = b * std::tanh(raw[base + 1]);
        vlx(m, t) = vx;
        vly(m, t) = vy;
        px += scenario.dt * (ch * vx - sh * vy);
        py += scenario.dt * (sh * vx + ch * vy);
        MvnTuple& tp = pred.at(a, m, t);
        tp.mu_x = px;
        tp.mu_y = py;
        tp.sigma_x = std::exp(raw[base + 2]);
        tp.sigma_y = std::exp(raw[base + 3]);
        tp.rho = std::tanh(raw[base + 4]);
      }
    }
    Eigen::VectorXd logits = raw.segment(model.modals * model.horizon * 5, model.modals);
    const double mx = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - mx).exp();
    pred.cls.row(a) = (e / e.sum()).transpose();
    if (traces != nullptr) {
      (*traces)[a].trace = std::move(trace);
      (*traces)[a].vlx = std::move(vlx);
      (*traces)[a].vly = std::move(vly);
      (*traces)[a].heading = now.heading;
    }
  }
  return pred;
}

// Chains PredictionGrad back through the mean rollout, the sigma/rho
// regularizers, the cls softmax, and the trunk layers.
inline void predict_backward(const PredictorModel& model, const Scenario& scenario,
                             const SeqMvnPrediction& pred,
                             const std::vector<AgentPredictTrace>& traces,
                             const PredictionGrad& up, MlpHead::Grad& grad) {
  const double b = detail::velocity_bound();
  for (int a = 0; a < pred.num_agents; ++a) {
    const AgentPredictTrace& tr = traces[a];
    const double ch = std::cos(tr.heading), sh = std::sin(tr.heading);
    Eigen::VectorXd d_raw = Eigen::VectorXd::Zero(model.raw_dim());
    for (int m = 0; m < model.modals; ++m) {
      double sum_dx = 0.0, sum_dy = 0.0;  // suffix sums of mean gradients
      for (int t = model.horizon - 1; t >= 0; --t) {
        const auto& g = up.d_tuples[pred.index(a, m, t)];
        sum_dx += g[0];
        sum_dy += g[1];
        const int base = (m * model.horizon + t) * 5;
        const double dvx = scenario.dt * (ch * sum_dx + sh * sum_dy);
        const double dvy = scenario.dt * (-sh * sum_dx + ch * sum_dy);
        d_raw[base + 0] = dvx * (b - sq(tr.vlx(m, t)) / b);
        d_raw[base + 1] = dvy * (b - sq(tr.vly(m, t)) / b);
        const MvnTuple& tp = pred.at(a, m, t);
        d_raw[base + 2] = g[2] * tp.sigma_x;
        d_raw[base + 3] = g[3] * tp.sigma_y;
        d_raw[base + 4] = g[4] * (1.0 - sq(tp.rho));
      }
    }
    const int off = model.modals * model.horizon * 5;
    double dot = 0.0;
    for (int m = 0; m < model.modals; ++m)
      dot += up.d_cls(a, m) * pred.cls(a, m);
    for (int m = 0; m < model.modals; ++m)
      d_raw[off + m] = pred.cls(a, m) * (up.d_cls(a, m) - dot);
    model.trunk.backward(tr.trace, d_raw, grad);
  }
}

}  // namespace riskmap
