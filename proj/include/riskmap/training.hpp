#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/encoder.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/planner.hpp"
#include "riskmap/predictor.hpp"
#include "riskmap/riskfield.hpp"
#include "riskmap/rng.hpp"
#include "riskmap/scenario.hpp"
#include "riskmap/trajectory.hpp"

namespace riskmap {

// ---------------------------------------------------------------------------
// Loss terms
// ---------------------------------------------------------------------------

inline Eigen::VectorXd softmin(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw ConfigError("softmin: empty input");
  const double shift = values.minCoeff();
  Eigen::VectorXd p = (-(values.array() - shift)).exp();
  return p / p.sum();
}

// Sum of squared per-step speed gaps (gradient is 2 * (v_bar - demo)).
inline double loss_velocity(const Eigen::VectorXd& v_bar,
                            const Eigen::VectorXd& demo_speeds,
                            Eigen::VectorXd* grad = nullptr) {
  if (v_bar.size() != demo_speeds.size())
    throw ConfigError("loss_velocity: length mismatch");
  const Eigen::VectorXd diff = v_bar - demo_speeds;
  if (grad != nullptr) *grad = 2.0 * diff;
  return diff.squaredNorm();
}

// Cross entropy between the cost softmin and the demo-distance softmin.
// Target distribution comes from the distances; log probabilities are floored
// so one runaway cost cannot produce an infinite loss.
inline double loss_selection(const Eigen::VectorXd& costs,
                             const Eigen::VectorXd& distances,
                             Eigen::VectorXd* grad = nullptr) {
  if (costs.size() != distances.size() || costs.size() == 0)
    throw ConfigError("loss_selection: costs and distances must align");
  const Eigen::VectorXd p = softmin(costs);
  const Eigen::VectorXd q = softmin(distances);
  const double shift = costs.minCoeff();
  const double log_norm = std::log((-(costs.array() - shift)).exp().sum());
  double total = 0.0;
  double active_q = 0.0;  // target mass on entries above the log floor
  Eigen::VectorXd floored = Eigen::VectorXd::Zero(costs.size());
  for (int i = 0; i < costs.size(); ++i) {
    const double log_p = -(costs[i] - shift) - log_norm;
    if (log_p > kLogFloor) {
      total += -q[i] * log_p;
      active_q += q[i];
    } else {
      total += -q[i] * kLogFloor;
      floored[i] = 1.0;
    }
  }
  if (grad != nullptr) {
    grad->resize(costs.size());
    for (int j = 0; j < costs.size(); ++j)
      (*grad)[j] = (floored[j] > 0.0 ? 0.0 : q[j]) - p[j] * active_q;
  }
  return total;
}

inline Eigen::VectorXd trajectory_demo_distances(
    const std::vector<TrajectorySample>& samples, const TrajectorySample& demo) {
  Eigen::VectorXd d(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].states.size() != demo.states.size())
      throw ConfigError("trajectory distances: horizon mismatch");
    double s = 0.0;
    for (size_t t = 0; t < demo.states.size(); ++t)
      s += sq(samples[i].states[t].x - demo.states[t].x) +
           sq(samples[i].states[t].y - demo.states[t].y);
    d[static_cast<int>(i)] = std::sqrt(s);
  }
  return d;
}

// Cost gap between the lattice sample nearest to the demo and the demo itself
// (ties on distance resolve to the lowest index). Can be negative.
inline double loss_l2(const Eigen::VectorXd& costs, const Eigen::VectorXd& distances,
                      double demo_cost, int* nearest_out = nullptr) {
  if (costs.size() != distances.size() || costs.size() == 0)
    throw ConfigError("loss_l2: costs and distances must align");
  int nearest = 0;
  for (int i = 1; i < distances.size(); ++i)
    if (distances[i] < distances[nearest]) nearest = i;
  if (nearest_out != nullptr) *nearest_out = nearest;
  return costs[nearest] - demo_cost;
}

// Inverse population variance of the cost set, floored to stay finite when
// every candidate costs the same.
inline double loss_consistency(const Eigen::VectorXd& costs,
                               Eigen::VectorXd* grad = nullptr) {
  const int n = static_cast<int>(costs.size());
  if (n < 2) throw ConfigError("loss_consistency: needs at least 2 costs");
  const double mean = costs.mean();
  const double var = (costs.array() - mean).square().sum() / n;
  constexpr double kEps = 1e-8;
  if (grad != nullptr) {
    grad->resize(n);
    if (var > kEps) {
      for (int j = 0; j < n; ++j)
        (*grad)[j] = -(2.0 / n) * (costs[j] - mean) / sq(var);
    } else {
      grad->setZero();
    }
  }
  return 1.0 / std::max(var, kEps);
}

struct LossMask {
  bool demo_cost = true;
  bool sel = true;
  bool l2 = true;
  bool con = true;
  bool vel = true;

  int enabled() const {
    return static_cast<int>(demo_cost) + sel + l2 + con + vel;
  }
};

// Accepts comma-separated "-term" tokens removing terms from the all-on
// default, e.g. "-demo_cost,-vel". Term names: demo_cost, sel, l2, con, vel.
inline LossMask parse_loss_mask(const std::string& text) {
  LossMask mask;
  if (text.empty()) return mask;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t comma = std::min(text.find(',', pos), text.size());
    const std::string token = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (token.empty()) continue;
    if (token[0] != '-')
      throw ConfigError("loss mask token '" + token + "' must start with '-'");
    const std::string name = token.substr(1);
    if (name == "demo_cost") mask.demo_cost = false;
    else if (name == "sel") mask.sel = false;
    else if (name == "l2") mask.l2 = false;
    else if (name == "con") mask.con = false;
    else if (name == "vel") mask.vel = false;
    else throw ConfigError("unknown loss term '" + name + "'");
    if (pos > text.size()) break;
  }
  if (mask.enabled() == 0) throw ConfigError("loss mask disables every term");
  return mask;
}

struct LossBreakdown {
  double demo_cost = 0.0;
  double l_sel = 0.0;
  double l_l2 = 0.0;
  double l_con = 0.0;
  double l_v = 0.0;
  double total = 0.0;
  LossMask mask;
};

inline double total_loss(LossBreakdown& parts) {
  parts.total = (parts.mask.demo_cost ? parts.demo_cost : 0.0) +
                (parts.mask.sel ? parts.l_sel : 0.0) +
                (parts.mask.l2 ? parts.l_l2 : 0.0) +
                (parts.mask.con ? parts.l_con : 0.0) +
                (parts.mask.vel ? parts.l_v : 0.0);
  return parts.total;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

class AdamW {
 public:
  AdamW(int dim, double lr, double weight_decay = 0.01)
      : lr_(lr), wd_(weight_decay), m_(Eigen::VectorXd::Zero(dim)),
        v_(Eigen::VectorXd::Zero(dim)) {
    if (lr < 0.0) throw ConfigError("learning rate must be >= 0");
  }

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
    v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (int i = 0; i < params.size(); ++i) {
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= lr_ * (mhat / (std::sqrt(vhat) + kEps) + wd_ * params[i]);
    }
  }

  int steps_taken() const { return t_; }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  double wd_;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 8;
  uint64_t seed = 0;
  LossMask mask;
  bool tv = false;
  int count = 100;  // stage-2 lattice sampling count
  ColMode col_mode = ColMode::integrated;
};

// ---------------------------------------------------------------------------
// Stage 1: predictor
// ---------------------------------------------------------------------------

struct Stage1Result {
  PredictorModel model;
  std::vector<double> curve;  // per-epoch mean prediction loss
};

inline Stage1Result train_stage1(const std::vector<Scenario>& scenarios,
                                 const TrainConfig& config) {
  if (scenarios.empty()) throw ConfigError("train_stage1: no scenarios");
  std::vector<std::vector<Eigen::MatrixX2d>> truths(scenarios.size());
  std::vector<size_t> usable;
  for (size_t i = 0; i < scenarios.size(); ++i) {
    for (const auto& agent : scenarios[i].agents) {
      if (static_cast<int>(agent.future_truth.size()) != scenarios[i].horizon())
        throw ConfigError("train_stage1: agent " + std::to_string(agent.id) +
                          " lacks a full future_truth");
      Eigen::MatrixX2d m(agent.future_truth.size(), 2);
      for (size_t t = 0; t < agent.future_truth.size(); ++t) {
        m(static_cast<int>(t), 0) = agent.future_truth[t].x();
        m(static_cast<int>(t), 1) = agent.future_truth[t].y();
      }
      truths[i].push_back(std::move(m));
    }
    if (!truths[i].empty()) usable.push_back(i);
  }
  if (usable.empty()) throw ConfigError("train_stage1: no scenario has agents");

  Stage1Result result;
  Rng rng(config.seed);
  result.model.trunk.randomize(rng, 0.01);

  Eigen::VectorXd params = result.model.trunk.flatten();
  AdamW opt(static_cast<int>(params.size()), config.learning_rate);
  std::vector<size_t> order = usable;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const size_t end = std::min(begin + config.batch_size, order.size());
      MlpHead::Grad grad(result.model.trunk);
      for (size_t k = begin; k < end; ++k) {
        const Scenario& sc = scenarios[order[k]];
        std::vector<AgentPredictTrace> traces;
        const SeqMvnPrediction pred = predict(sc, result.model, &traces);
        PredictionGrad pg(pred);
        const double loss = prediction_loss(pred, truths[order[k]], &pg);
        if (!std::isfinite(loss))
          throw DivergenceError("stage-1 loss is not finite", opt.steps_taken());
        epoch_loss += loss;
        predict_backward(result.model, sc, pred, traces, pg, grad);
      }
      grad.scale(1.0 / static_cast<double>(end - begin));
      const Eigen::VectorXd flat_grad = MlpHead::flatten_grad(grad);
      if (!flat_grad.allFinite())
        throw DivergenceError("stage-1 gradient is not finite", opt.steps_taken());
      opt.step(params, flat_grad);
      result.model.trunk.unflatten(params);
    }
    result.curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Stage 2: risk and cost heads
// ---------------------------------------------------------------------------

// Everything about one scenario that does not change while head parameters
// move: prediction, lattice, raw distances, collision channel, smoothness,
// speeds, and the demo row of the same quantities.
struct Stage2Static {
  Eigen::VectorXd features;
  int horizon = kHorizonSteps;
  DistanceMatrix dist{0, 0};
  std::vector<double> col_sum;            // per sample, time-summed
  std::vector<Eigen::Vector2d> smooth;    // per sample (a, s)
  Eigen::MatrixXd speeds;                 // samples x T
  Eigen::VectorXd demo_distances;         // per sample L2 gap to demo
  DistanceMatrix demo_dist{0, 0};
  double demo_col_sum = 0.0;
  Eigen::Vector2d demo_smooth = Eigen::Vector2d::Zero();
  Eigen::VectorXd demo_speeds;
};

inline Stage2Static precompute_stage2(const Scenario& scenario,
                                      const SeqMvnPrediction& pred,
                                      const std::vector<TrajectorySample>& samples,
                                      ColMode mode = ColMode::integrated) {
  if (samples.empty()) throw ConfigError("stage-2 precompute: no samples");
  Stage2Static st;
  st.features = extract_features(scenario);
  st.horizon = scenario.horizon();
  st.dist = measure(samples, scenario.map);
  const CollisionEvaluator evaluator(pred, mode);
  const int n = static_cast<int>(samples.size());
  st.col_sum.assign(n, 0.0);
  st.smooth.resize(n);
  st.speeds.resize(n, st.horizon);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < st.horizon; ++t) {
      const EgoCircles circles =
          ego_circles(samples[i].states[t].pose(), kEgoLength, kEgoWidth);
      st.col_sum[i] += evaluator.at(circles, t);
      st.speeds(i, t) = samples[i].states[t].speed;
    }
    st.smooth[i] = smoothness_cost(samples[i]);
  }
  const TrajectorySample demo = demo_as_sample(scenario);
  st.demo_dist = measure({demo}, scenario.map);
  st.demo_speeds.resize(st.horizon);
  for (int t = 0; t < st.horizon; ++t) {
    const EgoCircles circles =
        ego_circles(demo.states[t].pose(), kEgoLength, kEgoWidth);
    st.demo_col_sum += evaluator.at(circles, t);
    st.demo_speeds[t] = demo.states[t].speed;
  }
  st.demo_smooth = smoothness_cost(demo);
  st.demo_distances = trajectory_demo_distances(samples, demo);
  return st;
}

namespace detail {

// Cost totals for every sample plus the demo under the given params, reusing
// the precomputed static pieces. Also returns the per-sample velocity gaps.
struct Stage2Costs {
  Eigen::VectorXd totals;
  double demo_total = 0.0;
  Eigen::VectorXd dv;  // per sample mean squared speed gap
  double demo_dv = 0.0;
  StaticRisk risk{0, 0};
  StaticRisk demo_risk{0, 0};
};

inline Stage2Costs stage2_costs(const Stage2Static& st, const RiskParams& params) {
  Stage2Costs c;
  c.risk = map_risk(st.dist, params);
  c.demo_risk = map_risk(st.demo_dist, params);
  const int n = st.dist.samples();
  const int horizon = st.horizon;
  c.totals.resize(n);
  c.dv.resize(n);
  for (int i = 0; i < n; ++i) {
    double risk_sum = 0.0;
    for (int t = 0; t < horizon; ++t)
      risk_sum += c.risk.at(i, t, 0) + c.risk.at(i, t, 1) + c.risk.at(i, t, 2);
    double dv = 0.0;
    for (int t = 0; t < horizon; ++t) dv += sq(params.v_bar[t] - st.speeds(i, t));
    dv /= horizon;
    c.dv[i] = dv;
    c.totals[i] = risk_sum + st.col_sum[i] + st.smooth[i].dot(params.w_smooth) +
                  params.w_d * dv;
  }
  double demo_risk_sum = 0.0;
  for (int t = 0; t < horizon; ++t)
    demo_risk_sum +=
        c.demo_risk.at(0, t, 0) + c.demo_risk.at(0, t, 1) + c.demo_risk.at(0, t, 2);
  double demo_dv = 0.0;
  for (int t = 0; t < horizon; ++t) demo_dv += sq(params.v_bar[t] - st.demo_speeds[t]);
  demo_dv /= horizon;
  c.demo_dv = demo_dv;
  c.demo_total = demo_risk_sum + st.demo_col_sum + st.demo_smooth.dot(params.w_smooth) +
                 params.w_d * demo_dv;
  return c;
}

}  // namespace detail

// Full imitation loss for one scenario; optionally accumulates head gradients.
inline double stage2_loss(const Stage2Static& st, const PlannerHeads& heads,
                          const LossMask& mask, LossBreakdown* parts_out = nullptr,
                          PlannerHeadsGrad* grad = nullptr) {
  HeadsTrace trace;
  const RiskParams params =
      forward_heads(heads, st.features, st.horizon, grad ? &trace : nullptr);
  const detail::Stage2Costs costs = detail::stage2_costs(st, params);
  const int n = static_cast<int>(costs.totals.size());

  LossBreakdown parts;
  parts.mask = mask;
  Eigen::VectorXd d_costs = Eigen::VectorXd::Zero(n);
  double d_demo = 0.0;
  Eigen::VectorXd d_vbar_direct = Eigen::VectorXd::Zero(st.horizon);

  parts.demo_cost = costs.demo_total;
  if (mask.demo_cost) d_demo += 1.0;

  Eigen::VectorXd sel_grad;
  parts.l_sel = loss_selection(costs.totals, st.demo_distances,
                               grad ? &sel_grad : nullptr);
  if (mask.sel && grad) d_costs += sel_grad;

  int nearest = 0;
  parts.l_l2 = loss_l2(costs.totals, st.demo_distances, costs.demo_total, &nearest);
  if (mask.l2) {
    d_costs[nearest] += 1.0;
    d_demo += -1.0;
  }

  Eigen::VectorXd con_grad;
  parts.l_con = loss_consistency(costs.totals, grad ? &con_grad : nullptr);
  if (mask.con && grad) d_costs += con_grad;

  Eigen::VectorXd vel_grad;
  parts.l_v = loss_velocity(params.v_bar, st.demo_speeds, grad ? &vel_grad : nullptr);
  if (mask.vel && grad) d_vbar_direct += vel_grad;

  const double total = total_loss(parts);
  if (parts_out != nullptr) *parts_out = parts;
  if (grad == nullptr) return total;

  RiskParamsGrad pg(params);
  // Static risk channels: upstream for point (i, t, c) is d(loss)/d(cost_i).
  StaticRisk up(st.dist.samples(), st.dist.horizon());
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < st.horizon; ++t)
      for (int c = 0; c < 3; ++c) up.at(i, t, c) = d_costs[i];
  map_risk_backward(st.dist, params, up, pg);
  if (d_demo != 0.0) {
    StaticRisk up_demo(1, st.horizon);
    for (int t = 0; t < st.horizon; ++t)
      for (int c = 0; c < 3; ++c) up_demo.at(0, t, c) = d_demo;
    map_risk_backward(st.demo_dist, params, up_demo, pg);
  }
  for (int i = 0; i < n; ++i) {
    pg.d_w_smooth += d_costs[i] * st.smooth[i];
    pg.d_w_d += d_costs[i] * costs.dv[i];
    for (int t = 0; t < st.horizon; ++t)
      pg.d_v_bar[t] += d_costs[i] * params.w_d * 2.0 *
                       (params.v_bar[t] - st.speeds(i, t)) / st.horizon;
  }
  pg.d_w_smooth += d_demo * st.demo_smooth;
  pg.d_w_d += d_demo * costs.demo_dv;
  for (int t = 0; t < st.horizon; ++t)
    pg.d_v_bar[t] += d_demo * params.w_d * 2.0 *
                     (params.v_bar[t] - st.demo_speeds[t]) / st.horizon;
  pg.d_v_bar += d_vbar_direct;
  backward_heads(heads, trace, pg, *grad);
  return total;
}

inline PlannerHeads init_planner_heads(bool tv, uint64_t seed, int horizon = kHorizonSteps) {
  PlannerHeads heads(tv, horizon);
  Rng rng(seed);
  heads.randomize(rng, 0.1);
  // Start lambda at exactly -0.5 (zeroed output layer) so risk decays with
  // distance everywhere and far sentinels map to ~zero risk; a random sign on
  // any lambda output would put e^{lambda * sentinel} at the exponent cap and
  // training would begin on a cliff.
  heads.lambda.weights.back().setZero();
  heads.lambda.biases.back().setConstant(-0.5);
  // Bias the speed target to a typical demo speed so the first training epochs
  // refine it instead of climbing from softplus(0).
  heads.v_bar.biases.back().setConstant(8.0);
  return heads;
}

struct Stage2Result {
  PlannerHeads heads;
  std::vector<LossBreakdown> curve;  // per-epoch means
};

inline Stage2Result train_stage2(const std::vector<Scenario>& scenarios,
                                 const PredictorModel& predictor,
                                 const TrainConfig& config) {
  if (scenarios.empty()) throw ConfigError("train_stage2: no scenarios");
  std::vector<Stage2Static> statics;
  statics.reserve(scenarios.size());
  for (const auto& sc : scenarios) {
    const SeqMvnPrediction pred = predict(sc, predictor);
    const auto samples =
        sample_lattice(sc.ego_now(), sc.map.reference_lanes, config.count, sc.horizon(), sc.dt);
    statics.push_back(precompute_stage2(sc, pred, samples, config.col_mode));
  }

  Stage2Result result;
  result.heads = init_planner_heads(config.tv, config.seed,
                                    scenarios.front().horizon());
  Rng rng(config.seed + 1);
  Eigen::VectorXd params = result.heads.flatten();
  AdamW opt(static_cast<int>(params.size()), config.learning_rate);
  std::vector<size_t> order(scenarios.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    LossBreakdown epoch_mean;
    epoch_mean.mask = config.mask;
    for (size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const size_t end = std::min(begin + config.batch_size, order.size());
      PlannerHeadsGrad grad(result.heads);
      for (size_t k = begin; k < end; ++k) {
        LossBreakdown parts;
        const double loss =
            stage2_loss(statics[order[k]], result.heads, config.mask, &parts, &grad);
        if (!std::isfinite(loss))
          throw DivergenceError("stage-2 loss is not finite", opt.steps_taken());
        epoch_mean.demo_cost += parts.demo_cost;
        epoch_mean.l_sel += parts.l_sel;
        epoch_mean.l_l2 += parts.l_l2;
        epoch_mean.l_con += parts.l_con;
        epoch_mean.l_v += parts.l_v;
        epoch_mean.total += parts.total;
      }
      grad.scale(1.0 / static_cast<double>(end - begin));
      Eigen::VectorXd flat_grad = grad.flatten();
      if (!flat_grad.allFinite())
        throw DivergenceError("stage-2 gradient is not finite", opt.steps_taken());
      // Clip the batch gradient: a capped-exponent risk spike (a sentinel
      // distance meeting a transiently positive lambda) would otherwise
      // poison the optimizer's second-moment estimate and freeze those
      // parameters for the rest of the run.
      const double norm = flat_grad.norm();
      if (norm > kGradClipNorm) flat_grad *= kGradClipNorm / norm;
      opt.step(params, flat_grad);
      result.heads.unflatten(params);
    }
    const double inv = 1.0 / static_cast<double>(order.size());
    epoch_mean.demo_cost *= inv;
    epoch_mean.l_sel *= inv;
    epoch_mean.l_l2 *= inv;
    epoch_mean.l_con *= inv;
    epoch_mean.l_v *= inv;
    epoch_mean.total *= inv;
    result.curve.push_back(epoch_mean);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  int worst_index = -1;
  bool pass = true;
};

// fn(params, grad_or_null) -> loss. Central differences with step 1e-5;
// relative error denominators are floored at 1e-3 so near-zero entries do not
// dominate the report.
inline GradCheckReport gradient_check(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& fn,
    const Eigen::VectorXd& params, double tolerance) {
  constexpr double kStep = 1e-5;
  Eigen::VectorXd analytic(params.size());
  fn(params, &analytic);
  GradCheckReport report;
  Eigen::VectorXd probe = params;
  for (int i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + kStep;
    const double up = fn(probe, nullptr);
    probe[i] = params[i] - kStep;
    const double down = fn(probe, nullptr);
    probe[i] = params[i];
    const double fd = (up - down) / (2.0 * kStep);
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-3});
    const double rel = std::abs(analytic[i] - fd) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
    }
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace riskmap
