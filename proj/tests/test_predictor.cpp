#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "riskmap/predictor.hpp"
#include "riskmap/rng.hpp"
#include "riskmap/training.hpp"
#include "test_support.hpp"

using namespace riskmap;
using Catch::Approx;

namespace {

MvnTuple tuple(double mx, double my, double sx, double sy, double rho) {
  MvnTuple t;
  t.mu_x = mx;
  t.mu_y = my;
  t.sigma_x = sx;
  t.sigma_y = sy;
  t.rho = rho;
  return t;
}

MvnTuple random_tuple(Rng& rng) {
  return tuple(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
               std::exp(rng.uniform(-1.0, 1.0)), std::exp(rng.uniform(-1.0, 1.0)),
               std::tanh(rng.normal(0.0, 0.7)));
}

}  // namespace

TEST_CASE("tuple regularization keeps parameters legal", "[predictor]") {
  Eigen::Matrix<double, 5, 1> raw;
  raw << 1.0, -2.0, 0.0, 0.0, 0.0;
  const MvnTuple t = decode_regularize(raw);
  CHECK(t.mu_x == Approx(1.0));
  CHECK(t.sigma_x == Approx(1.0));
  CHECK(t.sigma_y == Approx(1.0));
  CHECK(t.rho == Approx(0.0));
  raw[4] = 100.0;
  CHECK(decode_regularize(raw).rho < 1.0);
  raw[2] = -3.0;
  CHECK(decode_regularize(raw).sigma_x == Approx(std::exp(-3.0)));
}

TEST_CASE("density closed forms", "[predictor]") {
  CHECK(mvn_density(0.0, 0.0, tuple(0, 0, 1, 1, 0)) == Approx(1.0 / (2.0 * M_PI)));
  CHECK(mvn_density(0.0, 0.0, tuple(0, 0, 2, 1, 0)) == Approx(1.0 / (4.0 * M_PI)));
  CHECK(mvn_density(1.0, 0.0, tuple(0, 0, 1, 1, 0)) ==
        Approx(std::exp(-0.5) / (2.0 * M_PI)));
}

TEST_CASE("density integrates to one on a 6-sigma grid", "[predictor][oracle]") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const MvnTuple t = random_tuple(rng);
    const int n = 301;
    const double x0 = t.mu_x - 6.0 * t.sigma_x, x1 = t.mu_x + 6.0 * t.sigma_x;
    const double y0 = t.mu_y - 6.0 * t.sigma_y, y1 = t.mu_y + 6.0 * t.sigma_y;
    const double hx = (x1 - x0) / n, hy = (y1 - y0) / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        total += mvn_density(x0 + (i + 0.5) * hx, y0 + (j + 0.5) * hy, t);
    total *= hx * hy;
    CHECK(total == Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("weighted likelihood scales linearly in cls", "[predictor]") {
  SeqMvnPrediction pred(1, 2, 5);
  for (int m = 0; m < 2; ++m)
    for (int t = 0; t < 5; ++t) pred.at(0, m, t) = tuple(0, 0, 1, 1, 0);
  pred.cls(0, 0) = 1.0;
  pred.cls(0, 1) = 0.0;
  CHECK(weighted_likelihood({0, 0}, pred, 0, 0, 0) == Approx(1.0 / (2.0 * M_PI)));
  CHECK(weighted_likelihood({3, 3}, pred, 0, 1, 0) == Approx(0.0));
  pred.cls(0, 0) = 0.5;
  CHECK(weighted_likelihood({0, 0}, pred, 0, 0, 0) == Approx(0.0795775).epsilon(1e-5));
  CHECK_THROWS_AS(weighted_likelihood({0, 0}, pred, 0, 2, 0), std::out_of_range);
  CHECK_THROWS_AS(weighted_likelihood({0, 0}, pred, 1, 0, 0), std::out_of_range);
}

TEST_CASE("reparameterized sampling", "[predictor]") {
  SeqMvnPrediction pred(1, 1, 3);
  pred.at(0, 0, 0) = tuple(1, 2, 1, 1, 0);
  pred.at(0, 0, 1) = tuple(3, 4, 2, 1, 0.5);
  pred.at(0, 0, 2) = tuple(5, 6, 1, 3, -0.2);

  SECTION("zero noise returns the means") {
    const Eigen::MatrixX2d out =
        sample_reparameterized(pred, 0, 0, Eigen::MatrixX2d::Zero(3, 2));
    CHECK(out(0, 0) == Approx(1.0));
    CHECK(out(1, 1) == Approx(4.0));
    CHECK(out(2, 0) == Approx(5.0));
  }
  SECTION("unit x-noise shifts by sigma_x via the Cholesky factor") {
    Eigen::MatrixX2d noise = Eigen::MatrixX2d::Zero(3, 2);
    noise(0, 0) = 1.0;
    const Eigen::MatrixX2d out = sample_reparameterized(pred, 0, 0, noise);
    CHECK(out(0, 0) == Approx(2.0));
    CHECK(out(0, 1) == Approx(2.0));  // rho = 0: y unaffected
  }
  SECTION("sample mean and covariance match the tuple") {
    Rng rng(17);
    const int n = 100000;
    const MvnTuple& t = pred.at(0, 0, 1);
    double mx = 0, my = 0, vxx = 0, vyy = 0, vxy = 0;
    for (int i = 0; i < n; ++i) {
      Eigen::MatrixX2d noise(3, 2);
      for (int r = 0; r < 3; ++r) {
        noise(r, 0) = rng.normal();
        noise(r, 1) = rng.normal();
      }
      const Eigen::MatrixX2d out = sample_reparameterized(pred, 0, 0, noise);
      mx += out(1, 0);
      my += out(1, 1);
      vxx += sq(out(1, 0) - t.mu_x);
      vyy += sq(out(1, 1) - t.mu_y);
      vxy += (out(1, 0) - t.mu_x) * (out(1, 1) - t.mu_y);
    }
    const double bound = 3.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mx / n - t.mu_x) < 3.0 * t.sigma_x / std::sqrt(double(n)));
    CHECK(std::abs(my / n - t.mu_y) < 3.0 * t.sigma_y / std::sqrt(double(n)));
    CHECK(vxx / n == Approx(sq(t.sigma_x)).epsilon(0.05));
    CHECK(vyy / n == Approx(sq(t.sigma_y)).epsilon(0.05));
    CHECK(vxy / n == Approx(t.rho * t.sigma_x * t.sigma_y).margin(10.0 * bound));
  }
}

TEST_CASE("prediction loss closed form at the mode", "[predictor]") {
  const int T = kHorizonSteps;
  SeqMvnPrediction pred(1, 1, T);
  std::vector<Eigen::MatrixX2d> truth(1, Eigen::MatrixX2d(T, 2));
  for (int t = 0; t < T; ++t) {
    pred.at(0, 0, t) = tuple(0.1 * t, -0.2 * t, 1, 1, 0);
    truth[0](t, 0) = 0.1 * t;
    truth[0](t, 1) = -0.2 * t;
  }
  pred.cls.setOnes();
  CHECK(prediction_loss(pred, truth) == Approx(T * std::log(2.0 * M_PI)));
}

TEST_CASE("prediction loss breaks modal ties to the lowest index", "[predictor]") {
  const int T = 4;
  SeqMvnPrediction pred(1, 2, T);
  std::vector<Eigen::MatrixX2d> truth(1, Eigen::MatrixX2d::Zero(T, 2));
  for (int m = 0; m < 2; ++m)
    for (int t = 0; t < T; ++t) pred.at(0, m, t) = tuple(0, 0, 1, 1, 0);
  pred.cls.setConstant(0.5);
  PredictionGrad grad(pred);
  const double loss = prediction_loss(pred, truth, &grad);
  // Identical modals: only the classification term separates them, and it must
  // hit modal 0. Per-modal NLL terms are symmetric.
  const double per_modal = T * (std::log(2.0) + std::log(2.0 * M_PI));
  CHECK(loss == Approx(2.0 * per_modal + std::log(2.0)));
  CHECK(grad.d_cls(0, 0) == Approx(-(T + 1.0) / 0.5 / 1.0));
  CHECK(grad.d_cls(0, 1) == Approx(-T / 0.5 / 1.0));
}

TEST_CASE("prediction loss gradient matches finite differences", "[predictor][oracle]") {
  const int T = 6, M = 2;
  Rng rng(23);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<Eigen::MatrixX2d> truth(2, Eigen::MatrixX2d(T, 2));
    for (auto& m : truth)
      for (int t = 0; t < T; ++t) {
        m(t, 0) = rng.uniform(-3.0, 3.0);
        m(t, 1) = rng.uniform(-3.0, 3.0);
      }
    // Parameters live in raw (pre-regularization) space so the FD check also
    // covers the exp/tanh decode chain.
    const int dim = 2 * M * T * 5 + 2 * M;
    Eigen::VectorXd params(dim);
    for (int i = 0; i < dim; ++i) params[i] = rng.normal(0.0, 0.5);

    const auto fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
      SeqMvnPrediction pred(2, M, T);
      for (int a = 0; a < 2; ++a) {
        for (int m = 0; m < M; ++m)
          for (int t = 0; t < T; ++t) {
            const int base = ((a * M + m) * T + t) * 5;
            pred.at(a, m, t) = decode_regularize(p.segment<5>(base));
          }
        Eigen::VectorXd logits = p.segment(2 * M * T * 5 + a * M, M);
        const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
        pred.cls.row(a) = (e / e.sum()).transpose();
      }
      if (grad == nullptr) return prediction_loss(pred, truth);
      PredictionGrad pg(pred);
      const double loss = prediction_loss(pred, truth, &pg);
      grad->setZero(dim);
      for (int a = 0; a < 2; ++a) {
        for (int m = 0; m < M; ++m)
          for (int t = 0; t < T; ++t) {
            const int base = ((a * M + m) * T + t) * 5;
            const auto& g = pg.d_tuples[pred.index(a, m, t)];
            const MvnTuple& tp = pred.at(a, m, t);
            (*grad)[base + 0] = g[0];
            (*grad)[base + 1] = g[1];
            (*grad)[base + 2] = g[2] * tp.sigma_x;
            (*grad)[base + 3] = g[3] * tp.sigma_y;
            (*grad)[base + 4] = g[4] * (1.0 - sq(tp.rho));
          }
        double dot = 0.0;
        for (int m = 0; m < M; ++m) dot += pg.d_cls(a, m) * pred.cls(a, m);
        for (int m = 0; m < M; ++m)
          (*grad)[2 * M * T * 5 + a * M + m] =
              pred.cls(a, m) * (pg.d_cls(a, m) - dot);
      }
      return loss;
    };
    const GradCheckReport report = gradient_check(fn, params, 1e-4);
    INFO("trial " << trial << " max rel err " << report.max_rel_err << " at "
                  << report.worst_index);
    CHECK(report.pass);
  }
}

TEST_CASE("trunk prediction respects the speed envelope", "[predictor]") {
  const Scenario s = testsupport::straight_scenario();
  PredictorModel model;
  Rng rng(5);
  model.trunk.randomize(rng, 1.0);  // deliberately wild parameters
  const SeqMvnPrediction pred = predict(s, model);
  REQUIRE(pred.num_agents == 1);
  const AgentState now = s.agents[0].current();
  Vec2 prev{now.x, now.y};
  for (int m = 0; m < pred.modals; ++m) {
    prev = {now.x, now.y};
    for (int t = 0; t < pred.horizon; ++t) {
      const MvnTuple& tp = pred.at(0, m, t);
      const double step = (Vec2{tp.mu_x, tp.mu_y} - prev).norm();
      CHECK(step <= kMaxSpeed * s.dt + 1e-9);
      prev = {tp.mu_x, tp.mu_y};
    }
  }
  const Eigen::VectorXd row = pred.cls.row(0);
  CHECK(row.sum() == Approx(1.0).margin(1e-12));
  CHECK(row.minCoeff() > 0.0);
}

TEST_CASE("zero-parameter trunk emits unit sigma and zero rho", "[predictor]") {
  const Scenario s = testsupport::straight_scenario();
  PredictorModel model;  // zero init
  const SeqMvnPrediction pred = predict(s, model);
  for (int m = 0; m < pred.modals; ++m)
    for (int t = 0; t < pred.horizon; ++t) {
      CHECK(pred.at(0, m, t).sigma_x == Approx(1.0));
      CHECK(pred.at(0, m, t).sigma_y == Approx(1.0));
      CHECK(pred.at(0, m, t).rho == Approx(0.0));
    }
  CHECK(pred.cls(0, 0) == Approx(1.0 / kModals));
  // Zero raw velocity corrections: the rollout is constant velocity at the
  // current speed along the current heading.
  const AgentState now = s.agents[0].current();
  CHECK(pred.at(0, 0, 0).mu_x == Approx(now.x + now.speed * s.dt));
  CHECK(pred.at(0, 0, 0).mu_y == Approx(now.y).margin(1e-12));
}

TEST_CASE("no agents yields an empty prediction", "[predictor]") {
  const Scenario s = testsupport::straight_scenario(8.0, /*with_agent=*/false);
  PredictorModel model;
  const SeqMvnPrediction pred = predict(s, model);
  CHECK(pred.num_agents == 0);
  CHECK(prediction_loss(pred, {}) == Approx(0.0));
}

TEST_CASE("full model gradient matches finite differences", "[predictor][oracle]") {
  // End-to-end: trunk parameters -> predict -> loss, against central
  // differences on a parameter subsample. A single modal keeps the loss smooth
  // (no argmin ties under perturbation); the target here is the velocity
  // rollout chain and the trunk backprop.
  Scenario s = testsupport::straight_scenario();
  s.agents.push_back(testsupport::constant_velocity_agent(2, 10.0, 3.5, 6.0, s.dt,
                                                          kHistorySteps,
                                                          kHorizonSteps));
  std::vector<Eigen::MatrixX2d> truth;
  Rng rng(31);
  for (const auto& agent : s.agents) {
    Eigen::MatrixX2d m(kHorizonSteps, 2);
    for (int t = 0; t < kHorizonSteps; ++t) {
      m(t, 0) = agent.future_truth[t].x() + rng.normal(0.0, 0.3);
      m(t, 1) = agent.future_truth[t].y() + rng.normal(0.0, 0.3);
    }
    truth.push_back(std::move(m));
  }
  PredictorModel model;
  model.modals = 1;
  model.trunk = MlpHead(kAgentFeatureDim, {24}, model.raw_dim(), Transform::identity);
  model.trunk.randomize(rng, 0.05);
  const Eigen::VectorXd params = model.trunk.flatten();

  const auto loss_at = [&](const Eigen::VectorXd& p) {
    PredictorModel probe = model;
    probe.trunk.unflatten(p);
    return prediction_loss(predict(s, probe), truth);
  };
  std::vector<AgentPredictTrace> traces;
  const SeqMvnPrediction pred = predict(s, model, &traces);
  PredictionGrad pg(pred);
  prediction_loss(pred, truth, &pg);
  MlpHead::Grad grad(model.trunk);
  predict_backward(model, s, pred, traces, pg, grad);
  const Eigen::VectorXd analytic = MlpHead::flatten_grad(grad);

  const double step = 1e-5;
  double max_rel = 0.0;
  for (int k = 0; k < 300; ++k) {
    const int i = rng.uniform_int(0, static_cast<int>(params.size()) - 1);
    Eigen::VectorXd probe = params;
    probe[i] = params[i] + step;
    const double up = loss_at(probe);
    probe[i] = params[i] - step;
    const double down = loss_at(probe);
    const double fd = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-3});
    max_rel = std::max(max_rel, std::abs(analytic[i] - fd) / denom);
  }
  INFO("max rel err " << max_rel);
  CHECK(max_rel < 1e-4);
}
