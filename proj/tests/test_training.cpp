#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "riskmap/scenario_gen.hpp"
#include "riskmap/training.hpp"
#include "test_support.hpp"

using namespace riskmap;
using Catch::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<int>(values.size()));
  int i = 0;
  for (const double x : values) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("softmin distribution", "[training]") {
  const Eigen::VectorXd even = softmin(vec({3.0, 3.0}));
  CHECK(even[0] == Approx(0.5));
  CHECK(even[1] == Approx(0.5));
  const Eigen::VectorXd skew = softmin(vec({0.0, std::log(3.0)}));
  CHECK(skew[0] == Approx(0.75));
  CHECK(skew[1] == Approx(0.25));
  Rng rng(43);
  Eigen::VectorXd values(7);
  for (int i = 0; i < 7; ++i) values[i] = rng.uniform(-4.0, 4.0);
  const Eigen::VectorXd p = softmin(values);
  CHECK(p.sum() == Approx(1.0).margin(1e-12));
  CHECK(p.minCoeff() > 0.0);
  const Eigen::VectorXd shifted = softmin((values.array() + 17.0).matrix());
  for (int i = 0; i < 7; ++i) CHECK(shifted[i] == Approx(p[i]).margin(1e-12));
  CHECK_THROWS_AS(softmin(Eigen::VectorXd()), ConfigError);
}

TEST_CASE("velocity regression loss", "[training]") {
  CHECK(loss_velocity(vec({5, 5, 5}), vec({5, 5, 5})) == Approx(0.0).margin(1e-15));
  CHECK(loss_velocity(vec({1, 2}), vec({0, 0})) == Approx(5.0));
  Eigen::VectorXd grad;
  loss_velocity(vec({1, 2}), vec({0, 4}), &grad);
  CHECK(grad[0] == Approx(2.0));
  CHECK(grad[1] == Approx(-4.0));
  CHECK_THROWS_AS(loss_velocity(vec({1}), vec({1, 2})), ConfigError);
}

TEST_CASE("selection cross entropy", "[training]") {
  SECTION("matching distributions reduce to the target entropy") {
    const Eigen::VectorXd c = vec({0.0, std::log(3.0)});
    const Eigen::VectorXd q = softmin(c);
    const double entropy = -(q[0] * std::log(q[0]) + q[1] * std::log(q[1]));
    CHECK(loss_selection(c, c) == Approx(entropy));
  }
  SECTION("near one-hot target picks out one log probability") {
    // Target mass collapses onto entry 0; the loss is -log softmin([0,10])_0.
    CHECK(loss_selection(vec({0.0, 10.0}), vec({0.0, 100.0})) ==
          Approx(std::log(1.0 + std::exp(-10.0))));
  }
  SECTION("log floor keeps runaway costs finite") {
    const double loss = loss_selection(vec({0.0, 60.0}), vec({0.0, 0.0}));
    CHECK(loss == Approx(0.5 * 50.0 + 0.5 * std::log(1.0 + std::exp(-60.0))));
    CHECK(std::isfinite(loss));
  }
  SECTION("gradient matches finite differences") {
    Rng rng(47);
    Eigen::VectorXd costs(6), distances(6);
    for (int i = 0; i < 6; ++i) {
      costs[i] = rng.uniform(0.0, 3.0);
      distances[i] = rng.uniform(0.0, 3.0);
    }
    const auto fn = [&](const Eigen::VectorXd& c, Eigen::VectorXd* grad) {
      return loss_selection(c, distances, grad);
    };
    const GradCheckReport report = gradient_check(fn, costs, 1e-6);
    INFO("max rel err " << report.max_rel_err);
    CHECK(report.pass);
  }
  CHECK_THROWS_AS(loss_selection(vec({1.0}), vec({1.0, 2.0})), ConfigError);
  CHECK_THROWS_AS(loss_selection(Eigen::VectorXd(), Eigen::VectorXd()), ConfigError);
}

TEST_CASE("lattice-to-demo distances", "[training]") {
  const int T = 4;
  std::vector<TrajectorySample> samples{
      testsupport::straight_sample(0.0, 5.0, 0.0, 0.0, T, 0.1),
      testsupport::straight_sample(0.0, 6.0, 0.0, 0.0, T, 0.1)};
  const TrajectorySample demo = testsupport::straight_sample(0.0, 5.0, 0.0, 0.0, T, 0.1);
  const Eigen::VectorXd d = trajectory_demo_distances(samples, demo);
  CHECK(d[0] == Approx(0.0).margin(1e-12));
  // Speed gap 1 m/s: position gaps 0.1(t+1); sum of squares over 4 steps.
  CHECK(d[1] == Approx(std::sqrt(0.01 * (1.0 + 4.0 + 9.0 + 16.0))));
  const TrajectorySample longer =
      testsupport::straight_sample(0.0, 5.0, 0.0, 0.0, T + 1, 0.1);
  CHECK_THROWS_AS(trajectory_demo_distances(samples, longer), ConfigError);
}

TEST_CASE("cost regression against the nearest candidate", "[training]") {
  CHECK(loss_l2(vec({4.0, 7.0}), vec({0.0, 1.0}), 4.0) == Approx(0.0).margin(1e-15));
  CHECK(loss_l2(vec({4.0, 7.0}), vec({0.0, 1.0}), 2.0) == Approx(2.0));
  CHECK(loss_l2(vec({4.0, 7.0}), vec({2.0, 1.0}), 2.0) == Approx(5.0));
  // Negative gap when the nearest candidate undercuts the demo.
  CHECK(loss_l2(vec({1.0, 7.0}), vec({0.0, 1.0}), 4.0) == Approx(-3.0));
  int nearest = -1;
  // Distance ties resolve to the lowest index.
  CHECK(loss_l2(vec({9.0, 1.0}), vec({3.0, 3.0}), 0.0, &nearest) == Approx(9.0));
  CHECK(nearest == 0);
  CHECK_THROWS_AS(loss_l2(Eigen::VectorXd(), Eigen::VectorXd(), 0.0), ConfigError);
}

TEST_CASE("consistency loss is inverse population variance", "[training]") {
  CHECK(loss_consistency(vec({0.0, 2.0})) == Approx(1.0));
  CHECK(loss_consistency(vec({5.0, 5.0, 5.0})) == Approx(1e8));
  const double base = loss_consistency(vec({1.0, 2.0, 4.0}));
  CHECK(loss_consistency(vec({3.0, 6.0, 12.0})) == Approx(base / 9.0));
  CHECK_THROWS_AS(loss_consistency(vec({1.0})), ConfigError);

  SECTION("gradient matches finite differences") {
    const auto fn = [](const Eigen::VectorXd& c, Eigen::VectorXd* grad) {
      return loss_consistency(c, grad);
    };
    const GradCheckReport report = gradient_check(fn, vec({0.3, 1.9, 0.7, 2.4}), 1e-6);
    INFO("max rel err " << report.max_rel_err);
    CHECK(report.pass);
  }
  SECTION("degenerate variance has a flat gradient") {
    Eigen::VectorXd grad;
    loss_consistency(vec({5.0, 5.0, 5.0}), &grad);
    CHECK(grad.norm() == 0.0);
  }
}

TEST_CASE("loss mask parsing", "[training]") {
  const LossMask all = parse_loss_mask("");
  CHECK(all.enabled() == 5);
  const LossMask no_demo = parse_loss_mask("-demo_cost");
  CHECK_FALSE(no_demo.demo_cost);
  CHECK(no_demo.enabled() == 4);
  const LossMask two = parse_loss_mask("-sel,-con");
  CHECK_FALSE(two.sel);
  CHECK_FALSE(two.con);
  CHECK(two.l2);
  CHECK_THROWS_AS(parse_loss_mask("-entropy"), ConfigError);
  CHECK_THROWS_AS(parse_loss_mask("sel"), ConfigError);
  CHECK_THROWS_AS(parse_loss_mask("-demo_cost,-sel,-l2,-con,-vel"), ConfigError);
}

TEST_CASE("total loss is the sum of enabled terms", "[training]") {
  LossBreakdown parts;
  parts.demo_cost = 1.0;
  parts.l_sel = 1.0;
  parts.l_l2 = 1.0;
  parts.l_con = 1.0;
  parts.l_v = 1.0;
  CHECK(total_loss(parts) == 5.0);
  parts.demo_cost = 0.37;
  parts.l_sel = -1.25;
  parts.l_l2 = 4.0;
  parts.l_con = 0.125;
  parts.l_v = 9.5;
  parts.mask = parse_loss_mask("-l2,-vel");
  const double expected = 0.37 + -1.25 + 0.125;
  CHECK(total_loss(parts) == expected);  // exact: same additions
  CHECK(parts.total == expected);
}

TEST_CASE("optimizer behaviour", "[training]") {
  CHECK_THROWS_AS(AdamW(3, -0.1), ConfigError);

  SECTION("zero learning rate freezes parameters") {
    AdamW opt(2, 0.0);
    Eigen::VectorXd p = vec({1.0, -2.0});
    const Eigen::VectorXd before = p;
    opt.step(p, vec({0.3, -0.8}));
    opt.step(p, vec({-1.0, 2.0}));
    CHECK(p == before);
    CHECK(opt.steps_taken() == 2);
  }
  SECTION("first step moves against the gradient sign") {
    AdamW opt(2, 0.1, 0.0);  // no decay: pure Adam step
    Eigen::VectorXd p = vec({0.0, 0.0});
    opt.step(p, vec({3.0, -0.5}));
    // Bias-corrected mhat = g, vhat = g^2, so the step is lr * sign(g).
    CHECK(p[0] == Approx(-0.1).epsilon(1e-6));
    CHECK(p[1] == Approx(0.1).epsilon(1e-6));
  }
  SECTION("weight decay pulls parameters toward zero") {
    AdamW opt(1, 0.5, 0.1);
    Eigen::VectorXd p = vec({10.0});
    opt.step(p, vec({0.0}));
    // Zero gradient: only the decay term acts, p -= lr * wd * p.
    CHECK(p[0] == Approx(10.0 - 0.5 * 0.1 * 10.0));
  }
}

TEST_CASE("gradient checker accepts exact gradients and flags wrong ones",
          "[training]") {
  const Eigen::VectorXd u = vec({0.5, -1.5, 2.0});
  const auto linear = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
    if (grad != nullptr) *grad = u;
    return u.dot(p);
  };
  const GradCheckReport good = gradient_check(linear, vec({1.0, 2.0, 3.0}), 1e-8);
  CHECK(good.pass);
  CHECK(good.max_rel_err < 1e-8);

  const auto corrupted = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
    if (grad != nullptr) {
      *grad = u;
      (*grad)[1] += 0.1;
    }
    return u.dot(p);
  };
  const GradCheckReport bad = gradient_check(corrupted, vec({1.0, 2.0, 3.0}), 1e-4);
  CHECK_FALSE(bad.pass);
  CHECK(bad.worst_index == 1);
}

TEST_CASE("stage-2 loss gradient matches finite differences", "[training][oracle]") {
  const Scenario s = testsupport::straight_scenario();
  const PredictorModel model;
  const SeqMvnPrediction pred = predict(s, model);
  const auto samples =
      sample_lattice(s.ego_now(), s.map.reference_lanes, 9, s.horizon(), s.dt);
  const Stage2Static st = precompute_stage2(s, pred, samples);
  const PlannerHeads heads = init_planner_heads(false, 7, s.horizon());

  // Masks chosen so the demo-row gradient path is exercised both cancelled
  // (all-on: demo_cost and l2 offset each other) and one-sided.
  for (const std::string text : {"", "-l2", "-demo_cost,-sel", "-vel,-con"}) {
    const LossMask mask = parse_loss_mask(text);
    const auto fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
      PlannerHeads probe = heads;
      probe.unflatten(p);
      if (grad == nullptr) return stage2_loss(st, probe, mask);
      PlannerHeadsGrad g(probe);
      const double loss = stage2_loss(st, probe, mask, nullptr, &g);
      *grad = g.flatten();
      return loss;
    };
    const GradCheckReport report = gradient_check(fn, heads.flatten(), 1e-4);
    INFO("mask '" << text << "': max rel err " << report.max_rel_err << " at "
                  << report.worst_index);
    CHECK(report.pass);
  }
}

TEST_CASE("stage-1 training", "[training]") {
  const auto scenarios = generate_scenarios(ScenarioKind::straight, 4, 21);
  TrainConfig config;
  config.epochs = 2;
  config.batch_size = 2;
  config.seed = 9;

  SECTION("same seed, same result") {
    const Stage1Result a = train_stage1(scenarios, config);
    const Stage1Result b = train_stage1(scenarios, config);
    REQUIRE(a.curve.size() == 2);
    CHECK(a.curve == b.curve);
    CHECK((a.model.trunk.flatten() - b.model.trunk.flatten()).norm() == 0.0);
  }
  SECTION("zero epochs returns the seeded initialization") {
    TrainConfig frozen = config;
    frozen.epochs = 0;
    const Stage1Result result = train_stage1(scenarios, frozen);
    CHECK(result.curve.empty());
    Rng rng(config.seed);
    PredictorModel fresh;
    fresh.trunk.randomize(rng, 0.01);
    CHECK((result.model.trunk.flatten() - fresh.trunk.flatten()).norm() == 0.0);
  }
  SECTION("zero learning rate never moves the parameters") {
    TrainConfig frozen = config;
    frozen.learning_rate = 0.0;
    const Stage1Result result = train_stage1(scenarios, frozen);
    Rng rng(config.seed);
    PredictorModel fresh;
    fresh.trunk.randomize(rng, 0.01);
    CHECK((result.model.trunk.flatten() - fresh.trunk.flatten()).norm() == 0.0);
    CHECK(result.curve[0] == Approx(result.curve[1]));
  }
  SECTION("loss decreases over a short run") {
    TrainConfig longer = config;
    longer.epochs = 8;
    const Stage1Result result = train_stage1(scenarios, longer);
    CHECK(result.curve.back() < result.curve.front());
    for (const double loss : result.curve) CHECK(std::isfinite(loss));
  }
  SECTION("an exploding learning rate raises the divergence error") {
    TrainConfig wild = config;
    wild.learning_rate = 1e8;
    wild.batch_size = 1;
    wild.epochs = 3;
    CHECK_THROWS_AS(train_stage1(scenarios, wild), DivergenceError);
  }
  SECTION("input validation") {
    CHECK_THROWS_AS(train_stage1({}, config), ConfigError);
    const std::vector<Scenario> lonely{
        testsupport::straight_scenario(8.0, /*with_agent=*/false)};
    CHECK_THROWS_AS(train_stage1(lonely, config), ConfigError);
    std::vector<Scenario> truncated = scenarios;
    truncated[0].agents[0].future_truth.resize(5);
    CHECK_THROWS_AS(train_stage1(truncated, config), ConfigError);
  }
}

TEST_CASE("stage-2 training", "[training]") {
  const auto scenarios = generate_scenarios(ScenarioKind::straight, 3, 33);
  const PredictorModel predictor;  // zero-parameter trunk is a valid predictor
  TrainConfig config;
  config.epochs = 3;
  config.count = 16;
  config.seed = 5;

  SECTION("same seed, same result") {
    const Stage2Result a = train_stage2(scenarios, predictor, config);
    const Stage2Result b = train_stage2(scenarios, predictor, config);
    REQUIRE(a.curve.size() == 3);
    CHECK((a.heads.flatten() - b.heads.flatten()).norm() == 0.0);
    for (size_t i = 0; i < a.curve.size(); ++i)
      CHECK(a.curve[i].total == b.curve[i].total);
  }
  SECTION("zero epochs returns the seeded initialization") {
    TrainConfig frozen = config;
    frozen.epochs = 0;
    const Stage2Result result = train_stage2(scenarios, predictor, frozen);
    CHECK(result.curve.empty());
    const PlannerHeads fresh = init_planner_heads(false, config.seed);
    CHECK((result.heads.flatten() - fresh.flatten()).norm() == 0.0);
  }
  SECTION("per-epoch means recompose into the reported total") {
    TrainConfig masked = config;
    masked.mask = parse_loss_mask("-demo_cost");
    const Stage2Result result = train_stage2(scenarios, predictor, masked);
    for (const LossBreakdown& row : result.curve) {
      CHECK(std::isfinite(row.total));
      CHECK(row.total == Approx(row.l_sel + row.l_l2 + row.l_con + row.l_v));
    }
  }
  SECTION("velocity-only training fits the demo speeds") {
    TrainConfig vel_only = config;
    vel_only.mask = parse_loss_mask("-demo_cost,-sel,-l2,-con");
    vel_only.epochs = 30;
    vel_only.learning_rate = 1e-2;
    const Stage2Result result = train_stage2(scenarios, predictor, vel_only);
    CHECK(result.curve.back().l_v < result.curve.front().l_v);
    CHECK(result.curve.back().total == Approx(result.curve.back().l_v));
  }
  SECTION("time-varying heads train too") {
    TrainConfig tv = config;
    tv.tv = true;
    tv.epochs = 2;
    const Stage2Result result = train_stage2(scenarios, predictor, tv);
    CHECK(result.heads.tv);
    CHECK(result.curve.size() == 2);
    CHECK(std::isfinite(result.curve.back().total));
  }
  CHECK_THROWS_AS(train_stage2({}, predictor, config), ConfigError);
}
