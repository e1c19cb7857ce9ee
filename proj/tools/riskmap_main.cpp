// Command-line entry point: scenario generation, two-stage training,
// single-scenario planning, and batch evaluation over sampling counts.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "riskmap/checkpoint.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/metrics.hpp"
#include "riskmap/planner.hpp"
#include "riskmap/scenario.hpp"
#include "riskmap/scenario_gen.hpp"
#include "riskmap/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Scenario files from a directory in sorted filename order, so batch results
// do not depend on directory enumeration order.
struct ScenarioSet {
  std::vector<riskmap::Scenario> scenarios;
  std::vector<std::string> names;  // file stems
};

ScenarioSet load_scenario_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw riskmap::IoError("scenario directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw riskmap::ConfigError("no scenario files (*.json) in '" + dir + "'");
  ScenarioSet set;
  for (const auto& f : files) {
    set.scenarios.push_back(riskmap::load_scenario(f.string()));
    set.names.push_back(f.stem().string());
  }
  return set;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw riskmap::IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw riskmap::IoError("failed writing '" + path + "'");
}

std::string sibling_path(const std::string& ckpt_path, const std::string& suffix) {
  fs::path p(ckpt_path);
  p.replace_extension("");
  return p.string() + suffix;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string kind;
  int count = 10;
  uint64_t seed = 0;
  std::string out = ".";
};

void cmd_gen(const GenArgs& args) {
  const riskmap::ScenarioKind kind = riskmap::scenario_kind_from_string(args.kind);
  std::error_code ec;
  fs::create_directories(args.out, ec);
  if (ec || !fs::is_directory(args.out))
    throw riskmap::IoError("cannot create output directory '" + args.out + "'");
  const auto scenarios = riskmap::generate_scenarios(kind, args.count, args.seed);
  json written = json::array();
  for (size_t i = 0; i < scenarios.size(); ++i) {
    const std::string name =
        args.kind + "_" + std::to_string(args.seed) + "_" + std::to_string(i) + ".json";
    const std::string path = (fs::path(args.out) / name).string();
    riskmap::save_scenario(scenarios[i], path);
    written.push_back(name);
  }
  std::cout << json{{"command", "gen"},
                    {"kind", args.kind},
                    {"count", args.count},
                    {"seed", args.seed},
                    {"dir", args.out},
                    {"files", written}}
                   .dump(2)
            << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  int stage = 1;
  std::string scenarios;
  std::string ckpt_predictor;  // stage-2 input
  std::string out;             // checkpoint output path
  riskmap::TrainConfig config;
  std::string loss_mask;
  std::string col_mode = "integrated";
};

std::string stage1_curve_csv(const std::vector<double>& curve) {
  std::string csv = "epoch,loss\n";
  for (size_t e = 0; e < curve.size(); ++e) {
    csv += std::to_string(e + 1);
    csv += ',';
    csv += riskmap::detail::format_double(curve[e]);
    csv += '\n';
  }
  return csv;
}

std::string stage2_curve_csv(const std::vector<riskmap::LossBreakdown>& curve) {
  std::string csv = "epoch,demo_cost,sel,l2,con,vel,total\n";
  for (size_t e = 0; e < curve.size(); ++e) {
    csv += std::to_string(e + 1);
    for (double v : {curve[e].demo_cost, curve[e].l_sel, curve[e].l_l2, curve[e].l_con,
                     curve[e].l_v, curve[e].total}) {
      csv += ',';
      csv += riskmap::detail::format_double(v);
    }
    csv += '\n';
  }
  return csv;
}

void cmd_train(TrainArgs& args) {
  if (!args.loss_mask.empty())
    args.config.mask = riskmap::parse_loss_mask(args.loss_mask);
  args.config.col_mode = riskmap::col_mode_from_string(args.col_mode);
  if (args.out.empty()) throw riskmap::ConfigError("train: --out checkpoint path required");
  const ScenarioSet set = load_scenario_dir(args.scenarios);
  const std::string curve_path = sibling_path(args.out, "_loss.csv");

  if (args.stage == 1) {
    const auto result = riskmap::train_stage1(set.scenarios, args.config);
    riskmap::save_predictor(args.out, result.model);
    write_text_file(curve_path, stage1_curve_csv(result.curve));
    json summary{{"command", "train"},
                 {"stage", 1},
                 {"scenarios", set.scenarios.size()},
                 {"epochs", args.config.epochs},
                 {"checkpoint", args.out},
                 {"loss_csv", curve_path}};
    if (!result.curve.empty()) {
      summary["initial_loss"] = result.curve.front();
      summary["final_loss"] = result.curve.back();
    }
    std::cout << summary.dump(2) << "\n";
    return;
  }
  if (args.ckpt_predictor.empty())
    throw riskmap::ConfigError("train stage 2 requires --ckpt-predictor (stage-1 checkpoint)");
  const riskmap::PredictorModel predictor = riskmap::load_predictor(args.ckpt_predictor);
  const auto result = riskmap::train_stage2(set.scenarios, predictor, args.config);
  riskmap::save_planner_heads(args.out, result.heads);
  write_text_file(curve_path, stage2_curve_csv(result.curve));
  json summary{{"command", "train"},
               {"stage", 2},
               {"scenarios", set.scenarios.size()},
               {"epochs", args.config.epochs},
               {"checkpoint", args.out},
               {"loss_csv", curve_path}};
  if (!result.curve.empty()) {
    summary["initial_loss"] = result.curve.front().total;
    summary["final_loss"] = result.curve.back().total;
  }
  std::cout << summary.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string scenario_path;
  std::string ckpt_predictor;
  std::string ckpt_planner;
  int count = 400;
  std::string col_mode = "integrated";
  std::string dump_riskmap;
  std::string dump_distances;
};

json state_to_json(const riskmap::TrajectoryState& s) {
  return json{{"x", s.x},         {"y", s.y},         {"heading", s.heading},
              {"speed", s.speed}, {"accel", s.accel}, {"yaw_rate", s.yaw_rate}};
}

std::string riskmap_csv(const riskmap::RiskMapValues& values,
                        const std::vector<riskmap::TrajectorySample>& samples) {
  std::string csv = "sample,t,x,y,r_ref,r_sdf,r_tl,r_col\n";
  for (int i = 0; i < values.samples(); ++i)
    for (int t = 0; t < values.horizon(); ++t) {
      csv += std::to_string(i);
      csv += ',';
      csv += std::to_string(t);
      for (double v : {samples[i].states[t].x, samples[i].states[t].y,
                       values.at(i, t, 0), values.at(i, t, 1), values.at(i, t, 2),
                       values.at(i, t, 3)}) {
        csv += ',';
        csv += riskmap::detail::format_double(v);
      }
      csv += '\n';
    }
  return csv;
}

std::string distances_csv(const riskmap::DistanceMatrix& dist,
                          const std::vector<riskmap::TrajectorySample>& samples) {
  std::string csv = "sample,t,x,y,d_ref,d_sdf,d_tl\n";
  for (int i = 0; i < dist.samples(); ++i)
    for (int t = 0; t < dist.horizon(); ++t) {
      csv += std::to_string(i);
      csv += ',';
      csv += std::to_string(t);
      for (double v : {samples[i].states[t].x, samples[i].states[t].y, dist.at(i, t, 0),
                       dist.at(i, t, 1), dist.at(i, t, 2)}) {
        csv += ',';
        csv += riskmap::detail::format_double(v);
      }
      csv += '\n';
    }
  return csv;
}

void cmd_plan(const PlanArgs& args) {
  const riskmap::ColMode mode = riskmap::col_mode_from_string(args.col_mode);
  const riskmap::Scenario scenario = riskmap::load_scenario(args.scenario_path);
  const riskmap::PredictorModel predictor = riskmap::load_predictor(args.ckpt_predictor);
  const riskmap::PlannerHeads heads = riskmap::load_planner_heads(args.ckpt_planner);

  const riskmap::PlanResult result =
      riskmap::plan(scenario, predictor, heads, args.count, mode);

  if (!args.dump_riskmap.empty() || !args.dump_distances.empty()) {
    // Debug dumps recompute the field on the already-sampled lattice.
    const riskmap::SeqMvnPrediction pred = riskmap::predict(scenario, predictor);
    const riskmap::DistanceMatrix dist = riskmap::measure(result.samples, scenario.map);
    if (!args.dump_distances.empty())
      write_text_file(args.dump_distances, distances_csv(dist, result.samples));
    if (!args.dump_riskmap.empty()) {
      const riskmap::RiskMapValues values = riskmap::build_riskmap(
          result.samples, scenario, pred, result.params, mode, &dist);
      write_text_file(args.dump_riskmap, riskmap_csv(values, result.samples));
    }
  }

  json traj = json::array();
  for (const auto& s : result.trajectory().states) traj.push_back(state_to_json(s));
  json costs = json::array();
  for (size_t i = 0; i < result.costs.size(); ++i) {
    const auto& c = result.costs[i];
    costs.push_back(json{{"index", i},
                         {"target_speed", result.samples[i].target_speed},
                         {"lateral_offset", result.samples[i].lateral_offset},
                         {"risk_ref", c.risk_ref},
                         {"risk_sdf", c.risk_sdf},
                         {"risk_tl", c.risk_tl},
                         {"risk_col", c.risk_col},
                         {"smooth_accel", c.c_smooth[0]},
                         {"smooth_yaw", c.c_smooth[1]},
                         {"d_v", c.d_v_term},
                         {"total", c.total}});
  }
  std::cout << json{{"command", "plan"},
                    {"scenario", args.scenario_path},
                    {"count", args.count},
                    {"col_mode", args.col_mode},
                    {"selected", result.selected},
                    {"wall_time_ms", result.wall_ms},
                    {"trajectory", traj},
                    {"costs", costs}}
                   .dump(2)
            << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string scenarios;
  std::string ckpt_predictor;
  std::string ckpt_planner;
  std::vector<int> counts{100, 400, 900};
  std::string col_mode = "integrated";
  std::string out = ".";
};

void cmd_eval(const EvalArgs& args) {
  const riskmap::ColMode mode = riskmap::col_mode_from_string(args.col_mode);
  const riskmap::PredictorModel predictor = riskmap::load_predictor(args.ckpt_predictor);
  const riskmap::PlannerHeads heads = riskmap::load_planner_heads(args.ckpt_planner);
  const ScenarioSet set = load_scenario_dir(args.scenarios);
  std::error_code ec;
  fs::create_directories(args.out, ec);
  if (ec || !fs::is_directory(args.out))
    throw riskmap::IoError("cannot create output directory '" + args.out + "'");

  json summary = json::array();
  for (int count : args.counts) {
    std::vector<riskmap::TrajectorySample> plans;
    plans.reserve(set.scenarios.size());
    for (const auto& scenario : set.scenarios)
      plans.push_back(
          riskmap::plan(scenario, predictor, heads, count, mode).trajectory());
    const riskmap::EvalReport report =
        riskmap::evaluate(plans, set.scenarios, set.names);
    const std::string stem =
        (fs::path(args.out) / ("eval_count" + std::to_string(count))).string();
    riskmap::save_report(stem + ".csv", report);
    write_text_file(stem + ".json", riskmap::report_to_json(report).dump(2) + "\n");
    summary.push_back(json{{"count", count},
                           {"ade", report.aggregate.ade},
                           {"col_3s", report.aggregate.col_3s},
                           {"csv", stem + ".csv"}});
  }
  std::cout << json{{"command", "eval"},
                    {"scenarios", set.scenarios.size()},
                    {"reports", summary}}
                   .dump(2)
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  // Allow the documented `--loss-mask -demo_cost` form: a value starting with
  // a single dash would otherwise be eaten as an (unknown) flag.
  std::vector<std::string> raw_args;
  for (int i = 1; i < argc; ++i) raw_args.emplace_back(argv[i]);
  std::vector<std::string> merged;
  for (size_t i = 0; i < raw_args.size(); ++i) {
    if (raw_args[i] == "--loss-mask" && i + 1 < raw_args.size() &&
        raw_args[i + 1].size() > 1 && raw_args[i + 1][0] == '-' &&
        raw_args[i + 1][1] != '-') {
      merged.push_back("--loss-mask=" + raw_args[i + 1]);
      ++i;
    } else {
      merged.push_back(raw_args[i]);
    }
  }

  CLI::App app{"Risk-field lattice planner pipeline"};
  app.require_subcommand(1);

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "Generate synthetic scenario files");
  gen->add_option("kind", gen_args.kind,
                  "Scenario kind: straight|curve|cut_in|blocked_lane|red_light")
      ->required();
  gen->add_option("count,--count", gen_args.count, "Number of scenarios");
  gen->add_option("--seed", gen_args.seed, "Generation seed");
  gen->add_option("--out", gen_args.out, "Output directory");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train predictor (stage 1) or planner heads (stage 2)");
  train->add_option("stage", train_args.stage, "Training stage")
      ->required()
      ->check(CLI::IsMember({1, 2}));
  train->add_option("--scenarios", train_args.scenarios, "Scenario directory")->required();
  train->add_option("--ckpt-predictor", train_args.ckpt_predictor,
                    "Stage-1 checkpoint (required for stage 2)");
  train->add_option("--out", train_args.out, "Checkpoint output path")->required();
  train->add_option("--lr", train_args.config.learning_rate, "Learning rate");
  train->add_option("--epochs", train_args.config.epochs, "Training epochs");
  train->add_option("--batch", train_args.config.batch_size, "Batch size");
  train->add_option("--seed", train_args.config.seed, "Training seed");
  train->add_option("--count", train_args.config.count, "Stage-2 lattice sampling count");
  train->add_flag("--tv", train_args.config.tv, "Time-varying risk heads (stage 2)");
  train->add_option("--loss-mask", train_args.loss_mask,
                    "Disable loss terms, e.g. -demo_cost,-vel");
  train->add_option("--col-mode", train_args.col_mode,
                    "Collision risk mode: density|integrated|max");

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "Plan a single scenario, JSON to stdout");
  plan->add_option("--scenarios", plan_args.scenario_path, "Scenario file")->required();
  plan->add_option("--ckpt-predictor", plan_args.ckpt_predictor, "Stage-1 checkpoint")
      ->required();
  plan->add_option("--ckpt-planner", plan_args.ckpt_planner, "Stage-2 checkpoint")
      ->required();
  plan->add_option("--count", plan_args.count, "Lattice sampling count (perfect square)");
  plan->add_option("--col-mode", plan_args.col_mode,
                   "Collision risk mode: density|integrated|max");
  plan->add_option("--dump-riskmap", plan_args.dump_riskmap,
                   "Write per-point risk channels CSV to this path");
  plan->add_option("--dump-distances", plan_args.dump_distances,
                   "Write per-point distance channels CSV to this path");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate over a scenario directory");
  eval->add_option("--scenarios", eval_args.scenarios, "Scenario directory")->required();
  eval->add_option("--ckpt-predictor", eval_args.ckpt_predictor, "Stage-1 checkpoint")
      ->required();
  eval->add_option("--ckpt-planner", eval_args.ckpt_planner, "Stage-2 checkpoint")
      ->required();
  eval->add_option("--count", eval_args.counts,
                   "Sampling counts to sweep (default 100 400 900)");
  eval->add_option("--col-mode", eval_args.col_mode,
                   "Collision risk mode: density|integrated|max");
  eval->add_option("--out", eval_args.out, "Report output directory");

  // CLI11's vector overload consumes arguments from the back.
  std::reverse(merged.begin(), merged.end());
  try {
    app.parse(merged);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) cmd_gen(gen_args);
    if (train->parsed()) cmd_train(train_args);
    if (plan->parsed()) cmd_plan(plan_args);
    if (eval->parsed()) cmd_eval(eval_args);
  } catch (const riskmap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const riskmap::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const riskmap::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
