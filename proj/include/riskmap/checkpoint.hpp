#pragma once

#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "riskmap/encoder.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/mlp.hpp"
#include "riskmap/predictor.hpp"

namespace riskmap {

inline nlohmann::json head_to_json(const MlpHead& head) {
  nlohmann::json j;
  std::vector<int> shape{head.input_dim()};
  for (int l = 0; l < head.layers(); ++l)
    shape.push_back(static_cast<int>(head.weights[l].rows()));
  j["shape"] = shape;
  j["transform"] = to_string(head.transform);
  const Eigen::VectorXd flat = head.flatten();
  std::vector<double> values(flat.data(), flat.data() + flat.size());
  j["values"] = values;
  return j;
}

inline MlpHead head_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.contains("shape") || !j.contains("values") || !j.contains("transform"))
    throw ConfigError("checkpoint head '" + name + "': missing shape/values/transform");
  const std::vector<int> shape = j.at("shape").get<std::vector<int>>();
  if (shape.size() < 2)
    throw ConfigError("checkpoint head '" + name + "': shape needs >= 2 dims");
  std::vector<int> hidden(shape.begin() + 1, shape.end() - 1);
  MlpHead head(shape.front(), hidden, shape.back(),
               transform_from_string(j.at("transform").get<std::string>()));
  const std::vector<double> values = j.at("values").get<std::vector<double>>();
  if (static_cast<int>(values.size()) != head.parameter_count())
    throw ConfigError("checkpoint head '" + name + "': expected " +
                      std::to_string(head.parameter_count()) + " values, got " +
                      std::to_string(values.size()));
  head.unflatten(Eigen::Map<const Eigen::VectorXd>(values.data(), values.size()));
  return head;
}

namespace detail {

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("failed to parse '" + path + "': " + e.what());
  }
  return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline void check_stage(const nlohmann::json& j, const std::string& path,
                        const std::string& want) {
  if (j.value("schema", 0) != 1)
    throw ConfigError("checkpoint '" + path + "': unsupported schema");
  const std::string stage = j.value("stage", "");
  if (stage != want)
    throw ConfigError("checkpoint '" + path + "': stage '" + stage + "', expected '" +
                      want + "'");
}

}  // namespace detail

inline void save_predictor(const std::string& path, const PredictorModel& model) {
  nlohmann::json j;
  j["schema"] = 1;
  j["stage"] = "predictor";
  j["heads"]["trunk"] = head_to_json(model.trunk);
  detail::write_json_file(path, j);
}

inline PredictorModel load_predictor(const std::string& path) {
  const nlohmann::json j = detail::read_json_file(path);
  detail::check_stage(j, path, "predictor");
  PredictorModel model;
  model.trunk = head_from_json(j.at("heads").at("trunk"), "trunk");
  if (model.trunk.input_dim() != kAgentFeatureDim ||
      model.trunk.output_dim() != model.raw_dim())
    throw ConfigError("checkpoint '" + path + "': trunk shape does not match model");
  return model;
}

inline void save_planner_heads(const std::string& path, const PlannerHeads& heads) {
  nlohmann::json j;
  j["schema"] = 1;
  j["stage"] = "planner";
  j["tv"] = heads.tv;
  j["heads"]["beta"] = head_to_json(heads.beta);
  j["heads"]["lambda"] = head_to_json(heads.lambda);
  j["heads"]["w_smooth"] = head_to_json(heads.w_smooth);
  j["heads"]["w_d"] = head_to_json(heads.w_d);
  j["heads"]["v_bar"] = head_to_json(heads.v_bar);
  detail::write_json_file(path, j);
}

inline PlannerHeads load_planner_heads(const std::string& path) {
  const nlohmann::json j = detail::read_json_file(path);
  detail::check_stage(j, path, "planner");
  PlannerHeads heads;
  heads.tv = j.value("tv", false);
  const auto& h = j.at("heads");
  heads.beta = head_from_json(h.at("beta"), "beta");
  heads.lambda = head_from_json(h.at("lambda"), "lambda");
  heads.w_smooth = head_from_json(h.at("w_smooth"), "w_smooth");
  heads.w_d = head_from_json(h.at("w_d"), "w_d");
  heads.v_bar = head_from_json(h.at("v_bar"), "v_bar");
  return heads;
}

}  // namespace riskmap
