#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "bica/errors.hpp"
#include "bica/infer.hpp"
#include "bica/mixture.hpp"
#include "bica/radio.hpp"

namespace bica {

using Json = nlohmann::json;

// Shortest round-trip decimal form, locale independent. All CSV numbers go
// through here so identical doubles always print identically.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline Json to_json(const SourceModel& model) {
  Json j;
  j["m"] = model.monitors();
  j["columns"] = std::vector<std::uint32_t>(model.mixing().columns().begin(),
                                            model.mixing().columns().end());
  j["p"] = std::vector<double>(model.p().begin(), model.p().end());
  return j;
}

inline SourceModel source_model_from_json(const Json& j) {
  try {
    const std::size_t m = j.at("m").get<std::size_t>();
    auto columns = j.at("columns").get<std::vector<std::uint32_t>>();
    auto p = j.at("p").get<std::vector<double>>();
    return SourceModel(MixingMatrix(m, std::move(columns)), std::move(p));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("source model: ") + e.what(), 1);
  }
}

inline Json to_json(const InferenceResult& result) {
  Json j = to_json(result.model);
  j["epsilon"] = result.epsilon;
  Json groups = Json::array();
  for (const auto& group : result.groups) {
    Json g = Json::array();
    for (std::size_t i : group) g.push_back(i + 1);  // 1-based for humans
    groups.push_back(std::move(g));
  }
  j["groups"] = std::move(groups);
  return j;
}

inline InferenceResult inference_result_from_json(const Json& j) {
  InferenceResult result;
  result.model = source_model_from_json(j);
  try {
    result.epsilon = j.at("epsilon").get<double>();
    for (const Json& g : j.at("groups")) {
      std::vector<std::size_t> group;
      for (const Json& i : g) {
        const std::size_t idx = i.get<std::size_t>();
        if (idx == 0) throw ParseError("group monitor indices are 1-based", 1);
        group.push_back(idx - 1);
      }
      result.groups.push_back(std::move(group));
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("inference result: ") + e.what(), 1);
  }
  return result;
}

inline Json to_json(const Scenario& scenario) {
  Json j;
  j["area_m"] = scenario.area_m;
  j["alpha"] = scenario.alpha;
  j["noise_floor_dbm"] = scenario.noise_floor_dbm;
  j["threshold_db"] = scenario.threshold_db;
  j["gain_const"] = scenario.gain_const;
  Json monitors = Json::array();
  for (const Vec2& v : scenario.monitors) monitors.push_back({v.x, v.y});
  j["monitors"] = std::move(monitors);
  Json pus = Json::array();
  for (const Vec2& v : scenario.pus) pus.push_back({v.x, v.y});
  j["pus"] = std::move(pus);
  j["tx_power_mw"] = scenario.tx_power_mw;
  return j;
}

inline Scenario scenario_from_json(const Json& j) {
  Scenario sc;
  try {
    sc.area_m = j.at("area_m").get<double>();
    sc.alpha = j.at("alpha").get<double>();
    sc.noise_floor_dbm = j.at("noise_floor_dbm").get<double>();
    sc.threshold_db = j.at("threshold_db").get<double>();
    sc.gain_const = j.at("gain_const").get<double>();
    for (const Json& v : j.at("monitors"))
      sc.monitors.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    for (const Json& v : j.at("pus"))
      sc.pus.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    sc.tx_power_mw = j.at("tx_power_mw").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what(), 1);
  }
  sc.validate();
  return sc;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(std::string(path) + ": " + e.what(), 1);
  }
}

inline void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path);
}

}  // namespace bica
