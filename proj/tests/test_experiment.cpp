#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include <bica/errors.hpp>
#include <bica/experiment.hpp>
#include <bica/infer.hpp>
#include <bica/serialize.hpp>

using bica::ExperimentConfig;
using bica::ExperimentReport;
using bica::Json;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig config;
  config.m = 4;
  config.n_list = {2};
  config.t_list = {300};
  config.noise_list = {0.0};
  config.runs = 2;
  config.activity = bica::ActivityKind::bernoulli;
  config.record_timings = false;
  config.seed = 7;
  return config;
}

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  return lines;
}

}  // namespace

TEST_CASE("format_double prints shortest round-trip decimals") {
  CHECK(bica::format_double(0.0) == "0");
  CHECK(bica::format_double(2.0) == "2");
  CHECK(bica::format_double(0.5) == "0.5");
  CHECK(bica::format_double(0.1) == "0.1");
}

TEST_CASE("source model JSON round trip") {
  const bica::SourceModel model(bica::MixingMatrix(3, {1, 6, 5}),
                                {0.3, 0.5, 0.15});
  const bica::SourceModel back = bica::source_model_from_json(to_json(model));
  CHECK(back == model);
  Json bad = to_json(model);
  bad.erase("p");
  CHECK_THROWS_AS(bica::source_model_from_json(bad), bica::ParseError);
}

TEST_CASE("inference result JSON round trip uses 1-based groups") {
  const bica::SourceModel truth(bica::MixingMatrix(2, {1, 3}), {0.4, 0.19});
  const bica::InferenceResult result =
      bica::find_bica(bica::FrequencyOracle::from_model(truth), 0.01);
  const Json j = to_json(result);
  CHECK(j["groups"][0][0] == 1);
  const bica::InferenceResult back = bica::inference_result_from_json(j);
  CHECK(back.model == result.model);
  CHECK(back.epsilon == result.epsilon);
  CHECK(back.groups == result.groups);
}

TEST_CASE("scenario JSON round trip") {
  const bica::Scenario sc = bica::generate_scenario({}, 5);
  const bica::Scenario back = bica::scenario_from_json(to_json(sc));
  CHECK(back.monitors == sc.monitors);
  CHECK(back.pus == sc.pus);
  CHECK(back.tx_power_mw == sc.tx_power_mw);
  CHECK(back.gain_const == sc.gain_const);
}

TEST_CASE("experiment config JSON round trip") {
  ExperimentConfig config = tiny_config();
  config.cov_threshold = 0.015;
  config.p_e = 0.03;
  const ExperimentConfig back =
      bica::experiment_config_from_json(to_json(config));
  CHECK(back.m == config.m);
  CHECK(back.n_list == config.n_list);
  CHECK(back.t_list == config.t_list);
  CHECK(back.noise_list == config.noise_list);
  CHECK(back.runs == config.runs);
  CHECK(back.epsilon == config.epsilon);
  CHECK(back.cov_confidence == config.cov_confidence);
  REQUIRE(back.cov_threshold.has_value());
  CHECK(*back.cov_threshold == 0.015);
  CHECK(back.activity == config.activity);
  REQUIRE(back.p_e.has_value());
  CHECK(*back.p_e == 0.03);
  CHECK(back.record_timings == config.record_timings);
  CHECK(back.seed == config.seed);
  CHECK(back.scenario.area_m == config.scenario.area_m);

  const ExperimentConfig defaults = bica::experiment_config_from_json(Json::object());
  CHECK_FALSE(defaults.cov_threshold.has_value());
  CHECK_FALSE(defaults.p_e.has_value());
  CHECK(defaults.activity == bica::ActivityKind::markov);
}

TEST_CASE("unknown config keys are rejected") {
  CHECK_THROWS_AS(bica::experiment_config_from_json({{"bogus", 1}}),
                  bica::ParseError);
  CHECK_THROWS_AS(
      bica::experiment_config_from_json({{"scenario", {{"bogus", 1}}}}),
      bica::ParseError);
  CHECK_THROWS_AS(bica::experiment_config_from_json({{"m", "four"}}),
                  bica::ParseError);
  CHECK_THROWS_AS(bica::experiment_config_from_json({{"activity", "poisson"}}),
                  bica::ParameterError);
  CHECK_THROWS_AS(bica::experiment_config_from_json({{"epsilon", 2.0}}),
                  bica::ParameterError);
  CHECK_THROWS_AS(bica::experiment_config_from_json({{"noise_list", {0.7}}}),
                  bica::ParameterError);
}

TEST_CASE("a small sweep runs every cell and is reproducible across jobs") {
  const ExperimentConfig config = tiny_config();
  const ExperimentReport serial = bica::run_sweep(config, 1);
  REQUIRE(serial.failures.empty());
  REQUIRE(serial.runs.size() == 2);
  CHECK(bica::all_cells_succeeded(serial));
  for (const bica::RunMetrics& r : serial.runs) {
    CHECK(r.n == 2);
    CHECK(r.t_slots == 300);
    CHECK(r.noise == 0.0);
    CHECK(r.structure_error >= 0.0);
    CHECK(r.structure_error <= 1.0);
    CHECK(r.activity_error >= 0.0);
    CHECK(r.activity_error <= 1.0);
    CHECK(r.bica_seconds == 0.0);  // timings suppressed
    CHECK(r.inverse_seconds == 0.0);
  }

  const ExperimentReport threaded = bica::run_sweep(config, 3);
  CHECK(bica::runs_csv(threaded) == bica::runs_csv(serial));
  CHECK(bica::aggregate_csv(threaded) == bica::aggregate_csv(serial));
  CHECK(bica::provenance_json(threaded).dump() ==
        bica::provenance_json(serial).dump());
}

TEST_CASE("report CSVs have the documented shape") {
  const ExperimentReport report = bica::run_sweep(tiny_config(), 1);
  const std::string runs = bica::runs_csv(report);
  CHECK(runs.rfind("# bica 0.1.0 sweep config=", 0) == 0);
  CHECK(runs.find(
            "run_id,n,T,noise,structure_error_ratio,prob_error_ratio,"
            "miscount,activity_error_ratio,bica_seconds,inverse_seconds\n") !=
        std::string::npos);
  CHECK(count_lines(runs) == 2 + report.runs.size());

  const std::string agg = bica::aggregate_csv(report);
  CHECK(agg.find("n,T,noise,runs_requested,runs_ok,structure_error_mean,"
                 "structure_error_std,prob_error_mean,prob_error_std,"
                 "miscount_mean,abs_miscount_mean,activity_error_mean,"
                 "activity_error_std,bica_seconds_mean,inverse_seconds_mean"
                 "\n") != std::string::npos);
  CHECK(count_lines(agg) == 3);  // comment + header + single cell

  const Json prov = bica::provenance_json(report);
  CHECK(prov["tool"] == "bica");
  CHECK(prov["kind"] == "sweep");
  REQUIRE(prov["cells"].size() == 1);
  CHECK(prov["cells"][0]["runs_ok"] == 2);
  CHECK(prov["failures"].empty());
}

TEST_CASE("write_report materializes the three files") {
  const auto dir = std::filesystem::temp_directory_path() / "bica_report_test";
  std::filesystem::remove_all(dir);
  const ExperimentReport report = bica::run_sweep(tiny_config(), 1);
  bica::write_report(report, dir.string());
  CHECK(std::filesystem::exists(dir / "runs.csv"));
  CHECK(std::filesystem::exists(dir / "aggregate.csv"));
  CHECK(std::filesystem::exists(dir / "provenance.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("impossible cells fail per run without aborting the sweep") {
  ExperimentConfig config = tiny_config();
  config.m = 2;
  config.n_list = {4};  // only 3 distinct visibility columns exist
  const ExperimentReport report = bica::run_sweep(config, 1);
  CHECK(report.runs.empty());
  REQUIRE(report.failures.size() == 2);
  CHECK_FALSE(bica::all_cells_succeeded(report));
  CHECK(report.failures[0].error.find("transmitter") != std::string::npos);
  const Json prov = bica::provenance_json(report);
  CHECK(prov["cells"][0]["runs_ok"] == 0);
  CHECK(prov["failures"].size() == 2);
}

TEST_CASE("model comparison sweep is reproducible and well formed") {
  bica::ComparisonConfig config;
  config.m = 6;
  config.n_list = {2, 3};
  config.t_slots = 200;
  config.runs = 2;
  config.seed = 3;
  const bica::ComparisonReport serial = bica::run_model_comparison(config, 1);
  REQUIRE(serial.failures.empty());
  REQUIRE(serial.rows.size() == 4);
  for (const bica::ComparisonRow& row : serial.rows) {
    if (row.false_alarm) CHECK(*row.false_alarm >= 0.0);
    if (row.miss) CHECK(*row.miss >= 0.0);
  }
  const bica::ComparisonReport threaded = bica::run_model_comparison(config, 2);
  CHECK(bica::comparison_csv(threaded) == bica::comparison_csv(serial));
  const std::string csv = bica::comparison_csv(serial);
  CHECK(csv.find("n,false_alarm,miss\n") != std::string::npos);
  CHECK(count_lines(csv) == 2 + serial.rows.size());
}
