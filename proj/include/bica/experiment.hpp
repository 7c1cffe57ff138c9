#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "bica/errors.hpp"
#include "bica/infer.hpp"
#include "bica/inverse.hpp"
#include "bica/metrics.hpp"
#include "bica/mixture.hpp"
#include "bica/oracle.hpp"
#include "bica/radio.hpp"
#include "bica/rng.hpp"
#include "bica/serialize.hpp"

namespace bica {

inline constexpr const char* kVersion = "0.1.0";

enum class ActivityKind { markov, bernoulli };

inline ActivityKind activity_kind_from_string(const std::string& s) {
  if (s == "markov") return ActivityKind::markov;
  if (s == "bernoulli") return ActivityKind::bernoulli;
  throw ParameterError("activity must be \"markov\" or \"bernoulli\"");
}

inline std::string to_string(ActivityKind kind) {
  return kind == ActivityKind::markov ? "markov" : "bernoulli";
}

// One sweep: every (n, T, noise) cell, `runs` random scenarios each. All
// randomness derives from `seed` and the run id, so reruns and different
// thread counts reproduce every number.
struct ExperimentConfig {
  std::size_t m = 10;
  std::vector<std::size_t> n_list{5, 10, 15, 20};
  std::vector<std::size_t> t_list{10000};
  std::vector<double> noise_list{0.0, 0.02, 0.05};
  std::size_t runs = 50;
  double epsilon = kDefaultEpsilon;
  // Decomposition significance level; translated to a normal quantile.
  double cov_confidence = 0.975;
  // Fixed covariance threshold; overrides the confidence rule when set.
  std::optional<double> cov_threshold;
  ActivityKind activity = ActivityKind::markov;
  // Channel error rate for inversion; default mirrors the injected noise
  // (zero-error solver with a 0.01 fallback when the noise is zero).
  std::optional<double> p_e;
  bool record_timings = true;
  std::uint64_t seed = 1;
  ScenarioParams scenario{};  // monitor_count/pu_count come from m and n_list

  double confidence_z() const {
    if (!(cov_confidence > 0.0 && cov_confidence < 1.0))
      throw ParameterError("cov_confidence must lie in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(),
                                 cov_confidence);
  }

  void validate() const {
    if (m == 0 || m > kMaxTableMonitors)
      throw ParameterError("m must lie in [1,20]");
    if (n_list.empty() || t_list.empty() || noise_list.empty() || runs == 0)
      throw ParameterError("n_list, t_list, noise_list, runs must be nonempty");
    for (std::size_t t : t_list)
      if (t == 0) throw ParameterError("T must be positive");
    for (double e : noise_list)
      if (!(e >= 0.0 && e < 0.5))
        throw ParameterError("noise rate must lie in [0, 0.5)");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw ParameterError("epsilon must lie in (0,1)");
    if (p_e && !(*p_e >= 0.0 && *p_e < 0.5))
      throw ParameterError("p_e must lie in [0, 0.5)");
    if (cov_threshold && !(*cov_threshold >= 0.0))
      throw ParameterError("cov_threshold must be nonnegative");
    confidence_z();
  }
};

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["m"] = c.m;
  j["n_list"] = c.n_list;
  j["t_list"] = c.t_list;
  j["noise_list"] = c.noise_list;
  j["runs"] = c.runs;
  j["epsilon"] = c.epsilon;
  j["cov_confidence"] = c.cov_confidence;
  if (c.cov_threshold) j["cov_threshold"] = *c.cov_threshold;
  j["activity"] = to_string(c.activity);
  if (c.p_e) j["p_e"] = *c.p_e;
  j["record_timings"] = c.record_timings;
  j["seed"] = c.seed;
  j["scenario"] = {{"area_m", c.scenario.area_m},
                   {"alpha", c.scenario.alpha},
                   {"tx_power_mw", c.scenario.tx_power_mw},
                   {"noise_floor_dbm", c.scenario.noise_floor_dbm},
                   {"threshold_db", c.scenario.threshold_db},
                   {"gain_const", c.scenario.gain_const}};
  return j;
}

// Strict parser: unknown keys are rejected so typos cannot silently fall
// back to defaults.
inline ExperimentConfig experiment_config_from_json(const Json& j) {
  static const std::vector<std::string> known{
      "m",        "n_list",         "t_list",   "noise_list",
      "runs",     "epsilon",        "cov_confidence", "cov_threshold",
      "activity", "p_e",            "record_timings", "seed",
      "scenario"};
  static const std::vector<std::string> known_scenario{
      "area_m",          "alpha",        "tx_power_mw",
      "noise_floor_dbm", "threshold_db", "gain_const"};
  if (!j.is_object()) throw ParseError("config must be a JSON object", 1);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError("unknown config key \"" + key + "\"", 1);
  }
  ExperimentConfig c;
  try {
    if (j.contains("m")) c.m = j["m"].get<std::size_t>();
    if (j.contains("n_list")) c.n_list = j["n_list"].get<std::vector<std::size_t>>();
    if (j.contains("t_list")) c.t_list = j["t_list"].get<std::vector<std::size_t>>();
    if (j.contains("noise_list"))
      c.noise_list = j["noise_list"].get<std::vector<double>>();
    if (j.contains("runs")) c.runs = j["runs"].get<std::size_t>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("cov_confidence"))
      c.cov_confidence = j["cov_confidence"].get<double>();
    if (j.contains("cov_threshold"))
      c.cov_threshold = j["cov_threshold"].get<double>();
    if (j.contains("activity"))
      c.activity = activity_kind_from_string(j["activity"].get<std::string>());
    if (j.contains("p_e")) c.p_e = j["p_e"].get<double>();
    if (j.contains("record_timings"))
      c.record_timings = j["record_timings"].get<bool>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("scenario")) {
      const Json& s = j["scenario"];
      if (!s.is_object()) throw ParseError("scenario must be an object", 1);
      for (const auto& [key, value] : s.items()) {
        (void)value;
        if (std::find(known_scenario.begin(), known_scenario.end(), key) ==
            known_scenario.end())
          throw ParseError("unknown scenario key \"" + key + "\"", 1);
      }
      if (s.contains("area_m")) c.scenario.area_m = s["area_m"].get<double>();
      if (s.contains("alpha")) c.scenario.alpha = s["alpha"].get<double>();
      if (s.contains("tx_power_mw"))
        c.scenario.tx_power_mw = s["tx_power_mw"].get<double>();
      if (s.contains("noise_floor_dbm"))
        c.scenario.noise_floor_dbm = s["noise_floor_dbm"].get<double>();
      if (s.contains("threshold_db"))
        c.scenario.threshold_db = s["threshold_db"].get<double>();
      if (s.contains("gain_const"))
        c.scenario.gain_const = s["gain_const"].get<double>();
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("config: ") + e.what(), 1);
  }
  c.validate();
  return c;
}

struct RunMetrics {
  std::size_t run_id = 0;
  std::size_t n = 0;
  std::size_t t_slots = 0;
  double noise = 0.0;
  double structure_error = 0.0;
  std::optional<double> prob_error;
  long long count_error = 0;
  double activity_error = 0.0;
  double bica_seconds = 0.0;
  double inverse_seconds = 0.0;
};

struct RunFailure {
  std::size_t run_id = 0;
  std::size_t n = 0;
  std::size_t t_slots = 0;
  double noise = 0.0;
  std::string error;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RunMetrics> runs;
  std::vector<RunFailure> failures;
};

namespace detail {

struct RunSpec {
  std::size_t run_id, n, t_slots;
  double noise;
};

// True generating model for one run: a random radio scenario and random
// per-source activity statistics.
struct GeneratedTruth {
  Scenario scenario;
  SourceModel model;
  ActivitySampler sampler;
};

// A monitor layout can make n distinct visible columns unplaceable (too few
// reachable visibility masks); such layouts are redrawn from a derived seed
// chain so every run still gets a valid scenario deterministically.
inline constexpr std::size_t kScenarioRetries = 64;

inline GeneratedTruth generate_truth(const ExperimentConfig& config,
                                     std::size_t n, std::uint64_t run_seed) {
  ScenarioParams params = config.scenario;
  params.monitor_count = config.m;
  params.pu_count = n;
  GeneratedTruth truth;
  std::uint64_t scenario_seed = derive_seed(run_seed, 0);
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      truth.scenario = generate_scenario(params, scenario_seed);
      break;
    } catch (const InfeasibilityError&) {
      if (attempt + 1 >= kScenarioRetries) throw;
      scenario_seed = derive_seed(scenario_seed, 1);
    }
  }
  MixingMatrix g = derive_mixing_matrix(truth.scenario);
  SplitMix64 stat_rng(derive_seed(run_seed, 1));
  std::vector<double> p(n);
  if (config.activity == ActivityKind::markov) {
    std::vector<double> p01(n), p10(n);
    for (std::size_t j = 0; j < n; ++j) {
      p01[j] = stat_rng.uniform_open01();
      p10[j] = stat_rng.uniform_open01();
      p[j] = MarkovActivity{p01[j], p10[j]}.stationary();
    }
    truth.sampler = ActivitySampler::markov(p01, p10, derive_seed(run_seed, 2));
  } else {
    for (std::size_t j = 0; j < n; ++j) p[j] = stat_rng.uniform_open01();
    truth.sampler = ActivitySampler::bernoulli(n, derive_seed(run_seed, 2));
  }
  truth.model = SourceModel(std::move(g), std::move(p));
  return truth;
}

// MAP inversion of every slot under the inferred model; rows of the result
// follow the true source order via the match permutation (all-zero row for
// a true source whose match is a pad).
inline BinaryMatrix invert_activities(const SourceModel& inferred,
                                      const MatchResult& match,
                                      const BinaryMatrix& observations,
                                      double noise,
                                      const std::optional<double>& p_e_override) {
  const std::size_t t_count = observations.cols();
  const std::size_t n_true = match.true_sources;
  BinaryMatrix::Builder yhat(n_true, t_count);
  const bool zero_error_mode = !p_e_override && noise == 0.0;
  const double p_e = p_e_override ? *p_e_override : (noise > 0.0 ? noise : 0.01);
  std::optional<ZeroErrorSolver> exact;
  std::optional<MapSolver> noisy;
  if (zero_error_mode)
    exact.emplace(inferred);
  else
    noisy.emplace(inferred, p_e);
  for (std::size_t t = 0; t < t_count; ++t) {
    const BinaryVector obs = observations.column(t);
    MapSolution sol;
    if (zero_error_mode) {
      try {
        sol = exact->solve(obs);
      } catch (const InfeasibilityError&) {
        if (!noisy) noisy.emplace(inferred, p_e);
        sol = noisy->solve(obs);
      }
    } else {
      sol = noisy->solve(obs);
    }
    for (std::size_t i = 0; i < n_true; ++i) {
      const std::size_t j = match.permutation[i];
      if (j < match.inferred_sources && sol.y[j]) yhat.set(i, t);
    }
  }
  return std::move(yhat).build();
}

inline RunMetrics execute_run(const ExperimentConfig& config,
                              const RunSpec& spec) {
  const std::uint64_t run_seed = derive_seed(config.seed, spec.run_id);
  const GeneratedTruth truth = generate_truth(config, spec.n, run_seed);
  const BinaryMatrix activities =
      sample_activities(truth.model, truth.sampler, spec.t_slots);
  BinaryMatrix observations = or_mix(truth.model.mixing(), activities);
  if (spec.noise > 0.0)
    observations =
        inject_noise(observations, spec.noise, derive_seed(run_seed, 3));
  const FrequencyOracle oracle = FrequencyOracle::from_observations(observations);

  InferOptions options;
  options.epsilon = config.epsilon;
  options.cov_threshold = config.cov_threshold;
  options.confidence_z = config.confidence_z();

  const auto t0 = std::chrono::steady_clock::now();
  const InferenceResult inferred = infer_sources(oracle, options);
  const auto t1 = std::chrono::steady_clock::now();

  const MatchResult match = match_structures(truth.model, inferred.model);

  const auto t2 = std::chrono::steady_clock::now();
  const BinaryMatrix recovered = invert_activities(
      inferred.model, match, observations, spec.noise, config.p_e);
  const auto t3 = std::chrono::steady_clock::now();

  RunMetrics out;
  out.run_id = spec.run_id;
  out.n = spec.n;
  out.t_slots = spec.t_slots;
  out.noise = spec.noise;
  out.structure_error = structure_error_ratio(truth.model, match);
  out.prob_error = prob_error_ratio(truth.model.p(), match.matched_p);
  out.count_error = miscount(truth.model.sources(), inferred.model.sources());
  out.activity_error = activity_error_ratio(activities, recovered);
  if (config.record_timings) {
    out.bica_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.inverse_seconds = std::chrono::duration<double>(t3 - t2).count();
  }
  return out;
}

template <typename Spec, typename Work>
inline void parallel_for(const std::vector<Spec>& specs, std::size_t jobs,
                         Work&& work) {
  const std::size_t workers = std::max<std::size_t>(1, jobs);
  if (workers == 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= specs.size()) return;
        work(i);
      }
    });
  for (std::thread& t : pool) t.join();
}

}  // namespace detail

// Runs every cell of the sweep. Individual run failures are recorded, not
// fatal; results come back ordered by run id regardless of thread count.
inline ExperimentReport run_sweep(const ExperimentConfig& config,
                                  std::size_t jobs = 1) {
  config.validate();
  std::vector<detail::RunSpec> specs;
  std::size_t run_id = 0;
  for (std::size_t n : config.n_list)
    for (std::size_t t : config.t_list)
      for (double noise : config.noise_list)
        for (std::size_t r = 0; r < config.runs; ++r)
          specs.push_back({run_id++, n, t, noise});
  std::vector<std::optional<RunMetrics>> results(specs.size());
  std::vector<std::optional<RunFailure>> failures(specs.size());
  detail::parallel_for(specs, jobs, [&](std::size_t i) {
    try {
      results[i] = detail::execute_run(config, specs[i]);
    } catch (const std::exception& e) {
      failures[i] = RunFailure{specs[i].run_id, specs[i].n, specs[i].t_slots,
                               specs[i].noise, e.what()};
    }
  });
  ExperimentReport report;
  report.config = config;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (results[i]) report.runs.push_back(*results[i]);
    if (failures[i]) report.failures.push_back(*failures[i]);
  }
  return report;
}

// True when every (n, T, noise) cell produced at least one successful run.
inline bool all_cells_succeeded(const ExperimentReport& report) {
  for (std::size_t n : report.config.n_list)
    for (std::size_t t : report.config.t_list)
      for (double noise : report.config.noise_list) {
        bool ok = false;
        for (const RunMetrics& r : report.runs)
          ok = ok || (r.n == n && r.t_slots == t && r.noise == noise);
        if (!ok) return false;
      }
  return true;
}

namespace detail {

struct Welford {
  std::size_t count = 0;
  double sum = 0.0;
  double sumsq = 0.0;
  void add(double v) {
    ++count;
    sum += v;
    sumsq += v * v;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  // Sample standard deviation; 0 for fewer than two points.
  double stddev() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double var = (sumsq - sum * sum / n) / (n - 1.0);
    return var > 0.0 ? std::sqrt(var) : 0.0;
  }
};

inline std::string csv_header_comment(const ExperimentConfig& config,
                                      const char* kind) {
  return std::string("# bica ") + kVersion + " " + kind +
         " config=" + to_json(config).dump();
}

}  // namespace detail

inline std::string runs_csv(const ExperimentReport& report) {
  std::string out = detail::csv_header_comment(report.config, "sweep") + "\n";
  out +=
      "run_id,n,T,noise,structure_error_ratio,prob_error_ratio,miscount,"
      "activity_error_ratio,bica_seconds,inverse_seconds\n";
  for (const RunMetrics& r : report.runs) {
    out += std::to_string(r.run_id) + ',' + std::to_string(r.n) + ',' +
           std::to_string(r.t_slots) + ',' + format_double(r.noise) + ',' +
           format_double(r.structure_error) + ',' +
           (r.prob_error ? format_double(*r.prob_error) : std::string()) + ',' +
           std::to_string(r.count_error) + ',' +
           format_double(r.activity_error) + ',' +
           format_double(r.bica_seconds) + ',' +
           format_double(r.inverse_seconds) + '\n';
  }
  return out;
}

inline std::string aggregate_csv(const ExperimentReport& report) {
  std::string out = detail::csv_header_comment(report.config, "sweep") + "\n";
  out +=
      "n,T,noise,runs_requested,runs_ok,structure_error_mean,"
      "structure_error_std,prob_error_mean,prob_error_std,miscount_mean,"
      "abs_miscount_mean,activity_error_mean,activity_error_std,"
      "bica_seconds_mean,inverse_seconds_mean\n";
  for (std::size_t n : report.config.n_list)
    for (std::size_t t : report.config.t_list)
      for (double noise : report.config.noise_list) {
        detail::Welford structure, prob, count_err, abs_count, activity, tb, ti;
        for (const RunMetrics& r : report.runs) {
          if (r.n != n || r.t_slots != t || r.noise != noise) continue;
          structure.add(r.structure_error);
          if (r.prob_error) prob.add(*r.prob_error);
          count_err.add(static_cast<double>(r.count_error));
          abs_count.add(std::abs(static_cast<double>(r.count_error)));
          activity.add(r.activity_error);
          tb.add(r.bica_seconds);
          ti.add(r.inverse_seconds);
        }
        out += std::to_string(n) + ',' + std::to_string(t) + ',' +
               format_double(noise) + ',' + std::to_string(report.config.runs) +
               ',' + std::to_string(structure.count) + ',' +
               format_double(structure.mean()) + ',' +
               format_double(structure.stddev()) + ',' +
               (prob.count ? format_double(prob.mean()) : std::string()) + ',' +
               (prob.count ? format_double(prob.stddev()) : std::string()) +
               ',' + format_double(count_err.mean()) + ',' +
               format_double(abs_count.mean()) + ',' +
               format_double(activity.mean()) + ',' +
               format_double(activity.stddev()) + ',' +
               format_double(tb.mean()) + ',' + format_double(ti.mean()) + '\n';
      }
  return out;
}

inline Json provenance_json(const ExperimentReport& report) {
  Json j;
  j["tool"] = "bica";
  j["version"] = kVersion;
  j["kind"] = "sweep";
  j["config"] = to_json(report.config);
  Json cells = Json::array();
  for (std::size_t n : report.config.n_list)
    for (std::size_t t : report.config.t_list)
      for (double noise : report.config.noise_list) {
        std::size_t ok = 0;
        for (const RunMetrics& r : report.runs)
          if (r.n == n && r.t_slots == t && r.noise == noise) ++ok;
        cells.push_back(
            {{"n", n}, {"T", t}, {"noise", noise}, {"runs_ok", ok}});
      }
  j["cells"] = std::move(cells);
  Json failures = Json::array();
  for (const RunFailure& f : report.failures)
    failures.push_back({{"run_id", f.run_id},
                        {"n", f.n},
                        {"T", f.t_slots},
                        {"noise", f.noise},
                        {"error", f.error}});
  j["failures"] = std::move(failures);
  return j;
}

inline void write_report(const ExperimentReport& report,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto write = [&](const std::string& name, const std::string& text) {
    const std::string path = out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path);
    out << text;
    if (!out) throw Error("write failed: " + path);
  };
  write("runs.csv", runs_csv(report));
  write("aggregate.csv", aggregate_csv(report));
  write("provenance.json", provenance_json(report).dump(2) + "\n");
}

// OR-versus-linear comparison sweep.
struct ComparisonConfig {
  std::size_t m = 10;
  std::vector<std::size_t> n_list{5, 10, 15, 20};
  std::size_t t_slots = 5000;
  std::size_t runs = 10;
  ActivityKind activity = ActivityKind::markov;
  Fading fading = Fading::rayleigh;
  double noise_sigma_mw = 0.0;
  std::uint64_t seed = 1;
  ScenarioParams scenario{};

  void validate() const {
    if (m == 0 || m > 32) throw ParameterError("m must lie in [1,32]");
    if (n_list.empty() || runs == 0 || t_slots == 0)
      throw ParameterError("n_list, runs, t_slots must be nonempty");
    if (!(noise_sigma_mw >= 0.0))
      throw ParameterError("noise sigma must be nonnegative");
  }
};

inline std::string to_string(Fading fading) {
  return fading == Fading::rayleigh ? "rayleigh" : "none";
}

inline Fading fading_from_string(const std::string& s) {
  if (s == "rayleigh") return Fading::rayleigh;
  if (s == "none") return Fading::none;
  throw ParameterError("fading must be \"rayleigh\" or \"none\"");
}

inline Json to_json(const ComparisonConfig& c) {
  Json j;
  j["m"] = c.m;
  j["n_list"] = c.n_list;
  j["t_slots"] = c.t_slots;
  j["runs"] = c.runs;
  j["activity"] = to_string(c.activity);
  j["fading"] = to_string(c.fading);
  j["noise_sigma_mw"] = c.noise_sigma_mw;
  j["seed"] = c.seed;
  j["scenario"] = {{"area_m", c.scenario.area_m},
                   {"alpha", c.scenario.alpha},
                   {"tx_power_mw", c.scenario.tx_power_mw},
                   {"noise_floor_dbm", c.scenario.noise_floor_dbm},
                   {"threshold_db", c.scenario.threshold_db},
                   {"gain_const", c.scenario.gain_const}};
  return j;
}

inline ComparisonConfig comparison_config_from_json(const Json& j) {
  static const std::vector<std::string> known{
      "m",      "n_list", "t_slots",        "runs",  "activity",
      "fading", "seed",   "noise_sigma_mw", "scenario"};
  static const std::vector<std::string> known_scenario{
      "area_m",          "alpha",        "tx_power_mw",
      "noise_floor_dbm", "threshold_db", "gain_const"};
  if (!j.is_object()) throw ParseError("config must be a JSON object", 1);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError("unknown config key \"" + key + "\"", 1);
  }
  ComparisonConfig c;
  try {
    if (j.contains("m")) c.m = j["m"].get<std::size_t>();
    if (j.contains("n_list")) c.n_list = j["n_list"].get<std::vector<std::size_t>>();
    if (j.contains("t_slots")) c.t_slots = j["t_slots"].get<std::size_t>();
    if (j.contains("runs")) c.runs = j["runs"].get<std::size_t>();
    if (j.contains("activity"))
      c.activity = activity_kind_from_string(j["activity"].get<std::string>());
    if (j.contains("fading"))
      c.fading = fading_from_string(j["fading"].get<std::string>());
    if (j.contains("noise_sigma_mw"))
      c.noise_sigma_mw = j["noise_sigma_mw"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("scenario")) {
      const Json& s = j["scenario"];
      if (!s.is_object()) throw ParseError("scenario must be an object", 1);
      for (const auto& [key, value] : s.items()) {
        (void)value;
        if (std::find(known_scenario.begin(), known_scenario.end(), key) ==
            known_scenario.end())
          throw ParseError("unknown scenario key \"" + key + "\"", 1);
      }
      if (s.contains("area_m")) c.scenario.area_m = s["area_m"].get<double>();
      if (s.contains("alpha")) c.scenario.alpha = s["alpha"].get<double>();
      if (s.contains("tx_power_mw"))
        c.scenario.tx_power_mw = s["tx_power_mw"].get<double>();
      if (s.contains("noise_floor_dbm"))
        c.scenario.noise_floor_dbm = s["noise_floor_dbm"].get<double>();
      if (s.contains("threshold_db"))
        c.scenario.threshold_db = s["threshold_db"].get<double>();
      if (s.contains("gain_const"))
        c.scenario.gain_const = s["gain_const"].get<double>();
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("config: ") + e.what(), 1);
  }
  c.validate();
  return c;
}

struct ComparisonRow {
  std::size_t run_id = 0;
  std::size_t n = 0;
  std::optional<double> false_alarm;
  std::optional<double> miss;
};

struct ComparisonReport {
  ComparisonConfig config;
  std::vector<ComparisonRow> rows;
  std::vector<RunFailure> failures;
};

inline ComparisonReport run_model_comparison(const ComparisonConfig& config,
                                             std::size_t jobs = 1) {
  config.validate();
  struct Spec {
    std::size_t run_id, n;
  };
  std::vector<Spec> specs;
  std::size_t run_id = 0;
  for (std::size_t n : config.n_list)
    for (std::size_t r = 0; r < config.runs; ++r) specs.push_back({run_id++, n});
  std::vector<std::optional<ComparisonRow>> rows(specs.size());
  std::vector<std::optional<RunFailure>> failures(specs.size());
  ExperimentConfig truth_config;
  truth_config.m = config.m;
  truth_config.activity = config.activity;
  truth_config.scenario = config.scenario;
  truth_config.seed = config.seed;
  detail::parallel_for(specs, jobs, [&](std::size_t i) {
    const Spec spec = specs[i];
    try {
      const std::uint64_t run_seed = derive_seed(config.seed, spec.run_id);
      const detail::GeneratedTruth truth =
          detail::generate_truth(truth_config, spec.n, run_seed);
      const BinaryMatrix activities =
          sample_activities(truth.model, truth.sampler, config.t_slots);
      const BinaryMatrix x_or = or_mix(truth.model.mixing(), activities);
      const PowerMatrix v =
          simulate_linear(truth.scenario, activities, config.fading,
                          derive_seed(run_seed, 4), config.noise_sigma_mw);
      const BinaryMatrix x_linear = quantize(v, truth.scenario.tau_mw());
      const ModelComparison cmp = compare_models(x_or, x_linear);
      rows[i] = ComparisonRow{spec.run_id, spec.n, cmp.false_alarm, cmp.miss};
    } catch (const std::exception& e) {
      failures[i] =
          RunFailure{spec.run_id, spec.n, config.t_slots, 0.0, e.what()};
    }
  });
  ComparisonReport report;
  report.config = config;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (rows[i]) report.rows.push_back(*rows[i]);
    if (failures[i]) report.failures.push_back(*failures[i]);
  }
  return report;
}

inline std::string comparison_csv(const ComparisonReport& report) {
  std::string out = std::string("# bica ") + kVersion + " compare-models seed=" +
                    std::to_string(report.config.seed) + "\n";
  out += "n,false_alarm,miss\n";
  for (const ComparisonRow& r : report.rows)
    out += std::to_string(r.n) + ',' +
           (r.false_alarm ? format_double(*r.false_alarm) : std::string()) +
           ',' + (r.miss ? format_double(*r.miss) : std::string()) + '\n';
  return out;
}

inline void write_comparison(const ComparisonReport& report,
                             const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/comparison.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  out << comparison_csv(report);
  if (!out) throw Error("write failed: " + path);
}

}  // namespace bica
