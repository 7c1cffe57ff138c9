// bica command line tool.
//
// Subcommands operate on plain files so every stage of the pipeline can be
// inspected or replaced: models and configs are JSON, matrices are the
// binmat text format (one row per line, characters 0/1, trailing newline).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bica/bica.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_jobs) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--seed", opts.seed, "master seed (overrides config)");
  cmd->add_option("--out", opts.out_dir, "output directory");
  if (with_jobs)
    cmd->add_option("--jobs", opts.jobs, "worker thread count")
        ->check(CLI::PositiveNumber);
}

bica::ExperimentConfig load_experiment_config(const CommonOpts& opts) {
  bica::ExperimentConfig config;
  if (!opts.config_path.empty())
    config = bica::experiment_config_from_json(bica::read_json_file(opts.config_path));
  if (opts.seed) config.seed = *opts.seed;
  config.validate();
  return config;
}

bica::ComparisonConfig load_comparison_config(const CommonOpts& opts) {
  bica::ComparisonConfig config;
  if (!opts.config_path.empty())
    config = bica::comparison_config_from_json(bica::read_json_file(opts.config_path));
  if (opts.seed) config.seed = *opts.seed;
  config.validate();
  return config;
}

fs::path ensure_out_dir(const CommonOpts& opts) {
  fs::path dir(opts.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw bica::Error("write failed: " + path.string());
}

// simulate: draw one scenario, one truth model, one activity matrix, and the
// noisy OR observations. Reproduces run 0 of a sweep with the same config.
int run_simulate(const CommonOpts& opts) {
  bica::ExperimentConfig config = load_experiment_config(opts);
  const std::size_t n = config.n_list.front();
  const std::size_t t_slots = config.t_list.front();
  const double noise = config.noise_list.front();

  const std::uint64_t run_seed = bica::derive_seed(config.seed, 0);
  auto truth = bica::detail::generate_truth(config, n, run_seed);
  bica::BinaryMatrix activities =
      bica::sample_activities(truth.model, truth.sampler, t_slots);
  bica::BinaryMatrix observations = bica::or_mix(truth.model.mixing(), activities);
  if (noise > 0.0)
    observations =
        bica::inject_noise(observations, noise, bica::derive_seed(run_seed, 3));

  fs::path dir = ensure_out_dir(opts);
  bica::write_json_file(bica::to_json(truth.scenario), (dir / "scenario.json").string());
  bica::write_json_file(bica::to_json(truth.model), (dir / "model.json").string());
  bica::write_matrix(activities, (dir / "activities.txt").string());
  bica::write_matrix(observations, (dir / "observations.txt").string());
  std::cout << "simulate: m=" << config.m << " n=" << n << " T=" << t_slots
            << " noise=" << bica::format_double(noise) << " -> " << dir.string()
            << "\n";
  return 0;
}

// infer: recover a source model from an observation matrix.
int run_infer(const CommonOpts& opts, const std::string& observations_path) {
  bica::ExperimentConfig config = load_experiment_config(opts);
  bica::BinaryMatrix observations = bica::read_matrix(observations_path);
  bica::FrequencyOracle oracle = bica::FrequencyOracle::from_observations(observations);

  bica::InferOptions options;
  options.epsilon = config.epsilon;
  options.cov_threshold = config.cov_threshold;
  options.confidence_z = config.confidence_z();
  bica::InferenceResult result = bica::infer_sources(oracle, options);

  fs::path dir = ensure_out_dir(opts);
  bica::write_json_file(bica::to_json(result), (dir / "inferred.json").string());
  std::cout << "infer: " << observations.rows() << " monitors, "
            << observations.cols() << " slots -> " << result.model.sources()
            << " sources, " << result.groups.size() << " groups\n";
  return 0;
}

// invert: recover MAP activities for each observed slot under a given model.
// With p_e in the config the noisy solver runs; otherwise the zero-error
// solver runs and any infeasible slot falls back to p_e = 0.01.
int run_invert(const CommonOpts& opts, const std::string& model_path,
               const std::string& observations_path) {
  bica::ExperimentConfig config = load_experiment_config(opts);
  bica::SourceModel model =
      bica::source_model_from_json(bica::read_json_file(model_path));
  bica::BinaryMatrix observations = bica::read_matrix(observations_path);
  if (observations.rows() != model.monitors())
    throw bica::DimensionError("observation rows do not match model monitors");

  const bool zero_error_mode = !config.p_e.has_value();
  const double p_e = config.p_e.value_or(0.01);
  std::optional<bica::ZeroErrorSolver> exact;
  std::optional<bica::MapSolver> noisy;
  if (zero_error_mode)
    exact.emplace(model);
  else
    noisy.emplace(model, p_e);

  const std::size_t t_count = observations.cols();
  bica::BinaryMatrix::Builder yhat(model.sources(), t_count);
  std::vector<double> log_posteriors(t_count);
  std::vector<bool> optimal_flags(t_count);
  std::vector<std::size_t> fallback_slots;
  for (std::size_t t = 0; t < t_count; ++t) {
    const bica::BinaryVector obs = observations.column(t);
    bica::MapSolution sol;
    if (zero_error_mode) {
      try {
        sol = exact->solve(obs);
      } catch (const bica::InfeasibilityError&) {
        if (!noisy) noisy.emplace(model, p_e);
        sol = noisy->solve(obs);
        fallback_slots.push_back(t);
      }
    } else {
      sol = noisy->solve(obs);
    }
    for (std::size_t j = 0; j < model.sources(); ++j)
      if (sol.y[j]) yhat.set(j, t);
    log_posteriors[t] = sol.log_posterior;
    optimal_flags[t] = sol.optimal;
  }

  fs::path dir = ensure_out_dir(opts);
  bica::write_matrix(std::move(yhat).build(), (dir / "yhat.txt").string());
  bica::Json sidecar;
  sidecar["slots"] = t_count;
  sidecar["p_e"] = zero_error_mode ? bica::Json(nullptr) : bica::Json(p_e);
  sidecar["log_posterior"] = log_posteriors;
  sidecar["optimal"] = optimal_flags;
  if (zero_error_mode) sidecar["fallback_slots"] = fallback_slots;
  bica::write_json_file(sidecar, (dir / "yhat.json").string());
  std::cout << "invert: " << t_count << " slots -> " << dir.string() << "\n";
  return 0;
}

// eval: score an inferred model (and optionally recovered activities)
// against the ground truth.
int run_eval(const CommonOpts& opts, const std::string& truth_path,
             const std::string& inferred_path, const std::string& truth_activities,
             const std::string& recovered_activities) {
  bica::SourceModel truth =
      bica::source_model_from_json(bica::read_json_file(truth_path));
  bica::SourceModel inferred =
      bica::source_model_from_json(bica::read_json_file(inferred_path));

  bica::MatchResult match = bica::match_structures(truth, inferred);
  bica::Json metrics;
  metrics["structure_error_ratio"] = bica::structure_error_ratio(truth, match);
  auto prob = bica::prob_error_ratio(truth.p(), match.matched_p);
  metrics["prob_error_ratio"] = prob ? bica::Json(*prob) : bica::Json(nullptr);
  metrics["miscount"] = bica::miscount(truth.sources(), inferred.sources());
  if (!truth_activities.empty()) {
    bica::BinaryMatrix y_true = bica::read_matrix(truth_activities);
    bica::BinaryMatrix y_hat = bica::read_matrix(recovered_activities);
    metrics["activity_error_ratio"] = bica::activity_error_ratio(y_true, y_hat);
  } else {
    metrics["activity_error_ratio"] = nullptr;
  }

  fs::path dir = ensure_out_dir(opts);
  bica::write_json_file(metrics, (dir / "metrics.json").string());
  std::cout << metrics.dump(2) << "\n";
  return 0;
}

// sweep: the full evaluation grid. Exit 0 only if every cell produced at
// least one successful run.
int run_sweep(const CommonOpts& opts) {
  bica::ExperimentConfig config = load_experiment_config(opts);
  bica::ExperimentReport report = bica::run_sweep(config, opts.jobs);
  fs::path dir = ensure_out_dir(opts);
  bica::write_report(report, dir.string());
  std::cout << "sweep: " << report.runs.size() << " runs ok, "
            << report.failures.size() << " failures -> " << dir.string() << "\n";
  return bica::all_cells_succeeded(report) ? 0 : 1;
}

// compare-models: OR-model versus linear-mixture detector disagreement.
int run_compare(const CommonOpts& opts) {
  bica::ComparisonConfig config = load_comparison_config(opts);
  bica::ComparisonReport report = bica::run_model_comparison(config, opts.jobs);
  fs::path dir = ensure_out_dir(opts);
  bica::write_comparison(report, dir.string());
  std::cout << "compare-models: " << report.rows.size() << " rows -> "
            << dir.string() << "\n";
  for (std::size_t n : config.n_list) {
    bool any = false;
    for (const auto& row : report.rows)
      if (row.n == n) any = true;
    if (!any) return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boolean ICA toolkit"};
  app.require_subcommand(1);

  CommonOpts simulate_opts, infer_opts, invert_opts, eval_opts, sweep_opts,
      compare_opts;
  std::string observations_path, model_path, truth_path, inferred_path;
  std::string truth_activities, recovered_activities;

  CLI::App* simulate = app.add_subcommand("simulate", "generate a radio scenario");
  add_common(simulate, simulate_opts, false);

  CLI::App* infer = app.add_subcommand("infer", "recover sources from observations");
  infer->add_option("observations", observations_path, "binmat observation file")
      ->required();
  add_common(infer, infer_opts, false);

  CLI::App* invert = app.add_subcommand("invert", "recover MAP activities");
  invert->add_option("model", model_path, "source model JSON")->required();
  invert->add_option("observations", observations_path, "binmat observation file")
      ->required();
  add_common(invert, invert_opts, false);

  CLI::App* eval = app.add_subcommand("eval", "score inferred against truth");
  eval->add_option("truth", truth_path, "true model JSON")->required();
  eval->add_option("inferred", inferred_path, "inferred model JSON")->required();
  eval->add_option("--activities", truth_activities, "true activities binmat");
  eval->add_option("--recovered", recovered_activities, "recovered activities binmat");
  add_common(eval, eval_opts, false);

  CLI::App* sweep = app.add_subcommand("sweep", "run the evaluation grid");
  add_common(sweep, sweep_opts, true);

  CLI::App* compare = app.add_subcommand("compare-models", "OR versus linear detector");
  add_common(compare, compare_opts, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return run_simulate(simulate_opts);
    if (infer->parsed()) return run_infer(infer_opts, observations_path);
    if (invert->parsed())
      return run_invert(invert_opts, model_path, observations_path);
    if (eval->parsed()) {
      if (truth_activities.empty() != recovered_activities.empty())
        throw bica::ParameterError(
            "--activities and --recovered must be given together");
      return run_eval(eval_opts, truth_path, inferred_path, truth_activities,
                      recovered_activities);
    }
    if (sweep->parsed()) return run_sweep(sweep_opts);
    if (compare->parsed()) return run_compare(compare_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
