#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bica/errors.hpp"
#include "bica/mixture.hpp"
#include "bica/oracle.hpp"

namespace bica {

// Recovered probabilities are capped at 1 - kProbDelta so the ratio and
// product denominators downstream stay alive; kProbDelta is also the floor
// below which the corner-candidate denominator counts as degenerate.
inline constexpr double kProbDelta = 1e-6;
inline constexpr double kDefaultEpsilon = 0.01;

// Upper 97.5% standard normal quantile; default z for the covariance
// significance threshold.
inline constexpr double kDefaultConfidenceZ = 1.959963984540054;

// Covariances this small are treated as zero even when no sample count is
// available (exact tables carry rounding dust on independent pairs).
inline constexpr double kCovarianceFloor = 1e-12;

// Output of the recursive separation. Candidate sources are identified by
// their visibility bitmask over the oracle's monitors; the model keeps the
// surviving candidates (p >= epsilon) in ascending bitmask order. `groups`
// lists the monitor partition the inference ran on (single group when no
// decomposition was applied).
struct InferenceResult {
  SourceModel model;
  double epsilon = kDefaultEpsilon;
  std::vector<std::vector<std::size_t>> groups;
};

// Order in which candidate bitmasks received their final probability; one
// entry per candidate, exactly once each. Diagnostic aid for the recursion.
struct RecursionTrace {
  std::vector<std::uint32_t> finalized;
};

namespace detail {

inline double clamp_probability(double v) noexcept {
  if (v < 0.0) return 0.0;
  if (v > 1.0 - kProbDelta) return 1.0 - kProbDelta;
  return v;
}

// One level of the recursion over a normalized 2^m table. Returns the 2^m
// candidate probabilities indexed by bitmask (entry 0 unused).
//
// The top monitor splits the table in half. Conditioning on "top monitor
// silent" removes every candidate that could reach it, so the lower-half
// recursion on the conditional table yields final probabilities for
// candidates not seeing the top monitor. The same recursion on the
// unconditional lower-half marginal sees those candidates' probabilities
// inflated by their top-seeing partners, and the inflation factors out as
//   p[s | top] = 1 - (1 - marginal[s]) / (1 - conditional[s]).
// The candidate seen only by the top monitor is recovered last from the
// probability of the "top fires alone" pattern divided by the probability
// that every other candidate is silent.
//
// Candidates below epsilon are zeroed at every level, not just at the end:
// on sampled tables the sub-results feed the ratio and product formulas
// above them, and carrying estimation dust there compounds multiplicatively.
//
// `allowed`, when given, pins candidates to zero a priori (no estimate is
// ever formed for them); indices below 2^(m-1) keep their meaning across
// recursion levels, so the same array serves every level.
//
// `strict` selects how degenerate intermediates are treated. On an exact
// distribution a vanished conditional mass or corner denominator is a
// property of the model itself (it is not invertible) and raises the
// degenerate-source error. On sampled data the same conditions are sample
// starvation: the estimator stays total, treating an exhausted conditional
// branch as carrying no evidence and clamping an underflowing corner ratio,
// and the per-level pruning disposes of the residue.

// Replays the order in which a recursion of the given size finalizes its
// candidates, for trace bookkeeping of branches that were skipped whole.
inline void push_canonical_order(std::size_t m, RecursionTrace* trace) {
  if (m == 1) {
    trace->finalized.push_back(1);
    return;
  }
  push_canonical_order(m - 1, trace);
  const std::size_t half = std::size_t{1} << (m - 1);
  for (std::size_t s = 1; s < half; ++s)
    trace->finalized.push_back(static_cast<std::uint32_t>(s + half));
  trace->finalized.push_back(static_cast<std::uint32_t>(half));
}

inline std::vector<double> recover_from_table(std::size_t m,
                                              std::vector<double> table,
                                              double epsilon, bool strict,
                                              const std::vector<char>* allowed,
                                              RecursionTrace* trace) {
  std::vector<double> p(std::size_t{1} << m, 0.0);
  if (m == 1) {
    p[1] = clamp_probability(table[1]);
    if (p[1] < epsilon) p[1] = 0.0;
    if (trace) trace->finalized.push_back(1);
    return p;
  }
  const std::size_t half = std::size_t{1} << (m - 1);
  double silent_mass = 0.0;
  for (std::size_t s = 0; s < half; ++s) silent_mass += table[s];
  if (silent_mass <= 0.0 && strict)
    throw DegenerateSourceError(
        "monitor " + std::to_string(m) + " never observed silent",
        static_cast<std::uint32_t>(half));
  std::vector<double> marginal(half);
  for (std::size_t s = 0; s < half; ++s)
    marginal[s] = table[s] + table[s | half];
  const double corner_numerator = table[half];
  std::vector<double> lower;
  if (silent_mass > 0.0) {
    std::vector<double> conditional(half);
    for (std::size_t s = 0; s < half; ++s)
      conditional[s] = table[s] / silent_mass;
    table.clear();
    lower = recover_from_table(m - 1, std::move(conditional), epsilon, strict,
                               allowed, trace);
  } else {
    // Top monitor never silent in-sample: the conditional branch carries no
    // evidence, so the lower-half candidates get nothing and the marginal
    // mass flows to their top-seeing partners through the inflation formula.
    table.clear();
    lower.assign(half, 0.0);
    if (trace) push_canonical_order(m - 1, trace);
  }
  const std::vector<double> inflated =
      recover_from_table(m - 1, std::move(marginal), epsilon, strict,
                         allowed, nullptr);
  for (std::size_t s = 1; s < half; ++s) {
    p[s] = lower[s];
    if (!allowed || (*allowed)[s + half])
      p[s + half] =
          clamp_probability(1.0 - (1.0 - inflated[s]) / (1.0 - lower[s]));
    if (trace) trace->finalized.push_back(static_cast<std::uint32_t>(s + half));
  }
  // Zero mass on the "top fires alone" pattern already pins the corner
  // candidate to zero (its probability is a factor of that mass), so the
  // division and its degeneracy guard only apply when the numerator is
  // positive. Otherwise many strong candidates would shrink the denominator
  // below the guard and kill a recovery that never needed the ratio.
  if (corner_numerator > 0.0) {
    double denominator = 1.0;
    for (std::size_t s = 1; s < p.size(); ++s)
      if (s != half) denominator *= 1.0 - p[s];
    if (denominator < kProbDelta && strict)
      throw DegenerateSourceError("corner denominator vanished",
                                  static_cast<std::uint32_t>(half));
    p[half] = denominator > 0.0
                  ? clamp_probability(corner_numerator / denominator)
                  : 1.0 - kProbDelta;
  }
  if (trace) trace->finalized.push_back(static_cast<std::uint32_t>(half));
  for (std::size_t s = 1; s < p.size(); ++s)
    if (p[s] < epsilon) p[s] = 0.0;
  return p;
}

}  // namespace detail

namespace detail {

// Bitmask filter of candidates whose monitor sets are cliques of the given
// monitor adjacency: a source seen by two uncorrelated monitors cannot
// exist, so such candidates are pinned to zero before any estimation.
inline std::vector<char> clique_allowed(std::size_t m,
                                        const std::vector<char>& edge) {
  std::vector<char> allowed(std::size_t{1} << m, 1);
  for (std::size_t s = 3; s < allowed.size(); ++s) {
    if ((s & (s - 1)) == 0) continue;
    std::size_t low = 0;
    while (!((s >> low) & 1u)) ++low;
    const std::size_t rest = s & (s - 1);
    char ok = allowed[rest];
    for (std::size_t b = low + 1; ok && b < m; ++b)
      if ((rest >> b) & 1u) ok = edge[low * m + b];
    allowed[s] = ok;
  }
  return allowed;
}

}  // namespace detail

// All 2^m - 1 candidate probabilities (indexed by bitmask, entry 0 unused).
// epsilon = 0 keeps every nonzero estimate (raw recursion output for
// diagnostics); a positive epsilon zeroes sub-threshold candidates at every
// recursion level, which is what find_bica runs.
inline std::vector<double> recover_component_probabilities(
    const FrequencyOracle& oracle, double epsilon = 0.0,
    RecursionTrace* trace = nullptr) {
  return detail::recover_from_table(oracle.monitors(), oracle.to_table(),
                                    epsilon, !oracle.sample_count(), nullptr,
                                    trace);
}

// Recursive separation over one monitor group. Candidates below epsilon are
// zeroed at every recursion level (sampling dust compounds through the
// ratio and product formulas otherwise); survivors form the result model.
// `allowed` optionally pins candidates to zero a priori (see clique_allowed).
// Exact oracles demand an invertible distribution (degenerate-source error
// otherwise); sample-backed oracles are handled as estimation throughout,
// where starved conditionals clamp instead of aborting the run.
inline InferenceResult find_bica(const FrequencyOracle& oracle,
                                 double epsilon = kDefaultEpsilon,
                                 RecursionTrace* trace = nullptr,
                                 const std::vector<char>* allowed = nullptr) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ParameterError("epsilon must lie in (0,1)");
  if (allowed && allowed->size() != (std::size_t{1} << oracle.monitors()))
    throw DimensionError("allowed-candidate filter has wrong size");
  const std::vector<double> probs = detail::recover_from_table(
      oracle.monitors(), oracle.to_table(), epsilon, !oracle.sample_count(),
      allowed, trace);
  std::vector<std::uint32_t> columns;
  std::vector<double> p;
  for (std::size_t s = 1; s < probs.size(); ++s) {
    if (probs[s] >= epsilon) {
      columns.push_back(static_cast<std::uint32_t>(s));
      p.push_back(probs[s]);
    }
  }
  std::vector<std::size_t> everyone(oracle.monitors());
  for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = i;
  return {SourceModel(MixingMatrix(oracle.monitors(), std::move(columns)),
                      std::move(p)),
          epsilon,
          {std::move(everyone)}};
}

namespace detail {

inline std::vector<std::vector<std::size_t>> connected_components(
    std::size_t m, const std::vector<char>& edge) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<char> seen(m, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < m; ++start) {
    if (seen[start]) continue;
    seen[start] = 1;
    stack.assign(1, start);
    std::vector<std::size_t> group;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      group.push_back(i);
      for (std::size_t k = 0; k < m; ++k)
        if (!seen[k] && edge[i * m + k]) {
          seen[k] = 1;
          stack.push_back(k);
        }
    }
    std::sort(group.begin(), group.end());
    groups.push_back(std::move(group));
  }
  return groups;
}

inline std::vector<char> covariance_edges(const FrequencyOracle& oracle,
                                          std::optional<double> fixed_threshold,
                                          double z) {
  const std::size_t m = oracle.monitors();
  const auto [ones, joint] = oracle.second_moments();
  std::vector<char> edge(m * m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = i + 1; k < m; ++k) {
      const double cov = joint[i * m + k] - ones[i] * ones[k];
      double threshold;
      if (fixed_threshold) {
        threshold = *fixed_threshold;
      } else if (oracle.sample_count()) {
        // Null hypothesis "independent": the empirical cov of two
        // independent indicators is asymptotically normal with variance
        // p_i(1-p_i) p_k(1-p_k)/T. Using the product of marginal variances
        // keeps the bound tight when a monitor is nearly always on.
        const double var =
            ones[i] * (1.0 - ones[i]) * ones[k] * (1.0 - ones[k]);
        threshold = z * std::sqrt(
            var / static_cast<double>(*oracle.sample_count()));
        if (threshold < kCovarianceFloor) threshold = kCovarianceFloor;
      } else {
        threshold = kCovarianceFloor;
      }
      if (cov >= threshold) edge[i * m + k] = edge[k * m + i] = 1;
    }
  return edge;
}

inline std::vector<std::vector<std::size_t>> decompose_impl(
    const FrequencyOracle& oracle, std::optional<double> fixed_threshold,
    double z) {
  return connected_components(
      oracle.monitors(), covariance_edges(oracle, fixed_threshold, z));
}

}  // namespace detail

// Splits monitors into connected components of the "covariance at least
// cov_threshold" graph. Candidates spanning two components have zero
// probability, so each component can be solved independently.
inline std::vector<std::vector<std::size_t>> decompose_by_correlation(
    const FrequencyOracle& oracle, double cov_threshold) {
  if (!(cov_threshold >= 0.0))
    throw ParameterError("covariance threshold must be nonnegative");
  return detail::decompose_impl(oracle, cov_threshold, 0.0);
}

// Same split with a per-pair significance threshold z * sqrt(var/T) derived
// from the oracle's sample count (falls back to a tiny absolute floor for
// exact oracles).
inline std::vector<std::vector<std::size_t>> decompose_by_confidence(
    const FrequencyOracle& oracle, double z = kDefaultConfidenceZ) {
  if (!(z > 0.0)) throw ParameterError("confidence multiplier must be positive");
  return detail::decompose_impl(oracle, std::nullopt, z);
}

struct GroupInference {
  std::vector<std::size_t> monitors;  // global indices, ascending
  InferenceResult result;            // over the relabeled group monitors
};

// Re-embeds per-group results into the global monitor space. Groups must be
// disjoint subsets of 0..monitors-1; all parts must share one epsilon.
// Columns come out in ascending global bitmask order.
inline InferenceResult assemble(std::size_t monitors,
                                std::span<const GroupInference> parts) {
  if (monitors == 0 || monitors > 32)
    throw CapacityError("assemble supports 1 to 32 monitors");
  if (parts.empty()) throw ParameterError("assemble needs at least one group");
  std::uint64_t claimed = 0;
  for (const GroupInference& part : parts) {
    for (std::size_t i : part.monitors) {
      if (i >= monitors) throw PartitionError("group monitor out of range");
      if (claimed & (std::uint64_t{1} << i))
        throw PartitionError("monitor groups overlap");
      claimed |= std::uint64_t{1} << i;
    }
    if (part.monitors.size() != part.result.model.monitors())
      throw DimensionError("group size does not match its result");
  }
  const double epsilon = parts.front().result.epsilon;
  for (const GroupInference& part : parts)
    if (part.result.epsilon != epsilon)
      throw ParameterError("groups were inferred with different epsilons");
  std::vector<std::pair<std::uint32_t, double>> sources;
  std::vector<std::vector<std::size_t>> groups;
  for (const GroupInference& part : parts) {
    const SourceModel& model = part.result.model;
    for (std::size_t j = 0; j < model.sources(); ++j) {
      const std::uint32_t local = model.mixing().column(j);
      std::uint32_t global = 0;
      for (std::size_t b = 0; b < part.monitors.size(); ++b)
        if ((local >> b) & 1u) global |= std::uint32_t{1} << part.monitors[b];
      sources.emplace_back(global, model.p()[j]);
    }
    groups.push_back(part.monitors);
  }
  std::sort(sources.begin(), sources.end());
  std::vector<std::uint32_t> columns;
  std::vector<double> p;
  columns.reserve(sources.size());
  p.reserve(sources.size());
  for (const auto& [mask, prob] : sources) {
    columns.push_back(mask);
    p.push_back(prob);
  }
  return {SourceModel(MixingMatrix(monitors, std::move(columns)), std::move(p)),
          epsilon, std::move(groups)};
}

struct InferOptions {
  double epsilon = kDefaultEpsilon;
  bool decompose = true;
  // Fixed covariance threshold; when absent the confidence rule applies.
  std::optional<double> cov_threshold;
  double confidence_z = kDefaultConfidenceZ;
};

// Full inference pipeline over one oracle: build the monitor covariance
// graph, split into its connected components, and within each component
// restrict candidates to cliques of the graph (uncorrelated monitor pairs
// cannot share a source), then run the recursion per group and reassemble.
// Within a group the recursion conditions on its top monitors being silent;
// ordering members by descending on-rate puts the most-often-silent monitors
// on top, which keeps the conditional sample mass at every level as large as
// the group allows.
inline InferenceResult infer_sources(const FrequencyOracle& oracle,
                                     const InferOptions& options = {}) {
  const std::size_t m = oracle.monitors();
  if (!options.decompose) return find_bica(oracle, options.epsilon);
  if (options.cov_threshold && !(*options.cov_threshold >= 0.0))
    throw ParameterError("covariance threshold must be nonnegative");
  if (!options.cov_threshold && !(options.confidence_z > 0.0))
    throw ParameterError("confidence multiplier must be positive");
  const std::vector<char> edge = detail::covariance_edges(
      oracle, options.cov_threshold, options.confidence_z);
  const std::vector<std::vector<std::size_t>> groups =
      detail::connected_components(m, edge);
  const std::vector<double> on_rate = oracle.second_moments().first;
  std::vector<GroupInference> parts;
  parts.reserve(groups.size());
  for (const std::vector<std::size_t>& group : groups) {
    const std::size_t k = group.size();
    std::vector<std::size_t> order = group;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return on_rate[a] > on_rate[b];
                     });
    std::vector<char> local_edge(k * k, 0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        local_edge[a * k + b] = edge[order[a] * m + order[b]];
    const std::vector<char> allowed = detail::clique_allowed(k, local_edge);
    FrequencyOracle sub = oracle.marginal(order);
    InferenceResult part = find_bica(sub, options.epsilon, nullptr, &allowed);
    parts.push_back({std::move(order), std::move(part)});
  }
  InferenceResult result = assemble(m, parts);
  result.groups = groups;
  return result;
}

}  // namespace bica
