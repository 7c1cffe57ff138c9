#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bica/binary_matrix.hpp"
#include "bica/errors.hpp"
#include "bica/mixture.hpp"

namespace bica {

// Exact minimum-cost assignment on a square nonnegative matrix (shortest
// augmenting path over reduced costs, O(n^3)). Returns row -> column.
// Deterministic: rows are inserted in order and Dijkstra tie-breaking is by
// lowest column index.
inline std::vector<std::size_t> assignment_min_cost(
    const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost) {
    if (row.size() != n) throw DimensionError("cost matrix must be square");
    for (double v : row)
      if (!(v >= 0.0)) throw ParameterError("cost entries must be nonnegative");
  }
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t none = n;  // sentinel row id for an unassigned column
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, none);  // column -> row
  std::vector<std::size_t> way(n + 1, n);
  for (std::size_t i = 0; i < n; ++i) {
    match[n] = i;
    std::size_t j0 = n;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      std::size_t j1 = n;
      double delta = inf;
      for (std::size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != none);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != n);
  }
  std::vector<std::size_t> result(n, 0);
  for (std::size_t j = 0; j < n; ++j)
    if (match[j] != none) result[match[j]] = j;
  return result;
}

// Alignment of an inferred model against the truth. Raw column/probability
// arrays rather than a SourceModel: pad matches produce all-zero columns
// that a model is not allowed to contain.
struct MatchResult {
  std::size_t monitor_count = 0;
  std::size_t true_sources = 0;
  std::size_t inferred_sources = 0;
  std::size_t padded_size = 0;
  // For each true source: the column/probability of the inferred source
  // matched to it (zero column, probability 0 when matched to a pad).
  std::vector<std::uint32_t> matched_columns;
  std::vector<double> matched_p;
  // Padded true index -> padded inferred index.
  std::vector<std::size_t> permutation;
  double total_cost = 0.0;
};

// Optimal pairing of inferred sources to true sources by Hamming distance of
// visibility columns. The smaller side is padded with zero columns; costs in
// pad-true rows are scaled by m, so a spurious inferred column is parked on
// a pad only when no real true column wants it.
inline MatchResult match_structures(const SourceModel& truth,
                                    const SourceModel& inferred) {
  if (truth.monitors() != inferred.monitors())
    throw DimensionError("models must share the monitor count");
  const std::size_t m = truth.monitors();
  const std::size_t n_true = truth.sources();
  const std::size_t n_inf = inferred.sources();
  const std::size_t padded = std::max(n_true, n_inf);
  MatchResult result;
  result.monitor_count = m;
  result.true_sources = n_true;
  result.inferred_sources = n_inf;
  result.padded_size = padded;
  if (padded == 0) return result;
  std::vector<std::vector<double>> cost(padded, std::vector<double>(padded));
  for (std::size_t i = 0; i < padded; ++i) {
    const std::uint32_t tcol = i < n_true ? truth.mixing().column(i) : 0;
    for (std::size_t j = 0; j < padded; ++j) {
      const std::uint32_t icol = j < n_inf ? inferred.mixing().column(j) : 0;
      double c = std::popcount(tcol ^ icol);
      if (i >= n_true) c *= static_cast<double>(m);
      cost[i][j] = c;
    }
  }
  result.permutation = assignment_min_cost(cost);
  for (std::size_t i = 0; i < padded; ++i)
    result.total_cost += cost[i][result.permutation[i]];
  result.matched_columns.resize(n_true, 0);
  result.matched_p.resize(n_true, 0.0);
  for (std::size_t i = 0; i < n_true; ++i) {
    const std::size_t j = result.permutation[i];
    if (j < n_inf) {
      result.matched_columns[i] = inferred.mixing().column(j);
      result.matched_p[i] = inferred.p()[j];
    }
  }
  return result;
}

// Fraction of wrong cells in the aligned mixing matrix, over m * n_true.
inline double structure_error_ratio(const SourceModel& truth,
                                    const MatchResult& match) {
  if (truth.sources() != match.true_sources ||
      truth.monitors() != match.monitor_count)
    throw DimensionError("match does not belong to this truth model");
  if (truth.sources() == 0) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.sources(); ++i)
    wrong += std::popcount(truth.mixing().column(i) ^ match.matched_columns[i]);
  return static_cast<double>(wrong) /
         static_cast<double>(truth.monitors() * truth.sources());
}

// Root mean squared probability error over aligned sources, normalized by
// the mean true probability. Not available when the truth is all zeros.
inline std::optional<double> prob_error_ratio(std::span<const double> true_p,
                                              std::span<const double> matched_p) {
  if (true_p.size() != matched_p.size())
    throw DimensionError("probability vectors must match in length");
  if (true_p.empty()) return std::nullopt;
  double sq = 0.0, mean = 0.0;
  for (std::size_t j = 0; j < true_p.size(); ++j) {
    const double d = matched_p[j] - true_p[j];
    sq += d * d;
    mean += true_p[j];
  }
  const double n = static_cast<double>(true_p.size());
  mean /= n;
  if (mean == 0.0) return std::nullopt;
  return std::sqrt(sq / n) / mean;
}

// Signed source-count error: positive when sources were invented.
inline long long miscount(std::size_t true_n, std::size_t inferred_n) noexcept {
  return static_cast<long long>(inferred_n) - static_cast<long long>(true_n);
}

// Fraction of wrong activity cells over the whole n x T matrix.
inline double activity_error_ratio(const BinaryMatrix& truth,
                                   const BinaryMatrix& inferred) {
  if (truth.rows() != inferred.rows() || truth.cols() != inferred.cols())
    throw DimensionError("activity matrices must share shape");
  if (truth.empty()) return 0.0;
  return static_cast<double>(truth.hamming_to(inferred)) /
         static_cast<double>(truth.rows() * truth.cols());
}

}  // namespace bica
