#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <bica/mixture.hpp>
#include <bica/rng.hpp>

namespace test_support {

inline std::vector<std::uint32_t> random_distinct_columns(bica::SplitMix64& rng,
                                                          std::size_t m,
                                                          std::size_t n) {
  std::vector<std::uint32_t> all;
  for (std::uint32_t s = 1; s < (std::uint32_t{1} << m); ++s) all.push_back(s);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.next() % (all.size() - i);
    std::swap(all[i], all[j]);
  }
  all.resize(n);
  std::sort(all.begin(), all.end());
  return all;
}

inline bica::SourceModel random_model(bica::SplitMix64& rng, std::size_t m,
                                      std::size_t n, double p_lo, double p_hi) {
  std::vector<double> p(n);
  for (double& v : p) v = p_lo + rng.uniform01() * (p_hi - p_lo);
  return bica::SourceModel(
      bica::MixingMatrix(m, random_distinct_columns(rng, m, n)), std::move(p));
}

// Independent reference for exact_distribution: enumerate all 2^n activity
// combinations and accumulate their OR patterns.
inline std::vector<double> enumerate_distribution(const bica::SourceModel& model) {
  const std::size_t m = model.monitors();
  const std::size_t n = model.sources();
  std::vector<double> table(std::size_t{1} << m, 0.0);
  for (std::uint32_t combo = 0; combo < (std::uint32_t{1} << n); ++combo) {
    double w = 1.0;
    std::uint32_t pattern = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if ((combo >> j) & 1u) {
        w *= model.p()[j];
        pattern |= model.mixing().column(j);
      } else {
        w *= 1.0 - model.p()[j];
      }
    }
    table[pattern] += w;
  }
  return table;
}

}  // namespace test_support
