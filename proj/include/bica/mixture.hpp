#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "bica/binary_matrix.hpp"
#include "bica/errors.hpp"
#include "bica/rng.hpp"

namespace bica {

// Largest monitor count for which full 2^m tables (canonical matrices, exact
// distributions, candidate enumeration) are materialized.
inline constexpr std::size_t kMaxTableMonitors = 20;

// Monitor/source adjacency. Column j is a bitmask over monitors: bit i set
// means monitor i detects source j. Columns are never all-zero (an invisible
// source is not part of the model).
class MixingMatrix {
 public:
  MixingMatrix() = default;

  MixingMatrix(std::size_t monitors, std::vector<std::uint32_t> columns)
      : m_(monitors), columns_(std::move(columns)) {
    if (m_ == 0) throw ParameterError("mixing matrix needs at least 1 monitor");
    if (m_ > 32) throw CapacityError("mixing matrix supports at most 32 monitors");
    const std::uint32_t universe =
        m_ == 32 ? 0xFFFFFFFFu : ((std::uint32_t{1} << m_) - 1);
    for (std::uint32_t c : columns_) {
      if (c == 0) throw ParameterError("mixing matrix column is all-zero");
      if ((c & ~universe) != 0)
        throw DimensionError("column mask references monitors beyond m");
    }
  }

  std::size_t monitors() const noexcept { return m_; }
  std::size_t sources() const noexcept { return columns_.size(); }
  std::uint32_t column(std::size_t j) const { return columns_[j]; }
  std::span<const std::uint32_t> columns() const noexcept { return columns_; }

  bool detects(std::size_t i, std::size_t j) const {
    return (columns_[j] >> i) & 1u;
  }

  BinaryMatrix to_matrix() const {
    BinaryMatrix::Builder b(m_, columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j)
      for (std::size_t i = 0; i < m_; ++i)
        if (detects(i, j)) b.set(i, j);
    return std::move(b).build();
  }

  friend bool operator==(const MixingMatrix&, const MixingMatrix&) = default;

 private:
  std::size_t m_ = 0;
  std::vector<std::uint32_t> columns_;
};

// All 2^m - 1 distinct nonzero columns, ordered by ascending bitmask.
inline MixingMatrix canonical_mixing_matrix(std::size_t m) {
  if (m < 1 || m > kMaxTableMonitors)
    throw CapacityError("canonical mixing matrix requires 1 <= m <= 20");
  std::vector<std::uint32_t> cols;
  cols.reserve((std::size_t{1} << m) - 1);
  for (std::uint32_t s = 1; s < (std::uint32_t{1} << m); ++s) cols.push_back(s);
  return MixingMatrix(m, std::move(cols));
}

// Mixing matrix plus per-source activity probabilities. Columns must be
// pairwise distinct (sources with identical visibility are unidentifiable).
class SourceModel {
 public:
  SourceModel() = default;

  SourceModel(MixingMatrix mixing, std::vector<double> p)
      : mixing_(std::move(mixing)), p_(std::move(p)) {
    if (p_.size() != mixing_.sources())
      throw DimensionError("probability vector length must equal source count");
    for (double v : p_)
      if (!(v >= 0.0 && v <= 1.0))
        throw ParameterError("source probability outside [0,1]");
    for (std::size_t a = 0; a < mixing_.sources(); ++a)
      for (std::size_t b = a + 1; b < mixing_.sources(); ++b)
        if (mixing_.column(a) == mixing_.column(b))
          throw ParameterError("mixing matrix columns must be distinct");
  }

  const MixingMatrix& mixing() const noexcept { return mixing_; }
  std::span<const double> p() const noexcept { return p_; }
  std::size_t monitors() const noexcept { return mixing_.monitors(); }
  std::size_t sources() const noexcept { return mixing_.sources(); }

  friend bool operator==(const SourceModel&, const SourceModel&) = default;

 private:
  MixingMatrix mixing_;
  std::vector<double> p_;
};

// x = G (x) y for one time slot: monitor i fires iff it detects some active
// source.
inline BinaryVector or_mix(const MixingMatrix& g,
                           std::span<const std::uint8_t> y) {
  if (y.size() != g.sources())
    throw DimensionError("activity vector length must equal source count");
  std::uint32_t fired = 0;
  for (std::size_t j = 0; j < y.size(); ++j)
    if (y[j]) fired |= g.column(j);
  BinaryVector x(g.monitors());
  for (std::size_t i = 0; i < g.monitors(); ++i) x[i] = (fired >> i) & 1u;
  return x;
}

// Column-wise OR mixture: activities is n x T, result is m x T.
inline BinaryMatrix or_mix(const MixingMatrix& g, const BinaryMatrix& activities) {
  if (activities.rows() != g.sources())
    throw DimensionError("activity matrix must have one row per source");
  const std::size_t t_count = activities.cols();
  BinaryMatrix::Builder b(g.monitors(), t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    std::uint32_t fired = 0;
    for (std::size_t j = 0; j < g.sources(); ++j)
      if (activities.get(j, t)) fired |= g.column(j);
    for (std::size_t i = 0; i < g.monitors(); ++i)
      if ((fired >> i) & 1u) b.set(i, t);
  }
  return std::move(b).build();
}

struct BernoulliActivity {};

// Two-state chain on {0,1}; p01 = P(0 -> 1), p10 = P(1 -> 0), both strictly
// inside (0,1) so the stationary distribution exists. Chains start from the
// stationary distribution, so the long-run activity rate is stationary().
struct MarkovActivity {
  double p01 = 0.5;
  double p10 = 0.5;
  double stationary() const noexcept { return p01 / (p01 + p10); }
};

using ActivityProcess = std::variant<BernoulliActivity, MarkovActivity>;

struct ActivitySampler {
  std::vector<ActivityProcess> processes;  // one per source
  std::uint64_t seed = 0;

  static ActivitySampler bernoulli(std::size_t n, std::uint64_t seed) {
    return {std::vector<ActivityProcess>(n, BernoulliActivity{}), seed};
  }

  static ActivitySampler markov(std::span<const double> p01,
                                std::span<const double> p10,
                                std::uint64_t seed) {
    if (p01.size() != p10.size())
      throw DimensionError("markov parameter vectors must match in length");
    ActivitySampler s;
    s.seed = seed;
    s.processes.reserve(p01.size());
    for (std::size_t j = 0; j < p01.size(); ++j)
      s.processes.push_back(MarkovActivity{p01[j], p10[j]});
    return s;
  }
};

// Draws the n x T activity matrix. Each source consumes its own derived RNG
// stream, so adding a source or reordering execution never perturbs others.
inline BinaryMatrix sample_activities(const SourceModel& model,
                                      const ActivitySampler& sampler,
                                      std::size_t t_count) {
  if (sampler.processes.size() != model.sources())
    throw DimensionError("sampler must describe every source");
  if (t_count == 0) throw ParameterError("sample length must be positive");
  for (const ActivityProcess& proc : sampler.processes)
    if (const auto* mk = std::get_if<MarkovActivity>(&proc))
      if (!(mk->p01 > 0.0 && mk->p01 < 1.0 && mk->p10 > 0.0 && mk->p10 < 1.0))
        throw ParameterError("markov transition probabilities must lie in (0,1)");
  BinaryMatrix::Builder b(model.sources(), t_count);
  for (std::size_t j = 0; j < model.sources(); ++j) {
    SplitMix64 rng(derive_seed(sampler.seed, j));
    if (std::holds_alternative<BernoulliActivity>(sampler.processes[j])) {
      const double p = model.p()[j];
      for (std::size_t t = 0; t < t_count; ++t)
        if (rng.bernoulli(p)) b.set(j, t);
    } else {
      const auto& mk = std::get<MarkovActivity>(sampler.processes[j]);
      bool on = rng.bernoulli(mk.stationary());
      if (on) b.set(j, 0);
      for (std::size_t t = 1; t < t_count; ++t) {
        on = on ? !rng.bernoulli(mk.p10) : rng.bernoulli(mk.p01);
        if (on) b.set(j, t);
      }
    }
  }
  return std::move(b).build();
}

// Independent symmetric bit flips with rate e.
inline BinaryMatrix inject_noise(const BinaryMatrix& x, double e,
                                 std::uint64_t seed) {
  if (!(e >= 0.0 && e <= 1.0))
    throw ParameterError("noise rate outside [0,1]");
  SplitMix64 rng(seed);
  BinaryMatrix::Builder b(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const bool flip = rng.bernoulli(e);
      if (x.get(r, c) != flip) b.set(r, c);
    }
  return std::move(b).build();
}

// Exact observation distribution: entry `pattern` is the probability that
// the monitor pattern (bit i = monitor i) fires in one slot under
// independent sources. Folds one source at a time, O(n * 2^m).
inline std::vector<double> exact_distribution(const SourceModel& model) {
  const std::size_t m = model.monitors();
  if (m > kMaxTableMonitors)
    throw CapacityError("exact distribution limited to 20 monitors");
  if (model.sources() > 24)
    throw CapacityError("exact distribution limited to 24 sources");
  std::vector<double> table(std::size_t{1} << m, 0.0);
  table[0] = 1.0;
  std::vector<double> next(table.size());
  for (std::size_t j = 0; j < model.sources(); ++j) {
    const double p = model.p()[j];
    const std::uint32_t mask = model.mixing().column(j);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t pattern = 0; pattern < table.size(); ++pattern) {
      const double w = table[pattern];
      if (w == 0.0) continue;
      next[pattern] += w * (1.0 - p);
      next[pattern | mask] += w * p;
    }
    table.swap(next);
  }
  return table;
}

}  // namespace bica
