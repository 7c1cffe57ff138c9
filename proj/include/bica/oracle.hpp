#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "bica/binary_matrix.hpp"
#include "bica/errors.hpp"
#include "bica/mixture.hpp"

namespace bica {

struct MonitorLiteral {
  std::size_t monitor = 0;
  bool value = false;
};

// Read-only view of the joint observation distribution over m monitors.
// Backed either by an observation matrix (empirical frequencies, any m up to
// 64) or by an explicit probability table (exact queries, m up to 20).
// Marginalizing onto a monitor subset relabels the kept monitors 0..k-1 in
// the order given. All queries are const and safe to issue concurrently.
class FrequencyOracle {
 public:
  static FrequencyOracle from_observations(const BinaryMatrix& x) {
    if (x.rows() == 0 || x.cols() == 0)
      throw DimensionError("observation matrix must be nonempty");
    if (x.rows() > 64)
      throw CapacityError("observation oracle limited to 64 monitors");
    FrequencyOracle o;
    o.m_ = x.rows();
    o.samples_ = x.cols();
    std::vector<std::size_t> rows(x.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    o.data_ = MatrixData{std::make_shared<BinaryMatrix>(x), std::move(rows)};
    return o;
  }

  // Table over 2^m patterns, bit i of the index = monitor i. Entries must be
  // nonnegative and sum to 1 within 1e-9; the stored table is renormalized.
  static FrequencyOracle from_distribution(std::size_t monitors,
                                           std::vector<double> table) {
    if (monitors == 0) throw DimensionError("oracle needs at least 1 monitor");
    if (monitors > kMaxTableMonitors)
      throw CapacityError("distribution oracle limited to 20 monitors");
    if (table.size() != (std::size_t{1} << monitors))
      throw DimensionError("table length must be 2^m");
    double sum = 0.0;
    for (double& v : table) {
      if (v < 0.0) {
        if (v < -1e-12) throw ParameterError("negative probability in table");
        v = 0.0;
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ParameterError("probability table must sum to 1");
    for (double& v : table) v /= sum;
    FrequencyOracle o;
    o.m_ = monitors;
    o.data_ = TableData{std::move(table)};
    return o;
  }

  static FrequencyOracle from_model(const SourceModel& model) {
    return from_distribution(model.monitors(), exact_distribution(model));
  }

  std::size_t monitors() const noexcept { return m_; }

  // Number of observed slots behind empirical frequencies; empty for exact
  // tables.
  std::optional<std::uint64_t> sample_count() const noexcept { return samples_; }

  // P(conjunction of literals). Monitors must be in range and distinct.
  double prob(std::span<const MonitorLiteral> literals) const {
    std::uint64_t care = 0, want = 0;
    for (const MonitorLiteral& lit : literals) {
      if (lit.monitor >= m_) throw DimensionError("literal monitor out of range");
      const std::uint64_t bit = std::uint64_t{1} << lit.monitor;
      if (care & bit) throw ParameterError("duplicate monitor in event");
      care |= bit;
      if (lit.value) want |= bit;
    }
    if (const auto* td = std::get_if<TableData>(&data_)) {
      double total = 0.0;
      for (std::size_t pattern = 0; pattern < td->probs.size(); ++pattern)
        if ((pattern & care) == want) total += td->probs[pattern];
      return total;
    }
    const auto& md = std::get<MatrixData>(data_);
    std::uint64_t global_care = 0, global_want = 0;
    for (const MonitorLiteral& lit : literals) {
      const std::uint64_t bit = std::uint64_t{1} << md.rows[lit.monitor];
      global_care |= bit;
      if (lit.value) global_want |= bit;
    }
    std::size_t hits = 0;
    const BinaryMatrix& x = *md.x;
    for (std::size_t t = 0; t < x.cols(); ++t)
      if ((x.column_mask(t) & global_care) == global_want) ++hits;
    return static_cast<double>(hits) / static_cast<double>(x.cols());
  }

  double prob(std::initializer_list<MonitorLiteral> literals) const {
    return prob(std::span<const MonitorLiteral>(literals.begin(),
                                                literals.size()));
  }

  double marginal_one(std::size_t monitor) const {
    const MonitorLiteral lit{monitor, true};
    return prob(std::span<const MonitorLiteral>(&lit, 1));
  }

  double pair_one_one(std::size_t i, std::size_t k) const {
    const MonitorLiteral lits[2] = {{i, true}, {k, true}};
    return prob(std::span<const MonitorLiteral>(lits, 2));
  }

  // Joint distribution of a monitor subset; kept monitors are relabeled
  // 0..k-1 in the order given.
  FrequencyOracle marginal(std::span<const std::size_t> keep) const {
    if (keep.empty()) throw DimensionError("marginal needs at least 1 monitor");
    std::uint64_t seen = 0;
    for (std::size_t i : keep) {
      if (i >= m_) throw DimensionError("marginal monitor out of range");
      if (seen & (std::uint64_t{1} << i))
        throw ParameterError("duplicate monitor in marginal");
      seen |= std::uint64_t{1} << i;
    }
    FrequencyOracle o;
    o.m_ = keep.size();
    o.samples_ = samples_;
    if (const auto* md = std::get_if<MatrixData>(&data_)) {
      std::vector<std::size_t> rows(keep.size());
      for (std::size_t i = 0; i < keep.size(); ++i) rows[i] = md->rows[keep[i]];
      o.data_ = MatrixData{md->x, std::move(rows)};
      return o;
    }
    const auto& table = std::get<TableData>(data_).probs;
    std::vector<double> out(std::size_t{1} << keep.size(), 0.0);
    for (std::size_t pattern = 0; pattern < table.size(); ++pattern) {
      if (table[pattern] == 0.0) continue;
      std::size_t idx = 0;
      for (std::size_t i = 0; i < keep.size(); ++i)
        idx |= ((pattern >> keep[i]) & 1u) << i;
      out[idx] += table[pattern];
    }
    o.data_ = TableData{std::move(out)};
    return o;
  }

  FrequencyOracle marginal(std::initializer_list<std::size_t> keep) const {
    return marginal(std::span<const std::size_t>(keep.begin(), keep.size()));
  }

  // Means and joint on-probabilities for all monitor pairs in one pass:
  // first = P(x_i = 1), second = row-major m x m with P(x_i = 1, x_k = 1)
  // (diagonal = means). Feeds all-pairs covariance without rescanning.
  std::pair<std::vector<double>, std::vector<double>> second_moments() const {
    std::vector<double> ones(m_, 0.0);
    std::vector<double> pairs(m_ * m_, 0.0);
    std::vector<std::size_t> active;
    active.reserve(m_);
    auto accumulate = [&](std::uint64_t mask, double weight) {
      active.clear();
      for (std::size_t i = 0; i < m_; ++i)
        if ((mask >> i) & 1u) active.push_back(i);
      for (std::size_t a : active) {
        ones[a] += weight;
        for (std::size_t b : active) pairs[a * m_ + b] += weight;
      }
    };
    if (const auto* td = std::get_if<TableData>(&data_)) {
      for (std::size_t pattern = 0; pattern < td->probs.size(); ++pattern)
        if (td->probs[pattern] != 0.0) accumulate(pattern, td->probs[pattern]);
    } else {
      const auto& md = std::get<MatrixData>(data_);
      const BinaryMatrix& x = *md.x;
      const double w = 1.0 / static_cast<double>(x.cols());
      for (std::size_t t = 0; t < x.cols(); ++t) {
        std::uint64_t mask = 0;
        for (std::size_t i = 0; i < m_; ++i)
          mask |= static_cast<std::uint64_t>(x.get(md.rows[i], t)) << i;
        accumulate(mask, w);
      }
    }
    return {std::move(ones), std::move(pairs)};
  }

  // Materializes the full 2^m table (pattern histogram for empirical
  // oracles). This is the entry point for the recursive solver.
  std::vector<double> to_table() const {
    if (const auto* td = std::get_if<TableData>(&data_)) return td->probs;
    if (m_ > kMaxTableMonitors)
      throw CapacityError("oracle table limited to 20 monitors");
    const auto& md = std::get<MatrixData>(data_);
    const BinaryMatrix& x = *md.x;
    std::vector<std::uint64_t> counts(std::size_t{1} << m_, 0);
    for (std::size_t t = 0; t < x.cols(); ++t) {
      std::size_t pattern = 0;
      for (std::size_t i = 0; i < m_; ++i)
        pattern |= static_cast<std::size_t>(x.get(md.rows[i], t)) << i;
      ++counts[pattern];
    }
    std::vector<double> table(counts.size());
    const double t_count = static_cast<double>(x.cols());
    for (std::size_t pattern = 0; pattern < counts.size(); ++pattern)
      table[pattern] = static_cast<double>(counts[pattern]) / t_count;
    return table;
  }

 private:
  struct TableData {
    std::vector<double> probs;
  };
  struct MatrixData {
    std::shared_ptr<const BinaryMatrix> x;
    std::vector<std::size_t> rows;  // oracle monitor -> matrix row
  };

  FrequencyOracle() = default;

  std::size_t m_ = 0;
  std::optional<std::uint64_t> samples_;
  std::variant<TableData, MatrixData> data_;
};

// cov(x_i, x_k) = P(x_i=1, x_k=1) - P(x_i=1) P(x_k=1). Independent monitors
// have zero covariance; monitors sharing a source are positively correlated.
inline double covariance(const FrequencyOracle& oracle, std::size_t i,
                         std::size_t k) {
  if (i == k) throw ParameterError("covariance requires distinct monitors");
  return oracle.pair_one_one(i, k) -
         oracle.marginal_one(i) * oracle.marginal_one(k);
}

}  // namespace bica
