#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bica/errors.hpp"
#include "bica/mixture.hpp"

namespace bica {

// One inversion problem: which sources were active given one observed
// monitor pattern, a known model, and a symmetric flip channel with rate
// p_e in [0, 0.5). Source probabilities must be strictly inside (0,1) so
// every prior log is finite.
class MapInstance {
 public:
  MapInstance(SourceModel model, BinaryVector observation, double p_e)
      : model_(std::move(model)),
        observation_(std::move(observation)),
        p_e_(p_e) {
    if (observation_.size() != model_.monitors())
      throw DimensionError("observation length must equal monitor count");
    if (!(p_e_ >= 0.0 && p_e_ < 0.5))
      throw ParameterError("channel error rate must lie in [0, 0.5)");
    for (double v : model_.p())
      if (!(v > 0.0 && v < 1.0))
        throw ParameterError("map source probabilities must lie strictly in (0,1)");
  }

  const SourceModel& model() const noexcept { return model_; }
  std::span<const std::uint8_t> observation() const noexcept {
    return observation_;
  }
  double p_e() const noexcept { return p_e_; }

 private:
  SourceModel model_;
  BinaryVector observation_;
  double p_e_;
};

struct MapSolution {
  BinaryVector y;         // per-source activity
  BinaryVector x;         // implied noise-free pattern, x = G (x) y
  double log_posterior = 0.0;
  bool optimal = false;
};

namespace detail {

// Shared evaluation context. Every solver scores candidates through
// objective(), one fixed closed form, so equal-objective candidates compare
// bit-identically across solvers and tie-breaking is well defined.
struct MapContext {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<std::uint32_t> cols;
  std::vector<double> log_p1, log_p0;
  double log_pe = 0.0, log_qe = 0.0;
  std::uint32_t observed_mask = 0;

  MapContext(const SourceModel& model, std::span<const std::uint8_t> observation,
             double p_e)
      : m(model.monitors()), n(model.sources()) {
    cols.assign(model.mixing().columns().begin(),
                model.mixing().columns().end());
    log_p1.resize(n);
    log_p0.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      log_p1[j] = std::log(model.p()[j]);
      log_p0[j] = std::log1p(-model.p()[j]);
    }
    log_pe = p_e > 0.0 ? std::log(p_e)
                       : -std::numeric_limits<double>::infinity();
    log_qe = std::log1p(-p_e);
    for (std::size_t i = 0; i < m; ++i)
      if (observation[i]) observed_mask |= std::uint32_t{1} << i;
  }

  std::uint32_t mix(std::span<const std::uint8_t> y) const {
    std::uint32_t fired = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (y[j]) fired |= cols[j];
    return fired;
  }

  // log P(X | y) + log P(y); mismatch count enters in closed form so the
  // value never depends on summation order. k = 0 with p_e = 0 contributes
  // exactly zero rather than 0 * -inf.
  double objective(std::span<const std::uint8_t> y) const {
    const int k = std::popcount(observed_mask ^ mix(y));
    double total = k > 0 ? k * log_pe : 0.0;
    total += static_cast<double>(m - static_cast<std::size_t>(k)) * log_qe;
    for (std::size_t j = 0; j < n; ++j)
      total += y[j] ? log_p1[j] : log_p0[j];
    return total;
  }

  // Prior-only score, shared by the zero-error solver.
  double prior(std::span<const std::uint8_t> y) const {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      total += y[j] ? log_p1[j] : log_p0[j];
    return total;
  }
};

// y_1 is the most significant digit.
inline bool lex_less(const BinaryVector& a, const BinaryVector& b) {
  for (std::size_t j = 0; j < a.size(); ++j)
    if (a[j] != b[j]) return a[j] < b[j];
  return false;
}

}  // namespace detail

// The full objective both exact solvers maximize, exposed so callers can
// score externally chosen activity vectors on the same scale.
inline double map_objective(const MapInstance& instance,
                            std::span<const std::uint8_t> y) {
  if (y.size() != instance.model().sources())
    throw DimensionError("activity length must equal source count");
  detail::MapContext ctx(instance.model(), instance.observation(),
                         instance.p_e());
  return ctx.objective(y);
}

// Exhaustive reference solver; ties resolve to the lexicographically
// smallest maximizer (y_1 most significant).
inline MapSolution brute_force_map(const MapInstance& instance) {
  const std::size_t n = instance.model().sources();
  if (n > 20) throw CapacityError("brute force limited to 20 sources");
  detail::MapContext ctx(instance.model(), instance.observation(),
                         instance.p_e());
  BinaryVector y(n, 0), best_y(n, 0);
  double best = ctx.objective(y);
  for (std::uint64_t v = 1; v < (std::uint64_t{1} << n); ++v) {
    for (std::size_t j = 0; j < n; ++j)
      y[j] = (v >> (n - 1 - j)) & 1u;
    const double obj = ctx.objective(y);
    if (obj > best) {
      best = obj;
      best_y = y;
    }
  }
  MapSolution solution;
  solution.y = std::move(best_y);
  solution.log_posterior = best;
  solution.optimal = true;
  const std::uint32_t fired = ctx.mix(solution.y);
  solution.x.resize(ctx.m);
  for (std::size_t i = 0; i < ctx.m; ++i) solution.x[i] = (fired >> i) & 1u;
  return solution;
}

// Exact branch and bound over activity vectors. Reusable across many
// observations of one model; solve() is where the per-slot work happens.
//
// Correctness of the tie rule: nodes are pruned only when their upper bound
// falls below the incumbent minus a small relative slack, so every subtree
// that could contain a maximizer is explored; each surviving leaf is scored
// with the shared closed-form objective, and the incumbent is replaced on a
// strictly larger value or an equal value with lexicographically smaller y.
// The result therefore matches brute_force_map bit for bit.
class MapSolver {
 public:
  MapSolver(SourceModel model, double p_e)
      : model_(std::move(model)), p_e_(p_e) {
    if (!(p_e_ >= 0.0 && p_e_ < 0.5))
      throw ParameterError("channel error rate must lie in [0, 0.5)");
    for (double v : model_.p())
      if (!(v > 0.0 && v < 1.0))
        throw ParameterError("map source probabilities must lie strictly in (0,1)");
    const std::size_t n = model_.sources();
    for (std::size_t j = 0; j < n; ++j) {
      const double p = model_.p()[j];
      prior_best_step_.push_back(std::log(std::max(p, 1.0 - p)));
      favored_.push_back(p >= 0.5);
    }
    // Branch on wide columns first: they touch the most monitors, so fixing
    // them tightens the channel bound fastest. Purely a speed choice; the
    // result is order-independent.
    order_.resize(n);
    for (std::size_t j = 0; j < n; ++j) order_[j] = j;
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) {
                       return std::popcount(model_.mixing().column(a)) >
                              std::popcount(model_.mixing().column(b));
                     });
    prior_best_suffix_.assign(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;)
      prior_best_suffix_[k] =
          prior_best_suffix_[k + 1] + prior_best_step_[order_[k]];
  }

  const SourceModel& model() const noexcept { return model_; }

  MapSolution solve(std::span<const std::uint8_t> observation) const {
    if (observation.size() != model_.monitors())
      throw DimensionError("observation length must equal monitor count");
    detail::MapContext ctx(model_, observation, p_e_);
    const std::size_t m = ctx.m, n = ctx.n;

    // Monitor state while descending: how many fixed-active sources reach
    // it, how many undecided sources still could.
    std::vector<std::uint32_t> active(m, 0), free_cnt(m, 0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < m; ++i)
        if ((ctx.cols[j] >> i) & 1u) ++free_cnt[i];

    // Finite stand-in for log(0) keeps the incremental bound arithmetic free
    // of inf - inf; leaves are still scored with the true objective.
    const double bound_pe = p_e_ > 0.0 ? ctx.log_pe : -1e100;
    auto channel_term = [&](std::size_t i) {
      const bool want = (ctx.observed_mask >> i) & 1u;
      if (active[i] > 0) return want ? ctx.log_qe : bound_pe;
      if (free_cnt[i] == 0) return want ? bound_pe : ctx.log_qe;
      return ctx.log_qe;  // still free to match either way
    };

    double channel_bound = 0.0;
    for (std::size_t i = 0; i < m; ++i) channel_bound += channel_term(i);

    BinaryVector y(n, 0);
    BinaryVector best_y;
    double best = -std::numeric_limits<double>::infinity();
    bool has_best = false;

    auto consider_leaf = [&]() {
      const double obj = ctx.objective(y);
      if (!has_best || obj > best ||
          (obj == best && detail::lex_less(y, best_y))) {
        has_best = true;
        best = obj;
        best_y = y;
      }
    };

    // Applies y_j = value, updating monitor state and the channel bound
    // incrementally; undo reverses the counters.
    auto apply = [&](std::size_t j, bool value, double& bound) {
      for (std::uint32_t bits = ctx.cols[j]; bits; bits &= bits - 1) {
        const std::size_t i = std::countr_zero(bits);
        const double before = channel_term(i);
        --free_cnt[i];
        if (value) ++active[i];
        bound += channel_term(i) - before;
      }
      y[j] = value;
    };
    auto undo = [&](std::size_t j, bool value) {
      for (std::uint32_t bits = ctx.cols[j]; bits; bits &= bits - 1) {
        const std::size_t i = std::countr_zero(bits);
        ++free_cnt[i];
        if (value) --active[i];
      }
    };

    auto descend = [&](auto&& self, std::size_t k, double prior_fixed,
                       double channel) -> void {
      if (has_best) {
        const double slack = 1e-9 * (1.0 + std::abs(best));
        if (prior_fixed + prior_best_suffix_[k] + channel < best - slack)
          return;
      }
      if (k == n) {
        consider_leaf();
        return;
      }
      const std::size_t j = order_[k];
      const bool first = favored_[j];
      for (int round = 0; round < 2; ++round) {
        const bool value = round == 0 ? first : !first;
        double bound = channel;
        apply(j, value, bound);
        self(self, k + 1,
             prior_fixed + (value ? ctx.log_p1[j] : ctx.log_p0[j]), bound);
        undo(j, value);
      }
      y[j] = 0;
    };
    descend(descend, 0, 0.0, channel_bound);

    MapSolution solution;
    solution.y = std::move(best_y);
    solution.log_posterior = best;
    solution.optimal = true;
    const std::uint32_t fired = ctx.mix(solution.y);
    solution.x.resize(m);
    for (std::size_t i = 0; i < m; ++i) solution.x[i] = (fired >> i) & 1u;
    return solution;
  }

 private:
  SourceModel model_;
  double p_e_;
  std::vector<double> prior_best_step_;
  std::vector<double> prior_best_suffix_;
  std::vector<char> favored_;
  std::vector<std::size_t> order_;
};

inline MapSolution map_activities(const MapInstance& instance) {
  return MapSolver(instance.model(), instance.p_e())
      .solve(instance.observation());
}

// Noise-free inversion: the OR mixture of y must reproduce the observation
// exactly; among consistent vectors the prior is maximized. Sources visible
// to a silent monitor are forced off; every firing monitor must keep at
// least one potential coverer or the instance is infeasible.
class ZeroErrorSolver {
 public:
  explicit ZeroErrorSolver(SourceModel model) : model_(std::move(model)) {
    for (double v : model_.p())
      if (!(v > 0.0 && v < 1.0))
        throw ParameterError("source probabilities must lie strictly in (0,1)");
    for (std::size_t j = 0; j < model_.sources(); ++j) {
      const double p = model_.p()[j];
      log_p1_.push_back(std::log(p));
      log_p0_.push_back(std::log1p(-p));
    }
  }

  const SourceModel& model() const noexcept { return model_; }

  MapSolution solve(std::span<const std::uint8_t> observation) const {
    const std::size_t m = model_.monitors();
    const std::size_t n = model_.sources();
    if (observation.size() != m)
      throw DimensionError("observation length must equal monitor count");
    std::uint32_t observed = 0;
    for (std::size_t i = 0; i < m; ++i)
      if (observation[i]) observed |= std::uint32_t{1} << i;

    // allowed[j]: source touches no silent monitor.
    std::vector<char> allowed(n);
    std::vector<std::uint32_t> cover(m, 0);  // firing monitor -> #candidates
    for (std::size_t j = 0; j < n; ++j) {
      allowed[j] = (model_.mixing().column(j) & ~observed) == 0;
      if (allowed[j])
        for (std::size_t i = 0; i < m; ++i)
          if ((model_.mixing().column(j) >> i) & 1u) ++cover[i];
    }
    for (std::size_t i = 0; i < m; ++i)
      if (((observed >> i) & 1u) && cover[i] == 0)
        throw InfeasibilityError("monitor " + std::to_string(i + 1) +
                                 " fires but no admissible source covers it");

    // Branch over admissible sources in index order; forced-off sources stay
    // zero. remaining[i] counts undecided admissible coverers of monitor i.
    std::vector<std::uint32_t> active(m, 0), remaining = cover;
    std::vector<double> best_suffix(n + 1, 0.0);
    for (std::size_t j = n; j-- > 0;)
      best_suffix[j] =
          best_suffix[j + 1] +
          (allowed[j] ? std::log(std::max(model_.p()[j], 1.0 - model_.p()[j]))
                      : log_p0_[j]);

    BinaryVector y(n, 0);
    BinaryVector best_y;
    double best = -std::numeric_limits<double>::infinity();
    bool has_best = false;

    auto descend = [&](auto&& self, std::size_t j, double prior_fixed) -> void {
      if (has_best) {
        const double slack = 1e-9 * (1.0 + std::abs(best));
        if (prior_fixed + best_suffix[j] < best - slack) return;
      }
      if (j == n) {
        double obj = 0.0;
        for (std::size_t jj = 0; jj < n; ++jj)
          obj += y[jj] ? log_p1_[jj] : log_p0_[jj];
        if (!has_best || obj > best ||
            (obj == best && detail::lex_less(y, best_y))) {
          has_best = true;
          best = obj;
          best_y = y;
        }
        return;
      }
      if (!allowed[j]) {
        self(self, j + 1, prior_fixed + log_p0_[j]);
        return;
      }
      const std::uint32_t col = model_.mixing().column(j);
      const bool first = model_.p()[j] >= 0.5;
      for (int round = 0; round < 2; ++round) {
        const bool value = round == 0 ? first : !first;
        for (std::size_t i = 0; i < m; ++i)
          if ((col >> i) & 1u) {
            --remaining[i];
            if (value) ++active[i];
          }
        // Declining the last undecided coverer of a firing monitor kills the
        // branch; activating can never create a new violation.
        bool feasible = true;
        if (!value)
          for (std::size_t i = 0; i < m && feasible; ++i)
            if (((col >> i) & 1u) && ((observed >> i) & 1u) &&
                active[i] == 0 && remaining[i] == 0)
              feasible = false;
        if (feasible) {
          y[j] = value;
          self(self, j + 1, prior_fixed + (value ? log_p1_[j] : log_p0_[j]));
        }
        for (std::size_t i = 0; i < m; ++i)
          if ((col >> i) & 1u) {
            ++remaining[i];
            if (value) --active[i];
          }
      }
      y[j] = 0;
    };
    descend(descend, 0, 0.0);

    if (!has_best)
      throw InfeasibilityError("no activity vector reproduces the observation");

    MapSolution solution;
    solution.y = std::move(best_y);
    solution.log_posterior = best;
    solution.optimal = true;
    std::uint32_t fired = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (solution.y[j]) fired |= model_.mixing().column(j);
    solution.x.resize(m);
    for (std::size_t i = 0; i < m; ++i) solution.x[i] = (fired >> i) & 1u;
    return solution;
  }

 private:
  SourceModel model_;
  std::vector<double> log_p1_, log_p0_;
};

inline MapSolution map_activities_zero_error(
    const SourceModel& model, std::span<const std::uint8_t> observation) {
  return ZeroErrorSolver(model).solve(observation);
}

}  // namespace bica
