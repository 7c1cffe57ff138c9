#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bica/binary_matrix.hpp"
#include "bica/errors.hpp"
#include "bica/mixture.hpp"
#include "bica/rng.hpp"

namespace bica {

inline double dbm_to_mw(double dbm) noexcept {
  return std::pow(10.0, dbm / 10.0);
}

inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

// Transmitters closer than this to a monitor are treated as at this
// distance; keeps path loss finite for coincident points.
inline constexpr double kMinDistanceM = 1e-3;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double distance(const Vec2& a, const Vec2& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct ScenarioParams {
  std::size_t monitor_count = 10;
  std::size_t pu_count = 5;
  double area_m = 500.0;          // square side
  double alpha = 3.0;             // path loss exponent
  double tx_power_mw = 20.0;      // per transmitter
  double noise_floor_dbm = -95.0;
  double threshold_db = 5.0;      // detection margin above the floor
  double gain_const = 1e-5;       // antenna/propagation constant
};

// Concrete placement of monitors and primary-user transmitters on an
// area x area square, plus the propagation constants. The detection rule is
// absolute: a monitor detects a transmitter when the expected received power
// exceeds tau_mw() = floor * 10^(threshold_db/10).
struct Scenario {
  double area_m = 500.0;
  double alpha = 3.0;
  double noise_floor_dbm = -95.0;
  double threshold_db = 5.0;
  double gain_const = 1e-5;
  std::vector<Vec2> monitors;
  std::vector<Vec2> pus;
  std::vector<double> tx_power_mw;

  double noise_floor_mw() const noexcept { return dbm_to_mw(noise_floor_dbm); }
  double tau_mw() const noexcept {
    return noise_floor_mw() * std::pow(10.0, threshold_db / 10.0);
  }

  // Expected received power (no fading) at monitor i from transmitter j.
  double expected_power_mw(std::size_t i, std::size_t j) const {
    const double d = std::max(distance(monitors[i], pus[j]), kMinDistanceM);
    return gain_const * tx_power_mw[j] * std::pow(d, -alpha);
  }

  void validate() const {
    if (!(area_m > 0.0)) throw ParameterError("area must be positive");
    if (!(alpha > 0.0)) throw ParameterError("path loss exponent must be positive");
    if (!(gain_const > 0.0)) throw ParameterError("gain constant must be positive");
    if (tx_power_mw.size() != pus.size())
      throw DimensionError("one transmit power per transmitter required");
    for (double p : tx_power_mw)
      if (!(p > 0.0)) throw ParameterError("transmit power must be positive");
    if (monitors.empty()) throw ParameterError("scenario needs monitors");
    if (monitors.size() > 32)
      throw CapacityError("scenario supports at most 32 monitors");
    auto inside = [&](const Vec2& v) {
      return v.x >= 0.0 && v.x <= area_m && v.y >= 0.0 && v.y <= area_m;
    };
    for (const Vec2& v : monitors)
      if (!inside(v)) throw ParameterError("monitor outside the area");
    for (const Vec2& v : pus)
      if (!inside(v)) throw ParameterError("transmitter outside the area");
  }
};

namespace detail {

inline std::uint32_t detection_mask(const Scenario& sc, std::size_t j) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < sc.monitors.size(); ++i)
    if (sc.expected_power_mw(i, j) > sc.tau_mw())
      mask |= std::uint32_t{1} << i;
  return mask;
}

}  // namespace detail

// Expected-power detection adjacency; throws if any transmitter is
// invisible or two transmitters have identical visibility.
inline MixingMatrix derive_mixing_matrix(const Scenario& scenario) {
  scenario.validate();
  std::vector<std::uint32_t> columns;
  columns.reserve(scenario.pus.size());
  for (std::size_t j = 0; j < scenario.pus.size(); ++j) {
    const std::uint32_t mask = detail::detection_mask(scenario, j);
    if (mask == 0)
      throw InfeasibilityError("transmitter " + std::to_string(j + 1) +
                               " is detected by no monitor");
    for (std::uint32_t other : columns)
      if (other == mask)
        throw InfeasibilityError("transmitter " + std::to_string(j + 1) +
                                 " duplicates another visibility column");
    columns.push_back(mask);
  }
  return MixingMatrix(scenario.monitors.size(), std::move(columns));
}

inline constexpr std::size_t kPlacementRetries = 1000;

// Random scenario with an identifiable mixing matrix: monitors placed
// uniformly, transmitters placed by rejection until each is detected
// somewhere and no two share a visibility column.
inline Scenario generate_scenario(const ScenarioParams& params,
                                  std::uint64_t seed) {
  if (params.monitor_count == 0)
    throw ParameterError("scenario needs at least one monitor");
  if (params.monitor_count > 32)
    throw CapacityError("scenario supports at most 32 monitors");
  Scenario sc;
  sc.area_m = params.area_m;
  sc.alpha = params.alpha;
  sc.noise_floor_dbm = params.noise_floor_dbm;
  sc.threshold_db = params.threshold_db;
  sc.gain_const = params.gain_const;
  SplitMix64 monitor_rng(derive_seed(seed, 0));
  for (std::size_t i = 0; i < params.monitor_count; ++i) {
    Vec2 v{monitor_rng.uniform01() * params.area_m,
           monitor_rng.uniform01() * params.area_m};
    sc.monitors.push_back(v);
  }
  SplitMix64 pu_rng(derive_seed(seed, 1));
  std::vector<std::uint32_t> columns;
  for (std::size_t j = 0; j < params.pu_count; ++j) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < kPlacementRetries; ++attempt) {
      const Vec2 v{pu_rng.uniform01() * params.area_m,
                   pu_rng.uniform01() * params.area_m};
      sc.pus.push_back(v);
      sc.tx_power_mw.push_back(params.tx_power_mw);
      const std::uint32_t mask = detail::detection_mask(sc, j);
      bool distinct = mask != 0;
      for (std::uint32_t other : columns) distinct = distinct && other != mask;
      if (distinct) {
        columns.push_back(mask);
        placed = true;
        break;
      }
      sc.pus.pop_back();
      sc.tx_power_mw.pop_back();
    }
    if (!placed)
      throw InfeasibilityError(
          "could not place transmitter " + std::to_string(j + 1) +
          " with a distinct nonzero visibility column in " +
          std::to_string(kPlacementRetries) + " attempts");
  }
  sc.validate();
  return sc;
}

// Row-major dense real matrix; just enough for received-power traces.
struct PowerMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  PowerMatrix() = default;
  PowerMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c) {}
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

enum class Fading { none, rayleigh };

// Linear received power v_it = sum_j h_ijt z_j y_jt + noise_it over all
// transmitters (not just detected ones; discarding the subthreshold tail is
// exactly what the OR approximation does and what comparisons measure).
// Rayleigh fading multiplies each active link by a unit-mean exponential
// power factor, redrawn per slot. Noise is max(0, Normal(floor, sigma)); the
// default sigma = 0 gives the deterministic floor.
inline PowerMatrix simulate_linear(const Scenario& scenario,
                                   const BinaryMatrix& activities,
                                   Fading fading, std::uint64_t seed,
                                   double noise_sigma_mw = 0.0) {
  scenario.validate();
  if (activities.rows() != scenario.pus.size())
    throw DimensionError("one activity row per transmitter required");
  if (!(noise_sigma_mw >= 0.0))
    throw ParameterError("noise sigma must be nonnegative");
  const std::size_t m = scenario.monitors.size();
  const std::size_t n = scenario.pus.size();
  const std::size_t t_count = activities.cols();
  std::vector<double> gain(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      gain[i * n + j] = scenario.expected_power_mw(i, j);
  const double floor_mw = scenario.noise_floor_mw();
  SplitMix64 fading_rng(derive_seed(seed, 0));
  SplitMix64 noise_rng(derive_seed(seed, 1));
  PowerMatrix v(m, t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      double power = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!activities.get(j, t)) continue;
        const double f =
            fading == Fading::rayleigh ? fading_rng.exponential() : 1.0;
        power += gain[i * n + j] * f;
      }
      double noise = floor_mw;
      if (noise_sigma_mw > 0.0)
        noise = std::max(0.0, floor_mw + noise_sigma_mw * noise_rng.normal());
      v.at(i, t) = power + noise;
    }
  }
  return v;
}

// Energy detector: 1 iff received power strictly exceeds tau.
inline BinaryMatrix quantize(const PowerMatrix& v, double tau_mw) {
  BinaryMatrix::Builder b(v.rows, v.cols);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t c = 0; c < v.cols; ++c)
      if (v.at(r, c) > tau_mw) b.set(r, c);
  return std::move(b).build();
}

// Disagreement rates between the OR approximation and the linear model,
// with the linear observation as ground truth. A rate whose denominator is
// empty (a model that never/always fires) is not available.
struct ModelComparison {
  std::optional<double> false_alarm;  // P(or = 1 | linear = 0)
  std::optional<double> miss;         // P(or = 0 | linear = 1)
};

inline ModelComparison compare_models(const BinaryMatrix& x_or,
                                      const BinaryMatrix& x_linear) {
  if (x_or.rows() != x_linear.rows() || x_or.cols() != x_linear.cols())
    throw DimensionError("model observation matrices must share shape");
  std::size_t lin_on = 0, lin_off = 0, fa = 0, miss = 0;
  for (std::size_t r = 0; r < x_or.rows(); ++r)
    for (std::size_t c = 0; c < x_or.cols(); ++c) {
      const bool o = x_or.get(r, c);
      const bool l = x_linear.get(r, c);
      if (l) {
        ++lin_on;
        if (!o) ++miss;
      } else {
        ++lin_off;
        if (o) ++fa;
      }
    }
  ModelComparison out;
  if (lin_off > 0)
    out.false_alarm = static_cast<double>(fa) / static_cast<double>(lin_off);
  if (lin_on > 0)
    out.miss = static_cast<double>(miss) / static_cast<double>(lin_on);
  return out;
}

}  // namespace bica
