#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include <bica/errors.hpp>
#include <bica/mixture.hpp>
#include <bica/rng.hpp>

#include "test_support.hpp"

using bica::MixingMatrix;
using bica::SourceModel;

TEST_CASE("canonical mixing matrix enumerates all nonzero columns") {
  const MixingMatrix g = bica::canonical_mixing_matrix(3);
  REQUIRE(g.monitors() == 3);
  REQUIRE(g.sources() == 7);
  for (std::uint32_t s = 1; s <= 7; ++s) CHECK(g.column(s - 1) == s);
  const bica::BinaryMatrix m = g.to_matrix();
  const std::vector<std::vector<int>> want{{1, 0, 1, 0, 1, 0, 1},
                                           {0, 1, 1, 0, 0, 1, 1},
                                           {0, 0, 0, 1, 1, 1, 1}};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 7; ++c) CHECK(m.get(r, c) == want[r][c]);
}

TEST_CASE("mixing matrix validation") {
  CHECK_THROWS_AS(MixingMatrix(0, {}), bica::ParameterError);
  CHECK_THROWS_AS(MixingMatrix(33, {1}), bica::CapacityError);
  CHECK_THROWS_AS(MixingMatrix(3, {0}), bica::ParameterError);
  CHECK_THROWS_AS(MixingMatrix(2, {5}), bica::DimensionError);
  CHECK_NOTHROW(MixingMatrix(2, {1, 2, 3}));
}

TEST_CASE("source model validation") {
  const MixingMatrix g(2, {1, 2});
  CHECK_THROWS_AS(SourceModel(g, {0.5}), bica::DimensionError);
  CHECK_THROWS_AS(SourceModel(g, {0.5, 1.5}), bica::ParameterError);
  CHECK_THROWS_AS(SourceModel(g, {0.5, -0.1}), bica::ParameterError);
  CHECK_THROWS_AS(SourceModel(MixingMatrix(2, {1, 1}), {0.5, 0.5}),
                  bica::ParameterError);
  CHECK_NOTHROW(SourceModel(g, {0.0, 1.0}));
}

TEST_CASE("or_mix combines active source columns") {
  // m=3, columns {5, 6}: y=[1,0] lights exactly the bits of column 5.
  const MixingMatrix g(3, {5, 6});
  const bica::BinaryVector x = bica::or_mix(g, bica::BinaryVector{1, 0});
  CHECK(x == bica::BinaryVector{1, 0, 1});
  CHECK(bica::or_mix(g, bica::BinaryVector{0, 1}) == bica::BinaryVector{0, 1, 1});
  CHECK(bica::or_mix(g, bica::BinaryVector{1, 1}) == bica::BinaryVector{1, 1, 1});
  CHECK(bica::or_mix(g, bica::BinaryVector{0, 0}) == bica::BinaryVector{0, 0, 0});
  CHECK_THROWS_AS(bica::or_mix(g, bica::BinaryVector{1}), bica::DimensionError);
}

TEST_CASE("or_mix over a full activity matrix") {
  const MixingMatrix g(2, {1, 3});
  bica::BinaryMatrix::Builder y(2, 3);
  y.set(0, 0, 1);
  y.set(1, 1, 1);
  const bica::BinaryMatrix obs = bica::or_mix(g, std::move(y).build());
  REQUIRE(obs.rows() == 2);
  REQUIRE(obs.cols() == 3);
  // slot 0: source 0 only -> monitor 0. slot 1: source 1 -> both monitors.
  CHECK(obs.get(0, 0) == 1);
  CHECK(obs.get(1, 0) == 0);
  CHECK(obs.get(0, 1) == 1);
  CHECK(obs.get(1, 1) == 1);
  CHECK(obs.get(0, 2) == 0);
  CHECK(obs.get(1, 2) == 0);
}

TEST_CASE("bernoulli sampler with p=1 fires every slot") {
  const SourceModel model(MixingMatrix(2, {1, 2, 3}), {1.0, 1.0, 1.0});
  const bica::BinaryMatrix y = bica::sample_activities(
      model, bica::ActivitySampler::bernoulli(3, 42), 50);
  CHECK(y.count_ones() == 150);
}

TEST_CASE("markov sampler matches its stationary rate") {
  // p01=0.2, p10=0.3 -> stationary activity 0.4.
  const bica::MarkovActivity chain{0.2, 0.3};
  CHECK(chain.stationary() == Catch::Approx(0.4));
  const SourceModel model(MixingMatrix(1, {1}), {0.5});
  const std::vector<double> p01{0.2}, p10{0.3};
  const bica::ActivitySampler sampler =
      bica::ActivitySampler::markov(p01, p10, 99);
  const std::size_t t = 200000;
  const bica::BinaryMatrix y = bica::sample_activities(model, sampler, t);
  const double rate = double(y.count_ones()) / double(t);
  CHECK(rate == Catch::Approx(0.4).margin(0.01));
}

TEST_CASE("markov sampler validates parameters") {
  const SourceModel model(MixingMatrix(1, {1}), {0.5});
  const std::vector<double> zero{0.0}, ok{0.3}, one{1.0};
  CHECK_THROWS_AS(
      bica::sample_activities(model, bica::ActivitySampler::markov(zero, ok, 1),
                              10),
      bica::ParameterError);
  CHECK_THROWS_AS(
      bica::sample_activities(model, bica::ActivitySampler::markov(ok, one, 1),
                              10),
      bica::ParameterError);
  CHECK_THROWS_AS(bica::sample_activities(
                      model, bica::ActivitySampler::bernoulli(1, 1), 0),
                  bica::ParameterError);
  CHECK_THROWS_AS(bica::sample_activities(
                      model, bica::ActivitySampler::bernoulli(2, 1), 10),
                  bica::DimensionError);
}

TEST_CASE("activity sampling is reproducible per seed") {
  const SourceModel model(MixingMatrix(2, {1, 2}), {0.3, 0.7});
  const auto s = bica::ActivitySampler::bernoulli(2, 5);
  CHECK(bica::sample_activities(model, s, 100) ==
        bica::sample_activities(model, s, 100));
}

TEST_CASE("inject_noise at the extremes") {
  bica::BinaryMatrix::Builder b(3, 40);
  for (std::size_t c = 0; c < 40; ++c) b.set(c % 3, c, 1);
  const bica::BinaryMatrix x = std::move(b).build();
  CHECK(bica::inject_noise(x, 0.0, 123) == x);
  const bica::BinaryMatrix flipped = bica::inject_noise(x, 1.0, 123);
  CHECK(flipped.count_ones() == 3 * 40 - x.count_ones());
  CHECK_THROWS_AS(bica::inject_noise(x, 1.5, 1), bica::ParameterError);
}

TEST_CASE("inject_noise flips at close to the requested rate") {
  bica::BinaryMatrix::Builder b(4, 50000);
  const bica::BinaryMatrix x = std::move(b).build();
  const bica::BinaryMatrix noisy = bica::inject_noise(x, 0.05, 321);
  const double rate = double(noisy.count_ones()) / double(4 * 50000);
  CHECK(rate == Catch::Approx(0.05).margin(0.005));
}

TEST_CASE("exact distribution of a two-source model") {
  // Disjoint columns factorize, so every cell is a product of marginals.
  const SourceModel model(MixingMatrix(2, {1, 2}), {0.4, 0.36});
  const std::vector<double> table = bica::exact_distribution(model);
  REQUIRE(table.size() == 4);
  CHECK(table[0] == Catch::Approx(0.6 * 0.64));
  CHECK(table[1] == Catch::Approx(0.4 * 0.64));
  CHECK(table[2] == Catch::Approx(0.6 * 0.36));
  CHECK(table[3] == Catch::Approx(0.4 * 0.36));
}

TEST_CASE("exact distribution with overlapping columns") {
  // Source 2 covers both monitors, so pattern 10 needs source 1 active,
  // source 2 idle: the OR structure is visible in the table.
  const SourceModel model(MixingMatrix(2, {1, 3}), {0.4, 0.19});
  const std::vector<double> table = bica::exact_distribution(model);
  CHECK(table[0] == Catch::Approx(0.6 * 0.81));
  CHECK(table[1] == Catch::Approx(0.4 * 0.81));
  CHECK(table[2] == Catch::Approx(0.0));
  CHECK(table[3] == Catch::Approx(0.19));
}

TEST_CASE("exact distribution agrees with brute-force enumeration") {
  bica::SplitMix64 rng(2024);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t m = 2 + rng.next() % 4;
    const std::size_t max_n = std::min<std::size_t>((1u << m) - 1, 6);
    const std::size_t n = 1 + rng.next() % max_n;
    const SourceModel model = test_support::random_model(rng, m, n, 0.05, 0.95);
    const std::vector<double> got = bica::exact_distribution(model);
    const std::vector<double> want = test_support::enumerate_distribution(model);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == Catch::Approx(want[i]).margin(1e-12));
  }
}

TEST_CASE("exact distribution guards capacity") {
  std::vector<std::uint32_t> cols;
  for (std::uint32_t s = 1; s <= 25; ++s) cols.push_back(s);
  const SourceModel model(MixingMatrix(21, cols), std::vector<double>(25, 0.1));
  CHECK_THROWS_AS(bica::exact_distribution(model), bica::CapacityError);
}

TEST_CASE("sampled observations converge to the exact distribution") {
  const SourceModel model(MixingMatrix(3, {1, 6, 5}), {0.3, 0.5, 0.15});
  const std::vector<double> exact = bica::exact_distribution(model);
  const std::size_t t = 1000000;
  const bica::BinaryMatrix y = bica::sample_activities(
      model, bica::ActivitySampler::bernoulli(3, 77), t);
  const bica::BinaryMatrix x = bica::or_mix(model.mixing(), y);
  std::vector<double> hist(8, 0.0);
  for (std::size_t c = 0; c < t; ++c) {
    std::uint32_t pattern = 0;
    for (std::size_t r = 0; r < 3; ++r)
      if (x.get(r, c)) pattern |= 1u << r;
    hist[pattern] += 1.0 / double(t);
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < 8; ++i) tv += std::abs(hist[i] - exact[i]);
  CHECK(tv / 2 < 0.01);
}
