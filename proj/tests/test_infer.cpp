#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <vector>

#include <bica/errors.hpp>
#include <bica/infer.hpp>
#include <bica/mixture.hpp>
#include <bica/oracle.hpp>
#include <bica/rng.hpp>

#include "test_support.hpp"

using bica::FrequencyOracle;
using bica::InferenceResult;
using bica::MixingMatrix;
using bica::SourceModel;

TEST_CASE("two-monitor recovery, hand-checked") {
  // True model: sources {1}, {2}, {3} with p = 0.5, 0.1, 0.2. The recursion
  // sees P(x0=1 | x1=0) = 0.5 directly, the marginal P(x0=1) = 0.6 inflated
  // by the shared source, so p[3] = 1 - 0.4/0.5 = 0.2, and the corner
  // P(x1=1, x0=0) / ((1-0.5)(1-0.2)) = 0.04/0.4 = 0.1.
  const SourceModel truth(MixingMatrix(2, {1, 2, 3}), {0.5, 0.1, 0.2});
  const FrequencyOracle oracle = FrequencyOracle::from_model(truth);
  const std::vector<double> probs =
      bica::recover_component_probabilities(oracle);
  REQUIRE(probs.size() == 4);
  CHECK(probs[1] == Catch::Approx(0.5).margin(1e-12));
  CHECK(probs[2] == Catch::Approx(0.1).margin(1e-12));
  CHECK(probs[3] == Catch::Approx(0.2).margin(1e-12));
}

TEST_CASE("find_bica recovers the model and prunes empty candidates") {
  const SourceModel truth(MixingMatrix(2, {1, 3}), {0.4, 0.19});
  const InferenceResult got =
      bica::find_bica(FrequencyOracle::from_model(truth), 0.01);
  REQUIRE(got.model.sources() == 2);
  CHECK(got.model.mixing().column(0) == 1);
  CHECK(got.model.mixing().column(1) == 3);
  CHECK(got.model.p()[0] == Catch::Approx(0.4).margin(1e-12));
  CHECK(got.model.p()[1] == Catch::Approx(0.19).margin(1e-12));
  CHECK(got.epsilon == 0.01);
  REQUIRE(got.groups.size() == 1);
  CHECK(got.groups[0] == std::vector<std::size_t>{0, 1});
}

TEST_CASE("exact recovery across random models") {
  bica::SplitMix64 rng(314);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 2 + rng.next() % 5;  // 2..6
    const std::size_t max_n = std::min<std::size_t>((1u << m) - 1, 8);
    const std::size_t n = 1 + rng.next() % max_n;
    const SourceModel truth = test_support::random_model(rng, m, n, 0.1, 0.6);
    const InferenceResult got =
        bica::find_bica(FrequencyOracle::from_model(truth), 0.05);
    REQUIRE(got.model.sources() == n);
    // Both sides keep ascending bitmask order.
    std::vector<std::uint32_t> want(truth.mixing().columns().begin(),
                                    truth.mixing().columns().end());
    std::vector<double> want_p(truth.p().begin(), truth.p().end());
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(got.model.mixing().column(j) == want[j]);
      CHECK(got.model.p()[j] == Catch::Approx(want_p[j]).margin(1e-9));
    }
  }
}

TEST_CASE("candidates below epsilon are dropped") {
  const SourceModel truth(MixingMatrix(2, {1, 2}), {0.3, 0.04});
  const InferenceResult got =
      bica::find_bica(FrequencyOracle::from_model(truth), 0.05);
  REQUIRE(got.model.sources() == 1);
  CHECK(got.model.mixing().column(0) == 1);
}

TEST_CASE("recursion finalizes candidates in the documented order") {
  bica::RecursionTrace trace2;
  const SourceModel t2(MixingMatrix(2, {1, 2}), {0.3, 0.3});
  bica::find_bica(FrequencyOracle::from_model(t2), 0.01, &trace2);
  CHECK(trace2.finalized == std::vector<std::uint32_t>{1, 3, 2});

  bica::RecursionTrace trace3;
  const SourceModel t3(MixingMatrix(3, {1, 2, 4}), {0.3, 0.3, 0.3});
  bica::find_bica(FrequencyOracle::from_model(t3), 0.01, &trace3);
  CHECK(trace3.finalized == std::vector<std::uint32_t>{1, 3, 2, 5, 6, 7, 4});
}

TEST_CASE("a monitor that never goes silent is degenerate") {
  const SourceModel truth(MixingMatrix(2, {1, 2}), {0.3, 1.0});
  try {
    bica::find_bica(FrequencyOracle::from_model(truth), 0.01);
    FAIL("expected DegenerateSourceError");
  } catch (const bica::DegenerateSourceError& e) {
    CHECK(e.bitmask() == 2);
  }
}

TEST_CASE("a vanishing corner denominator is degenerate") {
  // Two near-saturated sources leave (1-p1)(1-p2) = 2.5e-7 below the 1e-6
  // tolerance when the corner candidate for monitor 2 divides by it. Two
  // monitors cannot reach this state: clamping the inflated marginal pins
  // their corner denominator at exactly 1e-6, never below.
  const SourceModel truth(MixingMatrix(3, {1, 2, 4}), {0.9995, 0.9995, 0.5});
  try {
    bica::find_bica(FrequencyOracle::from_model(truth), 0.01);
    FAIL("expected DegenerateSourceError");
  } catch (const bica::DegenerateSourceError& e) {
    CHECK(e.bitmask() == 4);
    CHECK(std::string(e.what()).find("corner denominator") != std::string::npos);
  }
}

TEST_CASE("epsilon domain is enforced") {
  const SourceModel truth(MixingMatrix(2, {1, 2}), {0.3, 0.3});
  const FrequencyOracle oracle = FrequencyOracle::from_model(truth);
  CHECK_THROWS_AS(bica::find_bica(oracle, 0.0), bica::ParameterError);
  CHECK_THROWS_AS(bica::find_bica(oracle, 1.0), bica::ParameterError);
  CHECK_THROWS_AS(bica::find_bica(oracle, -0.2), bica::ParameterError);
}

TEST_CASE("sampled data with an always-on monitor stays total") {
  // Monitor 1 is on in every slot, so conditioning on it silent has no
  // samples. The exact-distribution form of this state throws; on sampled
  // data the estimator must complete, attributing the saturated monitor to
  // a near-certain candidate instead of aborting the run.
  bica::BinaryMatrix::Builder builder(2, 64);
  for (std::size_t t = 0; t < 64; ++t) {
    builder.set(0, t, (t % 3) == 0);
    builder.set(1, t, true);
  }
  const InferenceResult got = bica::find_bica(
      FrequencyOracle::from_observations(std::move(builder).build()), 0.01);
  REQUIRE(got.model.sources() >= 1);
  bool saw_saturated = false;
  for (std::size_t j = 0; j < got.model.sources(); ++j) {
    const double pj = got.model.p()[j];
    CHECK(pj >= 0.01);
    CHECK(pj < 1.0);
    if ((got.model.mixing().column(j) & 2u) && pj > 0.99) saw_saturated = true;
  }
  CHECK(saw_saturated);
}

TEST_CASE("sampled corner starvation clamps instead of throwing") {
  // Table crafted so the inner corner's denominator falls below the delta
  // guard: strict recovery refuses it, the sampled estimator clamps and
  // finishes with every probability inside [0, 1).
  const std::vector<double> table = {5e-10, 5e-10, 5e-10, 0.4999999985,
                                     0.125, 0.125, 0.125, 0.125};
  CHECK_THROWS_AS(bica::detail::recover_from_table(3, table, 0.01, true,
                                                   nullptr, nullptr),
                  bica::DegenerateSourceError);
  const std::vector<double> probs = bica::detail::recover_from_table(
      3, table, 0.01, false, nullptr, nullptr);
  for (double v : probs) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("estimates from a long sample approach the truth") {
  const SourceModel truth(MixingMatrix(3, {1, 6, 7}), {0.35, 0.2, 0.15});
  const bica::BinaryMatrix y = bica::sample_activities(
      truth, bica::ActivitySampler::bernoulli(3, 500), 1000000);
  const bica::BinaryMatrix x = bica::or_mix(truth.mixing(), y);
  const InferenceResult got =
      bica::find_bica(FrequencyOracle::from_observations(x), 0.05);
  REQUIRE(got.model.sources() == 3);
  CHECK(got.model.mixing().column(0) == 1);
  CHECK(got.model.mixing().column(1) == 6);
  CHECK(got.model.mixing().column(2) == 7);
  CHECK(got.model.p()[0] == Catch::Approx(0.35).margin(0.01));
  CHECK(got.model.p()[1] == Catch::Approx(0.2).margin(0.01));
  CHECK(got.model.p()[2] == Catch::Approx(0.15).margin(0.01));
}

TEST_CASE("decomposition splits independent monitor blocks") {
  // Monitors {0,1} share a source; monitor 2 is driven alone.
  const SourceModel truth(MixingMatrix(3, {3, 4}), {0.3, 0.4});
  const FrequencyOracle oracle = FrequencyOracle::from_model(truth);
  const auto groups = bica::decompose_by_correlation(oracle, 0.01);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0] == std::vector<std::size_t>{0, 1});
  CHECK(groups[1] == std::vector<std::size_t>{2});
}

TEST_CASE("decomposition keeps a chained block together") {
  // Monitors 0-1 and 1-2 each share a source; 0 and 2 do not, but
  // transitivity must still join all three into one component.
  const SourceModel truth(MixingMatrix(3, {3, 6}), {0.3, 0.3});
  const auto groups =
      bica::decompose_by_correlation(FrequencyOracle::from_model(truth), 0.01);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0] == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("confidence decomposition tolerates sampling dust") {
  // Two independent blocks, empirical oracle: sampling noise produces tiny
  // nonzero covariances that the significance threshold must ignore.
  const SourceModel truth(MixingMatrix(4, {3, 12}), {0.4, 0.35});
  const bica::BinaryMatrix y = bica::sample_activities(
      truth, bica::ActivitySampler::bernoulli(2, 62), 20000);
  const bica::BinaryMatrix x = bica::or_mix(truth.mixing(), y);
  const auto groups =
      bica::decompose_by_confidence(FrequencyOracle::from_observations(x));
  REQUIRE(groups.size() == 2);
  CHECK(groups[0] == std::vector<std::size_t>{0, 1});
  CHECK(groups[1] == std::vector<std::size_t>{2, 3});
}

TEST_CASE("assemble re-embeds group results into global monitor space") {
  const SourceModel part_a(MixingMatrix(2, {1, 3}), {0.3, 0.2});
  const SourceModel part_b(MixingMatrix(1, {1}), {0.4});
  std::vector<bica::GroupInference> parts;
  // Group monitors listed ascending: local bit b maps to monitors[b].
  parts.push_back({{0, 2}, {part_a, 0.01, {{0, 1}}}});
  parts.push_back({{1}, {part_b, 0.01, {{0}}}});
  const InferenceResult got = bica::assemble(3, parts);
  REQUIRE(got.model.sources() == 3);
  // Local {1}->global {0}, local {3}->global {0,2}=5, part_b {1}->global {1}.
  CHECK(got.model.mixing().column(0) == 1);
  CHECK(got.model.p()[0] == Catch::Approx(0.3));
  CHECK(got.model.mixing().column(1) == 2);
  CHECK(got.model.p()[1] == Catch::Approx(0.4));
  CHECK(got.model.mixing().column(2) == 5);
  CHECK(got.model.p()[2] == Catch::Approx(0.2));
  REQUIRE(got.groups.size() == 2);
}

TEST_CASE("assemble rejects bad partitions") {
  const SourceModel part(MixingMatrix(1, {1}), {0.4});
  const InferenceResult r{part, 0.01, {{0}}};
  {
    std::vector<bica::GroupInference> parts{{{0}, r}, {{0}, r}};
    CHECK_THROWS_AS(bica::assemble(2, parts), bica::PartitionError);
  }
  {
    std::vector<bica::GroupInference> parts{{{5}, r}};
    CHECK_THROWS_AS(bica::assemble(2, parts), bica::PartitionError);
  }
  {
    std::vector<bica::GroupInference> parts{{{0, 1}, r}};
    CHECK_THROWS_AS(bica::assemble(2, parts), bica::DimensionError);
  }
  {
    InferenceResult other = r;
    other.epsilon = 0.02;
    std::vector<bica::GroupInference> parts{{{0}, r}, {{1}, other}};
    CHECK_THROWS_AS(bica::assemble(2, parts), bica::ParameterError);
  }
  {
    std::vector<bica::GroupInference> parts;
    CHECK_THROWS_AS(bica::assemble(2, parts), bica::ParameterError);
  }
}

TEST_CASE("infer_sources with decomposition matches direct recovery") {
  // 6 monitors, two independent 3-monitor blocks. Decomposed inference must
  // reproduce what one global recursion would find, but it only ever builds
  // 2^3 tables.
  const SourceModel truth(MixingMatrix(6, {3, 4, 24, 32}),
                          {0.3, 0.25, 0.2, 0.4});
  const FrequencyOracle oracle = FrequencyOracle::from_model(truth);
  bica::InferOptions options;
  options.epsilon = 0.05;
  options.cov_threshold = 0.01;
  const InferenceResult got = bica::infer_sources(oracle, options);
  REQUIRE(got.model.sources() == 4);
  CHECK(got.model.mixing().column(0) == 3);
  CHECK(got.model.mixing().column(1) == 4);
  CHECK(got.model.mixing().column(2) == 24);
  CHECK(got.model.mixing().column(3) == 32);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(got.model.p()[j] == Catch::Approx(truth.p()[j]).margin(1e-9));
  // Components: {0,1}, {2}, {3,4}, {5}.
  CHECK(got.groups.size() == 4);
}

TEST_CASE("infer_sources without decomposition runs one global recursion") {
  const SourceModel truth(MixingMatrix(3, {3, 4}), {0.3, 0.4});
  bica::InferOptions options;
  options.epsilon = 0.05;
  options.decompose = false;
  const InferenceResult got =
      bica::infer_sources(FrequencyOracle::from_model(truth), options);
  REQUIRE(got.model.sources() == 2);
  REQUIRE(got.groups.size() == 1);
  CHECK(got.groups[0].size() == 3);
}
