#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "gcm/attribution.hpp"
#include "gcm/error.hpp"
#include "gcm/random.hpp"
#include "gcm/sampling.hpp"
#include "support.hpp"

namespace gcm {
namespace {

using testing::gaussian_root;
using testing::linear_anm;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected gcm::Error";
  return ErrorCode::kIo;
}

// X ~ N(0, 1), Y = c X + N(0, sd^2).
GcmModel linear_pair(double c, double sd = 1.0) {
  GcmModel m(CausalGraph({"X", "Y"}, {{"X", "Y"}}));
  m = assign_ground_truth(m, "X", gaussian_root(0, 1));
  return assign_ground_truth(m, "Y", linear_anm({"X"}, {c}, 0.0, sd));
}

ShapleyConfig exact_shapley() { return ShapleyConfig{ShapleyMethod::kExact, 0, 0, 1}; }

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Dataset single_row(const std::vector<std::string>& names, const std::vector<double>& values) {
  std::vector<Column> cols;
  for (std::size_t i = 0; i < names.size(); ++i) cols.push_back(Column::continuous(names[i], {values[i]}));
  return Dataset(std::move(cols));
}

// Row of the unit chain with the given noises.
Dataset chain_row(double nx, double ny, double nz) {
  const double x = nx;
  const double y = x + ny;
  return single_row({"X", "Y", "Z"}, {x, y, y + nz});
}

TEST(ArrowStrength, UnitCoefficient) {
  EXPECT_NEAR(arrow_strength(linear_pair(1.0), "X", "Y", ArrowMeasure::kCoupledMsd, 50000, 1), 2.0, 0.06);
}

TEST(ArrowStrength, CoefficientThree) {
  EXPECT_NEAR(arrow_strength(linear_pair(3.0), "X", "Y", ArrowMeasure::kAuto, 50000, 2), 18.0, 0.5);
}

TEST(ArrowStrength, NullEdgeIsExactlyZero) {
  EXPECT_EQ(arrow_strength(linear_pair(0.0), "X", "Y", ArrowMeasure::kCoupledMsd, 1000, 3), 0.0);
}

TEST(ArrowStrength, KlMeasure) {
  const double strong = arrow_strength(linear_pair(2.0), "X", "Y", ArrowMeasure::kKl, 3000, 4);
  const double none = arrow_strength(linear_pair(0.0), "X", "Y", ArrowMeasure::kKl, 3000, 4);
  EXPECT_GT(strong, 0.5);
  EXPECT_LT(none, 0.05);
  EXPECT_EQ(arrow_measure_name(ArrowMeasure::kAuto, true), "coupled_msd");
}

TEST(ArrowStrength, Errors) {
  const GcmModel m = linear_pair(1.0);
  EXPECT_EQ(code_of([&] { arrow_strength(m, "Y", "X", ArrowMeasure::kAuto, 100, 1); }), ErrorCode::kUnknownNode);
  EXPECT_EQ(code_of([&] { arrow_strength(m, "X", "Y", ArrowMeasure::kAuto, 1, 1); }), ErrorCode::kInvalidArgument);
}

TEST(IntrinsicInfluence, PairSplitsVariance) {
  const InfluenceConfig config{exact_shapley(), 100, 500};
  const AttributionResult r = intrinsic_influence(linear_pair(1.0), "Y", config, 5);
  EXPECT_EQ(r.players, (std::vector<std::string>{"X", "Y"}));
  EXPECT_NEAR(r.score("X"), 1.0, 0.1);
  EXPECT_NEAR(r.score("Y"), 1.0, 0.1);
  EXPECT_NEAR(sum(r.scores), r.full_value, 1e-9);
  EXPECT_NEAR(r.full_value, 2.0, 0.1);
  EXPECT_EQ(r.measure, "variance");
}

TEST(IntrinsicInfluence, DeterministicChildGetsNothing) {
  const InfluenceConfig config{exact_shapley(), 100, 500};
  const AttributionResult r = intrinsic_influence(linear_pair(1.0, 0.0), "Y", config, 6);
  EXPECT_NEAR(r.score("X"), 1.0, 0.1);
  EXPECT_NEAR(r.score("Y"), 0.0, 0.05);
}

TEST(IntrinsicInfluence, UnitChain) {
  const InfluenceConfig config{exact_shapley(), 100, 500};
  const AttributionResult r = intrinsic_influence(testing::unit_chain().model(), "Z", config, 7);
  for (const char* node : {"X", "Y", "Z"}) EXPECT_NEAR(r.score(node), 1.0, 0.15) << node;
  EXPECT_NEAR(sum(r.scores), r.full_value, 1e-9);
  EXPECT_NEAR(r.full_value, 3.0, 0.15);
}

TEST(IntrinsicInfluence, PlayersAreAncestorsAndTarget) {
  const InfluenceConfig config{exact_shapley(), 20, 50};
  const AttributionResult r = intrinsic_influence(testing::unit_chain().model(), "Y", config, 8);
  EXPECT_EQ(r.players, (std::vector<std::string>{"X", "Y"}));
  EXPECT_EQ(code_of([&] { r.score("Z"); }), ErrorCode::kUnknownNode);
}

TEST(OutlierScorer, Properties) {
  const auto ref = testing::normal_sample(1000, 0, 1, 9);
  const OutlierScorer scorer(ref);
  EXPECT_DOUBLE_EQ(scorer.score(100.0), std::log(1001.0));
  const double centre = scorer.mean();
  double previous = scorer.score(centre);
  EXPECT_GE(previous, 0.0);
  for (double y = 0.0625; y < 5.0; y += 0.0625) {
    const double s = scorer.score(centre + y);
    EXPECT_GE(s, previous);
    EXPECT_LE(s, std::log(1001.0));
    EXPECT_NEAR(scorer.feature(centre - y), scorer.feature(centre + y), 1e-12);
    previous = s;
  }
  EXPECT_EQ(code_of([] { OutlierScorer(std::vector<double>{}); }), ErrorCode::kEmptyInput);
}

TEST(OutlierScorer, MatchesRankFormula) {
  const auto ref = testing::normal_sample(200, 1, 2, 10);
  const OutlierScorer scorer(ref);
  const double m = std::accumulate(ref.begin(), ref.end(), 0.0) / 200.0;
  double ss = 0.0;
  for (double r : ref) ss += (r - m) * (r - m);
  const double sd = std::sqrt(ss / 199.0);
  for (double y : {-3.0, 0.0, 1.0, 2.5, 7.0}) {
    const double tau = std::abs(y - m) / sd;
    int count = 0;
    for (double r : ref) count += std::abs(r - m) / sd >= tau;
    EXPECT_NEAR(scorer.score(y), -std::log((1.0 + count) / 201.0), 1e-12) << y;
  }
}

TEST(OutlierScorer, ConstantReference) {
  const OutlierScorer scorer(std::vector<double>(10, 3.0));
  EXPECT_EQ(scorer.score(3.0), 0.0);
  EXPECT_DOUBLE_EQ(scorer.score(4.0), std::log(11.0));
}

TEST(AnomalyAttribution, RootCauseIsY) {
  int hits = 0;
  const GcmModel m = testing::unit_chain().model();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AnomalyConfig config{exact_shapley(), 2000};
    const AttributionResult r = attribute_anomaly(m, "Z", chain_row(0, 5, 0), config, seed);
    const auto best = std::max_element(r.scores.begin(), r.scores.end()) - r.scores.begin();
    hits += r.players[static_cast<std::size_t>(best)] == "Y";
    EXPECT_NEAR(sum(r.scores), r.full_value, 1e-9);
  }
  EXPECT_GE(hits, 19);
}

TEST(AnomalyAttribution, TypicalRowScoresNearZero) {
  const AnomalyConfig config{exact_shapley(), 5000};
  const AttributionResult r = attribute_anomaly(testing::unit_chain().model(), "Z", chain_row(0, 0, 0), config, 11);
  for (double s : r.scores) EXPECT_LE(std::abs(s), 0.2);
}

TEST(AnomalyAttribution, SingleNodeGetsMarginalScore) {
  GcmModel m(CausalGraph({"X"}, {}));
  m = assign_ground_truth(m, "X", gaussian_root(0, 1));
  const AnomalyConfig config{exact_shapley(), 1000};
  const std::uint64_t seed = 12;
  const AttributionResult r = attribute_anomaly(m, "X", single_row({"X"}, {2.5}), config, seed);
  const NoiseSample noise = draw_noise(m, 1000, derive_seed(seed, "anomaly/reference"));
  const OutlierScorer scorer(propagate(m, noise).reals("X"));
  ASSERT_EQ(r.scores.size(), 1u);
  EXPECT_EQ(r.scores[0], scorer.score(2.5));
}

TEST(AnomalyAttribution, Errors) {
  const GcmModel m = testing::unit_chain().model();
  const AnomalyConfig config{exact_shapley(), 100};
  const Dataset two = chain_row(0, 0, 0).take_rows(std::vector<std::size_t>{0, 0});
  EXPECT_EQ(code_of([&] { attribute_anomaly(m, "Z", two, config, 1); }), ErrorCode::kInvalidArgument);
  const Dataset partial = single_row({"X", "Y"}, {0, 0});
  EXPECT_EQ(code_of([&] { attribute_anomaly(m, "Z", partial, config, 1); }), ErrorCode::kUnknownColumn);
}

TEST(DistributionChange, MechanismShiftAtY) {
  const auto old_lg = testing::make_linear_gaussian({"X", "Y"}, {{"X", "Y", 1.0}}, {0, 0}, {1, 1});
  const auto new_lg = testing::make_linear_gaussian({"X", "Y"}, {{"X", "Y", 1.0}}, {0, 2}, {1, 1});
  const ChangeConfig config{exact_shapley(), 10000};
  const AttributionResult r = distribution_change(old_lg.graph(), old_lg.simulate(3000, 1), new_lg.simulate(3000, 2),
                                                  "Y", ChangeMeasure::kMeanDiff, config, 13);
  EXPECT_NEAR(r.score("Y"), 2.0, 0.1);
  EXPECT_NEAR(r.score("X"), 0.0, 0.1);
  EXPECT_NEAR(sum(r.scores), r.full_value - r.empty_value, 1e-9);
  EXPECT_EQ(r.measure, "mean_diff");
}

TEST(DistributionChange, RootShift) {
  const auto old_lg = testing::make_linear_gaussian({"X", "Y"}, {{"X", "Y", 1.0}}, {0, 0}, {1, 1});
  const auto new_lg = testing::make_linear_gaussian({"X", "Y"}, {{"X", "Y", 1.0}}, {1, 0}, {1, 1});
  const ChangeConfig config{exact_shapley(), 10000};
  const AttributionResult r = distribution_change(old_lg.model(), new_lg.model(), "Y", ChangeMeasure::kMeanDiff,
                                                  config, 14);
  EXPECT_NEAR(r.score("X"), 1.0, 0.1);
  EXPECT_NEAR(r.score("Y"), 0.0, 0.1);
}

TEST(DistributionChange, NoChange) {
  const auto lg = testing::unit_chain();
  const Dataset d = lg.simulate(2000, 3);
  const ChangeConfig config{exact_shapley(), 10000};
  const AttributionResult r = distribution_change(lg.graph(), d, d, "Z", ChangeMeasure::kMeanDiff, config, 15);
  // Each hybrid mean has sd about sqrt(3 / n).
  for (double s : r.scores) EXPECT_LE(std::abs(s), 4 * std::sqrt(2 * 3.0 / 10000));
  const AttributionResult kl = distribution_change(lg.graph(), d, d, "Z", ChangeMeasure::kKl, {exact_shapley(), 3000}, 16);
  for (double s : kl.scores) EXPECT_LE(std::abs(s), 0.05);
}

TEST(DistributionChange, Errors) {
  const auto lg = testing::unit_chain();
  const Dataset d = lg.simulate(100, 4);
  const Dataset other({d.column("X"), Column::categorical("Y", std::vector<std::string>(100, "a")), d.column("Z")});
  const ChangeConfig config{exact_shapley(), 100};
  EXPECT_EQ(code_of([&] { distribution_change(lg.graph(), d, other, "Z", ChangeMeasure::kAuto, config, 1); }),
            ErrorCode::kTypeMismatch);
  const GcmModel pair = linear_pair(1.0);
  EXPECT_EQ(code_of([&] { distribution_change(lg.model(), pair, "Y", ChangeMeasure::kAuto, config, 1); }),
            ErrorCode::kInvalidArgument);
}

TEST(AttributionJson, Shape) {
  const InfluenceConfig config{exact_shapley(), 10, 20};
  const Json j = to_json(intrinsic_influence(linear_pair(1.0), "Y", config, 17));
  EXPECT_TRUE(j.at("scores").contains("X"));
  EXPECT_TRUE(j.at("scores").contains("Y"));
  EXPECT_EQ(j.at("seed"), 17);
  EXPECT_TRUE(j.contains("measure"));
  EXPECT_TRUE(j.contains("budget"));
}

// W -> Y with coefficient 0 next to X -> Y; W is a null player everywhere.
GcmModel with_null_parent() {
  GcmModel m(CausalGraph({"W", "X", "Y"}, {{"W", "Y"}, {"X", "Y"}}));
  m = assign_ground_truth(m, "W", gaussian_root(0, 1));
  m = assign_ground_truth(m, "X", gaussian_root(0, 1));
  return assign_ground_truth(m, "Y", linear_anm({"W", "X"}, {0.0, 1.0}, 0.0, 1.0));
}

TEST(AttributionProperties, NullPlayerAcrossQueries) {
  const GcmModel m = with_null_parent();
  EXPECT_EQ(arrow_strength(m, "W", "Y", ArrowMeasure::kCoupledMsd, 2000, 1), 0.0);
  EXPECT_NEAR(intrinsic_influence(m, "Y", {exact_shapley(), 100, 500}, 2).score("W"), 0.0, 0.1);
  const Dataset row = single_row({"W", "X", "Y"}, {3.0, 0.0, 4.0});
  EXPECT_NEAR(attribute_anomaly(m, "Y", row, {exact_shapley(), 2000}, 3).score("W"), 0.0, 0.2);
  EXPECT_NEAR(distribution_change(m, m, "Y", ChangeMeasure::kMeanDiff, {exact_shapley(), 10000}, 4).score("W"), 0.0,
              0.1);
}

TEST(AttributionProperties, EfficiencyOnRandomModels) {
  std::mt19937_64 rng(18);
  for (int rep = 0; rep < 6; ++rep) {
    const auto lg = testing::random_linear_gaussian(rng, 4);
    const GcmModel m = lg.model();
    const std::string& target = lg.names.back();
    const auto icc = intrinsic_influence(m, target, {exact_shapley(), 20, 50}, rep);
    EXPECT_NEAR(sum(icc.scores), icc.full_value, 1e-9);
    const Dataset row = draw_samples(m, 1, 100 + rep);
    const auto anomaly = attribute_anomaly(m, target, row, {exact_shapley(), 500}, rep);
    EXPECT_NEAR(sum(anomaly.scores), anomaly.full_value, 1e-9);
    const auto change = distribution_change(m, m, target, ChangeMeasure::kMeanDiff, {exact_shapley(), 500}, rep);
    EXPECT_NEAR(sum(change.scores), change.full_value - change.empty_value, 1e-9);
  }
}

TEST(AttributionProperties, ArrowStrengthNonNegative) {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const auto lg = testing::random_linear_gaussian(rng, 5);
    if (lg.edges.empty()) continue;
    const auto& [p, c] = lg.edges[rng() % lg.edges.size()];
    EXPECT_GE(arrow_strength(lg.model(), p, c, ArrowMeasure::kCoupledMsd, 500, rep), 0.0);
  }
}

TEST(AttributionProperties, Deterministic) {
  const GcmModel m = testing::unit_chain().model();
  const auto a = intrinsic_influence(m, "Z", {exact_shapley(), 20, 50}, 20);
  const auto b = intrinsic_influence(m, "Z", {exact_shapley(), 20, 50}, 20);
  EXPECT_EQ(a.scores, b.scores);
  ShapleyConfig threaded = exact_shapley();
  threaded.num_threads = 3;
  EXPECT_EQ(intrinsic_influence(m, "Z", {threaded, 20, 50}, 20).scores, a.scores);
}

}  // namespace
}  // namespace gcm
