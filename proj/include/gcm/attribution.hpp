#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gcm/graph.hpp"
#include "gcm/model.hpp"
#include "gcm/shapley.hpp"

namespace gcm {

struct AttributionResult {
  // Queried players (nodes) in declaration order, with one score each.
  std::vector<std::string> players;
  std::vector<double> scores;
  std::vector<double> standard_errors;
  std::string measure;
  std::map<std::string, std::size_t> budget;
  std::uint64_t seed = 0;
  // v(all players) and v(no players) of the attributed set function.
  double full_value = 0.0;
  double empty_value = 0.0;

  double score(std::string_view player) const;
};

Json to_json(const AttributionResult& result);

// ---------------------------------------------------------------------------
// Arrow strength

enum class ArrowMeasure { kAuto, kCoupledMsd, kKl };

// coupled_msd: mean of (Y - Y_cut)^2 where Y_cut reuses Y's noise and other
// parents but takes `parent` from an independent permutation of the samples.
// kl: k-NN KL between joint samples of (parents, Y) and (parents, Y_cut).
double arrow_strength(const GcmModel& model, const std::string& parent, const std::string& child,
                      ArrowMeasure measure, std::size_t num_samples, std::uint64_t seed);

std::string arrow_measure_name(ArrowMeasure measure, bool continuous_child);

// ---------------------------------------------------------------------------
// Intrinsic causal influence

struct InfluenceConfig {
  ShapleyConfig shapley;
  std::size_t outer_samples = 100;
  std::size_t inner_samples = 500;
};

// Shapley attribution of Var(target) to the noise terms of target's ancestors
// and itself, with v(S) = Var(Y) - E[Var(Y | N_S)].
AttributionResult intrinsic_influence(const GcmModel& model, const std::string& target,
                                      const InfluenceConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Anomaly attribution

// Rank-based information-theoretic outlier score. With tau(y) = |y - mean| /
// std over the reference, g(y) = -log((1 + #{i : tau(ref_i) >= tau(y)}) / (M + 1)).
class OutlierScorer {
 public:
  explicit OutlierScorer(std::vector<double> reference);

  double feature(double y) const;
  double score(double y) const;
  // Score of `y` against an arbitrary sample, using this scorer's feature.
  double score_against(std::span<const double> samples, double y) const;

  std::size_t size() const { return sorted_features_.size(); }
  double mean() const { return mean_; }
  double stddev() const { return stddev_; }

 private:
  double mean_ = 0.0;
  double stddev_ = 0.0;
  std::vector<double> sorted_features_;
};

struct AnomalyConfig {
  ShapleyConfig shapley;
  std::size_t num_samples = 5000;
};

// v(S): outlier score of the target value when the noises of S are redrawn
// and all other noises stay at the values recovered from `anomalous_row`.
AttributionResult attribute_anomaly(const GcmModel& model, const std::string& target,
                                    const Dataset& anomalous_row, const AnomalyConfig& config,
                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Distribution change

enum class ChangeMeasure { kAuto, kMeanDiff, kKl };

struct ChangeConfig {
  ShapleyConfig shapley;
  std::size_t num_samples = 10000;
};

// Fits both models with auto_assign, then attributes the change of the
// target's marginal to the nodes whose mechanisms changed.
AttributionResult distribution_change(const CausalGraph& graph, const Dataset& old_data,
                                      const Dataset& new_data, const std::string& target,
                                      ChangeMeasure measure, const ChangeConfig& config,
                                      std::uint64_t seed);

// Same on already fitted models over the same graph. v(S) compares the target
// marginal of the hybrid (S from `new_model`, the rest from `old_model`) with
// a sample of `old_model`.
AttributionResult distribution_change(const GcmModel& old_model, const GcmModel& new_model,
                                      const std::string& target, ChangeMeasure measure,
                                      const ChangeConfig& config, std::uint64_t seed);

}  // namespace gcm
