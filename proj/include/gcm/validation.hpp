#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gcm/data.hpp"
#include "gcm/graph.hpp"
#include "gcm/mechanisms.hpp"
#include "gcm/model.hpp"

namespace gcm {

struct LocalMarkovTest {
  std::string node;
  std::string other;
  std::vector<std::string> given;
  double p_value = 1.0;
  bool rejected = false;  // after Holm correction
};

struct RefutationReport {
  std::vector<LocalMarkovTest> tests;
  double alpha = 0.05;
  bool rejected = false;
};

// Tests v _||_ u | parents(v) for every u among v's non-descendants outside
// its parents, with Fisher-z and Holm correction over the whole family.
RefutationReport refute_graph(const CausalGraph& graph, const Dataset& data, double alpha);

Json to_json(const RefutationReport& report);

struct NodeEvaluation {
  std::string node;
  std::string mechanism;
  std::optional<double> rmse;
  std::optional<double> ks_statistic;
  std::optional<double> accuracy;
};

struct EvaluationReport {
  std::vector<NodeEvaluation> nodes;
  std::size_t num_rows = 0;
};

// Root continuous: KS between the held-out column and mechanism draws.
// Additive noise: RMSE of the prediction and KS between held-out residuals
// and noise draws. Categorical: accuracy of the most probable category.
EvaluationReport evaluate_mechanisms(const GcmModel& model, const Dataset& heldout,
                                     std::uint64_t seed = 0);

Json to_json(const EvaluationReport& report);

}  // namespace gcm
