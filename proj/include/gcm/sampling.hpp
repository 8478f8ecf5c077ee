#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gcm/data.hpp"
#include "gcm/model.hpp"

namespace gcm {

struct Intervention {
  struct Atomic {
    Cell value;
  };
  struct Shift {
    double delta = 0.0;
  };
  struct Functional {
    std::function<Cell(const Cell&)> mapping;
  };

  std::string node;
  std::variant<Atomic, Shift, Functional> action;

  static Intervention atomic(std::string node, Cell value) {
    return {std::move(node), Atomic{std::move(value)}};
  }
  static Intervention shift(std::string node, double delta) {
    return {std::move(node), Shift{delta}};
  }
  static Intervention functional(std::string node, std::function<Cell(const Cell&)> mapping) {
    return {std::move(node), Functional{std::move(mapping)}};
  }
};

// Per-node noise columns indexed by graph node index. A root's noise is its
// value; an additive noise model's noise is the additive term; a classifier's
// noise is the uniform draw fed to the inverse CDF. Nodes outside the
// requested subset hold an empty column.
struct NoiseSample {
  std::size_t num_rows = 0;
  std::vector<ColumnValues> columns;
};

// Nodes (as a declaration-index mask) that `target` depends on: its ancestors
// and itself.
std::vector<bool> ancestral_closure(const CausalGraph& graph, std::size_t target);

// Noise for the nodes in `subset` (all nodes when empty). Each node draws
// from its own stream derived from (seed, node name), so a node's noise does
// not depend on which other nodes are drawn.
NoiseSample draw_noise(const GcmModel& model, std::size_t n, std::uint64_t seed,
                       const std::vector<bool>& subset = {});

// Evaluates mechanisms in topological order on the given noise. `subset`
// must be closed under ancestors; the result holds the subset's columns in
// declaration order.
Dataset propagate(const GcmModel& model, const NoiseSample& noise,
                  std::span<const Intervention> interventions = {},
                  const std::vector<bool>& subset = {});

// Recovers each row's noise (roots: the observed value; additive noise models:
// observed minus prediction). Throws kNonInvertible on classifier nodes.
NoiseSample abduct_noise(const GcmModel& model, const Dataset& observed,
                         const std::vector<bool>& subset = {});

Dataset draw_samples(const GcmModel& model, std::size_t n, std::uint64_t seed);

Dataset interventional_samples(const GcmModel& model, std::span<const Intervention> interventions,
                               std::size_t n, std::uint64_t seed);

// Abduction, action, prediction for every row of `observed`. Rows whose
// inputs are left unchanged by the interventions come back bit-identical.
Dataset counterfactual(const GcmModel& model, const Dataset& observed,
                       std::span<const Intervention> interventions);

// E[target | do(treatment = a)] - E[target | do(treatment = b)].
double average_causal_effect(const GcmModel& model, const std::string& treatment,
                             const Cell& value_a, const Cell& value_b, const std::string& target,
                             std::size_t n, std::uint64_t seed);

double mean(std::span<const double> values);
// Unbiased sample variance; 0 for fewer than two values.
double variance(std::span<const double> values);

}  // namespace gcm
