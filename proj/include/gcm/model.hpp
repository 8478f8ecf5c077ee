#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gcm/data.hpp"
#include "gcm/graph.hpp"
#include "gcm/mechanisms.hpp"

namespace gcm {

// What to fit at a node. Roots take a RootSpec; continuous non-roots an
// AnmSpec; categorical non-roots a ClassifierSpec.
struct RootSpec {
  StochasticKind kind = StochasticKind::kAuto;
};
struct AnmSpec {
  ModelKind model_kind = ModelKind::kAuto;
};
struct ClassifierSpec {};
using MechanismSpec = std::variant<RootSpec, AnmSpec, ClassifierSpec>;

using FittedMechanism = std::variant<StochasticModel, AdditiveNoiseModel, ClassifierFcm>;

struct NodeMechanism {
  MechanismSpec spec;
  std::optional<FittedMechanism> fitted;
  // Supplied by the user; never refit.
  bool ground_truth = false;
};

// A causal graph plus one mechanism per node. Assignment and fitting return
// new values; queries take the model by const reference and never change it.
class GcmModel {
 public:
  GcmModel() = default;
  explicit GcmModel(CausalGraph graph);

  const CausalGraph& graph() const { return graph_; }

  bool is_assigned(std::size_t node) const { return mechanisms_[node].has_value(); }
  const NodeMechanism& mechanism(std::size_t node) const;
  const NodeMechanism& mechanism(std::string_view node) const {
    return mechanism(graph_.index_of(node));
  }
  // Fitted mechanism; throws kNotFitted if absent.
  const FittedMechanism& fitted(std::size_t node) const;

  bool is_fully_assigned() const;
  bool is_fitted() const;
  // Throws kNotFitted unless every node carries a fitted mechanism.
  void require_fitted() const;

  // True when node values are real-valued (root with a continuous model or an
  // additive noise model).
  bool is_continuous_node(std::size_t node) const;

  void set(std::size_t node, NodeMechanism mechanism) { mechanisms_[node] = std::move(mechanism); }

 private:
  CausalGraph graph_;
  std::vector<std::optional<NodeMechanism>> mechanisms_;
};

// Roots: empirical (continuous) or multinomial (categorical). Non-roots:
// additive noise with model selection (continuous) or classifier
// (categorical).
GcmModel auto_assign(const CausalGraph& graph, const Dataset& data);

// Role-checked replacement of one node's mechanism. A spec leaves the node
// unfitted; a ground-truth mechanism is usable immediately.
GcmModel assign(const GcmModel& model, std::string_view node, MechanismSpec spec);
GcmModel assign_ground_truth(const GcmModel& model, std::string_view node,
                             FittedMechanism mechanism);

// Fits every non-ground-truth node from (parent columns, node column).
GcmModel fit(const GcmModel& model, const Dataset& data);
// Fits only `node`; every other node is left as is.
GcmModel fit_node(const GcmModel& model, std::string_view node, const Dataset& data);

inline constexpr int kModelSchemaVersion = 1;

std::string save_model(const GcmModel& model);
GcmModel load_model(std::string_view text);

}  // namespace gcm
