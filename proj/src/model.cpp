#include "gcm/model.hpp"

#include <set>

#include "gcm/error.hpp"

namespace gcm {

namespace {

constexpr std::size_t kMaxCategories = 100;

bool spec_matches_role(const MechanismSpec& spec, bool is_root) {
  return std::holds_alternative<RootSpec>(spec) == is_root;
}

bool fitted_matches_role(const FittedMechanism& m, bool is_root) {
  return std::holds_alternative<StochasticModel>(m) == is_root;
}

// Encoder inputs must name the node's parents in parent order.
bool inputs_match_parents(const CausalGraph& g, std::size_t v, const FittedMechanism& m) {
  const InputEncoder* encoder = nullptr;
  if (const auto* a = std::get_if<AdditiveNoiseModel>(&m)) {
    encoder = &a->prediction.encoder;
  } else if (const auto* c = std::get_if<ClassifierFcm>(&m)) {
    encoder = &c->encoder;
  }
  if (encoder == nullptr) return true;
  const auto& parents = g.parent_indices(v);
  if (encoder->num_inputs() != parents.size()) return false;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (encoder->features()[i].name != g.nodes()[parents[i]]) return false;
  }
  return true;
}

MechanismSpec spec_for(const FittedMechanism& m) {
  if (const auto* s = std::get_if<StochasticModel>(&m)) {
    switch (s->dist.index()) {
      case 0: return RootSpec{StochasticKind::kEmpirical};
      case 1: return RootSpec{StochasticKind::kGaussian};
      default: return RootSpec{StochasticKind::kMultinomial};
    }
  }
  if (const auto* a = std::get_if<AdditiveNoiseModel>(&m)) {
    return AnmSpec{a->prediction.regressor.index() == 0 ? ModelKind::kLinear : ModelKind::kKnn};
  }
  return ClassifierSpec{};
}

FittedMechanism fit_one(const GcmModel& model, std::size_t node, const Dataset& data) {
  const CausalGraph& g = model.graph();
  const std::string& name = g.nodes()[node];
  const NodeMechanism& mech = model.mechanism(node);
  try {
    const Column& target = data.column(name);
    ColumnRefs parents;
    for (std::size_t p : g.parent_indices(node)) parents.push_back(&data.column(g.nodes()[p]));
    if (const auto* root = std::get_if<RootSpec>(&mech.spec)) {
      return fit_stochastic(target.values, root->kind);
    }
    if (const auto* anm = std::get_if<AnmSpec>(&mech.spec)) {
      if (!target.is_continuous()) {
        throw Error(ErrorCode::kTypeMismatch, "additive noise model needs a continuous column");
      }
      return fit_anm(parents, target.reals(), anm->model_kind);
    }
    if (target.is_continuous()) {
      throw Error(ErrorCode::kTypeMismatch, "classifier needs a categorical column");
    }
    return fit_classifier(parents, target.labels());
  } catch (const Error& e) {
    throw Error(e.code(), "node '" + name + "': " + e.what());
  }
}

}  // namespace

GcmModel::GcmModel(CausalGraph graph)
    : graph_(std::move(graph)), mechanisms_(graph_.size()) {}

const NodeMechanism& GcmModel::mechanism(std::size_t node) const {
  if (!mechanisms_.at(node)) {
    throw Error(ErrorCode::kNotFitted, "node '" + graph_.nodes()[node] + "' has no mechanism");
  }
  return *mechanisms_[node];
}

const FittedMechanism& GcmModel::fitted(std::size_t node) const {
  const NodeMechanism& m = mechanism(node);
  if (!m.fitted) {
    throw Error(ErrorCode::kNotFitted, "node '" + graph_.nodes()[node] + "' is not fitted");
  }
  return *m.fitted;
}

bool GcmModel::is_fully_assigned() const {
  for (const auto& m : mechanisms_) {
    if (!m) return false;
  }
  return true;
}

bool GcmModel::is_fitted() const {
  for (const auto& m : mechanisms_) {
    if (!m || !m->fitted) return false;
  }
  return true;
}

void GcmModel::require_fitted() const {
  for (std::size_t i = 0; i < mechanisms_.size(); ++i) fitted(i);
}

bool GcmModel::is_continuous_node(std::size_t node) const {
  const FittedMechanism& m = fitted(node);
  if (const auto* s = std::get_if<StochasticModel>(&m)) return s->is_continuous();
  return std::holds_alternative<AdditiveNoiseModel>(m);
}

GcmModel auto_assign(const CausalGraph& graph, const Dataset& data) {
  GcmModel model(graph);
  for (std::size_t v = 0; v < graph.size(); ++v) {
    const std::string& name = graph.nodes()[v];
    if (!data.has_column(name)) {
      throw Error(ErrorCode::kUnknownColumn, "node '" + name + "' has no column in the data");
    }
    const Column& col = data.column(name);
    if (!col.is_continuous()) {
      const auto& labels = col.labels();
      const std::set<std::string> distinct(labels.begin(), labels.end());
      if (distinct.size() >= kMaxCategories) {
        throw Error(ErrorCode::kCardinality, "node '" + name + "' has " +
                                                 std::to_string(distinct.size()) +
                                                 " categories (limit " +
                                                 std::to_string(kMaxCategories - 1) + ")");
      }
    }
    NodeMechanism m;
    if (graph.is_root(v)) {
      m.spec = RootSpec{StochasticKind::kAuto};
    } else if (col.is_continuous()) {
      m.spec = AnmSpec{ModelKind::kAuto};
    } else {
      m.spec = ClassifierSpec{};
    }
    model.set(v, std::move(m));
  }
  return model;
}

GcmModel assign(const GcmModel& model, std::string_view node, MechanismSpec spec) {
  const std::size_t v = model.graph().index_of(node);
  if (!spec_matches_role(spec, model.graph().is_root(v))) {
    throw Error(ErrorCode::kRoleMismatch, "mechanism kind does not fit the role of node '" +
                                              std::string(node) + "'");
  }
  GcmModel out = model;
  out.set(v, NodeMechanism{std::move(spec), std::nullopt, false});
  return out;
}

GcmModel assign_ground_truth(const GcmModel& model, std::string_view node,
                             FittedMechanism mechanism) {
  const std::size_t v = model.graph().index_of(node);
  const CausalGraph& g = model.graph();
  if (!fitted_matches_role(mechanism, g.is_root(v))) {
    throw Error(ErrorCode::kRoleMismatch, "mechanism kind does not fit the role of node '" +
                                              std::string(node) + "'");
  }
  if (const auto* a = std::get_if<AdditiveNoiseModel>(&mechanism);
      a != nullptr && !a->noise.is_continuous()) {
    throw Error(ErrorCode::kTypeMismatch, "additive noise must be continuous");
  }
  if (!inputs_match_parents(g, v, mechanism)) {
    throw Error(ErrorCode::kRoleMismatch, "mechanism inputs do not match the parents of '" +
                                              std::string(node) + "'");
  }
  GcmModel out = model;
  MechanismSpec spec = spec_for(mechanism);
  out.set(v, NodeMechanism{std::move(spec), std::move(mechanism), true});
  return out;
}

GcmModel fit(const GcmModel& model, const Dataset& data) {
  GcmModel out = model;
  for (std::size_t v = 0; v < model.graph().size(); ++v) {
    const NodeMechanism& m = model.mechanism(v);
    if (m.ground_truth) continue;
    out.set(v, NodeMechanism{m.spec, fit_one(model, v, data), false});
  }
  return out;
}

GcmModel fit_node(const GcmModel& model, std::string_view node, const Dataset& data) {
  const std::size_t v = model.graph().index_of(node);
  const NodeMechanism& m = model.mechanism(v);
  GcmModel out = model;
  if (!m.ground_truth) out.set(v, NodeMechanism{m.spec, fit_one(model, v, data), false});
  return out;
}

std::string save_model(const GcmModel& model) {
  model.require_fitted();
  const CausalGraph& g = model.graph();
  Json doc;
  doc["schema_version"] = kModelSchemaVersion;
  Json graph;
  graph["nodes"] = g.nodes();
  graph["edges"] = Json::array();
  for (const auto& [from, to] : g.edges()) graph["edges"].push_back({from, to});
  doc["graph"] = std::move(graph);
  Json mechanisms = Json::object();
  for (std::size_t v = 0; v < g.size(); ++v) {
    const NodeMechanism& m = model.mechanism(v);
    Json j = std::visit([](const auto& fitted) { return to_json(fitted); }, *m.fitted);
    j["ground_truth"] = m.ground_truth;
    mechanisms[g.nodes()[v]] = std::move(j);
  }
  doc["mechanisms"] = std::move(mechanisms);
  return doc.dump();
}

GcmModel load_model(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptPayload, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("schema_version")) {
      throw Error(ErrorCode::kCorruptPayload, "model file lacks schema_version");
    }
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw Error(ErrorCode::kSchemaVersion, "unsupported model schema_version " +
                                                 std::to_string(version) + " (expected " +
                                                 std::to_string(kModelSchemaVersion) + ")");
    }
    const Json& gj = doc.at("graph");
    std::vector<std::string> nodes = gj.at("nodes").get<std::vector<std::string>>();
    std::vector<Edge> edges;
    for (const auto& e : gj.at("edges")) {
      edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    GcmModel model{CausalGraph(std::move(nodes), std::move(edges))};
    const CausalGraph& g = model.graph();
    const Json& mechanisms = doc.at("mechanisms");
    if (mechanisms.size() != g.size()) {
      throw Error(ErrorCode::kCorruptPayload, "mechanism count does not match the graph");
    }
    for (std::size_t v = 0; v < g.size(); ++v) {
      const Json& j = mechanisms.at(g.nodes()[v]);
      const std::string type = j.at("type").get<std::string>();
      FittedMechanism fitted;
      if (type == "additive_noise") {
        fitted = anm_from_json(j);
      } else if (type == "classifier") {
        fitted = classifier_from_json(j);
      } else {
        fitted = stochastic_from_json(j);
      }
      const bool ground_truth = j.at("ground_truth").get<bool>();
      if (!fitted_matches_role(fitted, g.is_root(v)) || !inputs_match_parents(g, v, fitted)) {
        throw Error(ErrorCode::kCorruptPayload,
                    "mechanism of '" + g.nodes()[v] + "' does not match its role in the graph");
      }
      MechanismSpec spec = spec_for(fitted);
      model.set(v, NodeMechanism{std::move(spec), std::move(fitted), ground_truth});
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptPayload, std::string("malformed model file: ") + e.what());
  }
}

}  // namespace gcm
