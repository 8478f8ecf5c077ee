#include "gcm/validation.hpp"

#include <algorithm>
#include <cmath>

#include "gcm/error.hpp"
#include "gcm/random.hpp"
#include "gcm/stats.hpp"

namespace gcm {

RefutationReport refute_graph(const CausalGraph& graph, const Dataset& data, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  const Dataset columns = data.select(graph.nodes());
  const FisherZTest tester(columns);

  RefutationReport report;
  report.alpha = alpha;
  std::vector<double> p_values;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    const auto& parents = graph.parent_indices(v);
    const auto descendants = graph.descendant_mask(v);
    std::vector<std::string> given;
    for (std::size_t p : parents) given.push_back(graph.nodes()[p]);
    for (std::size_t u = 0; u < graph.size(); ++u) {
      if (u == v || descendants[u]) continue;
      if (std::find(parents.begin(), parents.end(), u) != parents.end()) continue;
      LocalMarkovTest t;
      t.node = graph.nodes()[v];
      t.other = graph.nodes()[u];
      t.given = given;
      t.p_value = tester.test(v, u, parents).p_value;
      p_values.push_back(t.p_value);
      report.tests.push_back(std::move(t));
    }
  }
  const auto rejections = holm_rejections(p_values, alpha);
  for (std::size_t i = 0; i < rejections.size(); ++i) {
    report.tests[i].rejected = rejections[i];
    report.rejected = report.rejected || rejections[i];
  }
  return report;
}

Json to_json(const RefutationReport& report) {
  Json tests = Json::array();
  for (const auto& t : report.tests) {
    Json j;
    j["node"] = t.node;
    j["other"] = t.other;
    j["given"] = t.given;
    j["p"] = t.p_value;
    j["rejected"] = t.rejected;
    tests.push_back(std::move(j));
  }
  Json j;
  j["tests"] = std::move(tests);
  j["alpha"] = report.alpha;
  j["verdict"] = report.rejected ? "rejected" : "not_rejected";
  return j;
}

namespace {

constexpr std::size_t kMinReferenceDraws = 5000;

std::vector<double> reference_draws(const StochasticModel& model, std::size_t rows, std::uint64_t seed,
                                    const std::string& node) {
  if (const auto* e = std::get_if<EmpiricalDistribution>(&model.dist)) return e->samples;
  Rng rng(derive_seed(seed, "evaluate/" + node));
  return draw_reals(model, std::max(rows, kMinReferenceDraws), rng);
}

std::string mode_of(const MultinomialDistribution& dist) {
  const auto it = std::max_element(dist.probabilities.begin(), dist.probabilities.end());
  return dist.categories[static_cast<std::size_t>(it - dist.probabilities.begin())];
}

}  // namespace

EvaluationReport evaluate_mechanisms(const GcmModel& model, const Dataset& heldout, std::uint64_t seed) {
  model.require_fitted();
  if (heldout.num_rows() == 0) throw Error(ErrorCode::kEmptyInput, "held-out data has no rows");
  const CausalGraph& g = model.graph();
  const std::size_t n = heldout.num_rows();
  EvaluationReport report;
  report.num_rows = n;

  for (std::size_t v = 0; v < g.size(); ++v) {
    const std::string& name = g.nodes()[v];
    const Column& observed = heldout.column(name);
    if (observed.is_continuous() != model.is_continuous_node(v)) {
      throw Error(ErrorCode::kTypeMismatch, "column '" + name + "' does not match the mechanism type");
    }
    ColumnRefs parents;
    for (std::size_t p : g.parent_indices(v)) parents.push_back(&heldout.column(g.nodes()[p]));

    NodeEvaluation eval;
    eval.node = name;
    const FittedMechanism& mech = model.fitted(v);
    if (const auto* root = std::get_if<StochasticModel>(&mech)) {
      eval.mechanism = root->kind_name();
      if (const auto* multi = std::get_if<MultinomialDistribution>(&root->dist)) {
        const std::string mode = mode_of(*multi);
        const auto& labels = observed.labels();
        eval.accuracy = static_cast<double>(std::count(labels.begin(), labels.end(), mode)) /
                        static_cast<double>(n);
      } else {
        eval.ks_statistic = ks_statistic(observed.reals(), reference_draws(*root, n, seed, name));
      }
    } else if (const auto* anm = std::get_if<AdditiveNoiseModel>(&mech)) {
      eval.mechanism = "additive_noise/" + anm->prediction.kind_name();
      const auto predicted = anm->prediction.predict(anm->prediction.encoder.encode(parents));
      const auto& y = observed.reals();
      std::vector<double> residuals(n);
      double sse = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        residuals[r] = y[r] - predicted[r];
        sse += residuals[r] * residuals[r];
      }
      eval.rmse = std::sqrt(sse / static_cast<double>(n));
      eval.ks_statistic = ks_statistic(residuals, reference_draws(anm->noise, n, seed, name));
    } else {
      const auto& fcm = std::get<ClassifierFcm>(mech);
      eval.mechanism = "classifier";
      const auto x = fcm.encoder.encode(parents);
      const auto d = static_cast<std::size_t>(x.cols());
      const auto& labels = observed.labels();
      std::size_t correct = 0;
      for (std::size_t r = 0; r < n; ++r) {
        const auto probs = fcm.class_probabilities_encoded({x.data() + r * d, d});
        const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        if (fcm.categories[best] == labels[r]) ++correct;
      }
      eval.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    }
    report.nodes.push_back(std::move(eval));
  }
  return report;
}

Json to_json(const EvaluationReport& report) {
  Json nodes = Json::object();
  for (const auto& e : report.nodes) {
    Json j;
    j["mechanism"] = e.mechanism;
    if (e.rmse) j["rmse"] = *e.rmse;
    if (e.ks_statistic) j["ks"] = *e.ks_statistic;
    if (e.accuracy) j["accuracy"] = *e.accuracy;
    nodes[e.node] = std::move(j);
  }
  Json j;
  j["nodes"] = std::move(nodes);
  j["rows"] = report.num_rows;
  return j;
}

}  // namespace gcm
