#include "gcm/sampling.hpp"

#include <numeric>
#include <set>

#include "gcm/error.hpp"
#include "gcm/random.hpp"

namespace gcm {

namespace {

std::vector<bool> full_or(const std::vector<bool>& subset, std::size_t n) {
  return subset.empty() ? std::vector<bool>(n, true) : subset;
}

ColumnRefs parent_refs(const CausalGraph& g, std::size_t v, const std::vector<Column>& columns) {
  ColumnRefs refs;
  for (std::size_t p : g.parent_indices(v)) refs.push_back(&columns[p]);
  return refs;
}

// Intervention per node index, validated against the model.
std::vector<const Intervention*> index_interventions(const GcmModel& model,
                                                     std::span<const Intervention> interventions) {
  const CausalGraph& g = model.graph();
  std::vector<const Intervention*> by_node(g.size(), nullptr);
  for (const auto& iv : interventions) {
    const std::size_t v = g.index_of(iv.node);
    if (by_node[v] != nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "node '" + iv.node + "' is intervened on twice");
    }
    const bool continuous = model.is_continuous_node(v);
    if (const auto* a = std::get_if<Intervention::Atomic>(&iv.action)) {
      if (std::holds_alternative<double>(a->value) != continuous) {
        throw Error(ErrorCode::kTypeMismatch, std::string("atomic value for '") + iv.node +
                                                  "' must be " +
                                                  (continuous ? "real" : "categorical"));
      }
    } else if (std::holds_alternative<Intervention::Shift>(iv.action) && !continuous) {
      throw Error(ErrorCode::kTypeMismatch, "shift intervention on categorical node '" + iv.node + "'");
    } else if (const auto* f = std::get_if<Intervention::Functional>(&iv.action);
               f != nullptr && !f->mapping) {
      throw Error(ErrorCode::kInvalidArgument, "empty mapping for '" + iv.node + "'");
    }
    by_node[v] = &iv;
  }
  return by_node;
}

Cell checked_map(const Intervention::Functional& f, const Cell& in, const std::string& node) {
  Cell out = f.mapping(in);
  if (out.index() != in.index()) {
    throw Error(ErrorCode::kTypeMismatch, "functional intervention on '" + node + "' changed the value type");
  }
  if (const double* d = std::get_if<double>(&out); d != nullptr && !std::isfinite(*d)) {
    throw Error(ErrorCode::kNonFinite, "functional intervention on '" + node + "' produced a non-finite value");
  }
  return out;
}

// Applies a non-atomic intervention to the naturally generated column.
void apply_to_column(const Intervention& iv, ColumnValues& values) {
  if (const auto* s = std::get_if<Intervention::Shift>(&iv.action)) {
    for (auto& v : std::get<std::vector<double>>(values)) v += s->delta;
    return;
  }
  const auto& f = std::get<Intervention::Functional>(iv.action);
  std::visit(
      [&](auto& vec) {
        for (auto& v : vec) {
          Cell out = checked_map(f, Cell(v), iv.node);
          v = std::get<std::decay_t<decltype(v)>>(std::move(out));
        }
      },
      values);
}

ColumnValues atomic_column(const Intervention::Atomic& a, std::size_t n) {
  if (const double* d = std::get_if<double>(&a.value)) return std::vector<double>(n, *d);
  return std::vector<std::string>(n, std::get<std::string>(a.value));
}

}  // namespace

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

std::vector<bool> ancestral_closure(const CausalGraph& graph, std::size_t target) {
  std::vector<bool> mask = graph.ancestor_mask(target);
  mask[target] = true;
  return mask;
}

NoiseSample draw_noise(const GcmModel& model, std::size_t n, std::uint64_t seed,
                       const std::vector<bool>& subset) {
  const CausalGraph& g = model.graph();
  const auto include = full_or(subset, g.size());
  NoiseSample noise;
  noise.num_rows = n;
  noise.columns.resize(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (!include[v]) continue;
    Rng rng(derive_seed(seed, "noise/" + g.nodes()[v]));
    const FittedMechanism& m = model.fitted(v);
    if (const auto* s = std::get_if<StochasticModel>(&m)) {
      noise.columns[v] = draw(*s, n, rng);
    } else if (const auto* a = std::get_if<AdditiveNoiseModel>(&m)) {
      noise.columns[v] = draw_reals(a->noise, n, rng);
    } else {
      std::vector<double> u(n);
      for (auto& x : u) x = rng.uniform();
      noise.columns[v] = std::move(u);
    }
  }
  return noise;
}

Dataset propagate(const GcmModel& model, const NoiseSample& noise,
                  std::span<const Intervention> interventions, const std::vector<bool>& subset) {
  const CausalGraph& g = model.graph();
  const auto include = full_or(subset, g.size());
  const auto by_node = index_interventions(model, interventions);
  const std::size_t n = noise.num_rows;
  std::vector<Column> columns(g.size());
  for (std::size_t v : g.topological_indices()) {
    if (!include[v]) continue;
    for (std::size_t p : g.parent_indices(v)) {
      if (!include[p]) {
        throw Error(ErrorCode::kInvalidArgument, "node subset is not closed under ancestors");
      }
    }
    columns[v].name = g.nodes()[v];
    const Intervention* iv = by_node[v];
    if (iv != nullptr) {
      if (const auto* a = std::get_if<Intervention::Atomic>(&iv->action)) {
        columns[v].values = atomic_column(*a, n);
        continue;
      }
    }
    const FittedMechanism& m = model.fitted(v);
    if (std::holds_alternative<StochasticModel>(m)) {
      columns[v].values = noise.columns[v];
    } else if (const auto* a = std::get_if<AdditiveNoiseModel>(&m)) {
      const auto x = a->prediction.encoder.encode(parent_refs(g, v, columns));
      std::vector<double> out = a->prediction.predict(x);
      const auto& eps = std::get<std::vector<double>>(noise.columns[v]);
      for (std::size_t r = 0; r < n; ++r) out[r] += eps[r];
      columns[v].values = std::move(out);
    } else {
      const auto& fcm = std::get<ClassifierFcm>(m);
      const auto x = fcm.encoder.encode(parent_refs(g, v, columns));
      const auto& u = std::get<std::vector<double>>(noise.columns[v]);
      const auto d = static_cast<std::size_t>(x.cols());
      std::vector<std::string> out(n);
      for (std::size_t r = 0; r < n; ++r) {
        const auto probs = fcm.class_probabilities_encoded({x.data() + r * d, d});
        out[r] = fcm.categories[inverse_cdf(probs, u[r])];
      }
      columns[v].values = std::move(out);
    }
    if (iv != nullptr) apply_to_column(*iv, columns[v].values);
  }
  std::vector<Column> kept;
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (include[v]) kept.push_back(std::move(columns[v]));
  }
  return Dataset(std::move(kept));
}

NoiseSample abduct_noise(const GcmModel& model, const Dataset& observed,
                         const std::vector<bool>& subset) {
  const CausalGraph& g = model.graph();
  const auto include = full_or(subset, g.size());
  NoiseSample noise;
  noise.num_rows = observed.num_rows();
  noise.columns.resize(g.size());
  std::vector<Column> columns(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (include[v]) columns[v] = observed.column(g.nodes()[v]);
  }
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (!include[v]) continue;
    const FittedMechanism& m = model.fitted(v);
    if (std::holds_alternative<StochasticModel>(m)) {
      noise.columns[v] = columns[v].values;
    } else if (const auto* a = std::get_if<AdditiveNoiseModel>(&m)) {
      const auto pred = a->prediction.predict(a->prediction.encoder.encode(parent_refs(g, v, columns)));
      const auto& obs = columns[v].reals();
      std::vector<double> eps(obs.size());
      for (std::size_t r = 0; r < obs.size(); ++r) eps[r] = abduct_additive_noise(pred[r], obs[r]);
      noise.columns[v] = std::move(eps);
    } else {
      throw Error(ErrorCode::kNonInvertible,
                  "node '" + g.nodes()[v] + "' has a classifier mechanism; its noise cannot be recovered");
    }
  }
  return noise;
}

Dataset draw_samples(const GcmModel& model, std::size_t n, std::uint64_t seed) {
  return interventional_samples(model, {}, n, seed);
}

Dataset interventional_samples(const GcmModel& model, std::span<const Intervention> interventions,
                               std::size_t n, std::uint64_t seed) {
  model.require_fitted();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "sample count must be at least 1");
  return propagate(model, draw_noise(model, n, seed), interventions);
}

Dataset counterfactual(const GcmModel& model, const Dataset& observed,
                       std::span<const Intervention> interventions) {
  model.require_fitted();
  const CausalGraph& g = model.graph();
  const auto by_node = index_interventions(model, interventions);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.is_root(v) || !std::holds_alternative<ClassifierFcm>(model.fitted(v))) continue;
    const Intervention* iv = by_node[v];
    if (iv == nullptr || !std::holds_alternative<Intervention::Atomic>(iv->action)) {
      throw Error(ErrorCode::kNonInvertible, "node '" + g.nodes()[v] +
                                                 "' has a classifier mechanism; counterfactuals "
                                                 "need invertible mechanisms");
    }
  }

  const std::size_t n = observed.num_rows();
  std::vector<Column> factual(g.size());
  std::vector<Column> cf(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    factual[v] = observed.column(g.nodes()[v]);
    if (factual[v].is_continuous() != model.is_continuous_node(v)) {
      throw Error(ErrorCode::kTypeMismatch, "observed column '" + g.nodes()[v] +
                                                "' does not match the node type");
    }
  }

  for (std::size_t v : g.topological_indices()) {
    cf[v].name = g.nodes()[v];
    const Intervention* iv = by_node[v];
    if (iv != nullptr) {
      if (const auto* a = std::get_if<Intervention::Atomic>(&iv->action)) {
        cf[v].values = atomic_column(*a, n);
        continue;
      }
    }
    const FittedMechanism& m = model.fitted(v);
    if (std::holds_alternative<StochasticModel>(m)) {
      cf[v].values = factual[v].values;
    } else {
      const auto& anm = std::get<AdditiveNoiseModel>(m);
      const auto& obs = factual[v].reals();
      std::vector<double> out = obs;
      // Rows whose parents kept their factual values keep the factual value.
      std::vector<std::size_t> changed;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t p : g.parent_indices(v)) {
          if (cf[p].cell(r) != factual[p].cell(r)) {
            changed.push_back(r);
            break;
          }
        }
      }
      if (!changed.empty()) {
        std::vector<Column> fact_parents;
        std::vector<Column> cf_parents;
        for (std::size_t p : g.parent_indices(v)) {
          fact_parents.push_back(Dataset({factual[p]}).take_rows(changed).column(0));
          cf_parents.push_back(Dataset({cf[p]}).take_rows(changed).column(0));
        }
        ColumnRefs fact_refs;
        ColumnRefs cf_refs;
        for (std::size_t i = 0; i < fact_parents.size(); ++i) {
          fact_refs.push_back(&fact_parents[i]);
          cf_refs.push_back(&cf_parents[i]);
        }
        const auto& enc = anm.prediction.encoder;
        const auto pred_fact = anm.prediction.predict(enc.encode(fact_refs));
        const auto pred_cf = anm.prediction.predict(enc.encode(cf_refs));
        for (std::size_t i = 0; i < changed.size(); ++i) {
          const std::size_t r = changed[i];
          const double noise = abduct_additive_noise(pred_fact[i], obs[r]);
          out[r] = pred_cf[i] + noise;
        }
      }
      cf[v].values = std::move(out);
    }
    if (iv != nullptr) apply_to_column(*iv, cf[v].values);
  }
  return Dataset(std::move(cf));
}

double average_causal_effect(const GcmModel& model, const std::string& treatment,
                             const Cell& value_a, const Cell& value_b, const std::string& target,
                             std::size_t n, std::uint64_t seed) {
  model.require_fitted();
  if (!model.is_continuous_node(model.graph().index_of(target))) {
    throw Error(ErrorCode::kTypeMismatch, "average causal effect needs a continuous target");
  }
  const Intervention do_a[] = {Intervention::atomic(treatment, value_a)};
  const Intervention do_b[] = {Intervention::atomic(treatment, value_b)};
  const Dataset a = interventional_samples(model, do_a, n, derive_seed(seed, "ace/a"));
  const Dataset b = interventional_samples(model, do_b, n, derive_seed(seed, "ace/b"));
  return mean(a.reals(target)) - mean(b.reals(target));
}

}  // namespace gcm
