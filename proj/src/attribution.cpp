#include "gcm/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gcm/error.hpp"
#include "gcm/random.hpp"
#include "gcm/sampling.hpp"
#include "gcm/stats.hpp"

namespace gcm {

namespace {

constexpr std::size_t kKlNeighbours = 5;

std::vector<std::size_t> players_of(const std::vector<bool>& closure) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < closure.size(); ++v) {
    if (closure[v]) out.push_back(v);
  }
  return out;
}

Coalition full_coalition(std::size_t players) {
  return players >= 64 ? ~Coalition{0} : (Coalition{1} << players) - 1;
}

// Overwrites rows [begin, begin + count) of `column` with `source[row]`.
void fill_rows(ColumnValues& column, const ColumnValues& source, std::size_t row,
               std::size_t begin, std::size_t count) {
  std::visit(
      [&](auto& dst) {
        using Vec = std::decay_t<decltype(dst)>;
        const auto value = std::get<Vec>(source)[row];
        std::fill(dst.begin() + static_cast<std::ptrdiff_t>(begin),
                  dst.begin() + static_cast<std::ptrdiff_t>(begin + count), value);
      },
      column);
}

AttributionResult make_result(const CausalGraph& g, const std::vector<std::size_t>& players,
                              const ShapleyEstimate& estimate, std::string measure,
                              std::uint64_t seed) {
  AttributionResult result;
  for (std::size_t v : players) result.players.push_back(g.nodes()[v]);
  result.scores = estimate.values;
  result.standard_errors = estimate.standard_errors;
  result.measure = std::move(measure);
  result.seed = seed;
  return result;
}

void require_continuous_target(const GcmModel& model, std::size_t target) {
  if (!model.is_continuous_node(target)) {
    throw Error(ErrorCode::kTypeMismatch,
                "target '" + model.graph().nodes()[target] + "' must be continuous");
  }
}

void require_players_fit(std::size_t players, const ShapleyConfig& config) {
  if (config.method == ShapleyMethod::kExact && players > kMaxExactPlayers) {
    throw Error(ErrorCode::kArityTooLarge,
                "target has " + std::to_string(players) +
                    " ancestral players; use the permutation method");
  }
}

}  // namespace

double AttributionResult::score(std::string_view player) const {
  for (std::size_t i = 0; i < players.size(); ++i) {
    if (players[i] == player) return scores[i];
  }
  throw Error(ErrorCode::kUnknownNode, "no score for '" + std::string(player) + "'");
}

Json to_json(const AttributionResult& result) {
  Json j;
  Json scores = Json::object();
  for (std::size_t i = 0; i < result.players.size(); ++i) {
    scores[result.players[i]] = result.scores[i];
  }
  j["scores"] = std::move(scores);
  j["measure"] = result.measure;
  j["seed"] = result.seed;
  Json budget = Json::object();
  for (const auto& [k, v] : result.budget) budget[k] = v;
  j["budget"] = std::move(budget);
  j["total"] = result.full_value - result.empty_value;
  return j;
}

// ---------------------------------------------------------------------------
// Arrow strength

std::string arrow_measure_name(ArrowMeasure measure, bool continuous_child) {
  if (measure == ArrowMeasure::kAuto) return continuous_child ? "coupled_msd" : "kl";
  return measure == ArrowMeasure::kCoupledMsd ? "coupled_msd" : "kl";
}

double arrow_strength(const GcmModel& model, const std::string& parent, const std::string& child,
                      ArrowMeasure measure, std::size_t num_samples, std::uint64_t seed) {
  model.require_fitted();
  const CausalGraph& g = model.graph();
  if (!g.has_edge(parent, child)) {
    throw Error(ErrorCode::kUnknownNode, "no edge " + parent + " -> " + child);
  }
  if (num_samples < kKlNeighbours + 1) {
    throw Error(ErrorCode::kInvalidArgument, "arrow strength needs more samples");
  }
  const std::size_t c = g.index_of(child);
  const bool continuous_child = model.is_continuous_node(c);
  if (measure == ArrowMeasure::kAuto) {
    measure = continuous_child ? ArrowMeasure::kCoupledMsd : ArrowMeasure::kKl;
  }
  if (measure == ArrowMeasure::kCoupledMsd && !continuous_child) {
    throw Error(ErrorCode::kTypeMismatch, "coupled_msd needs a continuous child");
  }

  const auto closure = ancestral_closure(g, c);
  const NoiseSample noise = draw_noise(model, num_samples, derive_seed(seed, "arrow/joint"), closure);
  const Dataset joint = propagate(model, noise, {}, closure);

  // Parent columns with `parent` replaced by an independent permutation.
  const auto& parents = g.parent_indices(c);
  std::vector<Column> cut_parents;
  std::vector<Column> factual_parents;
  std::vector<std::size_t> perm(num_samples);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "arrow/permutation"));
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  for (std::size_t p : parents) {
    const Column& col = joint.column(g.nodes()[p]);
    factual_parents.push_back(col);
    if (g.nodes()[p] == parent) {
      cut_parents.push_back(Dataset({col}).take_rows(perm).column(0));
    } else {
      cut_parents.push_back(col);
    }
  }
  ColumnRefs cut_refs;
  for (const auto& col : cut_parents) cut_refs.push_back(&col);

  Column cut_child{child, {}};
  if (const auto* anm = std::get_if<AdditiveNoiseModel>(&model.fitted(c))) {
    std::vector<double> y = anm->prediction.predict(anm->prediction.encoder.encode(cut_refs));
    const auto& eps = std::get<std::vector<double>>(noise.columns[c]);
    for (std::size_t r = 0; r < num_samples; ++r) y[r] += eps[r];
    cut_child.values = std::move(y);
  } else {
    const auto& fcm = std::get<ClassifierFcm>(model.fitted(c));
    const auto x = fcm.encoder.encode(cut_refs);
    const auto& u = std::get<std::vector<double>>(noise.columns[c]);
    const auto d = static_cast<std::size_t>(x.cols());
    std::vector<std::string> labels(num_samples);
    for (std::size_t r = 0; r < num_samples; ++r) {
      labels[r] = fcm.categories[inverse_cdf(fcm.class_probabilities_encoded({x.data() + r * d, d}), u[r])];
    }
    cut_child.values = std::move(labels);
  }

  const Column& factual_child = joint.column(child);
  if (measure == ArrowMeasure::kCoupledMsd) {
    const auto& y = factual_child.reals();
    const auto& y_cut = cut_child.reals();
    double sum = 0.0;
    for (std::size_t r = 0; r < num_samples; ++r) sum += (y[r] - y_cut[r]) * (y[r] - y_cut[r]);
    return sum / static_cast<double>(num_samples);
  }

  // Joint (parents, Y) samples with and without the edge; categorical
  // components are one-hot encoded with a shared encoder.
  ColumnRefs with_edge;
  ColumnRefs without_edge;
  for (const auto& col : factual_parents) {
    with_edge.push_back(&col);
    without_edge.push_back(&col);
  }
  Column pooled_child = factual_child;
  std::visit(
      [&](auto& dst) {
        const auto& extra = std::get<std::decay_t<decltype(dst)>>(cut_child.values);
        dst.insert(dst.end(), extra.begin(), extra.end());
      },
      pooled_child.values);
  ColumnRefs pooled_refs = with_edge;
  pooled_refs.push_back(&pooled_child);
  std::vector<Column> pooled_parents;
  for (const auto& col : factual_parents) {
    Column twice = col;
    std::visit(
        [&](auto& dst) {
          const auto copy = dst;
          dst.insert(dst.end(), copy.begin(), copy.end());
        },
        twice.values);
    pooled_parents.push_back(std::move(twice));
  }
  ColumnRefs fit_refs;
  for (const auto& col : pooled_parents) fit_refs.push_back(&col);
  fit_refs.push_back(&pooled_child);
  const InputEncoder encoder = InputEncoder::fit(fit_refs);
  with_edge.push_back(&factual_child);
  without_edge.push_back(&cut_child);
  return kl_divergence(encoder.encode(with_edge), encoder.encode(without_edge), kKlNeighbours);
}

// ---------------------------------------------------------------------------
// Intrinsic causal influence

AttributionResult intrinsic_influence(const GcmModel& model, const std::string& target,
                                      const InfluenceConfig& config, std::uint64_t seed) {
  model.require_fitted();
  const CausalGraph& g = model.graph();
  const std::size_t t = g.index_of(target);
  require_continuous_target(model, t);
  if (config.outer_samples == 0 || config.inner_samples < 2) {
    throw Error(ErrorCode::kInvalidArgument, "intrinsic influence needs outer >= 1 and inner >= 2 samples");
  }
  const auto closure = ancestral_closure(g, t);
  const auto players = players_of(closure);
  require_players_fit(players.size(), config.shapley);
  const std::size_t outer = config.outer_samples;
  const std::size_t inner = config.inner_samples;
  const std::size_t rows = outer * inner;

  const NoiseSample total_noise = draw_noise(model, rows, derive_seed(seed, "icc/total"), closure);
  const double total_variance = variance(propagate(model, total_noise, {}, closure).reals(target));
  const Coalition all = full_coalition(players.size());

  SetFunction game;
  game.num_players = players.size();
  game.evaluate = [&](Coalition s) -> double {
    if (s == 0) return 0.0;
    if (s == all) return total_variance;
    const std::uint64_t subset_seed = derive_seed(seed, static_cast<std::uint64_t>(s));
    NoiseSample noise = draw_noise(model, rows, derive_seed(subset_seed, "inner"), closure);
    const NoiseSample fixed = draw_noise(model, outer, derive_seed(subset_seed, "outer"), closure);
    for (std::size_t p = 0; p < players.size(); ++p) {
      if (!(s & (Coalition{1} << p))) continue;
      const std::size_t v = players[p];
      for (std::size_t k = 0; k < outer; ++k) {
        fill_rows(noise.columns[v], fixed.columns[v], k, k * inner, inner);
      }
    }
    const Dataset sample = propagate(model, noise, {}, closure);
    const auto& y = sample.reals(target);
    double conditional = 0.0;
    for (std::size_t k = 0; k < outer; ++k) {
      conditional += variance(std::span<const double>(y.data() + k * inner, inner));
    }
    return total_variance - conditional / static_cast<double>(outer);
  };

  AttributionResult result =
      make_result(g, players, estimate_shapley(game, config.shapley), "variance", seed);
  result.budget = {{"outer_samples", outer}, {"inner_samples", inner}};
  if (config.shapley.method == ShapleyMethod::kPermutation) {
    result.budget["permutations"] = config.shapley.num_permutations;
  }
  result.full_value = total_variance;
  result.empty_value = 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Anomaly attribution

OutlierScorer::OutlierScorer(std::vector<double> reference) {
  if (reference.empty()) throw Error(ErrorCode::kEmptyInput, "outlier scorer needs reference samples");
  mean_ = gcm::mean(reference);
  stddev_ = std::sqrt(variance(reference));
  sorted_features_.reserve(reference.size());
  for (double y : reference) sorted_features_.push_back(feature(y));
  std::sort(sorted_features_.begin(), sorted_features_.end());
}

double OutlierScorer::feature(double y) const {
  const double dev = std::abs(y - mean_);
  if (stddev_ > 0.0) return dev / stddev_;
  return dev == 0.0 ? 0.0 : INFINITY;
}

double OutlierScorer::score(double y) const {
  const double tau = feature(y);
  const auto at_least = static_cast<std::size_t>(
      sorted_features_.end() - std::lower_bound(sorted_features_.begin(), sorted_features_.end(), tau));
  return -std::log(static_cast<double>(1 + at_least) / static_cast<double>(size() + 1));
}

double OutlierScorer::score_against(std::span<const double> samples, double y) const {
  const double tau = feature(y);
  std::size_t at_least = 0;
  for (double s : samples) {
    if (feature(s) >= tau) ++at_least;
  }
  return -std::log(static_cast<double>(1 + at_least) / static_cast<double>(samples.size() + 1));
}

AttributionResult attribute_anomaly(const GcmModel& model, const std::string& target,
                                    const Dataset& anomalous_row, const AnomalyConfig& config,
                                    std::uint64_t seed) {
  model.require_fitted();
  const CausalGraph& g = model.graph();
  const std::size_t t = g.index_of(target);
  require_continuous_target(model, t);
  if (anomalous_row.num_rows() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "anomaly attribution expects exactly one row, got " +
                                                 std::to_string(anomalous_row.num_rows()));
  }
  if (config.num_samples == 0) throw Error(ErrorCode::kInvalidArgument, "num_samples must be positive");
  const auto closure = ancestral_closure(g, t);
  const auto players = players_of(closure);
  require_players_fit(players.size(), config.shapley);
  const std::size_t m = config.num_samples;

  const NoiseSample anomaly_noise = abduct_noise(model, anomalous_row, closure);
  const double observed = anomalous_row.reals(target).front();

  const NoiseSample reference_noise = draw_noise(model, m, derive_seed(seed, "anomaly/reference"), closure);
  const OutlierScorer scorer(propagate(model, reference_noise, {}, closure).reals(target));
  const double marginal_score = scorer.score(observed);
  const Coalition all = full_coalition(players.size());

  SetFunction game;
  game.num_players = players.size();
  game.evaluate = [&](Coalition s) -> double {
    if (s == 0) return 0.0;
    if (s == all) return marginal_score;
    NoiseSample noise = draw_noise(model, m, derive_seed(seed, static_cast<std::uint64_t>(s)), closure);
    for (std::size_t p = 0; p < players.size(); ++p) {
      if (s & (Coalition{1} << p)) continue;
      const std::size_t v = players[p];
      fill_rows(noise.columns[v], anomaly_noise.columns[v], 0, 0, m);
    }
    const Dataset sample = propagate(model, noise, {}, closure);
    return scorer.score_against(sample.reals(target), observed);
  };

  AttributionResult result = make_result(g, players, estimate_shapley(game, config.shapley),
                                         "outlier_score", seed);
  result.budget = {{"samples", m}};
  if (config.shapley.method == ShapleyMethod::kPermutation) {
    result.budget["permutations"] = config.shapley.num_permutations;
  }
  result.full_value = marginal_score;
  result.empty_value = 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Distribution change

namespace {

void check_compatible(const CausalGraph& graph, const Dataset& old_data, const Dataset& new_data) {
  for (const auto& name : graph.nodes()) {
    const Column& a = old_data.column(name);
    const Column& b = new_data.column(name);
    if (a.type() != b.type()) {
      throw Error(ErrorCode::kTypeMismatch, "column '" + name + "' has different types in the two datasets");
    }
  }
}

}  // namespace

AttributionResult distribution_change(const CausalGraph& graph, const Dataset& old_data,
                                      const Dataset& new_data, const std::string& target,
                                      ChangeMeasure measure, const ChangeConfig& config,
                                      std::uint64_t seed) {
  check_compatible(graph, old_data, new_data);
  const GcmModel old_model = fit(auto_assign(graph, old_data), old_data);
  const GcmModel new_model = fit(auto_assign(graph, new_data), new_data);
  return distribution_change(old_model, new_model, target, measure, config, seed);
}

AttributionResult distribution_change(const GcmModel& old_model, const GcmModel& new_model,
                                      const std::string& target, ChangeMeasure measure,
                                      const ChangeConfig& config, std::uint64_t seed) {
  old_model.require_fitted();
  new_model.require_fitted();
  const CausalGraph& g = old_model.graph();
  if (!(g == new_model.graph())) {
    throw Error(ErrorCode::kInvalidArgument, "old and new models must share the same graph");
  }
  const std::size_t t = g.index_of(target);
  const bool continuous = old_model.is_continuous_node(t);
  if (continuous != new_model.is_continuous_node(t)) {
    throw Error(ErrorCode::kTypeMismatch, "target type differs between the models");
  }
  if (measure == ChangeMeasure::kAuto) measure = continuous ? ChangeMeasure::kMeanDiff : ChangeMeasure::kKl;
  if (measure == ChangeMeasure::kMeanDiff && !continuous) {
    throw Error(ErrorCode::kTypeMismatch, "mean_diff needs a continuous target");
  }
  const std::size_t n = config.num_samples;
  if (n < kKlNeighbours + 1) throw Error(ErrorCode::kInvalidArgument, "num_samples is too small");

  const auto closure = ancestral_closure(g, t);
  const auto players = players_of(closure);
  require_players_fit(players.size(), config.shapley);

  auto target_sample = [&](const GcmModel& model, std::uint64_t stream) {
    return propagate(model, draw_noise(model, n, stream, closure), {}, closure).column(target);
  };
  const Column reference = target_sample(old_model, derive_seed(seed, "change/reference"));

  auto distance = [&](const Column& sample) {
    if (measure == ChangeMeasure::kMeanDiff) {
      return std::abs(mean(sample.reals()) - mean(reference.reals()));
    }
    if (continuous) return kl_divergence(sample.reals(), reference.reals(), kKlNeighbours);
    return categorical_kl_divergence(sample.labels(), reference.labels());
  };

  SetFunction game;
  game.num_players = players.size();
  game.evaluate = [&](Coalition s) -> double {
    GcmModel hybrid = old_model;
    for (std::size_t p = 0; p < players.size(); ++p) {
      if (s & (Coalition{1} << p)) hybrid.set(players[p], new_model.mechanism(players[p]));
    }
    return distance(target_sample(hybrid, derive_seed(seed, static_cast<std::uint64_t>(s))));
  };

  const ShapleyEstimate estimate = estimate_shapley(game, config.shapley);
  AttributionResult result = make_result(g, players, estimate,
                                         measure == ChangeMeasure::kMeanDiff ? "mean_diff" : "kl", seed);
  result.budget = {{"samples", n}};
  if (config.shapley.method == ShapleyMethod::kPermutation) {
    result.budget["permutations"] = config.shapley.num_permutations;
  }
  result.empty_value = game.evaluate(0);
  result.full_value = game.evaluate(full_coalition(players.size()));
  return result;
}

}  // namespace gcm
