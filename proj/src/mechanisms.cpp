#include "gcm/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gcm/error.hpp"

namespace gcm {

// ---------------------------------------------------------------------------
// Stochastic models

std::string StochasticModel::kind_name() const {
  switch (dist.index()) {
    case 0: return "empirical";
    case 1: return "gaussian";
    default: return "multinomial";
  }
}

StochasticModel fit_stochastic(const ColumnValues& values, StochasticKind kind) {
  const std::size_t n = std::visit([](const auto& v) { return v.size(); }, values);
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "cannot fit a distribution to zero values");

  if (const auto* reals = std::get_if<std::vector<double>>(&values)) {
    switch (kind) {
      case StochasticKind::kAuto:
      case StochasticKind::kEmpirical:
        return StochasticModel{EmpiricalDistribution{*reals}};
      case StochasticKind::kGaussian: {
        const double mean = std::accumulate(reals->begin(), reals->end(), 0.0) / n;
        double ss = 0.0;
        for (double v : *reals) ss += (v - mean) * (v - mean);
        const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        if (!std::isfinite(mean) || !std::isfinite(sd)) {
          throw Error(ErrorCode::kNonFinite, "Gaussian fit produced non-finite values");
        }
        return StochasticModel{GaussianDistribution{mean, sd}};
      }
      case StochasticKind::kMultinomial:
        throw Error(ErrorCode::kTypeMismatch, "multinomial model needs categorical values");
    }
  }

  const auto& labels = std::get<std::vector<std::string>>(values);
  if (kind != StochasticKind::kAuto && kind != StochasticKind::kMultinomial) {
    throw Error(ErrorCode::kTypeMismatch, "continuous model requested for categorical values");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  MultinomialDistribution m;
  for (const auto& [label, count] : counts) {
    m.categories.push_back(label);
    m.probabilities.push_back(static_cast<double>(count) / static_cast<double>(n));
  }
  return StochasticModel{std::move(m)};
}

std::size_t inverse_cdf(std::span<const double> probabilities, double u) {
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    cumulative += probabilities[i];
    if (u < cumulative) return i;
  }
  // Rounding left the total just below 1; take the last category with mass.
  for (std::size_t i = probabilities.size(); i-- > 0;) {
    if (probabilities[i] > 0.0) return i;
  }
  return probabilities.size() - 1;
}

std::vector<double> draw_reals(const StochasticModel& model, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  if (const auto* e = std::get_if<EmpiricalDistribution>(&model.dist)) {
    for (auto& v : out) v = e->samples[rng.index(e->samples.size())];
  } else if (const auto* g = std::get_if<GaussianDistribution>(&model.dist)) {
    if (g->stddev == 0.0) {
      std::fill(out.begin(), out.end(), g->mean);
    } else {
      for (auto& v : out) v = rng.normal(g->mean, g->stddev);
    }
  } else {
    throw Error(ErrorCode::kTypeMismatch, "multinomial model has no real-valued draws");
  }
  return out;
}

ColumnValues draw(const StochasticModel& model, std::size_t n, Rng& rng) {
  if (model.is_continuous()) return draw_reals(model, n, rng);
  const auto& m = std::get<MultinomialDistribution>(model.dist);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(m.categories[inverse_cdf(m.probabilities, rng.uniform())]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Input encoding

InputEncoder::InputEncoder(std::vector<FeatureSpec> features) : features_(std::move(features)) {
  for (const auto& f : features_) dimension_ += f.categorical ? f.categories.size() : 1;
}

InputEncoder InputEncoder::fit(const ColumnRefs& parents) {
  std::vector<FeatureSpec> features;
  for (const Column* col : parents) {
    FeatureSpec spec{col->name, !col->is_continuous(), {}};
    if (spec.categorical) {
      spec.categories = col->labels();
      std::sort(spec.categories.begin(), spec.categories.end());
      spec.categories.erase(std::unique(spec.categories.begin(), spec.categories.end()),
                            spec.categories.end());
    }
    features.push_back(std::move(spec));
  }
  return InputEncoder(std::move(features));
}

namespace {

std::size_t category_index(const FeatureSpec& spec, const std::string& label) {
  const auto it = std::lower_bound(spec.categories.begin(), spec.categories.end(), label);
  if (it == spec.categories.end() || *it != label) {
    throw Error(ErrorCode::kUnseenCategory,
                "category '" + label + "' of '" + spec.name + "' was not seen during fitting");
  }
  return static_cast<std::size_t>(it - spec.categories.begin());
}

}  // namespace

RowMajorMatrix InputEncoder::encode(const ColumnRefs& parents) const {
  if (parents.size() != features_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(features_.size()) +
                                                   " parent columns, got " +
                                                   std::to_string(parents.size()));
  }
  const std::size_t n = parents.empty() ? 0 : parents.front()->size();
  RowMajorMatrix x = RowMajorMatrix::Zero(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(dimension_));
  std::size_t offset = 0;
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const FeatureSpec& spec = features_[f];
    if (!spec.categorical) {
      const auto& values = parents[f]->reals();
      for (std::size_t r = 0; r < n; ++r) x(r, offset) = values[r];
      offset += 1;
    } else {
      const auto& labels = parents[f]->labels();
      for (std::size_t r = 0; r < n; ++r) x(r, offset + category_index(spec, labels[r])) = 1.0;
      offset += spec.categories.size();
    }
  }
  return x;
}

void InputEncoder::encode_row(std::span<const Cell> cells, std::span<double> out) const {
  if (cells.size() != features_.size() || out.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch, "parent values do not match the encoder");
  }
  std::fill(out.begin(), out.end(), 0.0);
  std::size_t offset = 0;
  for (std::size_t f = 0; f < features_.size(); ++f) {
    const FeatureSpec& spec = features_[f];
    if (!spec.categorical) {
      const double* v = std::get_if<double>(&cells[f]);
      if (v == nullptr) {
        throw Error(ErrorCode::kTypeMismatch, "parent '" + spec.name + "' expects a real value");
      }
      out[offset++] = *v;
    } else {
      const std::string* s = std::get_if<std::string>(&cells[f]);
      if (s == nullptr) {
        throw Error(ErrorCode::kTypeMismatch, "parent '" + spec.name + "' expects a category");
      }
      out[offset + category_index(spec, *s)] = 1.0;
      offset += spec.categories.size();
    }
  }
}

// ---------------------------------------------------------------------------
// Regressors

std::size_t default_knn_k(std::size_t n_train) {
  const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n_train))));
  return std::max<std::size_t>(1, k);
}

LinearRegressor fit_linear(const RowMajorMatrix& x, std::span<const double> y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const double y_mean = yv.mean();
  LinearRegressor model;
  if (d == 0) {
    model.intercept = y_mean;
    return model;
  }
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = yv.array() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::VectorXd rhs = xc.transpose() * yc;

  Eigen::VectorXd beta;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
    beta = llt.solve(rhs);
  } else {
    const double trace = gram.trace();
    const double lambda = trace > 0.0 ? 1e-8 * trace / static_cast<double>(d) : 1e-8;
    gram.diagonal().array() += lambda;
    beta = gram.ldlt().solve(rhs);
  }
  model.coefficients.assign(beta.data(), beta.data() + d);
  model.intercept = y_mean - x_mean.dot(beta);
  return model;
}

KnnRegressor fit_knn(const RowMajorMatrix& x, std::span<const double> y) {
  KnnRegressor model;
  model.k = std::min<std::size_t>(default_knn_k(y.size()), y.size());
  model.inputs = x;
  model.targets.assign(y.begin(), y.end());
  return model;
}

namespace {

double linear_predict(const LinearRegressor& m, std::span<const double> x) {
  double acc = m.intercept;
  for (std::size_t j = 0; j < m.coefficients.size(); ++j) acc += m.coefficients[j] * x[j];
  return acc;
}

// Mean target of the k nearest training rows (Euclidean). Equal distances are
// broken by training-row index.
double knn_predict(const KnnRegressor& m, std::span<const double> x,
                   std::vector<std::pair<double, std::size_t>>& scratch) {
  const auto n = static_cast<std::size_t>(m.inputs.rows());
  const auto d = static_cast<std::size_t>(m.inputs.cols());
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = m.inputs.data() + i * d;
    double dist = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - x[j];
      dist += diff * diff;
    }
    scratch[i] = {dist, i};
  }
  const std::size_t k = std::min(m.k, n);
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   scratch.end());
  std::sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += m.targets[scratch[i].second];
  return sum / static_cast<double>(k) + m.offset;
}

}  // namespace

std::string PredictionModel::kind_name() const {
  return regressor.index() == 0 ? "linear" : "knn";
}

double PredictionModel::predict_encoded(std::span<const double> x) const {
  if (const auto* lin = std::get_if<LinearRegressor>(&regressor)) return linear_predict(*lin, x);
  std::vector<std::pair<double, std::size_t>> scratch;
  return knn_predict(std::get<KnnRegressor>(regressor), x, scratch);
}

std::vector<double> PredictionModel::predict(const RowMajorMatrix& encoded) const {
  const auto n = static_cast<std::size_t>(encoded.rows());
  const auto d = static_cast<std::size_t>(encoded.cols());
  std::vector<double> out(n);
  if (const auto* lin = std::get_if<LinearRegressor>(&regressor)) {
    for (std::size_t r = 0; r < n; ++r) {
      out[r] = linear_predict(*lin, {encoded.data() + r * d, d});
    }
  } else {
    const auto& knn = std::get<KnnRegressor>(regressor);
    std::vector<std::pair<double, std::size_t>> scratch;
    for (std::size_t r = 0; r < n; ++r) {
      out[r] = knn_predict(knn, {encoded.data() + r * d, d}, scratch);
    }
  }
  return out;
}

std::vector<std::size_t> cv_fold_assignment(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % 5;
  return fold;
}

CrossValidationScores cross_validate(const RowMajorMatrix& x, std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 5) throw Error(ErrorCode::kInsufficientRows, "cross-validation needs at least 5 rows");
  const auto fold = cv_fold_assignment(n);
  const auto d = static_cast<Eigen::Index>(x.cols());
  double linear_se = 0.0;
  double knn_se = 0.0;
  for (std::size_t f = 0; f < 5; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    for (std::size_t i = 0; i < n; ++i) {
      (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
    }
    RowMajorMatrix x_train(static_cast<Eigen::Index>(train.size()), d);
    std::vector<double> y_train(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      x_train.row(static_cast<Eigen::Index>(i)) = x.row(train[i]);
      y_train[i] = y[static_cast<std::size_t>(train[i])];
    }
    const PredictionModel linear{InputEncoder{}, fit_linear(x_train, y_train)};
    const PredictionModel knn{InputEncoder{}, fit_knn(x_train, y_train)};
    for (Eigen::Index t : test) {
      const std::span<const double> row{x.data() + t * d, static_cast<std::size_t>(d)};
      const double target = y[static_cast<std::size_t>(t)];
      const double el = linear.predict_encoded(row) - target;
      const double ek = knn.predict_encoded(row) - target;
      linear_se += el * el;
      knn_se += ek * ek;
    }
  }
  return {linear_se / static_cast<double>(n), knn_se / static_cast<double>(n)};
}

// ---------------------------------------------------------------------------
// Additive noise models

AdditiveNoiseModel fit_anm(const ColumnRefs& parents, std::span<const double> targets,
                           ModelKind kind) {
  if (targets.size() < 2) {
    throw Error(ErrorCode::kInsufficientRows, "additive noise model needs at least 2 rows, got " +
                                                  std::to_string(targets.size()));
  }
  for (const Column* p : parents) {
    if (p->size() != targets.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "parent '" + p->name + "' has a different length");
    }
  }
  AdditiveNoiseModel anm;
  anm.prediction.encoder = InputEncoder::fit(parents);
  const RowMajorMatrix x = anm.prediction.encoder.encode(parents);

  if (kind == ModelKind::kAuto) {
    kind = ModelKind::kLinear;
    if (targets.size() >= 10 && x.cols() > 0) {
      const auto scores = cross_validate(x, targets);
      if (scores.knn_mse < scores.linear_mse) kind = ModelKind::kKnn;
    }
  }
  if (kind == ModelKind::kLinear) {
    anm.prediction.regressor = fit_linear(x, targets);
  } else {
    anm.prediction.regressor = fit_knn(x, targets);
  }

  const std::vector<double> fitted = anm.prediction.predict(x);
  std::vector<double> residuals(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) residuals[i] = targets[i] - fitted[i];
  const double mean =
      std::accumulate(residuals.begin(), residuals.end(), 0.0) / static_cast<double>(targets.size());
  for (auto& r : residuals) r -= mean;
  std::visit(
      [&](auto& reg) {
        if constexpr (std::is_same_v<std::decay_t<decltype(reg)>, LinearRegressor>) {
          reg.intercept += mean;
        } else {
          reg.offset += mean;
        }
      },
      anm.prediction.regressor);
  // Overflow in the fit shows up as non-finite residuals.
  if (!std::isfinite(mean) || !std::all_of(residuals.begin(), residuals.end(),
                                           [](double r) { return std::isfinite(r); })) {
    throw Error(ErrorCode::kNonFinite, "additive noise model fit produced non-finite values");
  }
  anm.noise = StochasticModel{EmpiricalDistribution{std::move(residuals)}};
  return anm;
}

double predict(const AdditiveNoiseModel& anm, std::span<const Cell> parents) {
  std::vector<double> x(anm.prediction.encoder.dimension());
  anm.prediction.encoder.encode_row(parents, x);
  return anm.prediction.predict_encoded(x);
}

double evaluate(const AdditiveNoiseModel& anm, std::span<const Cell> parents, double noise) {
  return predict(anm, parents) + noise;
}

double abduct_additive_noise(double prediction, double observed) {
  const double first = observed - prediction;
  double noise = first;
  double sum = prediction + noise;
  if (sum == observed) return noise;
  // prediction + noise is monotone in noise: walk towards observed one ulp at
  // a time and stop once the sum passes it.
  const bool upward = sum < observed;
  for (int step = 0; step < 64; ++step) {
    noise = std::nextafter(noise, upward ? INFINITY : -INFINITY);
    sum = prediction + noise;
    if (sum == observed) return noise;
    if (upward ? sum > observed : sum < observed) break;
  }
  return first;
}

double estimate_noise(const AdditiveNoiseModel& anm, std::span<const Cell> parents,
                      double observed) {
  return abduct_additive_noise(predict(anm, parents), observed);
}

// ---------------------------------------------------------------------------
// Classifier FCM

namespace {

constexpr double kClassifierL2 = 1e-3;
constexpr int kClassifierMaxIterations = 500;

void softmax_in_place(std::span<double> logits) {
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - max);
    sum += l;
  }
  for (auto& l : logits) l /= sum;
}

// Mean negative log-likelihood plus L2 penalty on non-bias weights.
double classifier_loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& xb,
                       const std::vector<std::size_t>& labels, Eigen::MatrixXd* grad) {
  const Eigen::Index n = xb.rows();
  Eigen::MatrixXd probs = xb * w.transpose();  // n × K
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd row = probs.row(i);
    softmax_in_place({row.data(), static_cast<std::size_t>(row.size())});
    loss -= std::log(std::max(row(static_cast<Eigen::Index>(labels[i])), 1e-300));
    probs.row(i) = row;
  }
  loss /= static_cast<double>(n);
  Eigen::MatrixXd penalized = w;
  penalized.col(0).setZero();
  loss += 0.5 * kClassifierL2 * penalized.squaredNorm();
  if (grad != nullptr) {
    for (Eigen::Index i = 0; i < n; ++i) probs(i, static_cast<Eigen::Index>(labels[i])) -= 1.0;
    *grad = probs.transpose() * xb / static_cast<double>(n) + kClassifierL2 * penalized;
  }
  return loss;
}

}  // namespace

std::vector<double> ClassifierFcm::class_probabilities_encoded(std::span<const double> x) const {
  const auto k = static_cast<std::size_t>(weights.rows());
  std::vector<double> logits(k);
  for (std::size_t c = 0; c < k; ++c) {
    double acc = weights(static_cast<Eigen::Index>(c), 0);
    for (std::size_t j = 0; j < x.size(); ++j) {
      acc += weights(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j + 1)) *
             (x[j] - input_mean[j]) / input_scale[j];
    }
    logits[c] = acc;
  }
  softmax_in_place(logits);
  return logits;
}

std::vector<double> ClassifierFcm::class_probabilities(std::span<const Cell> parents) const {
  std::vector<double> x(encoder.dimension());
  encoder.encode_row(parents, x);
  return class_probabilities_encoded(x);
}

ClassifierFcm fit_classifier(const ColumnRefs& parents, std::span<const std::string> targets) {
  if (targets.size() < 2) {
    throw Error(ErrorCode::kInsufficientRows, "classifier needs at least 2 rows, got " +
                                                  std::to_string(targets.size()));
  }
  ClassifierFcm fcm;
  fcm.encoder = InputEncoder::fit(parents);
  const RowMajorMatrix x = fcm.encoder.encode(parents);
  fcm.categories.assign(targets.begin(), targets.end());
  std::sort(fcm.categories.begin(), fcm.categories.end());
  fcm.categories.erase(std::unique(fcm.categories.begin(), fcm.categories.end()),
                       fcm.categories.end());
  std::vector<std::size_t> labels(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    labels[i] = static_cast<std::size_t>(
        std::lower_bound(fcm.categories.begin(), fcm.categories.end(), targets[i]) -
        fcm.categories.begin());
  }

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const auto k = static_cast<Eigen::Index>(fcm.categories.size());
  fcm.input_mean.assign(static_cast<std::size_t>(d), 0.0);
  fcm.input_scale.assign(static_cast<std::size_t>(d), 1.0);
  Eigen::MatrixXd xb(n, d + 1);
  xb.col(0).setOnes();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mean).square().mean());
    const double scale = sd > 0.0 ? sd : 1.0;
    fcm.input_mean[static_cast<std::size_t>(j)] = mean;
    fcm.input_scale[static_cast<std::size_t>(j)] = scale;
    xb.col(j + 1) = (x.col(j).array() - mean) / scale;
  }

  // Gradient descent with Armijo backtracking; the objective is convex.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, d + 1);
  Eigen::MatrixXd grad;
  double loss = classifier_loss(w, xb, labels, &grad);
  double step = 1.0;
  for (int it = 0; it < kClassifierMaxIterations && k > 1; ++it) {
    const double gnorm2 = grad.squaredNorm();
    if (gnorm2 < 1e-14) break;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::MatrixXd candidate = w - step * grad;
      const double candidate_loss = classifier_loss(candidate, xb, labels, nullptr);
      if (candidate_loss <= loss - 0.5 * step * gnorm2) {
        w = candidate;
        loss = classifier_loss(w, xb, labels, &grad);
        accepted = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  if (!w.allFinite() || !xb.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "classifier fit produced non-finite values");
  }
  fcm.weights = w;
  return fcm;
}

std::string sample_class(const ClassifierFcm& fcm, std::span<const Cell> parents, Rng& rng) {
  const auto probs = fcm.class_probabilities(parents);
  return fcm.categories[inverse_cdf(probs, rng.uniform())];
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json encoder_to_json(const InputEncoder& enc) {
  Json out = Json::array();
  for (const auto& f : enc.features()) {
    Json j;
    j["name"] = f.name;
    j["categorical"] = f.categorical;
    if (f.categorical) j["categories"] = f.categories;
    out.push_back(std::move(j));
  }
  return out;
}

InputEncoder encoder_from_json(const Json& j) {
  std::vector<FeatureSpec> features;
  for (const auto& f : j) {
    FeatureSpec spec{f.at("name").get<std::string>(), f.at("categorical").get<bool>(), {}};
    if (spec.categorical) {
      spec.categories = f.at("categories").get<std::vector<std::string>>();
      if (!std::is_sorted(spec.categories.begin(), spec.categories.end())) {
        throw Error(ErrorCode::kCorruptPayload, "encoder categories must be sorted");
      }
    }
    features.push_back(std::move(spec));
  }
  return InputEncoder(std::move(features));
}

Json matrix_to_json(const RowMajorMatrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

RowMajorMatrix matrix_from_json(const Json& j, Eigen::Index cols) {
  RowMajorMatrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw Error(ErrorCode::kCorruptPayload, "matrix row has the wrong width");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), c) = j[r][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

void require_type(const Json& j, const char* type) {
  if (j.at("type").get<std::string>() != type) {
    throw Error(ErrorCode::kCorruptPayload, std::string("expected mechanism type '") + type + "'");
  }
}

}  // namespace

Json to_json(const StochasticModel& model) {
  Json j;
  j["type"] = model.kind_name();
  if (const auto* e = std::get_if<EmpiricalDistribution>(&model.dist)) {
    j["samples"] = e->samples;
  } else if (const auto* g = std::get_if<GaussianDistribution>(&model.dist)) {
    j["mean"] = g->mean;
    j["std"] = g->stddev;
  } else {
    const auto& m = std::get<MultinomialDistribution>(model.dist);
    j["categories"] = m.categories;
    j["probabilities"] = m.probabilities;
  }
  return j;
}

namespace {

// Missing keys and wrong value types surface as corrupt payloads.
template <typename F>
auto parse_payload(F&& parse) {
  try {
    return parse();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptPayload, std::string("malformed mechanism: ") + e.what());
  }
}

StochasticModel parse_stochastic(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "empirical") {
    auto samples = j.at("samples").get<std::vector<double>>();
    if (samples.empty()) throw Error(ErrorCode::kCorruptPayload, "empirical model has no samples");
    return StochasticModel{EmpiricalDistribution{std::move(samples)}};
  }
  if (type == "gaussian") {
    const double sd = j.at("std").get<double>();
    if (!(sd >= 0.0)) throw Error(ErrorCode::kCorruptPayload, "gaussian std must be >= 0");
    return StochasticModel{GaussianDistribution{j.at("mean").get<double>(), sd}};
  }
  if (type == "multinomial") {
    MultinomialDistribution m{j.at("categories").get<std::vector<std::string>>(),
                              j.at("probabilities").get<std::vector<double>>()};
    double total = 0.0;
    for (double p : m.probabilities) {
      if (p < 0.0) throw Error(ErrorCode::kCorruptPayload, "negative probability");
      total += p;
    }
    if (m.categories.empty() || m.categories.size() != m.probabilities.size() ||
        std::abs(total - 1.0) > 1e-12) {
      throw Error(ErrorCode::kCorruptPayload, "multinomial probabilities must form a simplex");
    }
    return StochasticModel{std::move(m)};
  }
  throw Error(ErrorCode::kCorruptPayload, "unknown stochastic model type '" + type + "'");
}

}  // namespace

StochasticModel stochastic_from_json(const Json& j) {
  return parse_payload([&] { return parse_stochastic(j); });
}

Json to_json(const AdditiveNoiseModel& anm) {
  Json j;
  j["type"] = "additive_noise";
  j["encoder"] = encoder_to_json(anm.prediction.encoder);
  Json pred;
  pred["type"] = anm.prediction.kind_name();
  if (const auto* lin = std::get_if<LinearRegressor>(&anm.prediction.regressor)) {
    pred["coefficients"] = lin->coefficients;
    pred["intercept"] = lin->intercept;
  } else {
    const auto& knn = std::get<KnnRegressor>(anm.prediction.regressor);
    pred["k"] = knn.k;
    pred["inputs"] = matrix_to_json(knn.inputs);
    pred["targets"] = knn.targets;
    pred["offset"] = knn.offset;
  }
  j["prediction"] = std::move(pred);
  j["noise"] = to_json(anm.noise);
  return j;
}

AdditiveNoiseModel anm_from_json(const Json& j) {
  return parse_payload([&] {
  require_type(j, "additive_noise");
  AdditiveNoiseModel anm;
  anm.prediction.encoder = encoder_from_json(j.at("encoder"));
  const auto dim = static_cast<Eigen::Index>(anm.prediction.encoder.dimension());
  const Json& pred = j.at("prediction");
  const std::string type = pred.at("type").get<std::string>();
  if (type == "linear") {
    LinearRegressor lin{pred.at("coefficients").get<std::vector<double>>(),
                        pred.at("intercept").get<double>()};
    if (static_cast<Eigen::Index>(lin.coefficients.size()) != dim) {
      throw Error(ErrorCode::kCorruptPayload, "coefficient count does not match the encoder");
    }
    anm.prediction.regressor = std::move(lin);
  } else if (type == "knn") {
    KnnRegressor knn;
    knn.k = pred.at("k").get<std::size_t>();
    knn.inputs = matrix_from_json(pred.at("inputs"), dim);
    knn.targets = pred.at("targets").get<std::vector<double>>();
    knn.offset = pred.at("offset").get<double>();
    if (knn.k == 0 || knn.targets.size() != static_cast<std::size_t>(knn.inputs.rows()) ||
        knn.k > knn.targets.size()) {
      throw Error(ErrorCode::kCorruptPayload, "inconsistent knn regressor");
    }
    anm.prediction.regressor = std::move(knn);
  } else {
    throw Error(ErrorCode::kCorruptPayload, "unknown prediction model type '" + type + "'");
  }
  anm.noise = parse_stochastic(j.at("noise"));
  if (!anm.noise.is_continuous()) {
    throw Error(ErrorCode::kCorruptPayload, "additive noise must be continuous");
  }
  return anm;
  });
}

Json to_json(const ClassifierFcm& fcm) {
  Json j;
  j["type"] = "classifier";
  j["encoder"] = encoder_to_json(fcm.encoder);
  j["categories"] = fcm.categories;
  j["weights"] = matrix_to_json(fcm.weights);
  j["input_mean"] = fcm.input_mean;
  j["input_scale"] = fcm.input_scale;
  return j;
}

ClassifierFcm classifier_from_json(const Json& j) {
  return parse_payload([&] {
  require_type(j, "classifier");
  ClassifierFcm fcm;
  fcm.encoder = encoder_from_json(j.at("encoder"));
  fcm.categories = j.at("categories").get<std::vector<std::string>>();
  const auto dim = static_cast<Eigen::Index>(fcm.encoder.dimension());
  fcm.weights = matrix_from_json(j.at("weights"), dim + 1);
  fcm.input_mean = j.at("input_mean").get<std::vector<double>>();
  fcm.input_scale = j.at("input_scale").get<std::vector<double>>();
  if (fcm.categories.empty() ||
      static_cast<std::size_t>(fcm.weights.rows()) != fcm.categories.size() ||
      fcm.input_mean.size() != static_cast<std::size_t>(dim) ||
      fcm.input_scale.size() != static_cast<std::size_t>(dim)) {
    throw Error(ErrorCode::kCorruptPayload, "inconsistent classifier");
  }
  return fcm;
  });
}

}  // namespace gcm
