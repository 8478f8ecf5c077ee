#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gcm/data.hpp"
#include "gcm/random.hpp"
#include "json.hpp"

namespace gcm {

using Json = nlohmann::ordered_json;

// Non-owning references to parent columns, in parent order.
using ColumnRefs = std::vector<const Column*>;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Stochastic models (root marginals and noise distributions)

struct EmpiricalDistribution {
  std::vector<double> samples;
};

struct GaussianDistribution {
  double mean = 0.0;
  double stddev = 0.0;
};

struct MultinomialDistribution {
  std::vector<std::string> categories;
  std::vector<double> probabilities;
};

struct StochasticModel {
  std::variant<EmpiricalDistribution, GaussianDistribution, MultinomialDistribution> dist;

  bool is_continuous() const { return dist.index() != 2; }
  std::string kind_name() const;
};

enum class StochasticKind { kAuto, kEmpirical, kGaussian, kMultinomial };

StochasticModel fit_stochastic(const ColumnValues& values, StochasticKind kind);

// Empirical draws uniformly with replacement; multinomial by inverse CDF over
// the category order.
ColumnValues draw(const StochasticModel& model, std::size_t n, Rng& rng);
std::vector<double> draw_reals(const StochasticModel& model, std::size_t n, Rng& rng);

// Index of the category selected by inverse CDF at uniform draw `u`.
std::size_t inverse_cdf(std::span<const double> probabilities, double u);

// ---------------------------------------------------------------------------
// Input encoding: continuous parents pass through, categorical parents are
// one-hot encoded over the categories seen at fit time (no category dropped).

struct FeatureSpec {
  std::string name;
  bool categorical = false;
  std::vector<std::string> categories;  // sorted
};

class InputEncoder {
 public:
  InputEncoder() = default;
  explicit InputEncoder(std::vector<FeatureSpec> features);

  static InputEncoder fit(const ColumnRefs& parents);

  const std::vector<FeatureSpec>& features() const { return features_; }
  std::size_t num_inputs() const { return features_.size(); }
  std::size_t dimension() const { return dimension_; }

  // Throws kUnseenCategory for categories absent at fit time.
  RowMajorMatrix encode(const ColumnRefs& parents) const;
  void encode_row(std::span<const Cell> cells, std::span<double> out) const;

 private:
  std::vector<FeatureSpec> features_;
  std::size_t dimension_ = 0;
};

// ---------------------------------------------------------------------------
// Prediction models

struct LinearRegressor {
  std::vector<double> coefficients;
  double intercept = 0.0;
};

struct KnnRegressor {
  std::size_t k = 1;
  RowMajorMatrix inputs;
  std::vector<double> targets;
  // Added to the neighbour average; holds the folded-in residual mean.
  double offset = 0.0;
};

enum class ModelKind { kAuto, kLinear, kKnn };

struct PredictionModel {
  InputEncoder encoder;
  std::variant<LinearRegressor, KnnRegressor> regressor;

  std::string kind_name() const;
  double predict_encoded(std::span<const double> x) const;
  std::vector<double> predict(const RowMajorMatrix& encoded) const;
};

// Ordinary least squares via the normal equations on mean-centred inputs.
// Falls back to ridge with lambda = 1e-8 * trace / dim when the Gram matrix
// is singular.
LinearRegressor fit_linear(const RowMajorMatrix& x, std::span<const double> y);
KnnRegressor fit_knn(const RowMajorMatrix& x, std::span<const double> y);
std::size_t default_knn_k(std::size_t n_train);

struct CrossValidationScores {
  double linear_mse = 0.0;
  double knn_mse = 0.0;
};

// 5-fold CV; row i of a seeded (seed 0) shuffle goes to fold i mod 5.
CrossValidationScores cross_validate(const RowMajorMatrix& x, std::span<const double> y);
std::vector<std::size_t> cv_fold_assignment(std::size_t n);

// ---------------------------------------------------------------------------
// Conditional mechanisms

// Y := f(parents) + N.
struct AdditiveNoiseModel {
  PredictionModel prediction;
  StochasticModel noise;
};

AdditiveNoiseModel fit_anm(const ColumnRefs& parents, std::span<const double> targets,
                           ModelKind kind);

double predict(const AdditiveNoiseModel& anm, std::span<const Cell> parents);
double evaluate(const AdditiveNoiseModel& anm, std::span<const Cell> parents, double noise);
// Returns the noise value that `evaluate` maps back onto `observed`.
double estimate_noise(const AdditiveNoiseModel& anm, std::span<const Cell> parents,
                      double observed);

// Value near `observed - prediction` with prediction + noise == observed in
// floating point; the plain difference when no such value exists.
double abduct_additive_noise(double prediction, double observed);

// Categorical non-root node: multinomial logistic regression over the encoded
// parents; sampling draws a class by inverse CDF with a uniform noise value.
struct ClassifierFcm {
  InputEncoder encoder;
  std::vector<std::string> categories;  // sorted
  // Per class: bias followed by one weight per encoded input dimension.
  // Inputs are standardised with `input_mean` / `input_scale` first.
  RowMajorMatrix weights;
  std::vector<double> input_mean;
  std::vector<double> input_scale;

  std::vector<double> class_probabilities_encoded(std::span<const double> x) const;
  std::vector<double> class_probabilities(std::span<const Cell> parents) const;
};

ClassifierFcm fit_classifier(const ColumnRefs& parents, std::span<const std::string> targets);

std::string sample_class(const ClassifierFcm& fcm, std::span<const Cell> parents, Rng& rng);

// ---------------------------------------------------------------------------
// Tagged JSON representation.

Json to_json(const StochasticModel& model);
Json to_json(const AdditiveNoiseModel& anm);
Json to_json(const ClassifierFcm& fcm);
StochasticModel stochastic_from_json(const Json& j);
AdditiveNoiseModel anm_from_json(const Json& j);
ClassifierFcm classifier_from_json(const Json& j);

}  // namespace gcm
