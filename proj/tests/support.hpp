#pragma once

// Shared fixtures for the unit and acceptance tests: ground-truth linear
// Gaussian models with closed-form moments, an independent simulator, and
// small seeded generators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "gcm/data.hpp"
#include "gcm/graph.hpp"
#include "gcm/mechanisms.hpp"
#include "gcm/model.hpp"

namespace gcm::testing {

// Ground-truth additive noise mechanism f(parents) = intercept + sum c_i p_i
// with N(0, sd^2) noise.
inline AdditiveNoiseModel linear_anm(const std::vector<std::string>& parents,
                                     std::vector<double> coefficients, double intercept,
                                     double sd) {
  std::vector<FeatureSpec> features;
  for (const auto& p : parents) features.push_back({p, false, {}});
  AdditiveNoiseModel anm;
  anm.prediction.encoder = InputEncoder(std::move(features));
  anm.prediction.regressor = LinearRegressor{std::move(coefficients), intercept};
  anm.noise = StochasticModel{GaussianDistribution{0.0, sd}};
  return anm;
}

inline StochasticModel gaussian_root(double mean, double sd) {
  return StochasticModel{GaussianDistribution{mean, sd}};
}

// x = c + B x + e with B strictly lower triangular in declaration order and
// e ~ N(0, diag(sd^2)).
struct LinearGaussian {
  std::vector<std::string> names;
  std::vector<Edge> edges;
  Eigen::MatrixXd coefficients;  // (child, parent)
  Eigen::VectorXd intercepts;
  Eigen::VectorXd sds;

  std::size_t size() const { return names.size(); }

  CausalGraph graph() const { return CausalGraph(names, edges); }

  GcmModel model() const {
    const CausalGraph g = graph();
    GcmModel m(g);
    for (std::size_t v = 0; v < size(); ++v) {
      const auto i = static_cast<Eigen::Index>(v);
      if (g.is_root(v)) {
        m = assign_ground_truth(m, names[v], gaussian_root(intercepts(i), sds(i)));
        continue;
      }
      std::vector<std::string> parents;
      std::vector<double> coefs;
      for (std::size_t p : g.parent_indices(v)) {
        parents.push_back(names[p]);
        coefs.push_back(coefficients(i, static_cast<Eigen::Index>(p)));
      }
      m = assign_ground_truth(m, names[v], linear_anm(parents, coefs, intercepts(i), sds(i)));
    }
    return m;
  }

  // Mean vector and covariance matrix, optionally under do(node = value).
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(int node = -1, double value = 0.0) const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd b = coefficients;
    Eigen::VectorXd c = intercepts;
    Eigen::VectorXd var = sds.array().square();
    if (node >= 0) {
      b.row(node).setZero();
      c(node) = value;
      var(node) = 0.0;
    }
    const Eigen::MatrixXd a = (Eigen::MatrixXd::Identity(n, n) - b).inverse();
    return {a * c, a * var.asDiagonal() * a.transpose()};
  }

  Dataset simulate(std::size_t rows, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> cols(size(), std::vector<double>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t v = 0; v < size(); ++v) {
        const auto i = static_cast<Eigen::Index>(v);
        double x = intercepts(i) + sds(i) * normal(rng);
        for (std::size_t p = 0; p < v; ++p) x += coefficients(i, static_cast<Eigen::Index>(p)) * cols[p][r];
        cols[v][r] = x;
      }
    }
    std::vector<Column> columns;
    for (std::size_t v = 0; v < size(); ++v) columns.push_back(Column::continuous(names[v], std::move(cols[v])));
    return Dataset(std::move(columns));
  }
};

inline LinearGaussian make_linear_gaussian(std::vector<std::string> names,
                                           const std::vector<std::tuple<std::string, std::string, double>>& edges,
                                           std::vector<double> intercepts, std::vector<double> sds) {
  LinearGaussian lg;
  const auto n = static_cast<Eigen::Index>(names.size());
  lg.coefficients = Eigen::MatrixXd::Zero(n, n);
  auto index = [&](const std::string& s) {
    return static_cast<Eigen::Index>(std::find(names.begin(), names.end(), s) - names.begin());
  };
  for (const auto& [p, c, w] : edges) {
    lg.edges.emplace_back(p, c);
    lg.coefficients(index(c), index(p)) = w;
  }
  lg.names = std::move(names);
  lg.intercepts = Eigen::Map<Eigen::VectorXd>(intercepts.data(), n);
  lg.sds = Eigen::Map<Eigen::VectorXd>(sds.data(), n);
  return lg;
}

// Unit-coefficient, unit-noise chain X -> Y -> Z.
inline LinearGaussian unit_chain() {
  return make_linear_gaussian({"X", "Y", "Z"}, {{"X", "Y", 1.0}, {"Y", "Z", 1.0}}, {0, 0, 0}, {1, 1, 1});
}

// Random DAG on 2..max_nodes nodes in declaration order, edge probability
// 1/2, coefficients of magnitude in [0.5, 1.5].
inline LinearGaussian random_linear_gaussian(std::mt19937_64& rng, std::size_t max_nodes) {
  std::uniform_int_distribution<std::size_t> size_dist(2, max_nodes);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = size_dist(rng);
  std::vector<std::string> names;
  for (std::size_t v = 0; v < n; ++v) names.push_back("V" + std::to_string(v));
  std::vector<std::tuple<std::string, std::string, double>> edges;
  for (std::size_t c = 1; c < n; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      if (unit(rng) < 0.5) continue;
      const double magnitude = 0.5 + unit(rng);
      edges.emplace_back(names[p], names[c], unit(rng) < 0.5 ? -magnitude : magnitude);
    }
  }
  std::vector<double> intercepts(n);
  std::vector<double> sds(n);
  for (std::size_t v = 0; v < n; ++v) {
    intercepts[v] = 2.0 * unit(rng) - 1.0;
    sds[v] = 0.5 + unit(rng);
  }
  return make_linear_gaussian(std::move(names), edges, std::move(intercepts), std::move(sds));
}

inline std::vector<double> normal_sample(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(mean, sd);
  std::vector<double> out(n);
  for (double& x : out) x = normal(rng);
  return out;
}

inline std::vector<double> uniform_sample(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(n);
  for (double& x : out) x = unit(rng);
  return out;
}

inline double sample_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

inline RowMajorMatrix as_matrix(const std::vector<double>& v) {
  RowMajorMatrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

}  // namespace gcm::testing
