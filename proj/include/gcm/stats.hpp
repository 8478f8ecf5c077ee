#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcm/data.hpp"
#include "gcm/mechanisms.hpp"

namespace gcm {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  std::size_t num_permutations = 0;
  std::size_t conditioning_set_size = 0;
};

inline constexpr std::size_t kDefaultPermutations = 199;

// Sample distance correlation between the rows of x and y (Euclidean
// distances); 0 when either input is constant.
double distance_correlation(const RowMajorMatrix& x, const RowMajorMatrix& y);

// Permutation test on distance correlation:
// p = (1 + #{b : dCor(x, y_perm_b) >= dCor(x, y)}) / (B + 1).
// Categorical columns are one-hot encoded.
TestResult pairwise_independence_test(const Column& x, const Column& y,
                                      std::size_t num_permutations = kDefaultPermutations,
                                      std::uint64_t seed = 0);
TestResult pairwise_independence_test(std::span<const double> x, std::span<const double> y,
                                      std::size_t num_permutations = kDefaultPermutations,
                                      std::uint64_t seed = 0);

// Fisher-z test of x _||_ y | z on partial correlation. Caches the Pearson
// correlation matrix of a continuous dataset so repeated tests are cheap.
class FisherZTest {
 public:
  explicit FisherZTest(const Dataset& data);

  std::size_t num_rows() const { return num_rows_; }
  std::size_t index_of(std::string_view column) const;

  double partial_correlation(std::size_t x, std::size_t y, std::span<const std::size_t> z) const;
  TestResult test(std::size_t x, std::size_t y, std::span<const std::size_t> z) const;

 private:
  std::vector<std::string> names_;
  std::size_t num_rows_ = 0;
  Eigen::MatrixXd correlation_;
};

TestResult fisher_z_test(const Dataset& data, const std::string& x, const std::string& y,
                         std::span<const std::string> conditioning_set);

// Two-sided p-value of a standard normal statistic |s|: 2 (1 - Phi(|s|)).
double two_sided_normal_p(double statistic);

// k-NN estimate of KL(P || Q) from samples (one row per sample):
// (d/n) sum_i log(nu_k(i) / rho_k(i)) + log(m / (n - 1)), clamped at 0.
double kl_divergence(const RowMajorMatrix& p, const RowMajorMatrix& q, std::size_t k = 5);
double kl_divergence(std::span<const double> p, std::span<const double> q, std::size_t k = 5);

// Plug-in KL between the category frequencies of two label samples, with
// add-one smoothing over the union of categories.
double categorical_kl_divergence(std::span<const std::string> p, std::span<const std::string> q);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

// Holm step-down rejections at family-wise level alpha, in input order.
std::vector<bool> holm_rejections(std::span<const double> p_values, double alpha);

}  // namespace gcm
