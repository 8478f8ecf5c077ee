#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "gcm/error.hpp"
#include "gcm/stats.hpp"
#include "support.hpp"

namespace gcm {
namespace {

using testing::as_matrix;
using testing::normal_sample;
using testing::uniform_sample;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected gcm::Error";
  return ErrorCode::kIo;
}

// Textbook V-statistic distance correlation for scalar samples.
double naive_dcor(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto centred = [n](const std::vector<double>& v) {
    std::vector<std::vector<double>> d(n, std::vector<double>(n));
    std::vector<double> row(n, 0.0);
    double all = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        d[i][j] = std::abs(v[i] - v[j]);
        row[i] += d[i][j] / n;
        all += d[i][j] / (double(n) * n);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i][j] += all - row[i] - row[j];
    }
    return d;
  };
  const auto a = centred(x);
  const auto b = centred(y);
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      ab += a[i][j] * b[i][j];
      aa += a[i][j] * a[i][j];
      bb += b[i][j] * b[i][j];
    }
  }
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return std::sqrt(ab / std::sqrt(aa * bb));
}

// Residual of v after least-squares regression on the columns in z plus an
// intercept.
std::vector<double> residual(const std::vector<double>& v, const std::vector<std::vector<double>>& z) {
  const auto n = static_cast<Eigen::Index>(v.size());
  Eigen::MatrixXd a(n, static_cast<Eigen::Index>(z.size()) + 1);
  a.col(0).setOnes();
  for (std::size_t k = 0; k < z.size(); ++k) {
    a.col(static_cast<Eigen::Index>(k) + 1) = Eigen::Map<const Eigen::VectorXd>(z[k].data(), n);
  }
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
  const Eigen::VectorXd r = b - a * a.colPivHouseholderQr().solve(b);
  return {r.data(), r.data() + n};
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (a[i] - ma) * (b[i] - mb);
    aa += (a[i] - ma) * (a[i] - ma);
    bb += (b[i] - mb) * (b[i] - mb);
  }
  return ab / std::sqrt(aa * bb);
}

// Standardised vector with mean 0 and unit sum of squares.
std::vector<double> standardise(std::vector<double> v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double& x : v) {
    x -= m;
    ss += x * x;
  }
  for (double& x : v) x /= std::sqrt(ss);
  return v;
}

// Two samples whose empirical Pearson correlation is exactly r up to rounding.
std::pair<std::vector<double>, std::vector<double>> correlated_pair(std::size_t n, double r, std::uint64_t seed) {
  const auto x = standardise(normal_sample(n, 0, 1, seed));
  auto e = normal_sample(n, 0, 1, seed + 1);
  const double proj = std::inner_product(x.begin(), x.end(), e.begin(), 0.0);
  for (std::size_t i = 0; i < n; ++i) e[i] -= proj * x[i];
  e = standardise(e);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = r * x[i] + std::sqrt(1 - r * r) * e[i];
  return {x, y};
}

Dataset frame(std::vector<std::pair<std::string, std::vector<double>>> cols) {
  std::vector<Column> out;
  for (auto& [name, v] : cols) out.push_back(Column::continuous(name, std::move(v)));
  return Dataset(std::move(out));
}

TEST(DistanceCorrelation, MatchesTextbookFormula) {
  const auto x = normal_sample(60, 0, 1, 1);
  auto y = normal_sample(60, 0, 1, 2);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i] * x[i];
  EXPECT_NEAR(distance_correlation(as_matrix(x), as_matrix(y)), naive_dcor(x, y), 1e-12);
}

TEST(DistanceCorrelation, ConstantIsZero) {
  const std::vector<double> c(30, 2.0);
  EXPECT_EQ(distance_correlation(as_matrix(c), as_matrix(normal_sample(30, 0, 1, 3))), 0.0);
}

TEST(PairwiseTest, IdenticalInputsGiveSmallestP) {
  const auto x = normal_sample(100, 0, 1, 4);
  const TestResult r = pairwise_independence_test(x, x, 199, 1);
  EXPECT_NEAR(r.statistic, 1.0, 1e-9);
  EXPECT_EQ(r.p_value, 1.0 / 200.0);
  EXPECT_EQ(r.num_permutations, 199u);
  EXPECT_EQ(r.method, "distance_correlation");
}

TEST(PairwiseTest, ConstantInputGivesOne) {
  const std::vector<double> c(50, 1.0);
  EXPECT_EQ(pairwise_independence_test(c, normal_sample(50, 0, 1, 5)).p_value, 1.0);
}

TEST(PairwiseTest, CategoricalInputs) {
  std::vector<std::string> a, b;
  for (int i = 0; i < 80; ++i) {
    a.push_back(i % 3 == 0 ? "u" : "v");
    b.push_back(i % 3 == 0 ? "p" : "q");
  }
  const TestResult r = pairwise_independence_test(Column::categorical("a", a), Column::categorical("b", b));
  EXPECT_NEAR(r.statistic, 1.0, 1e-9);
  EXPECT_EQ(r.p_value, 1.0 / 200.0);
}

TEST(PairwiseTest, Errors) {
  const auto x = normal_sample(20, 0, 1, 6);
  EXPECT_EQ(code_of([&] { pairwise_independence_test(x, std::span(x).first(19)); }),
            ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code_of([&] { pairwise_independence_test(std::span(x).first(9), std::span(x).first(9)); }),
            ErrorCode::kInsufficientRows);
}

TEST(PairwiseTest, IndependentUniformsCalibrated) {
  int rejections = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto x = uniform_sample(200, 1000 + rep);
    const auto y = uniform_sample(200, 5000 + rep);
    if (pairwise_independence_test(x, y, 199, rep).p_value <= 0.05) ++rejections;
  }
  EXPECT_GE(rejections, 4);
  EXPECT_LE(rejections, 18);
}

TEST(FisherZ, FormulaOracle) {
  auto [x, y] = correlated_pair(100, 0.5, 7);
  ASSERT_NEAR(pearson(x, y), 0.5, 1e-12);
  const Dataset d = frame({{"x", x}, {"y", y}});
  const TestResult r = fisher_z_test(d, "x", "y", {});
  const double stat = std::sqrt(97.0) * 0.5 * std::log(3.0);
  EXPECT_NEAR(r.statistic, stat, 1e-9);
  EXPECT_NEAR(r.statistic, 5.41, 0.005);
  EXPECT_NEAR(r.p_value, std::erfc(stat / std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(r.p_value, 6.3e-8, 0.05e-8);
  EXPECT_EQ(r.method, "fisher_z");
}

TEST(FisherZ, ZeroCorrelation) {
  auto [x, y] = correlated_pair(50, 0.0, 8);
  const TestResult r = fisher_z_test(frame({{"x", x}, {"y", y}}), "x", "y", {});
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(FisherZ, PartialCorrelationMatchesResiduals) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 50 + rep;
    const auto z1 = normal_sample(n, 0, 1, 100 + rep);
    const auto z2 = normal_sample(n, 0, 1, 200 + rep);
    auto x = normal_sample(n, 0, 1, 300 + rep);
    auto y = normal_sample(n, 0, 1, 400 + rep);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += z1[i] - 0.5 * z2[i];
      y[i] += 2 * z1[i] + 0.3 * x[i];
    }
    const Dataset d = frame({{"x", x}, {"y", y}, {"z1", z1}, {"z2", z2}});
    const FisherZTest test(d);
    const std::size_t zs[] = {2, 3};
    const double oracle = pearson(residual(x, {z1, z2}), residual(y, {z1, z2}));
    EXPECT_NEAR(test.partial_correlation(0, 1, zs), oracle, 1e-10);
    const TestResult r = test.test(0, 1, zs);
    EXPECT_EQ(r.conditioning_set_size, 2u);
    EXPECT_NEAR(r.statistic, std::sqrt(n - 5.0) * std::abs(std::atanh(oracle)), 1e-8);
  }
}

TEST(FisherZ, ChainIndependenceGivenMiddle) {
  int accepted = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto x = normal_sample(2000, 0, 1, 700 + rep);
    auto z = normal_sample(2000, 0, 1, 800 + rep);
    auto y = normal_sample(2000, 0, 1, 900 + rep);
    for (std::size_t i = 0; i < 2000; ++i) {
      z[i] += x[i];
      y[i] += z[i];
    }
    const std::string given[] = {"z"};
    if (fisher_z_test(frame({{"x", x}, {"z", z}, {"y", y}}), "x", "y", given).p_value > 0.05) ++accepted;
  }
  EXPECT_GE(accepted, 90);
}

TEST(FisherZ, SingularAndErrors) {
  const auto x = normal_sample(40, 0, 1, 10);
  const Dataset dup = frame({{"x", x}, {"y", normal_sample(40, 0, 1, 11)}, {"x2", x}});
  const std::string given[] = {"x2"};
  const TestResult r = fisher_z_test(dup, "x", "y", given);
  EXPECT_TRUE(std::isfinite(r.p_value));
  EXPECT_GE(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
  const Dataset mixed({Column::continuous("x", x), Column::categorical("c", std::vector<std::string>(40, "a"))});
  EXPECT_EQ(code_of([&] { fisher_z_test(mixed, "x", "c", {}); }), ErrorCode::kTypeMismatch);
  const Dataset tiny = frame({{"x", {1, 2, 3}}, {"y", {1, 3, 2}}});
  EXPECT_EQ(code_of([&] { fisher_z_test(tiny, "x", "y", {}); }), ErrorCode::kInsufficientRows);
  EXPECT_EQ(code_of([&] { fisher_z_test(dup, "x", "q", {}); }), ErrorCode::kUnknownColumn);
}

TEST(Kl, SelfDivergenceNearZero) {
  const auto p = normal_sample(2000, 0, 1, 12);
  const double kl = kl_divergence(p, p);
  EXPECT_GE(kl, 0.0);
  EXPECT_LE(kl, 0.05);
}

TEST(Kl, ShiftedGaussian) {
  EXPECT_NEAR(kl_divergence(normal_sample(5000, 0, 1, 13), normal_sample(5000, 1, 1, 14)), 0.5, 0.1);
}

TEST(Kl, ScaledGaussian) {
  const double analytic = 0.5 * (0.25 - 1.0 + std::log(4.0));
  EXPECT_NEAR(kl_divergence(normal_sample(5000, 0, 1, 15), normal_sample(5000, 0, 2, 16)), analytic, 0.1);
}

TEST(Kl, Errors) {
  const auto p = normal_sample(10, 0, 1, 17);
  EXPECT_EQ(code_of([&] { kl_divergence(std::span(p).first(5), p, 5); }), ErrorCode::kInsufficientRows);
  RowMajorMatrix two(10, 2);
  two.setRandom();
  EXPECT_EQ(code_of([&] { kl_divergence(as_matrix(p), two, 3); }), ErrorCode::kDimensionMismatch);
}

TEST(Kl, Categorical) {
  const std::vector<std::string> a{"x", "x", "y", "y"};
  EXPECT_EQ(categorical_kl_divergence(a, a), 0.0);
  const std::vector<std::string> b{"x", "x", "x", "y"};
  // Add-one smoothing: p = (3/6, 3/6), q = (4/6, 2/6).
  const double oracle = 0.5 * std::log(0.5 / (4.0 / 6)) + 0.5 * std::log(0.5 / (2.0 / 6));
  EXPECT_NEAR(categorical_kl_divergence(a, b), oracle, 1e-12);
}

TEST(Ks, SmallExample) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{3, 4, 5, 6};
  EXPECT_DOUBLE_EQ(ks_statistic(a, b), 0.5);
  EXPECT_EQ(ks_statistic(a, a), 0.0);
  const std::vector<double> far{10, 11};
  EXPECT_EQ(ks_statistic(a, far), 1.0);
}

TEST(Holm, StepDown) {
  const std::vector<double> p{0.01, 0.04, 0.03, 0.005};
  // Sorted: 0.005 <= .05/4, 0.01 <= .05/3, 0.03 > .05/2 stops.
  EXPECT_EQ(holm_rejections(p, 0.05), (std::vector<bool>{true, false, false, true}));
  EXPECT_TRUE(holm_rejections(std::vector<double>{}, 0.05).empty());
}

TEST(StatsProperties, PermutationPValuesValid) {
  int at01 = 0;
  int at05 = 0;
  std::mt19937_64 rng(18);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 30 + rep % 40;
    const auto x = normal_sample(n, 0, 1, rng());
    const auto y = uniform_sample(n, rng());
    const double p = pairwise_independence_test(x, y, 199, rep).p_value;
    ASSERT_GE(p, 0.0);
    ASSERT_LE(p, 1.0);
    at01 += p <= 0.01;
    at05 += p <= 0.05;
  }
  EXPECT_LE(at01 / 300.0, 0.01 + 0.03);
  EXPECT_LE(at05 / 300.0, 0.05 + 0.03);
}

TEST(StatsProperties, DistanceCorrelationRange) {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 10 + rep;
    const auto x = normal_sample(n, 0, 1 + rep, rng());
    auto y = normal_sample(n, 0, 1, rng());
    for (std::size_t i = 0; i < n; ++i) y[i] += (rep % 5) * std::sin(x[i]);
    EXPECT_NEAR(distance_correlation(as_matrix(x), as_matrix(x)), 1.0, 1e-9);
    const double d = distance_correlation(as_matrix(x), as_matrix(y));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(StatsProperties, FisherZSymmetric) {
  std::mt19937_64 rng(20);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 20 + rep;
    auto a = normal_sample(n, 0, 1, rng());
    auto b = normal_sample(n, 0, 1, rng());
    const auto c = normal_sample(n, 0, 1, rng());
    for (std::size_t i = 0; i < n; ++i) {
      a[i] += 0.4 * c[i];
      b[i] += 0.1 * rep * a[i] - c[i];
    }
    const Dataset d = frame({{"a", a}, {"b", b}, {"c", c}});
    const std::string given[] = {"c"};
    EXPECT_EQ(fisher_z_test(d, "a", "b", given).p_value, fisher_z_test(d, "b", "a", given).p_value);
    EXPECT_EQ(fisher_z_test(d, "a", "b", {}).p_value, fisher_z_test(d, "b", "a", {}).p_value);
  }
}

TEST(StatsProperties, KlOfResamplesVanishes) {
  std::mt19937_64 rng(21);
  for (std::size_t d = 1; d <= 3; ++d) {
    RowMajorMatrix p(5000, static_cast<Eigen::Index>(d));
    RowMajorMatrix q(5000, static_cast<Eigen::Index>(d));
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p.data()[i] = normal(rng);
      q.data()[i] = normal(rng);
    }
    EXPECT_LE(std::abs(kl_divergence(p, q)), 0.1) << "d = " << d;
  }
}

}  // namespace
}  // namespace gcm
