#include "gcm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gcm/error.hpp"
#include "gcm/random.hpp"

namespace gcm {

namespace {

constexpr double kDistanceFloor = 1e-12;
constexpr double kFisherRidge = 1e-10;

// Double-centred Euclidean distance matrix of the rows of x.
Eigen::MatrixXd centered_distances(const RowMajorMatrix& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (x.row(i) - x.row(j)).norm();
      a(i, j) = d;
      a(j, i) = d;
    }
  }
  const Eigen::VectorXd row_mean = a.rowwise().mean();
  const double grand = row_mean.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) += grand - row_mean(i) - row_mean(j);
  }
  return a;
}

RowMajorMatrix as_matrix(std::span<const double> v) {
  RowMajorMatrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

RowMajorMatrix encode_column(const Column& c) {
  if (c.is_continuous()) return as_matrix(c.reals());
  return InputEncoder::fit({&c}).encode({&c});
}

TestResult dcor_permutation_test(const RowMajorMatrix& x, const RowMajorMatrix& y,
                                 std::size_t num_permutations, std::uint64_t seed) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "independence test inputs differ in length");
  }
  if (x.rows() < 10) {
    throw Error(ErrorCode::kInsufficientRows, "independence test needs at least 10 samples");
  }
  TestResult result;
  result.method = "distance_correlation";
  result.num_permutations = num_permutations;
  const Eigen::MatrixXd a = centered_distances(x);
  const Eigen::MatrixXd b = centered_distances(y);
  const double var_x = a.cwiseProduct(a).mean();
  const double var_y = b.cwiseProduct(b).mean();
  if (var_x <= 0.0 || var_y <= 0.0) {
    result.statistic = 0.0;
    result.p_value = 1.0;
    return result;
  }
  const double denom = std::sqrt(var_x * var_y);
  const double observed_cov = a.cwiseProduct(b).mean();
  result.statistic = std::sqrt(std::clamp(observed_cov / denom, 0.0, 1.0));

  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::size_t at_least = 0;
  for (std::size_t bi = 0; bi < num_permutations; ++bi) {
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(bi)));
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    double cov = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index pi = perm[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < n; ++j) cov += a(j, i) * b(perm[static_cast<std::size_t>(j)], pi);
    }
    cov /= static_cast<double>(n) * static_cast<double>(n);
    if (std::sqrt(std::clamp(cov / denom, 0.0, 1.0)) >= result.statistic) ++at_least;
  }
  result.p_value = static_cast<double>(1 + at_least) / static_cast<double>(num_permutations + 1);
  return result;
}

}  // namespace

double distance_correlation(const RowMajorMatrix& x, const RowMajorMatrix& y) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "distance correlation inputs differ in length");
  }
  const Eigen::MatrixXd a = centered_distances(x);
  const Eigen::MatrixXd b = centered_distances(y);
  const double var_x = a.cwiseProduct(a).mean();
  const double var_y = b.cwiseProduct(b).mean();
  if (var_x <= 0.0 || var_y <= 0.0) return 0.0;
  return std::sqrt(std::clamp(a.cwiseProduct(b).mean() / std::sqrt(var_x * var_y), 0.0, 1.0));
}

TestResult pairwise_independence_test(const Column& x, const Column& y,
                                      std::size_t num_permutations, std::uint64_t seed) {
  return dcor_permutation_test(encode_column(x), encode_column(y), num_permutations, seed);
}

TestResult pairwise_independence_test(std::span<const double> x, std::span<const double> y,
                                      std::size_t num_permutations, std::uint64_t seed) {
  return dcor_permutation_test(as_matrix(x), as_matrix(y), num_permutations, seed);
}

// ---------------------------------------------------------------------------
// Fisher z

double two_sided_normal_p(double statistic) {
  return std::clamp(std::erfc(std::abs(statistic) / std::sqrt(2.0)), 0.0, 1.0);
}

FisherZTest::FisherZTest(const Dataset& data) : names_(data.column_names()), num_rows_(data.num_rows()) {
  const auto p = static_cast<Eigen::Index>(data.num_columns());
  const auto n = static_cast<Eigen::Index>(num_rows_);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    const Column& col = data.column(static_cast<std::size_t>(c));
    if (!col.is_continuous()) {
      throw Error(ErrorCode::kTypeMismatch,
                  "Fisher-z test needs continuous columns; '" + col.name + "' is categorical");
    }
    x.col(c) = Eigen::Map<const Eigen::VectorXd>(col.reals().data(), n);
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::MatrixXd cov = x.transpose() * x;
  correlation_ = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double denom = std::sqrt(cov(i, i) * cov(j, j));
      const double r = denom > 0.0 ? std::clamp(cov(i, j) / denom, -1.0, 1.0) : 0.0;
      correlation_(i, j) = r;
      correlation_(j, i) = r;
    }
  }
}

std::size_t FisherZTest::index_of(std::string_view column) const {
  const auto it = std::find(names_.begin(), names_.end(), column);
  if (it == names_.end()) {
    throw Error(ErrorCode::kUnknownColumn, "unknown column '" + std::string(column) + "'");
  }
  return static_cast<std::size_t>(it - names_.begin());
}

double FisherZTest::partial_correlation(std::size_t x, std::size_t y,
                                        std::span<const std::size_t> z) const {
  // Canonical order makes the result symmetric in (x, y) bit for bit.
  if (y < x) std::swap(x, y);
  std::vector<std::size_t> idx{x, y};
  std::vector<std::size_t> zs(z.begin(), z.end());
  std::sort(zs.begin(), zs.end());
  idx.insert(idx.end(), zs.begin(), zs.end());
  if (zs.empty()) return correlation_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));

  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      sub(i, j) = correlation_(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]),
                               static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
    sub.diagonal().array() += kFisherRidge;
    llt.compute(sub);
  }
  const Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(k, k));
  const double denom = std::sqrt(precision(0, 0) * precision(1, 1));
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(-precision(0, 1) / denom, -1.0, 1.0);
}

TestResult FisherZTest::test(std::size_t x, std::size_t y, std::span<const std::size_t> z) const {
  const std::size_t dof_rows = z.size() + 3;
  if (num_rows_ <= dof_rows) {
    throw Error(ErrorCode::kInsufficientRows, "Fisher-z test needs more than " +
                                                  std::to_string(dof_rows) + " rows");
  }
  const double r = std::clamp(partial_correlation(x, y, z), -1.0 + 1e-12, 1.0 - 1e-12);
  const double fisher = 0.5 * std::log((1.0 + r) / (1.0 - r));
  TestResult result;
  result.method = "fisher_z";
  result.conditioning_set_size = z.size();
  result.statistic = std::sqrt(static_cast<double>(num_rows_ - dof_rows)) * std::abs(fisher);
  result.p_value = two_sided_normal_p(result.statistic);
  return result;
}

TestResult fisher_z_test(const Dataset& data, const std::string& x, const std::string& y,
                         std::span<const std::string> conditioning_set) {
  // Dataset column order fixes the arithmetic, so swapping x and y is exact.
  const auto columns = data.column_names();
  const auto pos = [&](const std::string& c) { return std::find(columns.begin(), columns.end(), c); };
  const bool swapped = pos(y) < pos(x);
  std::vector<std::string> names{swapped ? y : x, swapped ? x : y};
  names.insert(names.end(), conditioning_set.begin(), conditioning_set.end());
  const FisherZTest tester(data.select(names));
  std::vector<std::size_t> z(conditioning_set.size());
  std::iota(z.begin(), z.end(), 2);
  return tester.test(0, 1, z);
}

// ---------------------------------------------------------------------------
// KL divergence

namespace {

double kl_from_distances(std::size_t d, std::size_t n, std::size_t m, std::span<const double> rho,
                         std::span<const double> nu) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += std::log(std::max(nu[i], kDistanceFloor) / std::max(rho[i], kDistanceFloor));
  }
  const double estimate = static_cast<double>(d) / static_cast<double>(n) * sum +
                          std::log(static_cast<double>(m) / static_cast<double>(n - 1));
  return std::max(0.0, estimate);
}

void check_kl_sizes(std::size_t n, std::size_t m, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  if (n < k + 1 || m < k + 1) {
    throw Error(ErrorCode::kInsufficientRows, "KL estimation needs at least k+1 samples per set");
  }
}

// k-th smallest |v - x| over sorted `values`, skipping position `skip`
// (pass values.size() to skip nothing). `pos` is where x sits in the order.
double kth_distance_sorted(std::span<const double> values, std::size_t pos, double x,
                           std::size_t k, std::size_t skip) {
  std::ptrdiff_t left = static_cast<std::ptrdiff_t>(pos) - 1;
  std::size_t right = pos;
  double dist = 0.0;
  for (std::size_t found = 0; found < k;) {
    if (left >= 0 && static_cast<std::size_t>(left) == skip) --left;
    if (right == skip) ++right;
    const bool has_left = left >= 0;
    const bool has_right = right < values.size();
    if (!has_left && !has_right) break;
    const double dl = has_left ? x - values[static_cast<std::size_t>(left)] : INFINITY;
    const double dr = has_right ? values[right] - x : INFINITY;
    if (dl <= dr) {
      dist = dl;
      --left;
    } else {
      dist = dr;
      ++right;
    }
    ++found;
  }
  return dist;
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q, std::size_t k) {
  const std::size_t n = p.size();
  const std::size_t m = q.size();
  check_kl_sizes(n, m, k);
  std::vector<double> ps(p.begin(), p.end());
  std::vector<double> qs(q.begin(), q.end());
  std::sort(ps.begin(), ps.end());
  std::sort(qs.begin(), qs.end());
  std::vector<double> rho(n);
  std::vector<double> nu(n);
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = kth_distance_sorted(ps, i, ps[i], k, i);
    const auto pos = static_cast<std::size_t>(std::lower_bound(qs.begin(), qs.end(), ps[i]) - qs.begin());
    nu[i] = kth_distance_sorted(qs, pos, ps[i], k, qs.size());
  }
  return kl_from_distances(1, n, m, rho, nu);
}

double kl_divergence(const RowMajorMatrix& p, const RowMajorMatrix& q, std::size_t k) {
  if (p.cols() != q.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "KL sample sets differ in dimension");
  }
  const auto n = static_cast<std::size_t>(p.rows());
  const auto m = static_cast<std::size_t>(q.rows());
  check_kl_sizes(n, m, k);
  if (p.cols() == 1) {
    return kl_divergence(std::span<const double>(p.data(), n), std::span<const double>(q.data(), m), k);
  }
  std::vector<double> rho(n);
  std::vector<double> nu(n);
  std::vector<double> scratch;
  auto kth = [&](const RowMajorMatrix& set, std::size_t i, bool skip_self) {
    scratch.clear();
    for (Eigen::Index j = 0; j < set.rows(); ++j) {
      if (skip_self && static_cast<std::size_t>(j) == i) continue;
      scratch.push_back((set.row(j) - p.row(static_cast<Eigen::Index>(i))).squaredNorm());
    }
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end());
    return std::sqrt(scratch[k - 1]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = kth(p, i, true);
    nu[i] = kth(q, i, false);
  }
  return kl_from_distances(static_cast<std::size_t>(p.cols()), n, m, rho, nu);
}

double categorical_kl_divergence(std::span<const std::string> p, std::span<const std::string> q) {
  if (p.empty() || q.empty()) throw Error(ErrorCode::kEmptyInput, "KL needs non-empty samples");
  std::map<std::string, std::pair<double, double>> counts;
  for (const auto& s : p) counts[s].first += 1.0;
  for (const auto& s : q) counts[s].second += 1.0;
  const double k = static_cast<double>(counts.size());
  const double np = static_cast<double>(p.size()) + k;
  const double nq = static_cast<double>(q.size()) + k;
  double kl = 0.0;
  for (const auto& [label, c] : counts) {
    const double pp = (c.first + 1.0) / np;
    const double qq = (c.second + 1.0) / nq;
    kl += pp * std::log(pp / qq);
  }
  return std::max(0.0, kl);
}

// ---------------------------------------------------------------------------

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptyInput, "KS statistic needs non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0;
  std::size_t j = 0;
  double best = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    const double diff = std::abs(static_cast<double>(i) / static_cast<double>(x.size()) -
                                 static_cast<double>(j) / static_cast<double>(y.size()));
    best = std::max(best, diff);
  }
  return best;
}

std::vector<bool> holm_rejections(std::span<const double> p_values, double alpha) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<bool> reject(m, false);
  for (std::size_t rank = 0; rank < m; ++rank) {
    if (p_values[order[rank]] > alpha / static_cast<double>(m - rank)) break;
    reject[order[rank]] = true;
  }
  return reject;
}

}  // namespace gcm
