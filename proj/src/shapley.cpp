#include "gcm/shapley.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "gcm/error.hpp"
#include "gcm/random.hpp"

namespace gcm {

namespace {

double checked(double value, Coalition s) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kNonFinite,
                "set function returned a non-finite value for coalition " + std::to_string(s));
  }
  return value;
}

std::size_t thread_count(const SetFunction& game, const ShapleyConfig& config) {
  if (game.serial) return 1;
  std::size_t t = config.num_threads != 0 ? config.num_threads : std::thread::hardware_concurrency();
  return std::max<std::size_t>(1, t);
}

// Evaluates every coalition; table[s] = v(s).
std::vector<double> evaluate_all(const SetFunction& game, std::size_t threads) {
  const std::size_t total = std::size_t{1} << game.num_players;
  std::vector<double> table(total);
  if (threads <= 1) {
    for (Coalition s = 0; s < total; ++s) table[s] = checked(game.evaluate(s), s);
    return table;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, total); ++t) {
    pool.emplace_back([&] {
      try {
        for (std::size_t s = next++; s < total; s = next++) {
          table[s] = checked(game.evaluate(s), s);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return table;
}

ShapleyEstimate exact_shapley(const SetFunction& game, const ShapleyConfig& config) {
  const std::size_t n = game.num_players;
  if (n > kMaxExactPlayers) {
    throw Error(ErrorCode::kArityTooLarge, "exact Shapley values support at most " +
                                               std::to_string(kMaxExactPlayers) + " players, got " +
                                               std::to_string(n));
  }
  const std::vector<double> table = evaluate_all(game, thread_count(game, config));

  // weight[s] = s!(n-s-1)!/n!
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = std::exp(std::lgamma(s + 1.0) + std::lgamma(static_cast<double>(n - s)) -
                         std::lgamma(n + 1.0));
  }

  ShapleyEstimate out;
  out.values.assign(n, 0.0);
  out.standard_errors.assign(n, 0.0);
  out.evaluations = table.size();
  // Contributions are grouped by coalition size and summed in sorted order,
  // so interchangeable players get bit-identical values.
  std::vector<std::vector<double>> by_size(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& b : by_size) b.clear();
    const Coalition bit = Coalition{1} << i;
    for (Coalition s = 0; s < table.size(); ++s) {
      if (s & bit) continue;
      by_size[static_cast<std::size_t>(std::popcount(s))].push_back(table[s | bit] - table[s]);
    }
    double phi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::sort(by_size[k].begin(), by_size[k].end());
      double sum = 0.0;
      for (double c : by_size[k]) sum += c;
      phi += weight[k] * sum;
    }
    out.values[i] = phi;
  }
  return out;
}

ShapleyEstimate permutation_shapley(const SetFunction& game, const ShapleyConfig& config) {
  const std::size_t n = game.num_players;
  if (n > 64) throw Error(ErrorCode::kArityTooLarge, "at most 64 players are supported");
  if (config.num_permutations == 0) {
    throw Error(ErrorCode::kInvalidArgument, "num_permutations must be positive");
  }
  std::unordered_map<Coalition, double> memo;
  std::size_t evaluations = 0;
  auto value = [&](Coalition s) {
    if (!game.stochastic) {
      const auto it = memo.find(s);
      if (it != memo.end()) return it->second;
    }
    const double v = checked(game.evaluate(s), s);
    ++evaluations;
    if (!game.stochastic) memo.emplace(s, v);
    return v;
  };

  std::vector<double> sum(n, 0.0);
  std::vector<double> sum_sq(n, 0.0);
  std::vector<std::size_t> order(n);
  const double empty_value = value(0);
  for (std::size_t p = 0; p < config.num_permutations; ++p) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(p)));
    std::shuffle(order.begin(), order.end(), rng.engine());
    Coalition s = 0;
    double previous = game.stochastic ? value(0) : empty_value;
    for (std::size_t player : order) {
      s |= Coalition{1} << player;
      const double current = value(s);
      const double contribution = current - previous;
      sum[player] += contribution;
      sum_sq[player] += contribution * contribution;
      previous = current;
    }
  }
  ShapleyEstimate out;
  const auto m = static_cast<double>(config.num_permutations);
  out.values.resize(n);
  out.standard_errors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = sum[i] / m;
    const double var = m > 1 ? std::max(0.0, (sum_sq[i] - m * out.values[i] * out.values[i]) / (m - 1))
                             : 0.0;
    out.standard_errors[i] = std::sqrt(var / m);
  }
  out.evaluations = evaluations;
  return out;
}

}  // namespace

ShapleyEstimate estimate_shapley(const SetFunction& game, const ShapleyConfig& config) {
  if (!game.evaluate) throw Error(ErrorCode::kInvalidArgument, "set function has no evaluator");
  if (game.num_players == 0) return {};
  return config.method == ShapleyMethod::kExact ? exact_shapley(game, config)
                                                : permutation_shapley(game, config);
}

}  // namespace gcm
