#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace gcm {

// Players are 0..num_players-1; a coalition is a bitmask over them.
using Coalition = std::uint64_t;

struct SetFunction {
  std::size_t num_players = 0;
  std::function<double(Coalition)> evaluate;
  // When false the evaluator must be safe to call from several threads.
  bool serial = false;
  // Stochastic evaluators are re-evaluated on every permutation occurrence
  // instead of being memoised.
  bool stochastic = false;
};

enum class ShapleyMethod { kExact, kPermutation };

struct ShapleyConfig {
  ShapleyMethod method = ShapleyMethod::kExact;
  std::size_t num_permutations = 1000;
  std::uint64_t seed = 0;
  std::size_t num_threads = 0;  // 0: hardware concurrency
};

inline constexpr std::size_t kMaxExactPlayers = 20;

struct ShapleyEstimate {
  std::vector<double> values;
  // Zero for the exact method.
  std::vector<double> standard_errors;
  std::size_t evaluations = 0;
};

// Exact: phi_i = sum_{S without i} |S|!(n-|S|-1)!/n! (v(S+i) - v(S)).
// Permutation: mean marginal contribution over seeded random orderings.
ShapleyEstimate estimate_shapley(const SetFunction& game, const ShapleyConfig& config);

}  // namespace gcm
