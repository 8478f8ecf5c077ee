#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gcm/data.hpp"
#include "gcm/graph.hpp"
#include "gcm/mechanisms.hpp"

namespace gcm {

inline constexpr std::size_t kDefaultMaxConditioningSize = 3;
inline constexpr std::size_t kMinDiscoveryRows = 20;

// Undirected adjacency over the dataset's columns plus the separating set
// found for every removed pair. Pairs are keyed (i, j) with i < j.
struct Skeleton {
  std::vector<std::string> nodes;
  std::vector<std::vector<bool>> adjacent;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> sepsets;

  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  // Separating set of (i, j) in either order; nullptr if the pair is adjacent.
  const std::vector<std::size_t>* sepset(std::size_t i, std::size_t j) const;
};

// Stable PC skeleton search with the Fisher-z test. Removals found at a
// level are applied once the level completes.
Skeleton pc_skeleton(const Dataset& data, double alpha,
                     std::size_t max_conditioning_size = kDefaultMaxConditioningSize);

struct Cpdag {
  std::vector<std::string> nodes;
  std::vector<Edge> directed;
  std::vector<Edge> undirected;  // each pair once, in declaration order
  // Collider orientations that were dropped because an earlier triple had
  // already oriented the edge the other way.
  std::vector<std::string> conflicts;
};

// Orients v-structures (triples in lexicographic index order, first writer
// wins), then applies Meek rules 1-4 until nothing changes.
Cpdag orient(const Skeleton& skeleton);

Cpdag pc(const Dataset& data, double alpha,
         std::size_t max_conditioning_size = kDefaultMaxConditioningSize);

Json to_json(const Cpdag& cpdag);
std::string to_dot(const Cpdag& cpdag);

}  // namespace gcm
