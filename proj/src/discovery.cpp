#include "gcm/discovery.hpp"

#include <algorithm>
#include <sstream>

#include "gcm/error.hpp"
#include "gcm/stats.hpp"

namespace gcm {

std::vector<std::pair<std::size_t, std::size_t>> Skeleton::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      if (adjacent[i][j]) out.emplace_back(i, j);
    }
  }
  return out;
}

const std::vector<std::size_t>* Skeleton::sepset(std::size_t i, std::size_t j) const {
  const auto it = sepsets.find({std::min(i, j), std::max(i, j)});
  return it == sepsets.end() ? nullptr : &it->second;
}

namespace {

// Calls `visit` on every size-`size` subset of `pool` in lexicographic order
// until it returns true.
template <typename Visit>
bool for_each_subset(const std::vector<std::size_t>& pool, std::size_t size, Visit&& visit) {
  if (size > pool.size()) return false;
  std::vector<std::size_t> pick(size);
  for (std::size_t i = 0; i < size; ++i) pick[i] = i;
  std::vector<std::size_t> subset(size);
  while (true) {
    for (std::size_t i = 0; i < size; ++i) subset[i] = pool[pick[i]];
    if (visit(subset)) return true;
    std::size_t i = size;
    while (i > 0 && pick[i - 1] == pool.size() - size + i - 1) --i;
    if (i == 0) return false;
    ++pick[i - 1];
    for (std::size_t j = i; j < size; ++j) pick[j] = pick[j - 1] + 1;
  }
}

std::vector<std::size_t> neighbours_except(const std::vector<std::vector<bool>>& adj, std::size_t x,
                                           std::size_t y) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < adj.size(); ++v) {
    if (v != y && adj[x][v]) out.push_back(v);
  }
  return out;
}

}  // namespace

Skeleton pc_skeleton(const Dataset& data, double alpha, std::size_t max_conditioning_size) {
  if (data.num_rows() < kMinDiscoveryRows) {
    throw Error(ErrorCode::kInsufficientRows, "PC needs at least " + std::to_string(kMinDiscoveryRows) +
                                                  " rows, got " + std::to_string(data.num_rows()));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  const FisherZTest tester(data);
  const std::size_t p = data.num_columns();

  Skeleton sk;
  sk.nodes = data.column_names();
  sk.adjacent.assign(p, std::vector<bool>(p, true));
  for (std::size_t i = 0; i < p; ++i) sk.adjacent[i][i] = false;

  for (std::size_t level = 0; level <= max_conditioning_size; ++level) {
    if (data.num_rows() <= level + 3) break;
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>> removals;
    bool any_testable = false;
    for (std::size_t x = 0; x < p; ++x) {
      for (std::size_t y = x + 1; y < p; ++y) {
        if (!sk.adjacent[x][y]) continue;
        std::vector<std::size_t> found;
        auto separates = [&](const std::vector<std::size_t>& z) {
          if (tester.test(x, y, z).p_value > alpha) {
            found = z;
            return true;
          }
          return false;
        };
        const auto adj_x = neighbours_except(sk.adjacent, x, y);
        const auto adj_y = neighbours_except(sk.adjacent, y, x);
        if (adj_x.size() >= level || adj_y.size() >= level) any_testable = true;
        if (for_each_subset(adj_x, level, separates) || for_each_subset(adj_y, level, separates)) {
          removals.push_back({{x, y}, found});
        }
      }
    }
    for (const auto& [pair, z] : removals) {
      sk.adjacent[pair.first][pair.second] = false;
      sk.adjacent[pair.second][pair.first] = false;
      sk.sepsets[pair] = z;
    }
    if (!any_testable) break;
  }
  return sk;
}

namespace {

class PartialGraph {
 public:
  explicit PartialGraph(const Skeleton& sk)
      : n_(sk.nodes.size()), adjacent_(sk.adjacent), arrow_(n_, std::vector<bool>(n_, false)) {}

  std::size_t size() const { return n_; }
  bool adjacent(std::size_t a, std::size_t b) const { return adjacent_[a][b]; }
  bool directed(std::size_t a, std::size_t b) const { return arrow_[a][b]; }
  bool undirected(std::size_t a, std::size_t b) const {
    return adjacent_[a][b] && !arrow_[a][b] && !arrow_[b][a];
  }

  // Orients a - b as a -> b unless that closes a directed cycle.
  bool orient(std::size_t a, std::size_t b) {
    if (reaches(b, a)) return false;
    arrow_[a][b] = true;
    return true;
  }

 private:
  bool reaches(std::size_t from, std::size_t to) const {
    std::vector<bool> seen(n_, false);
    std::vector<std::size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      if (v == to) return true;
      for (std::size_t w = 0; w < n_; ++w) {
        if (arrow_[v][w] && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    return false;
  }

  std::size_t n_;
  std::vector<std::vector<bool>> adjacent_;
  std::vector<std::vector<bool>> arrow_;
};

bool meek_applies(const PartialGraph& g, std::size_t i, std::size_t j) {
  const std::size_t n = g.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (k == i || k == j) continue;
    // R1: k -> i - j, k and j nonadjacent.
    if (g.directed(k, i) && !g.adjacent(k, j)) return true;
    // R2: i -> k -> j.
    if (g.directed(i, k) && g.directed(k, j)) return true;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (k == i || k == j) continue;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == i || l == j || l == k) continue;
      // R3: i - k -> j and i - l -> j, k and l nonadjacent.
      if (k < l && g.undirected(i, k) && g.directed(k, j) && g.undirected(i, l) && g.directed(l, j) &&
          !g.adjacent(k, l)) {
        return true;
      }
      // R4: i - k -> l -> j, k and j nonadjacent, i and l adjacent.
      if (g.undirected(i, k) && g.directed(k, l) && g.directed(l, j) && !g.adjacent(k, j) &&
          g.adjacent(i, l)) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

Cpdag orient(const Skeleton& skeleton) {
  const std::size_t n = skeleton.nodes.size();
  PartialGraph g(skeleton);
  Cpdag out;
  out.nodes = skeleton.nodes;

  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      if (g.adjacent(x, y)) continue;
      const auto* sep = skeleton.sepset(x, y);
      for (std::size_t z = 0; z < n; ++z) {
        if (z == x || z == y || !g.adjacent(x, z) || !g.adjacent(y, z)) continue;
        if (sep != nullptr && std::find(sep->begin(), sep->end(), z) != sep->end()) continue;
        for (std::size_t a : {x, y}) {
          if (g.directed(a, z)) continue;
          if (g.directed(z, a) || !g.orient(a, z)) {
            out.conflicts.push_back(skeleton.nodes[a] + " -> " + skeleton.nodes[z]);
          }
        }
      }
    }
  }

  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || !g.undirected(i, j)) continue;
        if (meek_applies(g, i, j) && g.orient(i, j)) changed = true;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (g.directed(i, j)) out.directed.emplace_back(out.nodes[i], out.nodes[j]);
      if (i < j && g.undirected(i, j)) out.undirected.emplace_back(out.nodes[i], out.nodes[j]);
    }
  }
  return out;
}

Cpdag pc(const Dataset& data, double alpha, std::size_t max_conditioning_size) {
  return orient(pc_skeleton(data, alpha, max_conditioning_size));
}

Json to_json(const Cpdag& cpdag) {
  auto pairs = [](const std::vector<Edge>& edges) {
    Json arr = Json::array();
    for (const auto& [a, b] : edges) arr.push_back(Json::array({a, b}));
    return arr;
  };
  Json j;
  j["nodes"] = cpdag.nodes;
  j["directed"] = pairs(cpdag.directed);
  j["undirected"] = pairs(cpdag.undirected);
  j["conflicts"] = cpdag.conflicts;
  return j;
}

std::string to_dot(const Cpdag& cpdag) {
  std::ostringstream os;
  os << "digraph {\n";
  for (const auto& v : cpdag.nodes) os << "  \"" << v << "\";\n";
  for (const auto& [a, b] : cpdag.directed) os << "  \"" << a << "\" -> \"" << b << "\";\n";
  for (const auto& [a, b] : cpdag.undirected) {
    os << "  \"" << a << "\" -> \"" << b << "\" [dir=none];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace gcm
