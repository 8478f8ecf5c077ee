#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gcm {

using Edge = std::pair<std::string, std::string>;

enum class GraphFormat { kJson, kDot };

// A DAG over named variables. Node identity is the exact (case-sensitive)
// name; declaration order is the canonical tie-break for every traversal.
// Immutable after construction.
class CausalGraph {
 public:
  CausalGraph() = default;

  // Throws gcm::Error on self-loops, duplicate nodes/edges, edges naming
  // undeclared nodes and cycles.
  CausalGraph(std::vector<std::string> nodes, std::vector<Edge> edges);

  const std::vector<std::string>& nodes() const { return nodes_; }
  // Edges in insertion order.
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }

  bool has_node(std::string_view name) const;
  bool has_edge(std::string_view parent, std::string_view child) const;
  std::size_t index_of(std::string_view name) const;

  // Index-based views, sorted by declaration index.
  const std::vector<std::size_t>& parent_indices(std::size_t node) const {
    return parents_[node];
  }
  const std::vector<std::size_t>& child_indices(std::size_t node) const {
    return children_[node];
  }
  const std::vector<std::size_t>& topological_indices() const {
    return topo_;
  }
  bool is_root(std::size_t node) const { return parents_[node].empty(); }

  // Name-based queries. Results are ordered by declaration order.
  std::vector<std::string> parents(std::string_view node) const;
  std::vector<std::string> children(std::string_view node) const;
  std::vector<std::string> ancestors(std::string_view node) const;
  std::vector<std::string> descendants(std::string_view node) const;
  std::vector<std::string> non_descendants(std::string_view node) const;
  std::vector<std::string> topological_order() const;

  // Index masks (size() entries) for ancestors and descendants, excluding
  // the node itself.
  std::vector<bool> ancestor_mask(std::size_t node) const;
  std::vector<bool> descendant_mask(std::size_t node) const;

  friend bool operator==(const CausalGraph& a, const CausalGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<std::string> names_of(const std::vector<bool>& mask) const;

  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
};

CausalGraph parse_graph(std::string_view text, GraphFormat format);
std::string serialize_graph(const CausalGraph& graph, GraphFormat format);

// Picks the format from the file extension (".dot"/".gv" → DOT, else JSON).
GraphFormat graph_format_for_path(std::string_view path);

}  // namespace gcm
