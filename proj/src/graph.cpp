#include "gcm/graph.hpp"

#include <algorithm>
#include <cctype>
#include <queue>
#include <set>

#include "json.hpp"

#include "gcm/error.hpp"

namespace gcm {

CausalGraph::CausalGraph(std::vector<std::string> nodes,
                         std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].empty()) {
      throw Error(ErrorCode::kParse, "empty node name");
    }
    if (!index_.emplace(nodes_[i], i).second) {
      throw Error(ErrorCode::kDuplicateNode, "duplicate node '" + nodes_[i] + "'");
    }
  }
  parents_.assign(nodes_.size(), {});
  children_.assign(nodes_.size(), {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [from, to] : edges_) {
    const auto f = index_.find(from);
    const auto t = index_.find(to);
    if (f == index_.end() || t == index_.end()) {
      throw Error(ErrorCode::kUnknownNode,
                  "edge " + from + " -> " + to + " references an undeclared node");
    }
    if (f->second == t->second) {
      throw Error(ErrorCode::kSelfLoop, "self-loop on '" + from + "'");
    }
    if (!seen.emplace(f->second, t->second).second) {
      throw Error(ErrorCode::kDuplicateEdge,
                  "duplicate edge " + from + " -> " + to);
    }
    parents_[t->second].push_back(f->second);
    children_[f->second].push_back(t->second);
  }
  for (auto& p : parents_) std::sort(p.begin(), p.end());
  for (auto& c : children_) std::sort(c.begin(), c.end());

  // Kahn's algorithm; the ready set is a min-heap on declaration index.
  std::vector<std::size_t> in_degree(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) in_degree[i] = parents_[i].size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (in_degree[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    const std::size_t v = ready.top();
    ready.pop();
    topo_.push_back(v);
    for (std::size_t c : children_[v]) {
      if (--in_degree[c] == 0) ready.push(c);
    }
  }
  if (topo_.size() != nodes_.size()) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (in_degree[i] > 0) {
        throw Error(ErrorCode::kCycle, "graph has a cycle through '" + nodes_[i] + "'");
      }
    }
  }
}

bool CausalGraph::has_node(std::string_view name) const {
  return index_.find(std::string(name)) != index_.end();
}

bool CausalGraph::has_edge(std::string_view parent, std::string_view child) const {
  if (!has_node(parent) || !has_node(child)) return false;
  const auto& p = parents_[index_of(child)];
  return std::binary_search(p.begin(), p.end(), index_of(parent));
}

std::size_t CausalGraph::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw Error(ErrorCode::kUnknownNode, "unknown node '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<std::string> CausalGraph::names_of(const std::vector<bool>& mask) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(nodes_[i]);
  }
  return out;
}

std::vector<std::string> CausalGraph::parents(std::string_view node) const {
  std::vector<std::string> out;
  for (std::size_t p : parents_[index_of(node)]) out.push_back(nodes_[p]);
  return out;
}

std::vector<std::string> CausalGraph::children(std::string_view node) const {
  std::vector<std::string> out;
  for (std::size_t c : children_[index_of(node)]) out.push_back(nodes_[c]);
  return out;
}

std::vector<bool> CausalGraph::ancestor_mask(std::size_t node) const {
  std::vector<bool> mask(nodes_.size(), false);
  std::vector<std::size_t> stack(parents_[node].begin(), parents_[node].end());
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (mask[v]) continue;
    mask[v] = true;
    for (std::size_t p : parents_[v]) stack.push_back(p);
  }
  return mask;
}

std::vector<bool> CausalGraph::descendant_mask(std::size_t node) const {
  std::vector<bool> mask(nodes_.size(), false);
  std::vector<std::size_t> stack(children_[node].begin(), children_[node].end());
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (mask[v]) continue;
    mask[v] = true;
    for (std::size_t c : children_[v]) stack.push_back(c);
  }
  return mask;
}

std::vector<std::string> CausalGraph::ancestors(std::string_view node) const {
  return names_of(ancestor_mask(index_of(node)));
}

std::vector<std::string> CausalGraph::descendants(std::string_view node) const {
  return names_of(descendant_mask(index_of(node)));
}

std::vector<std::string> CausalGraph::non_descendants(std::string_view node) const {
  const std::size_t v = index_of(node);
  std::vector<bool> mask = descendant_mask(v);
  mask.flip();
  mask[v] = false;
  return names_of(mask);
}

std::vector<std::string> CausalGraph::topological_order() const {
  std::vector<std::string> out;
  out.reserve(topo_.size());
  for (std::size_t v : topo_) out.push_back(nodes_[v]);
  return out;
}

namespace {

CausalGraph parse_json_graph(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("malformed graph JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw Error(ErrorCode::kParse, "graph JSON needs a \"nodes\" array");
  }
  std::vector<std::string> nodes;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_string()) throw Error(ErrorCode::kParse, "node names must be strings");
    nodes.push_back(n.get<std::string>());
  }
  std::vector<Edge> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw Error(ErrorCode::kParse, "\"edges\" must be an array");
    for (const auto& e : doc["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
        throw Error(ErrorCode::kParse, "each edge must be a [parent, child] pair of strings");
      }
      edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  }
  return CausalGraph(std::move(nodes), std::move(edges));
}

class DotLexer {
 public:
  explicit DotLexer(std::string_view text) : text_(text) {}

  // Returns "" at end of input. Tokens: identifiers, "{", "}", ";", "->".
  std::string next() {
    skip_space();
    if (pos_ >= text_.size()) return {};
    const char c = text_[pos_];
    if (c == '{' || c == '}' || c == ';') {
      ++pos_;
      return std::string(1, c);
    }
    if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
      pos_ += 2;
      return "->";
    }
    if (is_ident_char(c)) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      return std::string(text_.substr(start, pos_ - start));
    }
    throw Error(ErrorCode::kParse, std::string("unexpected character '") + c +
                                       "' in DOT graph");
  }

  static bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

CausalGraph parse_dot_graph(std::string_view text) {
  DotLexer lex(text);
  std::string tok = lex.next();
  if (tok != "digraph") throw Error(ErrorCode::kParse, "DOT graph must start with 'digraph'");
  tok = lex.next();
  if (tok != "{") {
    if (tok.empty() || !DotLexer::is_ident_char(tok[0])) {
      throw Error(ErrorCode::kParse, "expected '{' after 'digraph'");
    }
    tok = lex.next();  // optional graph name
    if (tok != "{") throw Error(ErrorCode::kParse, "expected '{' after graph name");
  }

  std::vector<std::string> nodes;
  std::set<std::string> declared;
  std::vector<Edge> edges;
  auto declare = [&](const std::string& name) {
    if (declared.insert(name).second) nodes.push_back(name);
  };

  tok = lex.next();
  while (tok != "}") {
    if (tok.empty()) throw Error(ErrorCode::kParse, "unterminated DOT graph");
    if (tok == ";") {
      tok = lex.next();
      continue;
    }
    if (!DotLexer::is_ident_char(tok[0])) {
      throw Error(ErrorCode::kParse, "expected identifier, got '" + tok + "'");
    }
    // Statement: ident (-> ident)*
    std::string prev = tok;
    declare(prev);
    tok = lex.next();
    while (tok == "->") {
      std::string next = lex.next();
      if (next.empty() || !DotLexer::is_ident_char(next[0])) {
        throw Error(ErrorCode::kParse, "expected identifier after '->'");
      }
      declare(next);
      edges.emplace_back(prev, next);
      prev = next;
      tok = lex.next();
    }
    if (tok != ";" && tok != "}" && !(DotLexer::is_ident_char(tok[0]))) {
      throw Error(ErrorCode::kParse, "unexpected token '" + tok + "'");
    }
  }
  if (!lex.next().empty()) throw Error(ErrorCode::kParse, "trailing content after '}'");
  return CausalGraph(std::move(nodes), std::move(edges));
}

}  // namespace

CausalGraph parse_graph(std::string_view text, GraphFormat format) {
  return format == GraphFormat::kJson ? parse_json_graph(text) : parse_dot_graph(text);
}

std::string serialize_graph(const CausalGraph& graph, GraphFormat format) {
  if (format == GraphFormat::kJson) {
    nlohmann::ordered_json doc;
    doc["nodes"] = graph.nodes();
    doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& [from, to] : graph.edges()) {
      doc["edges"].push_back({from, to});
    }
    return doc.dump();
  }
  std::string out = "digraph {\n";
  for (const auto& n : graph.nodes()) out += "  " + n + ";\n";
  for (const auto& [from, to] : graph.edges()) out += "  " + from + " -> " + to + ";\n";
  out += "}\n";
  return out;
}

GraphFormat graph_format_for_path(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.substr(path.size() - suffix.size()) == suffix;
  };
  return (ends_with(".dot") || ends_with(".gv")) ? GraphFormat::kDot : GraphFormat::kJson;
}

}  // namespace gcm
