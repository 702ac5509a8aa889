// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/dag.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>
#include <tuple>

namespace grabnas::dag {

namespace {

constexpr std::array<std::string_view, kNumOpKinds> kOpNames{
    "none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3", "input", "output", "end"};

// Source cell-node of each labeled edge, in EdgeSpec order.
constexpr std::array<std::size_t, kCellEdges> kEdgeSource{0, 0, 1, 0, 1, 2};
constexpr std::array<std::size_t, kCellEdges> kEdgeTarget{1, 2, 2, 3, 3, 3};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t parse_index(std::string_view s) {
  s = trim(s);
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError("bad node index '" + std::string(s) + "'");
  }
  return value;
}

// Kahn's algorithm with a caller-provided priority over ready nodes.
template <typename Less>
std::vector<std::size_t> kahn(const CellGraph& g, Less less) {
  const std::size_t n = g.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& [s, d] : g.edges()) {
    ++indegree[d];
    out[s].push_back(d);
  }
  auto greater = [&](std::size_t a, std::size_t b) { return less(b, a); };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> ready(greater);
  for (std::size_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push(v);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t v = ready.top();
    ready.pop();
    order.push_back(v);
    for (std::size_t w : out[v]) {
      if (--indegree[w] == 0) ready.push(w);
    }
  }
  if (order.size() != n) throw GraphError("graph contains a cycle");
  return order;
}

// Colour refinement seeded by op tag. Ranks are assigned in lexicographic order of
// (previous colour, predecessor colours, successor colours), so the final colour
// order refines the op-tag order.
std::vector<std::size_t> refine_colours(const CellGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> preds(n), succs(n);
  for (const auto& [s, d] : g.edges()) {
    preds[d].push_back(s);
    succs[s].push_back(d);
  }
  std::vector<std::size_t> colour(n);
  for (std::size_t v = 0; v < n; ++v) colour[v] = op_index(g.op(v));

  using Signature = std::tuple<std::size_t, std::vector<std::size_t>, std::vector<std::size_t>>;
  std::size_t classes = 0;
  for (std::size_t round = 0; round <= n; ++round) {
    std::vector<Signature> sigs(n);
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<std::size_t> p, s;
      for (auto u : preds[v]) p.push_back(colour[u]);
      for (auto u : succs[v]) s.push_back(colour[u]);
      std::sort(p.begin(), p.end());
      std::sort(s.begin(), s.end());
      sigs[v] = Signature{colour[v], std::move(p), std::move(s)};
    }
    std::map<Signature, std::size_t> rank;
    for (const auto& sig : sigs) rank.emplace(sig, 0);
    std::size_t next = 0;
    for (auto& [sig, r] : rank) r = next++;
    for (std::size_t v = 0; v < n; ++v) colour[v] = rank.at(sigs[v]);
    if (rank.size() == classes) break;
    classes = rank.size();
  }
  return colour;
}

}  // namespace

std::string_view op_name(OpKind op) noexcept { return kOpNames[op_index(op)]; }

OpKind op_from_name(std::string_view name) {
  name = trim(name);
  for (std::size_t i = 0; i < kNumOpKinds; ++i) {
    if (kOpNames[i] == name) return static_cast<OpKind>(i);
  }
  throw ParseError("unknown operation '" + std::string(name) + "'");
}

CellGraph::CellGraph(std::vector<OpKind> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

std::vector<std::size_t> CellGraph::predecessors(std::size_t v) const {
  std::vector<std::size_t> result;
  for (const auto& [s, d] : edges_) {
    if (d == v) result.push_back(s);
  }
  return result;
}

std::vector<std::size_t> CellGraph::successors(std::size_t v) const {
  std::vector<std::size_t> result;
  for (const auto& [s, d] : edges_) {
    if (s == v) result.push_back(d);
  }
  return result;
}

bool CellGraph::has_edge(std::size_t src, std::size_t dst) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{src, dst});
}

void CellGraph::validate(std::size_t max_nodes) const {
  const std::size_t n = nodes_.size();
  if (n < 2) throw GraphError("graph needs at least an input and an output node");
  if (n > max_nodes) {
    throw GraphError("graph has " + std::to_string(n) + " nodes, limit is " + std::to_string(max_nodes));
  }
  std::vector<std::size_t> indeg(n, 0), outdeg(n, 0);
  for (const auto& [s, d] : edges_) {
    if (s >= n || d >= n) throw GraphError("edge endpoint out of range");
    if (s == d) throw GraphError("self loop on node " + std::to_string(s));
    ++outdeg[s];
    ++indeg[d];
  }
  std::size_t inputs = 0, outputs = 0;
  for (std::size_t v = 0; v < n; ++v) {
    const OpKind op = nodes_[v];
    if (op == OpKind::End) throw GraphError("END tag stored in a graph");
    if (op == OpKind::Input) {
      ++inputs;
      if (indeg[v] != 0) throw GraphError("input node has predecessors");
    } else if (indeg[v] == 0) {
      throw GraphError("node " + std::to_string(v) + " has no predecessor");
    }
    if (op == OpKind::Output) {
      ++outputs;
      if (outdeg[v] != 0) throw GraphError("output node has successors");
    } else if (outdeg[v] == 0) {
      throw GraphError("node " + std::to_string(v) + " has no successor");
    }
  }
  if (inputs != 1) throw GraphError("expected exactly one input node, found " + std::to_string(inputs));
  if (outputs != 1) throw GraphError("expected exactly one output node, found " + std::to_string(outputs));
  (void)topological_order(*this);
}

bool CellGraph::is_valid(std::size_t max_nodes) const noexcept {
  try {
    validate(max_nodes);
    return true;
  } catch (const GraphError&) {
    return false;
  }
}

std::string CellGraph::to_string() const {
  std::string out = "nodes=[";
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (v) out += ',';
    out += op_name(nodes_[v]);
  }
  out += "];edges=[";
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (i) out += ',';
    out += '(' + std::to_string(edges_[i].first) + ',' + std::to_string(edges_[i].second) + ')';
  }
  out += ']';
  return out;
}

CellGraph CellGraph::parse(std::string_view text) {
  text = trim(text);
  constexpr std::string_view kNodes = "nodes=[";
  constexpr std::string_view kEdges = "];edges=[";
  if (text.substr(0, kNodes.size()) != kNodes || text.empty() || text.back() != ']') {
    throw ParseError("graph notation must look like nodes=[...];edges=[...]");
  }
  const auto split = text.find(kEdges);
  if (split == std::string_view::npos) throw ParseError("graph notation is missing ';edges=['");
  std::string_view node_list = text.substr(kNodes.size(), split - kNodes.size());
  std::string_view edge_list = text.substr(split + kEdges.size());
  edge_list.remove_suffix(1);

  std::vector<OpKind> nodes;
  while (!node_list.empty()) {
    const auto comma = node_list.find(',');
    nodes.push_back(op_from_name(node_list.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    node_list.remove_prefix(comma + 1);
  }

  std::vector<Edge> edges;
  edge_list = trim(edge_list);
  while (!edge_list.empty()) {
    if (edge_list.front() != '(') throw ParseError("expected '(' in edge list");
    const auto close = edge_list.find(')');
    if (close == std::string_view::npos) throw ParseError("unterminated edge");
    const std::string_view pair = edge_list.substr(1, close - 1);
    const auto comma = pair.find(',');
    if (comma == std::string_view::npos) throw ParseError("edge needs two endpoints");
    edges.emplace_back(parse_index(pair.substr(0, comma)), parse_index(pair.substr(comma + 1)));
    edge_list.remove_prefix(close + 1);
    edge_list = trim(edge_list);
    if (!edge_list.empty()) {
      if (edge_list.front() != ',') throw ParseError("expected ',' between edges");
      edge_list.remove_prefix(1);
      edge_list = trim(edge_list);
    }
  }
  return CellGraph(std::move(nodes), std::move(edges));
}

void EdgeSpec::validate() const {
  for (OpKind op : ops) {
    if (!is_searchable(op)) throw GraphError("edge spec entry '" + std::string(op_name(op)) + "' is not searchable");
  }
}

std::string EdgeSpec::to_string() const {
  std::string out = "|";
  for (OpKind op : ops) {
    out += op_name(op);
    out += '|';
  }
  return out;
}

EdgeSpec EdgeSpec::parse(std::string_view text) {
  text = trim(text);
  std::vector<std::string_view> tokens;
  while (!text.empty()) {
    const auto bar = text.find('|');
    const auto token = trim(text.substr(0, bar));
    if (!token.empty() && token != "+") tokens.push_back(token);
    if (bar == std::string_view::npos) break;
    text.remove_prefix(bar + 1);
  }
  if (tokens.size() != kCellEdges) {
    throw ParseError("cell notation needs 6 operations, got " + std::to_string(tokens.size()));
  }
  EdgeSpec spec;
  for (std::size_t i = 0; i < kCellEdges; ++i) {
    std::string_view token = tokens[i];
    if (const auto tilde = token.find('~'); tilde != std::string_view::npos) {
      if (parse_index(token.substr(tilde + 1)) != kEdgeSource[i]) {
        throw ParseError("edge '" + std::string(token) + "' is out of order");
      }
      token = token.substr(0, tilde);
    }
    spec.ops[i] = op_from_name(token);
  }
  try {
    spec.validate();
  } catch (const GraphError& e) {
    throw ParseError(e.what());
  }
  return spec;
}

CellGraph from_edge_spec(const EdgeSpec& spec) {
  spec.validate();
  // Node 0 is INPUT, node 1 + i is labeled edge i, node 7 is OUTPUT. Op node for edge
  // a->b feeds every op node whose edge starts at b; cell node 0 is INPUT, cell node 3 feeds OUTPUT.
  constexpr std::size_t kOutput = kCellEdges + 1;
  std::vector<OpKind> nodes;
  nodes.reserve(kCellEdges + 2);
  nodes.push_back(OpKind::Input);
  for (OpKind op : spec.ops) nodes.push_back(op);
  nodes.push_back(OpKind::Output);

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < kCellEdges; ++i) {
    if (kEdgeSource[i] == 0) edges.emplace_back(0, 1 + i);
    if (kEdgeTarget[i] == 3) edges.emplace_back(1 + i, kOutput);
    for (std::size_t j = 0; j < kCellEdges; ++j) {
      if (kEdgeSource[j] == kEdgeTarget[i]) edges.emplace_back(1 + i, 1 + j);
    }
  }
  return CellGraph(std::move(nodes), std::move(edges));
}

std::optional<EdgeSpec> to_edge_spec(const CellGraph& g) {
  if (g.size() != kCellEdges + 2) return std::nullopt;
  EdgeSpec spec;
  for (std::size_t i = 0; i < kCellEdges; ++i) {
    if (!is_searchable(g.op(1 + i))) return std::nullopt;
    spec.ops[i] = g.op(1 + i);
  }
  if (from_edge_spec(spec) != g) return std::nullopt;
  return spec;
}

std::string format_cell(const CellGraph& g) {
  if (auto spec = to_edge_spec(g)) return spec->to_string();
  return g.to_string();
}

CellGraph parse_cell(std::string_view text) {
  if (text.starts_with("nodes=")) return CellGraph::parse(text);
  return from_edge_spec(EdgeSpec::parse(text));
}

std::vector<EdgeSpec> enumerate_edge_specs() {
  std::vector<EdgeSpec> specs;
  std::size_t total = 1;
  for (std::size_t i = 0; i < kCellEdges; ++i) total *= kNumSearchableOps;
  specs.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    EdgeSpec spec;
    std::size_t rest = code;
    for (std::size_t i = kCellEdges; i-- > 0;) {
      spec.ops[i] = kSearchableOps[rest % kNumSearchableOps];
      rest /= kNumSearchableOps;
    }
    specs.push_back(spec);
  }
  return specs;
}

std::vector<CellGraph> enumerate_search_space() {
  const auto specs = enumerate_edge_specs();
  std::vector<CellGraph> graphs;
  graphs.reserve(specs.size());
  for (const auto& spec : specs) graphs.push_back(from_edge_spec(spec));
  return graphs;
}

std::vector<std::size_t> topological_order(const CellGraph& g) {
  return kahn(g, [&](std::size_t a, std::size_t b) {
    return std::pair(op_index(g.op(a)), a) < std::pair(op_index(g.op(b)), b);
  });
}

std::vector<std::size_t> canonical_order(const CellGraph& g) {
  const auto colour = refine_colours(g);
  return kahn(g, [&](std::size_t a, std::size_t b) { return std::pair(colour[a], a) < std::pair(colour[b], b); });
}

CellGraph permute_nodes(const CellGraph& g, const std::vector<std::size_t>& perm) {
  if (perm.size() != g.size()) throw GraphError("permutation size does not match graph");
  std::vector<OpKind> nodes(g.size());
  std::vector<bool> seen(g.size(), false);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (perm[v] >= g.size() || seen[perm[v]]) throw GraphError("not a permutation");
    seen[perm[v]] = true;
    nodes[perm[v]] = g.op(v);
  }
  std::vector<Edge> edges;
  edges.reserve(g.edges().size());
  for (const auto& [s, d] : g.edges()) edges.emplace_back(perm[s], perm[d]);
  return CellGraph(std::move(nodes), std::move(edges));
}

CellGraph canonical_form(const CellGraph& g) {
  const auto order = canonical_order(g);
  std::vector<std::size_t> position(g.size());
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  return permute_nodes(g, position);
}

std::string canonical_key(const CellGraph& g, std::size_t max_nodes) {
  g.validate(max_nodes);
  return canonical_form(g).to_string();
}

}  // namespace grabnas::dag
