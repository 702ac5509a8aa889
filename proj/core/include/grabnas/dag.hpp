// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Architecture cells as node-labeled DAGs.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace grabnas::dag {

enum class OpKind : std::uint8_t {
  Zeroize = 0,
  Skip,
  Conv1x1,
  Conv3x3,
  AvgPool3x3,
  Input,
  Output,
  End,
};

inline constexpr std::size_t kNumSearchableOps = 5;
inline constexpr std::size_t kNumOpKinds = 8;
inline constexpr std::size_t kDefaultMaxNodes = 10;
inline constexpr std::size_t kCellEdges = 6;

inline constexpr std::array<OpKind, kNumSearchableOps> kSearchableOps{
    OpKind::Zeroize, OpKind::Skip, OpKind::Conv1x1, OpKind::Conv3x3, OpKind::AvgPool3x3};

constexpr bool is_searchable(OpKind op) noexcept {
  return static_cast<std::uint8_t>(op) < kNumSearchableOps;
}

constexpr std::size_t op_index(OpKind op) noexcept { return static_cast<std::size_t>(op); }

// Benchmark tag names: none, skip_connect, nor_conv_1x1, nor_conv_3x3, avg_pool_3x3,
// plus input/output/end for the structural tags.
std::string_view op_name(OpKind op) noexcept;
OpKind op_from_name(std::string_view name);

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Edge = std::pair<std::size_t, std::size_t>;

class CellGraph {
 public:
  CellGraph() = default;
  // Edges are deduplicated and sorted; validity is checked by validate().
  CellGraph(std::vector<OpKind> nodes, std::vector<Edge> edges);

  const std::vector<OpKind>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind op(std::size_t v) const { return nodes_.at(v); }

  std::vector<std::size_t> predecessors(std::size_t v) const;
  std::vector<std::size_t> successors(std::size_t v) const;
  bool has_edge(std::size_t src, std::size_t dst) const;

  // Throws GraphError naming the first violated invariant.
  void validate(std::size_t max_nodes = kDefaultMaxNodes) const;
  bool is_valid(std::size_t max_nodes = kDefaultMaxNodes) const noexcept;

  // `nodes=[input,nor_conv_3x3,output];edges=[(0,1),(1,2)]`
  std::string to_string() const;
  static CellGraph parse(std::string_view text);

  friend bool operator==(const CellGraph&, const CellGraph&) = default;

 private:
  std::vector<OpKind> nodes_;
  std::vector<Edge> edges_;
};

// One searchable op per cell edge, edge order (0->1, 0->2, 1->2, 0->3, 1->3, 2->3).
struct EdgeSpec {
  std::array<OpKind, kCellEdges> ops{};

  void validate() const;
  // `|op0|op1|op2|op3|op4|op5|`
  std::string to_string() const;
  // Accepts the compact form above and the `|op~0|+|op~0|op~1|+|...|` benchmark form.
  static EdgeSpec parse(std::string_view text);

  friend bool operator==(const EdgeSpec&, const EdgeSpec&) = default;
};

// INPUT, six op nodes in edge order, OUTPUT.
CellGraph from_edge_spec(const EdgeSpec& spec);

// Inverse of from_edge_spec: the spec when g is exactly a converted cell (storage order
// included), otherwise nothing.
std::optional<EdgeSpec> to_edge_spec(const CellGraph& g);

// `|op0|...|op5|` for converted cells, the general `nodes=[...];edges=[...]` form otherwise.
std::string format_cell(const CellGraph& g);
// Accepts either notation (and the benchmark `|op~0|+|...|` form).
CellGraph parse_cell(std::string_view text);

// All 5^6 specs in lexicographic order over kSearchableOps.
std::vector<EdgeSpec> enumerate_edge_specs();
std::vector<CellGraph> enumerate_search_space();

// Kahn order; ready nodes are taken by (op tag, storage index). Throws GraphError on a cycle.
std::vector<std::size_t> topological_order(const CellGraph& g);

// Kahn order with ties broken by colour-refined structural classes, then storage index.
// The result does not depend on node storage order unless two nodes are
// indistinguishable by colour refinement.
std::vector<std::size_t> canonical_order(const CellGraph& g);

// g relabeled so that storage order equals canonical_order(g).
CellGraph canonical_form(const CellGraph& g);

// Throws GraphError on an invalid graph.
std::string canonical_key(const CellGraph& g, std::size_t max_nodes = kDefaultMaxNodes);

// Relabels nodes: node v of g becomes node perm[v] of the result.
CellGraph permute_nodes(const CellGraph& g, const std::vector<std::size_t>& perm);

}  // namespace grabnas::dag
