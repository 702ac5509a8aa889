// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Meta-test search: support initialisation from meta-training means, BO with expected
// improvement over a candidate pool, and latent gradient exploration decoded back to
// graphs. Random, BO-only and nearest-candidate variants share the same loop.

#pragma once

#include "grabnas/bench.hpp"
#include "grabnas/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace grabnas::search {

using ad::Matrix;
using ad::RowVector;
using dag::CellGraph;

enum class Source { Init, Bo, Grad, Random };
std::string_view source_name(Source s) noexcept;
Source source_from_name(std::string_view name);

struct SupportPair {
  CellGraph graph;
  std::string key;
  RowVector latent;
  RowVector fused;
  double performance = 0.0;
  Source source = Source::Init;
};

class SupportSet {
 public:
  // Throws std::invalid_argument on a duplicate key or a performance outside [0, 1].
  void add(SupportPair pair);
  bool contains(const std::string& key) const { return keys_.count(key) != 0; }
  const std::vector<SupportPair>& pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }

  Matrix fused_inputs() const;
  Eigen::VectorXd targets() const;
  // Highest performance; ties go to the smaller canonical key.
  const SupportPair& best() const;

 private:
  std::vector<SupportPair> pairs_;
  std::unordered_set<std::string> keys_;
};

struct SearchConfig {
  int iterations = 30;             // T
  std::size_t support = 5;         // B
  int warmup = 5;                  // T_BO
  double eta = 1e-2;               // gradient-ascent step size
  int grad_steps = 1;
  int max_halvings = 8;
  // Store the re-encoded latent of a decoded graph instead of the ascended latent.
  bool reencode = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TraceRow {
  int iter = 0;
  Source source = Source::Init;
  std::string key;
  double mu = 0.0;     // predicted, original units; NaN when nothing was predicted
  double sigma = 0.0;  // likewise
  double observed = 0.0;
  double best_so_far = 0.0;
  std::uint64_t evals = 0;
  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct SearchTrace {
  std::string method;
  std::string task;
  std::uint64_t seed = 0;
  std::optional<double> optimum;
  std::optional<double> remaining_best;
  std::string manifest;
  std::vector<TraceRow> rows;

  double final_best() const;
  std::uint64_t evaluations() const { return rows.empty() ? 0 : rows.back().evals; }
};

// `# key: value` header lines, then `iter,source,key,mu,sigma,observed,best_so_far,evals`.
void write_trace(std::ostream& out, const SearchTrace& trace);
SearchTrace read_trace(std::istream& in, const std::string& source = "<stream>");

// Candidate graphs with their canonical keys and frozen-encoder latents.
struct CandidatePool {
  std::vector<CellGraph> graphs;
  std::vector<std::string> keys;
  Matrix latents;

  std::size_t size() const noexcept { return graphs.size(); }
  static CandidatePool build(std::vector<CellGraph> graphs, const Model& model);
  // Rows [indices] of this pool, latents reused.
  CandidatePool subset(const std::vector<std::size_t>& indices) const;
  std::optional<std::size_t> find(const std::string& key) const;
};

// Canonical key -> mean meta-training performance.
using MetaMeans = std::map<std::string, double>;
MetaMeans meta_means(const bench::MetaTable& table);

// Indices of the B candidates with the highest meta-training mean (missing entries
// rank last), ties by canonical key. Throws std::invalid_argument when B > |pool|.
std::vector<std::size_t> select_initial(const CandidatePool& pool, const MetaMeans& means, std::size_t b);

struct BoChoice {
  std::size_t index = 0;
  double ei = 0.0;
  gp::PosteriorStats stats;
};

// Expected-improvement argmax over pool rows whose key is not in S, ties by key.
// Throws std::runtime_error when every candidate is already in S.
BoChoice bo_select(const gp::GPState& state, const Matrix& fused, const CandidatePool& pool, const SupportSet& s);

enum class ExploreMode { Decoder, Nearest };

struct Exploration {
  CellGraph graph;
  std::string key;
  RowVector latent;   // the ascended latent
  double mu_before = 0.0;
  double mu_after = 0.0;
};

// Ascends the latent of S's best pair along d mu / d latent with backtracking halving,
// then decodes (or looks up the nearest pool latent). Returns nothing when the result is
// already in S.
std::optional<Exploration> gradient_explore(const gp::GPState& state, const SupportSet& s, const Model& model,
                                            const RowVector& dataset, const SearchConfig& config,
                                            ExploreMode mode, const CandidatePool* pool = nullptr);

enum class Method { GraBNAS, BoOnly, Knn, Random };
std::string_view method_name(Method m) noexcept;
Method method_from_name(std::string_view name);

struct SearchResult {
  CellGraph best;
  double best_performance = 0.0;
  SearchTrace trace;
  std::size_t unevaluable = 0;  // decoded graphs the oracle could not score
};

struct SearchInputs {
  const dataset::TaskSpec* task = nullptr;
  const CandidatePool* pool = nullptr;
  const Model* model = nullptr;
  const MetaMeans* means = nullptr;
};

// Algorithm loop for GraBNAS / BoOnly / Knn; Random samples the pool without
// replacement for support + iterations evaluations. BoOnly runs with warmup = iterations.
SearchResult run_search(Method method, const SearchInputs& inputs, const SearchConfig& config, bench::Oracle& oracle);

struct PruneResult {
  std::vector<std::size_t> kept;  // pool indices, original order
  std::vector<std::size_t> removed;
  double remaining_best = 0.0;
};

// Removes the k best candidates by oracle value (peeked, not metered), ties by key.
// Throws std::invalid_argument when k >= |candidates|.
PruneResult prune_space(const std::vector<CellGraph>& candidates, const bench::Oracle& oracle, std::size_t k);

// Best oracle value over a candidate list (peeked).
double best_value(const std::vector<CellGraph>& candidates, const bench::Oracle& oracle);

}  // namespace grabnas::search
