// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Performance ground truth: a seeded synthetic multi-task benchmark that is total over
// every valid CellGraph, and a loader for tabular benchmark files.

#pragma once

#include "grabnas/dag.hpp"
#include "grabnas/set_encoder.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grabnas::bench {

using ad::Matrix;
using dag::CellGraph;
using Vector = Eigen::VectorXd;

// [op histogram / 6 (five searchable ops), longest non-zeroize path / 3,
//  skip / op-node count, edges with no zeroize endpoint / 10]
inline constexpr Eigen::Index kDescriptorDim = 8;
Vector descriptor(const CellGraph& g);

struct BenchConfig {
  std::size_t classes = 5;
  std::size_t instances_per_class = 20;
  Eigen::Index feature_dim = 8;
  // Width of the hidden task factor that drives both the data clusters and the
  // preference vector, so the dataset encoder can see what a task rewards.
  Eigen::Index task_factors = 3;
  double noise = 0.0;
};

struct SyntheticTask {
  dataset::TaskSpec spec;
  Vector theta;  // kDescriptorDim
  double bias = 0.0;
  double noise = 0.0;
};

// Task i depends only on (seed, i, config); ids are "task-000", "task-001", ...
// Throws std::invalid_argument for n_tasks == 0.
std::vector<SyntheticTask> gen_tasks(std::uint64_t seed, std::size_t n_tasks, const BenchConfig& config = {});
// Tasks [first, first + count) of the same stream, e.g. held-out test tasks.
std::vector<SyntheticTask> gen_tasks(std::uint64_t seed, std::size_t first, std::size_t count,
                                     const BenchConfig& config);

// sigmoid(theta . descriptor(g) + bias), plus N(0, noise^2) seeded by (noise_seed, key)
// before the squash when the task's noise is positive.
double true_perf(const CellGraph& g, const SyntheticTask& task, std::uint64_t noise_seed = 0);

// The oracle cannot score a graph (e.g. a decoded cell absent from a tabular file).
class UnevaluableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// evaluate() is the metered call the search pays for; peek() is the same value for
// bookkeeping (regret, pruning) and is not counted.
class Oracle {
 public:
  virtual ~Oracle() = default;
  double evaluate(const CellGraph& g) {
    const double v = peek(g);
    calls_.fetch_add(1, std::memory_order_relaxed);
    return v;
  }
  virtual double peek(const CellGraph& g) const = 0;
  virtual std::string describe() const = 0;
  std::uint64_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }
  void reset_calls() noexcept { calls_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

class SyntheticOracle final : public Oracle {
 public:
  explicit SyntheticOracle(SyntheticTask task, std::uint64_t noise_seed = 0)
      : task_(std::move(task)), noise_seed_(noise_seed) {}
  double peek(const CellGraph& g) const override { return true_perf(g, task_, noise_seed_); }
  std::string describe() const override { return "synthetic:" + task_.spec.id; }
  const SyntheticTask& task() const noexcept { return task_; }

 private:
  SyntheticTask task_;
  std::uint64_t noise_seed_;
};

struct TabularRow {
  dag::EdgeSpec cell;
  std::string dataset;
  double accuracy = 0.0;  // percent
  friend bool operator==(const TabularRow&, const TabularRow&) = default;
};

class PerfTable {
 public:
  // Throws std::invalid_argument on a duplicate (cell, dataset) pair or accuracy outside [0, 100].
  void add(const TabularRow& row);
  const std::vector<TabularRow>& rows() const noexcept { return rows_; }
  bool contains(const std::string& key, const std::string& dataset) const;
  // Throws UnevaluableError when the pair is missing.
  double accuracy(const std::string& key, const std::string& dataset) const;
  std::vector<std::string> datasets() const;
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::vector<TabularRow> rows_;
  std::map<std::string, std::map<std::string, double>> index_;
};

// Lines `<cell>,<dataset-id>,<accuracy-percent>`; `#` starts a comment, blank lines skip.
// Every malformed line is collected into one dag::ParseError ("<source>:<line>: ...").
PerfTable parse_tabular(std::istream& in, const std::string& source = "<stream>");
PerfTable load_tabular(const std::filesystem::path& path);
void write_tabular(std::ostream& out, const PerfTable& table);

// accuracy / 100 for one dataset of a table.
class TabularOracle final : public Oracle {
 public:
  TabularOracle(std::shared_ptr<const PerfTable> table, std::string dataset);
  double peek(const CellGraph& g) const override;
  std::string describe() const override { return "tabular:" + dataset_; }

 private:
  std::shared_ptr<const PerfTable> table_;
  std::string dataset_;
};

// Mean meta-training performance per cell: lines `<cell>,<mean>`.
struct MetaTableEntry {
  CellGraph graph;
  double mean = 0.0;
};
using MetaTable = std::vector<MetaTableEntry>;

MetaTable build_meta_table(const std::vector<CellGraph>& cells, const std::vector<SyntheticTask>& tasks);
void write_meta_table(std::ostream& out, const MetaTable& table);
MetaTable read_meta_table(std::istream& in, const std::string& source = "<stream>");

// Meta-training observations: lines `<task-id>,<cell>,<performance>`.
struct MetaSample {
  std::string task_id;
  CellGraph graph;
  double performance = 0.0;
};

// `per_task` cells drawn without replacement from `cells` for every task.
std::vector<MetaSample> sample_meta_dataset(const std::vector<CellGraph>& cells,
                                            const std::vector<SyntheticTask>& tasks, std::size_t per_task,
                                            std::uint64_t seed);
void write_meta_samples(std::ostream& out, const std::vector<MetaSample>& samples);
std::vector<MetaSample> read_meta_samples(std::istream& in, const std::string& source = "<stream>");

// Comma split honouring double quotes ("" escapes a quote); used by every CSV reader here.
std::vector<std::string> split_csv(std::string_view line);
// Quotes a field when it holds a comma or quote.
std::string csv_field(std::string_view text);

}  // namespace grabnas::bench
