// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end plumbing shared by the command-line tool and the acceptance suite:
// benchmark generation, training, and seeded search experiments.

#pragma once

#include "grabnas/bench.hpp"
#include "grabnas/graph_vae.hpp"
#include "grabnas/model.hpp"
#include "grabnas/search.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace grabnas::cli {

struct BenchSetup {
  std::uint64_t seed = 0;
  std::size_t train_tasks = 20;
  std::size_t test_tasks = 5;
  // Meta-dataset observations per training task.
  std::size_t per_task = 200;
  bench::BenchConfig config;
};

struct Benchmark {
  BenchSetup setup;
  std::vector<bench::SyntheticTask> train;
  std::vector<bench::SyntheticTask> test;  // ids continue after the training ids
  std::vector<dag::CellGraph> space;       // the full enumerated space
  bench::MetaTable meta_table;             // means over training tasks
  std::vector<bench::MetaSample> samples;

  const bench::SyntheticTask& test_task(const std::string& id) const;
};

Benchmark make_benchmark(const BenchSetup& setup);

// Writes bench.json, meta_table.csv, meta_dataset.csv and tasks/<id>.task.
void save_benchmark(const std::filesystem::path& dir, const Benchmark& benchmark);
// Regenerates from bench.json (the synthetic preference vectors are not stored) and
// checks the regenerated meta-table against meta_table.csv.
Benchmark load_benchmark(const std::filesystem::path& dir);

struct TrainSetup {
  std::uint64_t seed = 0;
  Eigen::Index latent_dim = 56;
  Eigen::Index fused_dim = 32;
  MetaTrainConfig meta;
  std::size_t decoder_cells = 500;
  gvae::AutoencoderTrainConfig decoder{30, 5e-3, 8, 0, 10.0};
};

struct TrainedModel {
  Model model;
  MetaTrainResult meta;
  gvae::AutoencoderTrainResult decoder;
};

// Meta-trains encoders, fusion and kernel on the benchmark's meta-dataset, then trains
// the decoder on decoder_cells cells drawn from the space with the encoders frozen.
TrainedModel train_model(const Benchmark& benchmark, const TrainSetup& setup);

struct RunSpec {
  search::Method method = search::Method::GraBNAS;
  search::SearchConfig config;
};

struct RunOutcome {
  search::SearchResult result;
  double regret = 0.0;  // NaN without a known optimum
  std::uint64_t oracle_calls = 0;
};

// Each run gets a fresh oracle so its call counter starts at zero.
using OracleFactory = std::function<std::unique_ptr<bench::Oracle>()>;

// One search with the given oracle. The trace records the optimum (when known) and, for
// pruned pools, the remaining best. Throws std::logic_error if the trace's evaluation
// count disagrees with the oracle's meter.
RunOutcome run_with_oracle(const RunSpec& spec, const dataset::TaskSpec& task, const search::CandidatePool& pool,
                           const Model& model, const search::MetaMeans& means, bench::Oracle& oracle,
                           std::optional<double> optimum, std::optional<double> remaining_best = std::nullopt);

RunOutcome run_synthetic(const RunSpec& spec, const bench::SyntheticTask& task, const search::CandidatePool& pool,
                         const Model& model, const search::MetaMeans& means, double optimum,
                         std::optional<double> remaining_best = std::nullopt);

// GraB-NAS first, then random and BO-only at its oracle-call count E (random gets E
// evaluations, BO-only gets T = E - B iterations).
struct Comparison {
  RunOutcome grabnas;
  RunOutcome random;
  RunOutcome bo_only;
};
Comparison compare_equal_budget(const search::SearchConfig& config, const dataset::TaskSpec& task,
                                const search::CandidatePool& pool, const Model& model,
                                const search::MetaMeans& means, const OracleFactory& make_oracle,
                                std::optional<double> optimum);
Comparison compare_equal_budget(const search::SearchConfig& config, const bench::SyntheticTask& task,
                                const search::CandidatePool& pool, const Model& model,
                                const search::MetaMeans& means, double optimum);

std::string trace_file_name(const search::SearchTrace& trace);

}  // namespace grabnas::cli
