// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/cli/pipeline.hpp"

#include "grabnas/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace grabnas::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const bench::SyntheticTask& Benchmark::test_task(const std::string& id) const {
  for (const auto& t : test) {
    if (t.spec.id == id) return t;
  }
  throw std::invalid_argument("no test task named " + id);
}

Benchmark make_benchmark(const BenchSetup& setup) {
  if (setup.train_tasks == 0) throw std::invalid_argument("benchmark needs at least one training task");
  Benchmark b;
  b.setup = setup;
  b.train = bench::gen_tasks(setup.seed, 0, setup.train_tasks, setup.config);
  if (setup.test_tasks > 0) b.test = bench::gen_tasks(setup.seed, setup.train_tasks, setup.test_tasks, setup.config);
  b.space = dag::enumerate_search_space();
  b.meta_table = bench::build_meta_table(b.space, b.train);
  b.samples = bench::sample_meta_dataset(b.space, b.train, setup.per_task, derive_seed(setup.seed, "meta-dataset"));
  return b;
}

namespace {

json setup_json(const BenchSetup& s) {
  return {{"seed", s.seed},
          {"train_tasks", s.train_tasks},
          {"test_tasks", s.test_tasks},
          {"per_task", s.per_task},
          {"classes", s.config.classes},
          {"instances_per_class", s.config.instances_per_class},
          {"feature_dim", s.config.feature_dim},
          {"task_factors", s.config.task_factors},
          {"noise", s.config.noise}};
}

BenchSetup setup_from_json(const json& j) {
  BenchSetup s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train_tasks = j.at("train_tasks").get<std::size_t>();
  s.test_tasks = j.at("test_tasks").get<std::size_t>();
  s.per_task = j.at("per_task").get<std::size_t>();
  s.config.classes = j.at("classes").get<std::size_t>();
  s.config.instances_per_class = j.at("instances_per_class").get<std::size_t>();
  s.config.feature_dim = j.at("feature_dim").get<Eigen::Index>();
  s.config.task_factors = j.at("task_factors").get<Eigen::Index>();
  s.config.noise = j.at("noise").get<double>();
  return s;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void save_benchmark(const fs::path& dir, const Benchmark& b) {
  fs::create_directories(dir / "tasks");
  open_out(dir / "bench.json") << setup_json(b.setup).dump(2) << '\n';
  {
    auto out = open_out(dir / "meta_table.csv");
    out << "# mean performance over " << b.train.size() << " meta-training tasks\n";
    bench::write_meta_table(out, b.meta_table);
  }
  {
    auto out = open_out(dir / "meta_dataset.csv");
    bench::write_meta_samples(out, b.samples);
  }
  for (const auto* group : {&b.train, &b.test}) {
    for (const auto& t : *group) dataset::save_task(dir / "tasks" / (t.spec.id + ".task"), t.spec);
  }
}

Benchmark load_benchmark(const fs::path& dir) {
  std::ifstream in(dir / "bench.json");
  if (!in) throw std::runtime_error("no bench.json in " + dir.string());
  BenchSetup setup;
  try {
    setup = setup_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error("bad bench.json: " + std::string(e.what()));
  }
  Benchmark b = make_benchmark(setup);

  std::ifstream table_in(dir / "meta_table.csv");
  if (!table_in) throw std::runtime_error("no meta_table.csv in " + dir.string());
  const bench::MetaTable stored = bench::read_meta_table(table_in, (dir / "meta_table.csv").string());
  if (stored.size() != b.meta_table.size()) throw std::runtime_error("meta_table.csv does not match bench.json");
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i].graph != b.meta_table[i].graph || stored[i].mean != b.meta_table[i].mean) {
      throw std::runtime_error("meta_table.csv does not match bench.json at row " + std::to_string(i + 1));
    }
  }
  return b;
}

TrainedModel train_model(const Benchmark& benchmark, const TrainSetup& setup) {
  TrainedModel out{Model(ModelConfig::make(setup.latent_dim, setup.fused_dim, benchmark.setup.config.feature_dim),
                         derive_seed(setup.seed, "init")),
                   {},
                   {}};
  std::map<std::string, dataset::TaskSpec> specs;
  for (const auto& t : benchmark.train) specs[t.spec.id] = t.spec;
  MetaTrainConfig meta = setup.meta;
  meta.seed = derive_seed(setup.seed, "training");
  out.meta = meta_train(benchmark.samples, specs, out.model, meta);

  if (setup.decoder_cells > 0) {
    std::vector<std::size_t> index(benchmark.space.size());
    std::iota(index.begin(), index.end(), std::size_t{0});
    Rng rng(derive_seed(setup.seed, "decoder-cells"));
    std::shuffle(index.begin(), index.end(), rng);
    index.resize(std::min(setup.decoder_cells, index.size()));
    std::sort(index.begin(), index.end());
    std::vector<dag::CellGraph> cells;
    cells.reserve(index.size());
    for (std::size_t i : index) cells.push_back(benchmark.space[i]);
    gvae::AutoencoderTrainConfig decoder = setup.decoder;
    decoder.seed = derive_seed(setup.seed, "decoder");
    out.decoder = gvae::train_autoencoder(cells, out.model.params(), out.model.autoencoder(), decoder);
  }
  return out;
}

RunOutcome run_with_oracle(const RunSpec& spec, const dataset::TaskSpec& task, const search::CandidatePool& pool,
                           const Model& model, const search::MetaMeans& means, bench::Oracle& oracle,
                           std::optional<double> optimum, std::optional<double> remaining_best) {
  const search::SearchInputs inputs{&task, &pool, &model, &means};
  const std::uint64_t before = oracle.calls();
  RunOutcome out;
  out.result = search::run_search(spec.method, inputs, spec.config, oracle);
  out.result.trace.optimum = optimum;
  out.result.trace.remaining_best = remaining_best;
  out.oracle_calls = oracle.calls() - before;
  out.regret = optimum ? *optimum - out.result.best_performance : std::numeric_limits<double>::quiet_NaN();
  if (out.oracle_calls != out.result.trace.evaluations()) {
    throw std::logic_error("trace evaluation count does not match the oracle");
  }
  return out;
}

RunOutcome run_synthetic(const RunSpec& spec, const bench::SyntheticTask& task, const search::CandidatePool& pool,
                         const Model& model, const search::MetaMeans& means, double optimum,
                         std::optional<double> remaining_best) {
  bench::SyntheticOracle oracle(task);
  return run_with_oracle(spec, task.spec, pool, model, means, oracle, optimum, remaining_best);
}

Comparison compare_equal_budget(const search::SearchConfig& config, const dataset::TaskSpec& task,
                                const search::CandidatePool& pool, const Model& model,
                                const search::MetaMeans& means, const OracleFactory& make_oracle,
                                std::optional<double> optimum) {
  auto run = [&](search::Method method, const search::SearchConfig& c) {
    const auto oracle = make_oracle();
    return run_with_oracle({method, c}, task, pool, model, means, *oracle, optimum);
  };
  Comparison out;
  out.grabnas = run(search::Method::GraBNAS, config);
  // Random draws support + iterations cells, so E - B iterations spend exactly E calls.
  search::SearchConfig matched = config;
  matched.iterations = std::max(1, static_cast<int>(out.grabnas.oracle_calls) - static_cast<int>(config.support));
  matched.warmup = matched.iterations;
  out.random = run(search::Method::Random, matched);
  out.bo_only = run(search::Method::BoOnly, matched);
  return out;
}

Comparison compare_equal_budget(const search::SearchConfig& config, const bench::SyntheticTask& task,
                                const search::CandidatePool& pool, const Model& model,
                                const search::MetaMeans& means, double optimum) {
  return compare_equal_budget(
      config, task.spec, pool, model, means, [&task] { return std::make_unique<bench::SyntheticOracle>(task); },
      optimum);
}

std::string trace_file_name(const search::SearchTrace& trace) {
  return trace.method + "_" + trace.task + "_s" + std::to_string(trace.seed) + ".csv";
}

}  // namespace grabnas::cli
