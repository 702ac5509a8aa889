// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/cli/app.hpp"

#include "grabnas/cli/pipeline.hpp"
#include "grabnas/cli/report.hpp"
#include "grabnas/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef GRABNAS_VERSION
#define GRABNAS_VERSION "unknown"
#endif

namespace grabnas::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Everything needed to rerun a command. No timestamps or host details, so identical
// invocations produce identical manifests.
void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::uint64_t>& seeds, const json& inputs, const std::vector<std::string>& outputs) {
  const json manifest = {{"tool", "grabnas"},
                         {"command", command},
                         {"config", config},
                         {"seeds", seeds},
                         {"inputs", inputs},
                         {"outputs", outputs},
                         {"versions",
                          {{"grabnas", GRABNAS_VERSION},
                           {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                         "." + std::to_string(EIGEN_MINOR_VERSION)}}}};
  open_out(dir / "manifest.json") << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Option groups

struct BenchOptions {
  std::string dir;
  std::uint64_t seed = 0;
  std::size_t tasks = 20;
  std::size_t test_tasks = 5;
  std::size_t per_task = 200;

  BenchSetup setup() const {
    BenchSetup s;
    s.seed = seed;
    s.train_tasks = tasks;
    s.test_tasks = test_tasks;
    s.per_task = per_task;
    return s;
  }
  Benchmark load() const { return dir.empty() ? make_benchmark(setup()) : load_benchmark(dir); }
  json echo() const {
    if (!dir.empty()) return {{"bench", dir}};
    return {{"bench_seed", seed}, {"tasks", tasks}, {"test_tasks", test_tasks}, {"per_task", per_task}};
  }
};

struct TrainOptions {
  std::uint64_t seed = 0;
  int steps = 200;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::size_t decoder_cells = 500;
  int decoder_epochs = 30;
  Eigen::Index latent_dim = 56;
  Eigen::Index fused_dim = 32;

  TrainSetup setup() const {
    TrainSetup s;
    s.seed = seed;
    s.latent_dim = latent_dim;
    s.fused_dim = fused_dim;
    s.meta.steps = steps;
    s.meta.batch_size = batch;
    s.meta.lr = lr;
    s.decoder_cells = decoder_cells;
    s.decoder.epochs = decoder_epochs;
    return s;
  }
  json echo() const {
    return {{"train_seed", seed},         {"steps", steps},         {"batch", batch},
            {"lr", lr},                   {"decoder_cells", decoder_cells}, {"decoder_epochs", decoder_epochs},
            {"latent_dim", latent_dim},   {"fused_dim", fused_dim}};
  }
};

void add_bench_options(CLI::App* cmd, BenchOptions& o, bool with_dir, const std::string& seed_flag) {
  if (with_dir) cmd->add_option("--bench", o.dir, "Benchmark directory from gen-bench (generated in memory if absent)");
  cmd->add_option(seed_flag, o.seed, "Benchmark seed");
  cmd->add_option("--tasks", o.tasks, "Meta-training tasks")->check(CLI::PositiveNumber);
  cmd->add_option("--test-tasks", o.test_tasks, "Held-out test tasks");
  cmd->add_option("--per-task", o.per_task, "Meta-dataset observations per training task")->check(CLI::PositiveNumber);
}

void add_train_options(CLI::App* cmd, TrainOptions& o, const std::string& seed_flag, const std::string& steps_flag) {
  cmd->add_option(seed_flag, o.seed, "Training seed");
  cmd->add_option(steps_flag, o.steps, "Meta-training steps")->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch", o.batch, "Meta-training batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.lr, "Meta-training learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--decoder-cells", o.decoder_cells, "Cells used to train the decoder (0 skips)");
  cmd->add_option("--decoder-epochs", o.decoder_epochs, "Decoder training epochs")->check(CLI::NonNegativeNumber);
  cmd->add_option("--latent-dim", o.latent_dim, "Graph and dataset latent width")->check(CLI::PositiveNumber);
  cmd->add_option("--fused-dim", o.fused_dim, "Fused representation width")->check(CLI::PositiveNumber);
}

struct SearchOptions {
  BenchOptions bench;
  TrainOptions train;
  std::string model;
  int budget = 30;
  int warmup = 5;
  std::size_t support = 5;
  double eta = 1e-2;
  int grad_steps = 1;
  std::uint64_t seed = 0;
  int runs = 1;
  std::vector<std::string> tasks;
  std::string oracle = "synthetic";
  std::string dataset;
  std::string task_file;
  bool reencode = false;
  std::string out;

  search::SearchConfig config(std::uint64_t run_seed) const {
    search::SearchConfig c;
    c.iterations = budget;
    c.warmup = warmup;
    c.support = support;
    c.eta = eta;
    c.grad_steps = grad_steps;
    c.reencode = reencode;
    c.seed = run_seed;
    c.validate();
    return c;
  }
  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> s;
    for (int r = 0; r < runs; ++r) s.push_back(seed + static_cast<std::uint64_t>(r));
    return s;
  }
  json echo() const {
    json j = {{"budget", budget},     {"warmup", warmup}, {"support", support}, {"eta", eta},
              {"grad_steps", grad_steps}, {"runs", runs}, {"oracle", oracle},   {"reencode", reencode}};
    if (!tasks.empty()) j["tasks"] = tasks;
    if (!dataset.empty()) j["dataset"] = dataset;
    if (!task_file.empty()) j["task_file"] = task_file;
    if (model.empty()) j["train"] = train.echo();
    else j["model"] = model;
    j["benchmark"] = bench.echo();
    return j;
  }
};

void add_search_options(CLI::App* cmd, SearchOptions& o) {
  add_bench_options(cmd, o.bench, true, "--bench-seed");
  add_train_options(cmd, o.train, "--train-seed", "--train-steps");
  cmd->add_option("--model", o.model, "Checkpoint from meta-train (trained in memory if absent)");
  cmd->add_option("--budget", o.budget, "Search iterations T")->check(CLI::NonNegativeNumber);
  cmd->add_option("--warmup", o.warmup, "BO-only warm-up iterations T_BO")->check(CLI::NonNegativeNumber);
  cmd->add_option("--support", o.support, "Initial support size B")->check(CLI::PositiveNumber);
  cmd->add_option("--eta", o.eta, "Latent gradient step size")->check(CLI::PositiveNumber);
  cmd->add_option("--grad-steps", o.grad_steps, "Gradient steps per exploration")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "First search seed");
  cmd->add_option("--runs", o.runs, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  cmd->add_option("--task", o.tasks, "Test task id (repeatable; default all test tasks)");
  cmd->add_option("--oracle", o.oracle, "synthetic or tabular:<path>");
  cmd->add_option("--dataset", o.dataset, "Dataset id inside a tabular file");
  cmd->add_option("--task-file", o.task_file, "Dataset features for a tabular oracle");
  cmd->add_flag("--reencode", o.reencode, "Store re-encoded latents for decoded graphs");
  cmd->add_option("--out", o.out, "Output directory")->required();
}

// ---------------------------------------------------------------------------
// Search experiments

// One task to search: the dataset the model sees, the pool, the oracle and the optimum.
struct Target {
  dataset::TaskSpec spec;
  search::CandidatePool pool;
  OracleFactory make_oracle;
  std::optional<double> optimum;
};

struct Job {
  std::size_t target;
  std::uint64_t seed;
};

struct SearchContext {
  std::optional<Benchmark> bench;
  std::optional<Model> model;
  search::MetaMeans means;
  std::vector<Target> targets;
};

SearchContext prepare(const SearchOptions& o, std::ostream& out) {
  SearchContext ctx;
  const bool tabular = o.oracle.rfind("tabular:", 0) == 0;
  if (!tabular && o.oracle != "synthetic") throw std::invalid_argument("unknown oracle '" + o.oracle + "'");
  if (!tabular || o.model.empty() || !o.bench.dir.empty()) ctx.bench = o.bench.load();
  if (ctx.bench) ctx.means = search::meta_means(ctx.bench->meta_table);

  if (!o.model.empty()) {
    ctx.model = load_model(o.model);
  } else {
    out << "training model (" << o.train.steps << " steps, decoder on " << o.train.decoder_cells << " cells)\n";
    ctx.model = train_model(*ctx.bench, o.train.setup()).model;
  }
  const Model& model = *ctx.model;

  if (tabular) {
    if (o.task_file.empty()) throw std::invalid_argument("a tabular oracle needs --task-file for the dataset features");
    auto table = std::make_shared<const bench::PerfTable>(bench::load_tabular(o.oracle.substr(8)));
    std::string dataset = o.dataset;
    if (dataset.empty()) {
      const auto names = table->datasets();
      if (names.size() != 1) throw std::invalid_argument("the tabular file has several datasets; pick one with --dataset");
      dataset = names.front();
    }
    std::vector<dag::CellGraph> cells;
    for (const auto& row : table->rows()) {
      if (row.dataset == dataset) cells.push_back(dag::from_edge_spec(row.cell));
    }
    if (cells.empty()) throw std::invalid_argument("no rows for dataset '" + dataset + "'");
    Target t{dataset::load_task(o.task_file), search::CandidatePool::build(std::move(cells), model),
             [table, dataset] { return std::make_unique<bench::TabularOracle>(table, dataset); }, std::nullopt};
    t.optimum = search::best_value(t.pool.graphs, *t.make_oracle());
    ctx.targets.push_back(std::move(t));
    return ctx;
  }

  std::vector<std::string> ids = o.tasks;
  if (ids.empty()) {
    for (const auto& t : ctx.bench->test) ids.push_back(t.spec.id);
  }
  if (ids.empty()) throw std::invalid_argument("the benchmark has no test tasks");
  const search::CandidatePool pool = search::CandidatePool::build(ctx.bench->space, model);
  for (const auto& id : ids) {
    const bench::SyntheticTask& task = ctx.bench->test_task(id);
    Target t{task.spec, pool, [task] { return std::make_unique<bench::SyntheticOracle>(task); }, std::nullopt};
    t.optimum = search::best_value(ctx.bench->space, *t.make_oracle());
    ctx.targets.push_back(std::move(t));
  }
  return ctx;
}

void write_runs(const fs::path& dir, const std::vector<RunOutcome>& runs, std::ostream& out) {
  fs::create_directories(dir / "traces");
  auto results = open_out(dir / "results.csv");
  results << "method,task,seed,evaluations,best,regret,unevaluable,trace\n";
  for (const auto& r : runs) {
    search::SearchTrace trace = r.result.trace;
    trace.manifest = "../manifest.json";
    const std::string name = trace_file_name(trace);
    {
      auto f = open_out(dir / "traces" / name);
      search::write_trace(f, trace);
    }
    results << trace.method << ',' << bench::csv_field(trace.task) << ',' << trace.seed << ',' << r.oracle_calls << ','
            << number(r.result.best_performance) << ',' << number(r.regret) << ',' << r.result.unevaluable
            << ",traces/" << name << '\n';
    out << trace.method << ' ' << trace.task << " seed " << trace.seed << ": best " << number(r.result.best_performance)
        << " regret " << number(r.regret) << " evaluations " << r.oracle_calls << '\n';
  }
}

std::vector<Job> jobs_for(const SearchContext& ctx, const SearchOptions& o) {
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < ctx.targets.size(); ++t) {
    for (std::uint64_t s : o.seeds()) jobs.push_back({t, s});
  }
  return jobs;
}

std::vector<std::string> run_names(const std::vector<RunOutcome>& runs) {
  std::vector<std::string> names{"results.csv"};
  for (const auto& r : runs) names.push_back("traces/" + trace_file_name(r.result.trace));
  return names;
}

// Runs `per_job` for every (target, seed) pair in parallel and keeps the job order.
template <typename F>
std::vector<RunOutcome> run_jobs(const std::vector<Job>& jobs, F per_job) {
  std::vector<std::vector<RunOutcome>> slots(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) { slots[i] = per_job(jobs[i]); });
  std::vector<RunOutcome> all;
  for (auto& s : slots) {
    for (auto& r : s) all.push_back(std::move(r));
  }
  return all;
}

int cmd_search(const SearchOptions& o, const std::string& command, search::Method method, bool compare,
               std::ostream& out) {
  const SearchContext ctx = prepare(o, out);
  const std::vector<Job> jobs = jobs_for(ctx, o);
  const auto runs = run_jobs(jobs, [&](const Job& job) {
    const Target& t = ctx.targets[job.target];
    const search::SearchConfig config = o.config(job.seed);
    if (compare) {
      Comparison c = compare_equal_budget(config, t.spec, t.pool, *ctx.model, ctx.means, t.make_oracle, t.optimum);
      return std::vector<RunOutcome>{std::move(c.grabnas), std::move(c.random), std::move(c.bo_only)};
    }
    const auto oracle = t.make_oracle();
    return std::vector<RunOutcome>{
        run_with_oracle({method, config}, t.spec, t.pool, *ctx.model, ctx.means, *oracle, t.optimum)};
  });
  fs::create_directories(o.out);
  write_runs(o.out, runs, out);
  json config = o.echo();
  config["method"] = compare ? "compare" : std::string(search::method_name(method));
  write_manifest(o.out, command, config, o.seeds(), {{"oracle", o.oracle}}, run_names(runs));
  return 0;
}

int cmd_prune(const SearchOptions& o, std::size_t top, const std::vector<std::string>& methods, std::ostream& out) {
  if (o.oracle != "synthetic") throw std::invalid_argument("prune runs on the synthetic oracle only");
  std::vector<search::Method> arms;
  for (const auto& m : methods) arms.push_back(search::method_from_name(m));
  const SearchContext ctx = prepare(o, out);

  // The pruned pool is the full space minus each task's top cells.
  struct Pruned {
    search::CandidatePool pool;
    double remaining_best;
  };
  std::vector<Pruned> pruned;
  for (const auto& t : ctx.targets) {
    const auto oracle = t.make_oracle();
    const search::PruneResult p = search::prune_space(t.pool.graphs, *oracle, top);
    pruned.push_back({t.pool.subset(p.kept), p.remaining_best});
    out << t.spec.id << ": optimum " << number(*t.optimum) << ", remaining best after top-" << top << ' '
        << number(p.remaining_best) << '\n';
  }

  const auto runs = run_jobs(jobs_for(ctx, o), [&](const Job& job) {
    const Target& t = ctx.targets[job.target];
    std::vector<RunOutcome> outcomes;
    for (search::Method m : arms) {
      const auto oracle = t.make_oracle();
      outcomes.push_back(run_with_oracle({m, o.config(job.seed)}, t.spec, pruned[job.target].pool, *ctx.model,
                                         ctx.means, *oracle, t.optimum, pruned[job.target].remaining_best));
    }
    return outcomes;
  });
  fs::create_directories(o.out);
  write_runs(o.out, runs, out);
  json config = o.echo();
  config["top"] = top;
  config["methods"] = methods;
  write_manifest(o.out, "prune", config, o.seeds(), {{"oracle", o.oracle}}, run_names(runs));
  return 0;
}

// ---------------------------------------------------------------------------
// Other commands

int cmd_gen_bench(const BenchOptions& o, const std::string& dir, std::ostream& out) {
  const Benchmark b = make_benchmark(o.setup());
  save_benchmark(dir, b);
  write_manifest(dir, "gen-bench", o.echo(), {o.seed}, json::object(),
                 {"bench.json", "meta_table.csv", "meta_dataset.csv", "tasks/"});
  out << "wrote " << b.train.size() << " training and " << b.test.size() << " test tasks, " << b.meta_table.size()
      << " meta-table rows and " << b.samples.size() << " meta-dataset samples to " << dir << '\n';
  return 0;
}

int cmd_meta_train(const BenchOptions& bo, const TrainOptions& to, const std::string& dir, std::ostream& out) {
  const Benchmark b = bo.load();
  const TrainedModel trained = train_model(b, to.setup());
  fs::create_directories(dir);
  save_model(fs::path(dir) / "model.ckpt", trained.model);
  {
    auto f = open_out(fs::path(dir) / "meta_objective.csv");
    f << "step,objective\n";
    for (std::size_t i = 0; i < trained.meta.objective.size(); ++i) f << i << ',' << number(trained.meta.objective[i]) << '\n';
  }
  {
    auto f = open_out(fs::path(dir) / "decoder_loss.csv");
    f << "epoch,loss\n";
    for (std::size_t i = 0; i < trained.decoder.epoch_losses.size(); ++i) {
      f << i << ',' << number(trained.decoder.epoch_losses[i]) << '\n';
    }
  }
  json config = to.echo();
  config["benchmark"] = bo.echo();
  write_manifest(dir, "meta-train", config, {to.seed}, bo.echo(), {"model.ckpt", "meta_objective.csv", "decoder_loss.csv"});
  const auto& obj = trained.meta.objective;
  if (!obj.empty()) out << "meta objective " << number(obj.front()) << " -> " << number(obj.back()) << '\n';
  const auto& dec = trained.decoder.epoch_losses;
  if (!dec.empty()) out << "decoder loss " << number(dec.front()) << " -> " << number(dec.back()) << '\n';
  out << "wrote " << (fs::path(dir) / "model.ckpt").string() << '\n';
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& dir, std::ostream& out) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const auto traces = load_traces(paths);
  const auto summaries = summarize(traces, space_key_set());
  fs::create_directories(dir);
  open_out(fs::path(dir) / "summary.json") << summary_json(summaries) << '\n';
  {
    auto f = open_out(fs::path(dir) / "curves.csv");
    write_curves(f, summaries);
  }
  for (const auto& s : summaries) {
    out << s.method << ": " << s.traces << " traces, final best " << number(s.final_mean) << " +- "
        << number(s.final_std);
    if (s.median_regret) out << ", median regret " << number(*s.median_regret);
    out << ", novel evaluations " << s.novel_evaluations;
    if (!s.deltas.empty()) {
      const auto positive = std::count_if(s.deltas.begin(), s.deltas.end(), [](double d) { return d > 0.0; });
      out << ", delta > 0 in " << positive << '/' << s.deltas.size();
    }
    out << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-based NAS with meta-learned deep-kernel Bayesian optimisation", "grabnas"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GRABNAS_VERSION);

  BenchOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-bench", "Generate synthetic tasks and the meta-training table");
  add_bench_options(gen_cmd, gen, false, "--seed");
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();

  BenchOptions train_bench;
  TrainOptions train;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("meta-train", "Meta-train the encoders, surrogate and decoder");
  add_bench_options(train_cmd, train_bench, true, "--bench-seed");
  add_train_options(train_cmd, train, "--seed", "--steps");
  train_cmd->add_option("--out", train_out, "Output directory")->required();

  SearchOptions test;
  bool compare = false;
  auto* test_cmd = app.add_subcommand("meta-test", "Search unseen tasks with the meta-trained model");
  add_search_options(test_cmd, test);
  test_cmd->add_flag("--compare", compare, "Also run random and BO-only at the same oracle-call budget");

  SearchOptions base;
  std::string kind;
  auto* base_cmd = app.add_subcommand("baseline", "Run a baseline search");
  add_search_options(base_cmd, base);
  base_cmd->add_option("--kind", kind, "random, bo-only or knn")
      ->required()
      ->check(CLI::IsMember({"random", "bo-only", "knn"}));

  SearchOptions prune;
  std::size_t top = 50;
  std::vector<std::string> arms{"grabnas", "knn"};
  auto* prune_cmd = app.add_subcommand("prune", "Search with each task's best cells removed from the pool");
  add_search_options(prune_cmd, prune);
  prune_cmd->add_option("--top", top, "Cells removed per task")->check(CLI::PositiveNumber);
  prune_cmd->add_option("--methods", arms, "Search methods to run")->delimiter(',');

  std::vector<std::string> report_in;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Summarise search traces");
  report_cmd->add_option("--traces", report_in, "Trace files or directories")->required();
  report_cmd->add_option("--out", report_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << GRABNAS_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "grabnas: " << e.what() << '\n';
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_bench(gen, gen_out, out);
    if (train_cmd->parsed()) return cmd_meta_train(train_bench, train, train_out, out);
    if (test_cmd->parsed()) return cmd_search(test, "meta-test", search::Method::GraBNAS, compare, out);
    if (base_cmd->parsed()) return cmd_search(base, "baseline", search::method_from_name(kind), false, out);
    if (prune_cmd->parsed()) return cmd_prune(prune, top, arms, out);
    if (report_cmd->parsed()) return cmd_report(report_in, report_out, out);
  } catch (const std::exception& e) {
    // Parse errors list one offending line per row; fold them onto the diagnostic line.
    std::string msg;
    std::istringstream lines(e.what());
    for (std::string line; std::getline(lines, line);) {
      const auto start = line.find_first_not_of(' ');
      if (start == std::string::npos) continue;
      msg += (msg.empty() ? "" : "; ") + line.substr(start);
    }
    err << "grabnas: " << msg << '\n';
    return 1;
  }
  return 1;
}

}  // namespace grabnas::cli
