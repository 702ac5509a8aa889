// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/cli/app.hpp"
#include "grabnas/cli/pipeline.hpp"
#include "grabnas/cli/report.hpp"
#include "testing.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace grabnas;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation run(std::vector<std::string> args) {
  args.insert(args.begin(), "grabnas");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// A trace whose best-so-far climbs to `final_best` over `iters` BO rows.
search::SearchTrace make_trace(const std::string& method, std::uint64_t seed, double final_best, int iters,
                               std::optional<double> optimum, std::optional<double> remaining = std::nullopt) {
  static const auto space = dag::enumerate_search_space();
  search::SearchTrace t;
  t.method = method;
  t.task = "task-020";
  t.seed = seed;
  t.optimum = optimum;
  t.remaining_best = remaining;
  for (int i = 0; i <= iters; ++i) {
    search::TraceRow row;
    row.iter = i;
    row.source = i == 0 ? search::Source::Init : search::Source::Bo;
    row.key = dag::canonical_key(space[seed * 100 + static_cast<std::uint64_t>(i)]);
    row.mu = std::nan("");
    row.sigma = std::nan("");
    row.observed = final_best * (0.5 + 0.5 * i / iters);
    row.best_so_far = row.observed;
    row.evals = static_cast<std::uint64_t>(i + 1);
    t.rows.push_back(row);
  }
  return t;
}

void save(const fs::path& dir, const search::SearchTrace& t) {
  std::ofstream out(dir / cli::trace_file_name(t));
  search::write_trace(out, t);
}

}  // namespace

TEST_CASE("argument errors exit with status 2 and usage") {
  const auto none = run({});
  CHECK(none.code == 2);
  CHECK(none.err.find("grabnas:") != std::string::npos);
  CHECK(none.err.find("Usage") != std::string::npos);

  CHECK(run({"meta-test", "--out", "x", "--no-such-flag"}).code == 2);
  CHECK(run({"report"}).code == 2);
  CHECK(run({"baseline", "--kind", "annealing", "--out", "x"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"--version"}).code == 0);
}

TEST_CASE("report recomputes medians and spreads") {
  const fs::path dir = testing::scratch_dir("cli-report");
  fs::create_directories(dir / "traces");
  const std::vector<double> finals{0.71, 0.80, 0.76, 0.90, 0.66};
  const std::vector<double> other{0.60, 0.62};
  const double optimum = 0.93;
  for (std::size_t i = 0; i < finals.size(); ++i) save(dir / "traces", make_trace("grabnas", i, finals[i], 4, optimum));
  for (std::size_t i = 0; i < other.size(); ++i) save(dir / "traces", make_trace("random", i, other[i], 6, optimum));
  save(dir / "traces", make_trace("knn", 9, 0.5, 3, std::nullopt));

  const auto r = run({"report", "--traces", (dir / "traces").string(), "--out", (dir / "summary").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "summary" / "summary.json"));

  // Sorted regrets 0.03 0.13 0.17 0.22 0.27: median 0.17.
  CHECK(j["grabnas"]["median_regret"].get<double>() == doctest::Approx(0.17).epsilon(1e-12));
  CHECK(j["grabnas"]["traces"] == 5);
  CHECK(j["grabnas"]["final_best_mean"].get<double>() == doctest::Approx(0.766).epsilon(1e-12));
  double ss = 0.0;
  for (double f : finals) ss += (f - 0.766) * (f - 0.766);
  CHECK(j["grabnas"]["final_best_std"].get<double>() == doctest::Approx(std::sqrt(ss / 4.0)).epsilon(1e-12));
  // Two traces: the median is the mean of both regrets.
  CHECK(j["random"]["median_regret"].get<double>() == doctest::Approx(0.32).epsilon(1e-12));
  // One trace, no optimum recorded.
  CHECK(j["knn"]["final_best_std"].get<double>() == 0.0);
  CHECK_FALSE(j["knn"].contains("median_regret"));
  CHECK(j["grabnas"]["novel_evaluations"] == 0);

  // Curves: header plus one row per iteration of the longest method; grabnas ends at 4.
  std::istringstream curves(slurp(dir / "summary" / "curves.csv"));
  std::string line;
  std::getline(curves, line);
  CHECK(line.find("iter") == 0);
  int rows = 0;
  std::string last;
  while (std::getline(curves, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 7);
  CHECK(last.find(",,") != std::string::npos);
}

TEST_CASE("report deltas and schema checks") {
  const fs::path dir = testing::scratch_dir("cli-delta");
  save(dir, make_trace("grabnas", 1, 0.8, 3, 0.9, 0.8));
  save(dir, make_trace("grabnas", 2, 0.85, 3, 0.9, 0.8));
  auto summaries = cli::summarize(cli::load_traces({dir}), cli::space_key_set());
  REQUIRE(summaries.size() == 1);
  REQUIRE(summaries[0].deltas.size() == 2);
  CHECK(summaries[0].deltas[0] == 0.0);
  CHECK(summaries[0].deltas[1] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(json::parse(cli::summary_json(summaries))["grabnas"]["delta_positive"] == 1);

  save(dir, make_trace("grabnas", 3, 0.85, 3, 0.9));
  CHECK_THROWS_AS(cli::summarize(cli::load_traces({dir}), cli::space_key_set()), std::invalid_argument);
  const auto r = run({"report", "--traces", dir.string(), "--out", (dir / "s").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("grabnas:") == 0);

  CHECK_THROWS_AS(cli::summarize({}, cli::space_key_set()), std::invalid_argument);
  CHECK(cli::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(cli::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("benchmark generation round trips through disk") {
  cli::BenchSetup setup;
  setup.seed = 4;
  setup.train_tasks = 3;
  setup.test_tasks = 2;
  setup.per_task = 15;
  const cli::Benchmark b = cli::make_benchmark(setup);
  CHECK(b.train.size() == 3);
  CHECK(b.test.front().spec.id == "task-003");
  CHECK(b.samples.size() == 45);
  CHECK(b.meta_table.size() == b.space.size());
  CHECK_THROWS(b.test_task("task-000"));

  const fs::path dir = testing::scratch_dir("cli-bench");
  cli::save_benchmark(dir, b);
  const cli::Benchmark back = cli::load_benchmark(dir);
  CHECK(back.samples.size() == b.samples.size());
  CHECK(back.test_task("task-004").theta == b.test[1].theta);
}

TEST_CASE("small end-to-end run writes traces, results and a manifest") {
  const fs::path dir = testing::scratch_dir("cli-e2e");
  const std::vector<std::string> common{"--tasks",        "3",  "--test-tasks",     "1", "--per-task", "20",
                                        "--train-steps",  "4",  "--decoder-cells",  "16", "--decoder-epochs", "2",
                                        "--budget",       "4",  "--warmup",         "2", "--support", "3"};
  auto args = std::vector<std::string>{"meta-test", "--compare", "--runs", "2", "--out", (dir / "a").string()};
  args.insert(args.end(), common.begin(), common.end());
  const auto r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "a" / "manifest.json"));
  CHECK(fs::exists(dir / "a" / "results.csv"));
  const auto traces = cli::load_traces({dir / "a" / "traces"});
  CHECK(traces.size() == 6);
  for (const auto& t : traces) {
    CHECK(t.optimum.has_value());
    CHECK(t.manifest == "../manifest.json");
  }
  // Equal budget: every method pays the same number of oracle calls for a seed.
  std::map<std::uint64_t, std::set<std::uint64_t>> budgets;
  for (const auto& t : traces) budgets[t.seed].insert(t.evaluations());
  for (const auto& [seed, b] : budgets) CHECK(b.size() == 1);

  const json manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["command"] == "meta-test");
  CHECK(manifest["seeds"].size() == 2);

  auto base = std::vector<std::string>{"baseline", "--kind", "knn", "--out", (dir / "b").string()};
  base.insert(base.end(), common.begin(), common.end());
  CHECK(run(base).code == 0);
  for (const auto& t : cli::load_traces({dir / "b" / "traces"})) {
    for (const auto& row : t.rows) CHECK(cli::space_key_set().count(row.key) == 1);
  }

  auto tabular = std::vector<std::string>{"meta-test", "--oracle", "tabular:/no/such/file.csv", "--dataset", "cifar10",
                                          "--task-file", "/no/such.task", "--out", (dir / "c").string()};
  tabular.insert(tabular.end(), common.begin(), common.end());
  CHECK(run(tabular).code == 1);
}
