// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/bench.hpp"
#include "grabnas/search.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

using namespace grabnas;
using ad::Matrix;
using ad::RowVector;
using bench::PerfTable;
using dag::CellGraph;
using dag::EdgeSpec;
using dag::OpKind;

namespace {

CellGraph uniform(OpKind op) {
  EdgeSpec s;
  s.ops.fill(op);
  return dag::from_edge_spec(s);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

const char* kOptimum = "|nor_conv_3x3~0|+|nor_conv_3x3~0|nor_conv_3x3~1|+|skip_connect~0|nor_conv_3x3~1|nor_conv_3x3~2|";

}  // namespace

TEST_CASE("descriptor of hand-counted cells") {
  // All 3x3 convs: six conv nodes, a three-op path, ten live edges.
  const bench::Vector conv = bench::descriptor(uniform(OpKind::Conv3x3));
  const bench::Vector expect_conv = (bench::Vector(8) << 0, 0, 0, 1, 0, 1, 0, 1).finished();
  CHECK((conv - expect_conv).cwiseAbs().maxCoeff() < 1e-15);

  // All zeroize: nothing reaches the output and no edge is live.
  const bench::Vector none = bench::descriptor(uniform(OpKind::Zeroize));
  const bench::Vector expect_none = (bench::Vector(8) << 1, 0, 0, 0, 0, 0, 0, 0).finished();
  CHECK((none - expect_none).cwiseAbs().maxCoeff() < 1e-15);

  const bench::Vector skip = bench::descriptor(uniform(OpKind::Skip));
  CHECK(skip(6) == 1.0);
}

TEST_CASE("synthetic tasks are deterministic and diverse") {
  CHECK_THROWS_AS(bench::gen_tasks(1, 0), std::invalid_argument);
  const auto a = bench::gen_tasks(7, 20);
  const auto b = bench::gen_tasks(7, 20);
  REQUIRE(a.size() == 20);
  CHECK(a[3].theta == b[3].theta);
  CHECK(a[3].spec.classes[0] == b[3].spec.classes[0]);
  CHECK(a[0].spec.id == "task-000");
  // The held-out stream continues the same sequence.
  const auto tail = bench::gen_tasks(7, 18, 2, bench::BenchConfig{});
  CHECK(tail[0].theta == a[18].theta);
  CHECK(tail[1].spec.id == "task-019");

  const auto space = dag::enumerate_search_space();
  std::set<std::string> winners;
  for (const auto& task : a) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < space.size(); ++i) {
      const double v = bench::true_perf(space[i], task);
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    winners.insert(dag::canonical_key(space[arg]));
    // best_value is the same exhaustive maximum.
    CHECK(search::best_value(space, bench::SyntheticOracle(task)) == best);
  }
  CHECK(winners.size() >= 2);

  std::vector<double> p0, p1;
  for (std::size_t i = 0; i < 200; ++i) {
    p0.push_back(bench::true_perf(space[i * 71], a[0]));
    p1.push_back(bench::true_perf(space[i * 71], a[1]));
  }
  CHECK(spearman(p0, p1) < 1.0);
  CHECK(bench::true_perf(space[5], a[2]) == bench::true_perf(space[5], b[2]));
}

TEST_CASE("noisy tasks are reproducible per seed") {
  bench::BenchConfig config;
  config.noise = 0.3;
  const auto task = bench::gen_tasks(3, 0, 1, config).front();
  const CellGraph g = uniform(OpKind::Conv1x1);
  CHECK(bench::true_perf(g, task, 5) == bench::true_perf(g, task, 5));
  CHECK(bench::true_perf(g, task, 5) != bench::true_perf(g, task, 6));
}

TEST_CASE("the three-line fixture holds the optimum") {
  const PerfTable table = bench::load_tabular(testing::data_path("cifar10_optimum.csv"));
  REQUIRE(table.size() == 3);
  double best = 0.0;
  for (const auto& row : table.rows()) best = std::max(best, row.accuracy);
  CHECK(best == 94.37);
  CHECK(table.rows().front().cell == EdgeSpec::parse(kOptimum));
  CHECK(table.datasets() == std::vector<std::string>{"cifar10"});
}

TEST_CASE("tabular parse errors name the offending lines") {
  std::stringstream in(std::string(kOptimum) + ",cifar10,94.37\n# comment\n\n" + kOptimum + ",cifar10\nx,y,z\n");
  try {
    bench::parse_tabular(in, "bad.csv");
    FAIL("expected a parse error");
  } catch (const dag::ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.csv:4") != std::string::npos);
    CHECK(msg.find("bad.csv:5") != std::string::npos);
    CHECK(msg.find("bad.csv:1") == std::string::npos);
  }
}

TEST_CASE("tabular round trip, duplicates and the oracle") {
  const PerfTable table = bench::load_tabular(testing::data_path("cifar10_top12.csv"));
  CHECK(table.size() == 12);
  std::stringstream buf;
  bench::write_tabular(buf, table);
  const PerfTable back = bench::parse_tabular(buf);
  CHECK(back.rows() == table.rows());

  PerfTable dup;
  dup.add({EdgeSpec::parse(kOptimum), "cifar10", 94.37});
  CHECK_THROWS_AS(dup.add({EdgeSpec::parse(kOptimum), "cifar10", 90.0}), std::invalid_argument);
  CHECK_NOTHROW(dup.add({EdgeSpec::parse(kOptimum), "cifar100", 73.51}));
  CHECK_THROWS_AS(dup.add({EdgeSpec::parse("|none|none|none|none|none|none|"), "cifar10", 101.0}), std::invalid_argument);

  auto shared = std::make_shared<const PerfTable>(table);
  bench::TabularOracle oracle(shared, "cifar10");
  const CellGraph best = dag::from_edge_spec(EdgeSpec::parse(kOptimum));
  CHECK(oracle.peek(best) == doctest::Approx(0.9437).epsilon(1e-15));
  CHECK(oracle.calls() == 0);
  oracle.evaluate(best);
  CHECK(oracle.calls() == 1);
  CHECK_THROWS_AS(oracle.evaluate(uniform(OpKind::AvgPool3x3)), bench::UnevaluableError);
  CHECK(oracle.calls() == 1);
  bench::TabularOracle other(shared, "cifar100");
  CHECK_THROWS_AS(other.peek(best), bench::UnevaluableError);
}

TEST_CASE("meta table and meta samples round trip") {
  const auto tasks = bench::gen_tasks(11, 3);
  const auto space = dag::enumerate_search_space();
  const std::vector<CellGraph> cells(space.begin(), space.begin() + 40);

  const auto table = bench::build_meta_table(cells, tasks);
  REQUIRE(table.size() == 40);
  double mean = 0.0;
  for (const auto& t : tasks) mean += bench::true_perf(cells[7], t);
  CHECK(table[7].mean == doctest::Approx(mean / 3.0).epsilon(1e-14));
  std::stringstream tbuf;
  bench::write_meta_table(tbuf, table);
  const auto table_back = bench::read_meta_table(tbuf);
  REQUIRE(table_back.size() == 40);
  CHECK(table_back[7].graph == table[7].graph);
  CHECK(table_back[7].mean == table[7].mean);

  const auto samples = bench::sample_meta_dataset(cells, tasks, 10, 2);
  CHECK(samples.size() == 30);
  std::set<std::string> first_task;
  for (const auto& s : samples) {
    if (s.task_id == "task-000") first_task.insert(dag::canonical_key(s.graph));
  }
  CHECK(first_task.size() == 10);
  std::stringstream sbuf;
  bench::write_meta_samples(sbuf, samples);
  const auto samples_back = bench::read_meta_samples(sbuf);
  REQUIRE(samples_back.size() == samples.size());
  CHECK(samples_back[4].performance == samples[4].performance);
  CHECK(samples_back[4].graph == samples[4].graph);
  CHECK_THROWS_AS(bench::sample_meta_dataset(cells, tasks, 41, 2), std::invalid_argument);
}

TEST_CASE("csv helpers") {
  CHECK(bench::split_csv("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(bench::split_csv("\"x,y\",\"say \"\"hi\"\"\"") == std::vector<std::string>{"x,y", "say \"hi\""});
  CHECK(bench::csv_field("plain") == "plain");
  CHECK(bench::csv_field("a,b") == "\"a,b\"");
  CHECK(bench::split_csv(bench::csv_field("q\"uote,")) == std::vector<std::string>{"q\"uote,"});
}
