// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/bench.hpp"

#include "grabnas/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace grabnas::bench {

namespace {

using dag::OpKind;

// Base preference shared by every task; tasks move away from it along their factors.
const Vector& base_theta() {
  static const Vector theta = [] {
    Vector t(kDescriptorDim);
    t << -2.0, 0.0, 1.0, 1.5, 0.0, 1.5, -0.5, 1.0;
    return t;
  }();
  return theta;
}

constexpr double kBaseBias = -2.5;

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

std::string task_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "task-%03zu", index);
  return buf;
}

SyntheticTask make_task(std::uint64_t seed, std::size_t index, const BenchConfig& config, const Matrix& mixing,
                        const Matrix& preference) {
  Rng rng(derive_seed(derive_seed(seed, "bench.task"), static_cast<std::uint64_t>(index)));
  const Vector factors = gaussian(rng, config.task_factors, 1, 1.0).col(0);

  SyntheticTask task;
  task.spec.id = task_id(index);
  task.theta = base_theta() + preference * factors;
  task.bias = kBaseBias + 0.2 * gaussian(rng, 1, 1, 1.0)(0, 0);
  task.noise = config.noise;

  const Vector centre_shared = mixing * factors;
  for (std::size_t c = 0; c < config.classes; ++c) {
    const Vector centre = centre_shared + gaussian(rng, config.feature_dim, 1, 0.3).col(0);
    Matrix instances = gaussian(rng, static_cast<Eigen::Index>(config.instances_per_class), config.feature_dim, 0.5);
    instances.rowwise() += centre.transpose();
    task.spec.classes.push_back(std::move(instances));
  }
  return task;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

// Calls row(fields, line_number) for each content line; collects every failure.
template <typename Fn>
void read_csv_lines(std::istream& in, const std::string& source, Fn&& row) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> problems;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    try {
      std::vector<std::string> fields = split_csv(content);
      for (auto& f : fields) f = trim(f);
      row(fields);
    } catch (const std::exception& e) {
      problems.push_back(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string message = std::to_string(problems.size()) + " malformed line(s)";
    for (const auto& p : problems) message += "\n  " + p;
    throw dag::ParseError(message);
  }
}

void expect_fields(const std::vector<std::string>& fields, std::size_t n) {
  if (fields.size() != n) {
    throw dag::ParseError("expected " + std::to_string(n) + " fields, got " + std::to_string(fields.size()));
  }
}

double number_field(const std::string& text, const char* what) {
  double v = 0.0;
  if (!parse_double(text, v)) throw dag::ParseError(std::string("bad ") + what + " '" + text + "'");
  return v;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Vector descriptor(const CellGraph& g) {
  Vector d = Vector::Zero(kDescriptorDim);
  std::size_t op_nodes = 0;
  std::size_t skips = 0;
  for (OpKind op : g.nodes()) {
    if (!dag::is_searchable(op)) continue;
    d(static_cast<Eigen::Index>(dag::op_index(op))) += 1.0;
    ++op_nodes;
    if (op == OpKind::Skip) ++skips;
  }
  d.head(dag::kNumSearchableOps) /= 6.0;

  // Longest INPUT -> OUTPUT path that never passes a zeroize node, counted in op nodes;
  // -1 marks nodes the signal cannot reach.
  std::vector<int> reach(g.size(), -1);
  int depth = 0;
  for (std::size_t v : dag::topological_order(g)) {
    const OpKind op = g.op(v);
    if (op == OpKind::Input) {
      reach[v] = 0;
      continue;
    }
    if (op == OpKind::Zeroize) continue;
    int best = -1;
    for (std::size_t u : g.predecessors(v)) best = std::max(best, reach[u]);
    if (best < 0) continue;
    reach[v] = best + (dag::is_searchable(op) ? 1 : 0);
    if (op == OpKind::Output) depth = std::max(depth, reach[v]);
  }
  d(5) = depth / 3.0;
  d(6) = op_nodes == 0 ? 0.0 : static_cast<double>(skips) / static_cast<double>(op_nodes);

  std::size_t live_edges = 0;
  for (const auto& [a, b] : g.edges()) {
    if (g.op(a) != OpKind::Zeroize && g.op(b) != OpKind::Zeroize) ++live_edges;
  }
  d(7) = static_cast<double>(live_edges) / 10.0;
  return d;
}

std::vector<SyntheticTask> gen_tasks(std::uint64_t seed, std::size_t n_tasks, const BenchConfig& config) {
  if (n_tasks == 0) throw std::invalid_argument("gen_tasks needs at least one task");
  return gen_tasks(seed, 0, n_tasks, config);
}

std::vector<SyntheticTask> gen_tasks(std::uint64_t seed, std::size_t first, std::size_t count,
                                     const BenchConfig& config) {
  if (count == 0) throw std::invalid_argument("gen_tasks needs at least one task");
  if (config.classes < 2 || config.instances_per_class < 1 || config.feature_dim < 1 || config.task_factors < 1) {
    throw std::invalid_argument("bench config needs >= 2 classes, >= 1 instance, positive widths");
  }
  if (config.noise < 0.0) throw std::invalid_argument("noise level must be >= 0");
  Rng global(derive_seed(seed, "bench.global"));
  const Matrix mixing = gaussian(global, config.feature_dim, config.task_factors, 1.0);
  const Matrix preference = gaussian(global, kDescriptorDim, config.task_factors, 1.0);
  std::vector<SyntheticTask> tasks;
  tasks.reserve(count);
  for (std::size_t i = first; i < first + count; ++i) tasks.push_back(make_task(seed, i, config, mixing, preference));
  return tasks;
}

double true_perf(const CellGraph& g, const SyntheticTask& task, std::uint64_t noise_seed) {
  double logit = task.theta.dot(descriptor(g)) + task.bias;
  if (task.noise > 0.0) {
    Rng rng(derive_seed(derive_seed(noise_seed, task.spec.id), dag::canonical_key(g)));
    logit += std::normal_distribution<double>(0.0, task.noise)(rng);
  }
  return 1.0 / (1.0 + std::exp(-logit));
}

// ---------------------------------------------------------------------------
// Tabular files

void PerfTable::add(const TabularRow& row) {
  if (!(row.accuracy >= 0.0 && row.accuracy <= 100.0)) {
    throw std::invalid_argument("accuracy " + format_number(row.accuracy) + " outside [0, 100]");
  }
  const std::string key = dag::canonical_key(dag::from_edge_spec(row.cell));
  auto [it, inserted] = index_[key].emplace(row.dataset, row.accuracy);
  if (!inserted) throw std::invalid_argument("duplicate entry for " + row.cell.to_string() + " on " + row.dataset);
  rows_.push_back(row);
}

bool PerfTable::contains(const std::string& key, const std::string& dataset) const {
  auto it = index_.find(key);
  return it != index_.end() && it->second.count(dataset) != 0;
}

double PerfTable::accuracy(const std::string& key, const std::string& dataset) const {
  auto it = index_.find(key);
  if (it != index_.end()) {
    auto jt = it->second.find(dataset);
    if (jt != it->second.end()) return jt->second;
  }
  throw UnevaluableError("no tabular entry for " + key + " on " + dataset);
}

std::vector<std::string> PerfTable::datasets() const {
  std::vector<std::string> out;
  for (const auto& row : rows_) {
    if (std::find(out.begin(), out.end(), row.dataset) == out.end()) out.push_back(row.dataset);
  }
  return out;
}

PerfTable parse_tabular(std::istream& in, const std::string& source) {
  PerfTable table;
  read_csv_lines(in, source, [&](const std::vector<std::string>& fields) {
    expect_fields(fields, 3);
    if (fields[1].empty()) throw dag::ParseError("empty dataset id");
    table.add(TabularRow{dag::EdgeSpec::parse(fields[0]), fields[1], number_field(fields[2], "accuracy")});
  });
  return table;
}

PerfTable load_tabular(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_tabular(in, path.string());
}

void write_tabular(std::ostream& out, const PerfTable& table) {
  for (const auto& row : table.rows()) {
    out << row.cell.to_string() << ',' << csv_field(row.dataset) << ',' << format_number(row.accuracy) << '\n';
  }
}

TabularOracle::TabularOracle(std::shared_ptr<const PerfTable> table, std::string dataset)
    : table_(std::move(table)), dataset_(std::move(dataset)) {
  if (!table_) throw std::invalid_argument("tabular oracle needs a table");
}

double TabularOracle::peek(const CellGraph& g) const {
  return table_->accuracy(dag::canonical_key(g), dataset_) / 100.0;
}

// ---------------------------------------------------------------------------
// Meta-table and meta-dataset

MetaTable build_meta_table(const std::vector<CellGraph>& cells, const std::vector<SyntheticTask>& tasks) {
  if (tasks.empty()) throw std::invalid_argument("meta-table needs at least one task");
  MetaTable table;
  table.reserve(cells.size());
  for (const auto& g : cells) {
    double total = 0.0;
    for (const auto& task : tasks) total += true_perf(g, task);
    table.push_back({g, total / static_cast<double>(tasks.size())});
  }
  return table;
}

void write_meta_table(std::ostream& out, const MetaTable& table) {
  for (const auto& entry : table) out << csv_field(dag::format_cell(entry.graph)) << ',' << format_number(entry.mean) << '\n';
}

MetaTable read_meta_table(std::istream& in, const std::string& source) {
  MetaTable table;
  read_csv_lines(in, source, [&](const std::vector<std::string>& fields) {
    expect_fields(fields, 2);
    table.push_back({dag::parse_cell(fields[0]), number_field(fields[1], "mean")});
  });
  return table;
}

std::vector<MetaSample> sample_meta_dataset(const std::vector<CellGraph>& cells,
                                            const std::vector<SyntheticTask>& tasks, std::size_t per_task,
                                            std::uint64_t seed) {
  if (per_task > cells.size()) throw std::invalid_argument("per-task sample exceeds the cell count");
  std::vector<MetaSample> out;
  out.reserve(per_task * tasks.size());
  std::vector<std::size_t> index(cells.size());
  for (const auto& task : tasks) {
    std::iota(index.begin(), index.end(), std::size_t{0});
    Rng rng(derive_seed(seed, task.spec.id));
    // Partial Fisher-Yates: the first per_task slots are a uniform sample.
    for (std::size_t i = 0; i < per_task; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, index.size() - 1);
      std::swap(index[i], index[pick(rng)]);
      const CellGraph& g = cells[index[i]];
      out.push_back({task.spec.id, g, true_perf(g, task)});
    }
  }
  return out;
}

void write_meta_samples(std::ostream& out, const std::vector<MetaSample>& samples) {
  for (const auto& s : samples) {
    out << csv_field(s.task_id) << ',' << csv_field(dag::format_cell(s.graph)) << ',' << format_number(s.performance)
        << '\n';
  }
}

std::vector<MetaSample> read_meta_samples(std::istream& in, const std::string& source) {
  std::vector<MetaSample> samples;
  read_csv_lines(in, source, [&](const std::vector<std::string>& fields) {
    expect_fields(fields, 3);
    samples.push_back({fields[0], dag::parse_cell(fields[1]), number_field(fields[2], "performance")});
  });
  return samples;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw dag::ParseError("unterminated quote");
  return fields;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace grabnas::bench
