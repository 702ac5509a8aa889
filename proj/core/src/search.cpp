// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/search.hpp"

#include "grabnas/parallel.hpp"
#include "grabnas/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace grabnas::search {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::string_view kTraceColumns = "iter,source,key,mu,sigma,observed,best_so_far,evals";

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& text) {
  if (text == "nan") return kNaN;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw dag::ParseError("bad number '" + text + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& text) {
  Int v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw dag::ParseError("bad integer '" + text + "'");
  return v;
}

// Strict "a beats b" for (value desc, key asc).
bool better(double va, const std::string& ka, double vb, const std::string& kb) {
  if (va != vb) return va > vb;
  return ka < kb;
}

double predicted_mean(const gp::GPState& state, const gp::Fusion& fusion, const RowVector& dataset,
                      const RowVector& latent, const ad::ParamStore& params) {
  return state.posterior(fusion.fuse(dataset, latent, params).values).mean;
}

}  // namespace

std::string_view source_name(Source s) noexcept {
  switch (s) {
    case Source::Init: return "init";
    case Source::Bo: return "bo";
    case Source::Grad: return "grad";
    case Source::Random: return "random";
  }
  return "init";
}

Source source_from_name(std::string_view name) {
  for (Source s : {Source::Init, Source::Bo, Source::Grad, Source::Random}) {
    if (source_name(s) == name) return s;
  }
  throw dag::ParseError("unknown trace source '" + std::string(name) + "'");
}

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::GraBNAS: return "grabnas";
    case Method::BoOnly: return "bo-only";
    case Method::Knn: return "knn";
    case Method::Random: return "random";
  }
  return "grabnas";
}

Method method_from_name(std::string_view name) {
  for (Method m : {Method::GraBNAS, Method::BoOnly, Method::Knn, Method::Random}) {
    if (method_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown search method '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Support set

void SupportSet::add(SupportPair pair) {
  if (!(pair.performance >= 0.0 && pair.performance <= 1.0)) {
    throw std::invalid_argument("support performance must lie in [0, 1]");
  }
  if (!keys_.insert(pair.key).second) throw std::invalid_argument("graph already in the support set: " + pair.key);
  pairs_.push_back(std::move(pair));
}

Matrix SupportSet::fused_inputs() const {
  if (pairs_.empty()) return {};
  Matrix x(static_cast<Eigen::Index>(pairs_.size()), pairs_.front().fused.size());
  for (std::size_t i = 0; i < pairs_.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = pairs_[i].fused;
  return x;
}

Eigen::VectorXd SupportSet::targets() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(pairs_.size()));
  for (std::size_t i = 0; i < pairs_.size(); ++i) y(static_cast<Eigen::Index>(i)) = pairs_[i].performance;
  return y;
}

const SupportPair& SupportSet::best() const {
  if (pairs_.empty()) throw std::logic_error("empty support set has no best pair");
  const SupportPair* best = &pairs_.front();
  for (const auto& p : pairs_) {
    if (better(p.performance, p.key, best->performance, best->key)) best = &p;
  }
  return *best;
}

void SearchConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("search needs T >= 1");
  if (support < 1) throw std::invalid_argument("search needs B >= 1");
  if (warmup < 0 || warmup > iterations) throw std::invalid_argument("search needs 0 <= T_BO <= T");
  if (!(eta > 0.0)) throw std::invalid_argument("search needs eta > 0");
  if (grad_steps < 1 || max_halvings < 0) throw std::invalid_argument("search needs grad_steps >= 1, halvings >= 0");
}

// ---------------------------------------------------------------------------
// Traces

double SearchTrace::final_best() const {
  if (rows.empty()) throw std::logic_error("empty trace");
  return rows.back().best_so_far;
}

void write_trace(std::ostream& out, const SearchTrace& trace) {
  out << "# method: " << trace.method << '\n';
  out << "# task: " << trace.task << '\n';
  out << "# seed: " << trace.seed << '\n';
  if (trace.optimum) out << "# optimum: " << format_number(*trace.optimum) << '\n';
  if (trace.remaining_best) out << "# remaining_best: " << format_number(*trace.remaining_best) << '\n';
  if (!trace.manifest.empty()) out << "# manifest: " << trace.manifest << '\n';
  out << kTraceColumns << '\n';
  for (const auto& r : trace.rows) {
    out << r.iter << ',' << source_name(r.source) << ',' << bench::csv_field(r.key) << ',' << format_number(r.mu) << ','
        << format_number(r.sigma) << ',' << format_number(r.observed) << ',' << format_number(r.best_so_far) << ','
        << r.evals << '\n';
  }
}

SearchTrace read_trace(std::istream& in, const std::string& source) {
  SearchTrace trace;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  auto fail = [&](const std::string& what) {
    throw dag::ParseError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string name = line.substr(1, colon - 1);
      name.erase(0, name.find_first_not_of(' '));
      std::string value = line.substr(colon + 1);
      value.erase(0, value.find_first_not_of(' '));
      try {
        if (name == "method") trace.method = value;
        else if (name == "task") trace.task = value;
        else if (name == "seed") trace.seed = parse_int<std::uint64_t>(value);
        else if (name == "optimum") trace.optimum = parse_number(value);
        else if (name == "remaining_best") trace.remaining_best = parse_number(value);
        else if (name == "manifest") trace.manifest = value;
      } catch (const dag::ParseError& e) {
        fail(e.what());
      }
      continue;
    }
    if (!header_seen) {
      if (line != kTraceColumns) fail("unexpected trace columns '" + line + "'");
      header_seen = true;
      continue;
    }
    try {
      const auto f = bench::split_csv(line);
      if (f.size() != 8) fail("expected 8 fields, got " + std::to_string(f.size()));
      trace.rows.push_back(TraceRow{parse_int<int>(f[0]), source_from_name(f[1]), f[2], parse_number(f[3]),
                                    parse_number(f[4]), parse_number(f[5]), parse_number(f[6]),
                                    parse_int<std::uint64_t>(f[7])});
    } catch (const dag::ParseError& e) {
      if (std::string_view(e.what()).starts_with(source)) throw;
      fail(e.what());
    }
  }
  if (!header_seen) throw dag::ParseError(source + ": missing trace column header");
  return trace;
}

// ---------------------------------------------------------------------------
// Candidates

CandidatePool CandidatePool::build(std::vector<CellGraph> graphs, const Model& model) {
  CandidatePool pool;
  pool.keys.resize(graphs.size());
  parallel_for(graphs.size(), [&](std::size_t i) { pool.keys[i] = dag::canonical_key(graphs[i]); });
  pool.latents = model.autoencoder().encode_all(graphs, model.params());
  pool.graphs = std::move(graphs);
  return pool;
}

CandidatePool CandidatePool::subset(const std::vector<std::size_t>& indices) const {
  CandidatePool out;
  out.latents.resize(static_cast<Eigen::Index>(indices.size()), latents.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.graphs.push_back(graphs.at(indices[i]));
    out.keys.push_back(keys.at(indices[i]));
    out.latents.row(static_cast<Eigen::Index>(i)) = latents.row(static_cast<Eigen::Index>(indices[i]));
  }
  return out;
}

std::optional<std::size_t> CandidatePool::find(const std::string& key) const {
  auto it = std::find(keys.begin(), keys.end(), key);
  if (it == keys.end()) return std::nullopt;
  return static_cast<std::size_t>(it - keys.begin());
}

MetaMeans meta_means(const bench::MetaTable& table) {
  MetaMeans means;
  for (const auto& entry : table) means[dag::canonical_key(entry.graph)] = entry.mean;
  return means;
}

std::vector<std::size_t> select_initial(const CandidatePool& pool, const MetaMeans& means, std::size_t b) {
  if (b > pool.size()) throw std::invalid_argument("support size exceeds the candidate count");
  std::vector<double> score(pool.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (auto it = means.find(pool.keys[i]); it != means.end()) score[i] = it->second;
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b), order.end(),
                    [&](std::size_t a, std::size_t c) { return better(score[a], pool.keys[a], score[c], pool.keys[c]); });
  order.resize(b);
  return order;
}

BoChoice bo_select(const gp::GPState& state, const Matrix& fused, const CandidatePool& pool, const SupportSet& s) {
  if (fused.rows() != static_cast<Eigen::Index>(pool.size())) {
    throw std::invalid_argument("fused candidate matrix does not match the pool");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!s.contains(pool.keys[i])) eligible.push_back(i);
  }
  if (eligible.empty()) throw std::runtime_error("every candidate is already in the support set");

  // Posterior in blocks so the cross-kernel stays cache sized; blocks run in parallel.
  constexpr std::size_t kBlock = 512;
  const std::size_t blocks = (eligible.size() + kBlock - 1) / kBlock;
  std::vector<double> mean(eligible.size()), variance(eligible.size());
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(eligible.size(), lo + kBlock);
    Matrix queries(static_cast<Eigen::Index>(hi - lo), fused.cols());
    for (std::size_t i = lo; i < hi; ++i) queries.row(static_cast<Eigen::Index>(i - lo)) = fused.row(eligible[i]);
    auto [m, v] = state.posterior_all(queries);
    for (std::size_t i = lo; i < hi; ++i) {
      mean[i] = m(static_cast<Eigen::Index>(i - lo));
      variance[i] = v(static_cast<Eigen::Index>(i - lo));
    }
  });

  const double best = state.best_standardized();
  std::size_t arg = 0;
  double arg_ei = -1.0;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    const double ei = gp::expected_improvement(mean[i], std::sqrt(variance[i]), best);
    if (arg_ei < 0.0 || better(ei, pool.keys[eligible[i]], arg_ei, pool.keys[eligible[arg]])) {
      arg = i;
      arg_ei = ei;
    }
  }
  BoChoice choice;
  choice.index = eligible[arg];
  choice.ei = arg_ei;
  choice.stats = state.posterior(fused.row(static_cast<Eigen::Index>(choice.index)));
  return choice;
}

std::optional<Exploration> gradient_explore(const gp::GPState& state, const SupportSet& s, const Model& model,
                                            const RowVector& dataset, const SearchConfig& config,
                                            ExploreMode mode, const CandidatePool* pool) {
  if (s.empty()) throw std::invalid_argument("gradient exploration needs a non-empty support set");
  if (mode == ExploreMode::Nearest && (pool == nullptr || pool->size() == 0)) {
    throw std::invalid_argument("nearest-candidate exploration needs a pool");
  }
  const auto& params = model.params();
  const auto& fusion = model.fusion();
  RowVector x = s.best().latent;
  const double mu_start = predicted_mean(state, fusion, dataset, x, params);
  double mu = mu_start;
  for (int step = 0; step < config.grad_steps; ++step) {
    const RowVector g = gp::grad_mu_wrt_graph_latent(state, dataset, x, params, fusion);
    double eta = config.eta;
    for (int h = 0; h <= config.max_halvings; ++h, eta *= 0.5) {
      const RowVector candidate = x + eta * g;
      const double mu_candidate = predicted_mean(state, fusion, dataset, candidate, params);
      if (mu_candidate > mu) {
        x = candidate;
        mu = mu_candidate;
        break;
      }
    }
  }

  Exploration out;
  out.latent = x;
  out.mu_before = mu_start;
  out.mu_after = mu;
  if (mode == ExploreMode::Decoder) {
    out.graph = model.autoencoder().decode(x, params);
    out.key = dag::canonical_key(out.graph, model.config().graph.max_nodes);
  } else {
    Eigen::Index nearest = 0;
    (pool->latents.rowwise() - x).rowwise().squaredNorm().minCoeff(&nearest);
    out.graph = pool->graphs[static_cast<std::size_t>(nearest)];
    out.key = pool->keys[static_cast<std::size_t>(nearest)];
  }
  if (s.contains(out.key)) return std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------
// Search loop

namespace {

class Recorder {
 public:
  Recorder(SearchTrace& trace, const bench::Oracle& oracle) : trace_(trace), oracle_(oracle), start_(oracle.calls()) {}

  void record(int iter, Source source, const std::string& key, double mu, double sigma, double observed) {
    best_ = std::max(best_, observed);
    trace_.rows.push_back(TraceRow{iter, source, key, mu, sigma, observed, best_, oracle_.calls() - start_});
  }

 private:
  SearchTrace& trace_;
  const bench::Oracle& oracle_;
  std::uint64_t start_;
  double best_ = -std::numeric_limits<double>::infinity();
};

SearchResult run_random(const SearchInputs& in, const SearchConfig& config, bench::Oracle& oracle,
                        SearchResult result) {
  const CandidatePool& pool = *in.pool;
  const std::size_t budget = std::min(pool.size(), config.support + static_cast<std::size_t>(config.iterations));
  Rng rng(derive_seed(derive_seed(config.seed, "random-search"), in.task->id));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Recorder recorder(result.trace, oracle);
  std::size_t best_index = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < budget; ++i) {
    std::swap(order[i], order[std::uniform_int_distribution<std::size_t>(i, order.size() - 1)(rng)]);
    const std::size_t idx = order[i];
    const double y = oracle.evaluate(pool.graphs[idx]);
    recorder.record(static_cast<int>(i), Source::Random, pool.keys[idx], kNaN, kNaN, y);
    if (better(y, pool.keys[idx], best, best < 0.0 ? pool.keys[idx] : pool.keys[best_index])) {
      best = y;
      best_index = idx;
    }
  }
  result.best = pool.graphs[best_index];
  result.best_performance = best;
  return result;
}

}  // namespace

SearchResult run_search(Method method, const SearchInputs& in, const SearchConfig& config, bench::Oracle& oracle) {
  config.validate();
  if (!in.task || !in.pool || !in.model) throw std::invalid_argument("search inputs are incomplete");
  if (method != Method::Random && !in.means) throw std::invalid_argument("search needs the meta-training means");
  const Model& model = *in.model;
  const CandidatePool& pool = *in.pool;

  SearchResult result;
  result.trace.method = std::string(method_name(method));
  result.trace.task = in.task->id;
  result.trace.seed = config.seed;
  if (method == Method::Random) return run_random(in, config, oracle, std::move(result));

  const auto& params = model.params();
  const RowVector dataset = model.encode_task(*in.task, derive_seed(config.seed, "dataset-sampling")).values;
  const Matrix fused = model.fusion().fuse_all(dataset, pool.latents, params);
  const gp::KernelHypers hypers = model.hypers();

  SupportSet s;
  Recorder recorder(result.trace, oracle);
  for (std::size_t idx : select_initial(pool, *in.means, config.support)) {
    const double y = oracle.evaluate(pool.graphs[idx]);
    const auto row = static_cast<Eigen::Index>(idx);
    s.add({pool.graphs[idx], pool.keys[idx], pool.latents.row(row), fused.row(row), y, Source::Init});
    recorder.record(0, Source::Init, pool.keys[idx], kNaN, kNaN, y);
  }

  const int warmup = method == Method::BoOnly ? config.iterations : config.warmup;
  const ExploreMode mode = method == Method::Knn ? ExploreMode::Nearest : ExploreMode::Decoder;
  for (int t = 1; t <= config.iterations; ++t) {
    {
      const gp::GPState state = gp::gp_fit(s.fused_inputs(), s.targets(), hypers);
      const BoChoice choice = bo_select(state, fused, pool, s);
      const double y = oracle.evaluate(pool.graphs[choice.index]);
      const auto row = static_cast<Eigen::Index>(choice.index);
      s.add({pool.graphs[choice.index], pool.keys[choice.index], pool.latents.row(row), fused.row(row), y, Source::Bo});
      recorder.record(t, Source::Bo, pool.keys[choice.index], choice.stats.original_mean(),
                      choice.stats.original_stddev(), y);
    }
    if (t <= warmup) continue;

    const gp::GPState state = gp::gp_fit(s.fused_inputs(), s.targets(), hypers);
    auto explored = gradient_explore(state, s, model, dataset, config, mode, &pool);
    if (!explored) continue;
    double y = 0.0;
    try {
      y = oracle.evaluate(explored->graph);
    } catch (const bench::UnevaluableError&) {
      ++result.unevaluable;
      continue;
    }
    RowVector latent = config.reencode ? model.autoencoder().encode(explored->graph, params).values : explored->latent;
    RowVector x = model.fusion().fuse(dataset, latent, params).values;
    const gp::PosteriorStats stats = state.posterior(x);
    recorder.record(t, Source::Grad, explored->key, stats.original_mean(), stats.original_stddev(), y);
    s.add({explored->graph, explored->key, std::move(latent), std::move(x), y, Source::Grad});
  }

  const SupportPair& best = s.best();
  result.best = best.graph;
  result.best_performance = best.performance;
  return result;
}

PruneResult prune_space(const std::vector<CellGraph>& candidates, const bench::Oracle& oracle, std::size_t k) {
  if (k >= candidates.size()) throw std::invalid_argument("cannot prune k >= |candidates|");
  std::vector<double> value(candidates.size());
  std::vector<std::string> keys(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    value[i] = oracle.peek(candidates[i]);
    keys[i] = dag::canonical_key(candidates[i]);
  });
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return better(value[a], keys[a], value[b], keys[b]); });
  PruneResult out;
  out.removed.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<bool> dropped(candidates.size(), false);
  for (std::size_t i : out.removed) dropped[i] = true;
  out.remaining_best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (dropped[i]) continue;
    out.kept.push_back(i);
    out.remaining_best = std::max(out.remaining_best, value[i]);
  }
  return out;
}

double best_value(const std::vector<CellGraph>& candidates, const bench::Oracle& oracle) {
  if (candidates.empty()) throw std::invalid_argument("no candidates");
  std::vector<double> value(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) { value[i] = oracle.peek(candidates[i]); });
  return *std::max_element(value.begin(), value.end());
}

}  // namespace grabnas::search
