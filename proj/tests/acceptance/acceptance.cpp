// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion with its measured value and wall
// time. Exit status is nonzero when any criterion fails.
//
//   grabnas_acceptance            run everything
//   grabnas_acceptance 3 9        run only the listed criteria

#include "grabnas/cli/app.hpp"
#include "grabnas/cli/pipeline.hpp"
#include "grabnas/cli/report.hpp"
#include "grabnas/search.hpp"
#include "testing.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

using namespace grabnas;
using ad::Matrix;
using ad::RowVector;
using dag::CellGraph;
using gp::KernelHypers;
using gp::Vector;
using testing::numeric_gradient;
using testing::random_matrix;
using testing::rel_error;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Independent oracles

double matern_oracle(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, const Vector& l, double signal) {
  double r2 = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) r2 += std::pow((a(d) - b(d)) / l(d), 2);
  const double r = std::sqrt(r2);
  return signal * (1.0 + std::sqrt(5.0) * r + 5.0 * r2 / 3.0) * std::exp(-std::sqrt(5.0) * r);
}

KernelHypers random_hypers(Eigen::Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  KernelHypers h;
  h.log_lengthscales = Vector(d);
  for (Eigen::Index i = 0; i < d; ++i) h.log_lengthscales(i) = std::log(std::sqrt(static_cast<double>(d))) + u(rng);
  h.log_signal_variance = u(rng);
  h.log_noise_variance = std::log(1e-2) + u(rng);
  return h;
}

// ---------------------------------------------------------------------------
// 1. GP posterior against a dense LU solve

Outcome gp_vs_dense() {
  std::mt19937_64 rng(101);
  double worst_mean = 0.0, worst_var = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 50);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 32);
    const KernelHypers h = random_hypers(d, rng);
    const Matrix x = random_matrix(n, d, rng);
    const Vector y = random_matrix(n, 1, rng);
    const gp::GPState state = gp::gp_fit(x, y, h);

    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) k(i, j) = matern_oracle(x.row(i), x.row(j), h.lengthscales(), h.signal_variance());
    k.diagonal().array() += h.noise_variance();
    const double mean = y.mean();
    double scale = 1.0;
    if (n >= 2) {
      const double var = (y.array() - mean).square().mean();
      if (var > 0.0) scale = std::sqrt(var);
    }
    const Vector ys = (y.array() - mean) / scale;
    const Eigen::FullPivLU<Matrix> lu(k);
    const Vector weights = lu.solve(ys);

    const Matrix probes = random_matrix(10, d, rng);
    for (Eigen::Index p = 0; p < probes.rows(); ++p) {
      Vector kq(n);
      for (Eigen::Index i = 0; i < n; ++i) kq(i) = matern_oracle(x.row(i), probes.row(p), h.lengthscales(), h.signal_variance());
      const double mu = kq.dot(weights);
      const double var = h.signal_variance() - kq.dot(lu.solve(kq));
      const auto stats = state.posterior(probes.row(p));
      worst_mean = std::max(worst_mean, std::abs(stats.mean - mu));
      worst_var = std::max(worst_var, std::abs(stats.raw_variance - var));
    }
  }
  return {worst_mean <= 1e-8 && worst_var <= 1e-8,
          "50 instances, max |dmu| " + fmt(worst_mean) + ", max |dvar| " + fmt(worst_var) + " (tol 1e-8)"};
}

// ---------------------------------------------------------------------------
// 2. Expected improvement against Monte Carlo

Outcome ei_vs_monte_carlo() {
  constexpr int kDraws = 10'000'000;
  const double sigmas[] = {0.0, 0.05, 0.2, 0.5, 1.0};
  const double gaps[] = {-1.0, -0.3, 0.0, 0.5};  // mean - best
  std::mt19937_64 rng(202);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst = 0.0;
  int points = 0;
  for (double sigma : sigmas) {
    for (double gap : gaps) {
      const double best = 0.25;
      const double mu = best + gap;
      double acc = 0.0;
      for (int i = 0; i < kDraws; ++i) acc += std::max(0.0, mu + sigma * n01(rng) - best);
      worst = std::max(worst, std::abs(gp::expected_improvement(mu, sigma, best) - acc / kDraws));
      ++points;
    }
  }
  return {worst <= 1e-3, std::to_string(points) + " grid points incl. sigma=0, 1e7 draws each, max |dEI| " + fmt(worst) +
                             " (tol 1e-3)"};
}

// ---------------------------------------------------------------------------
// 3. Finite-difference gradient suites

double primitive_suite(std::mt19937_64& rng) {
  double worst = 0.0;
  using Unary = std::function<ad::Var(ad::Tape&, ad::Var)>;
  const std::vector<std::pair<Eigen::Index, Unary>> unary = {
      {4, [](ad::Tape&, ad::Var a) { return ad::tanh(a); }},
      {4, [](ad::Tape&, ad::Var a) { return ad::sigmoid(a); }},
      {4, [](ad::Tape&, ad::Var a) { return ad::softmax_rows(a); }},
      {4, [](ad::Tape& t, ad::Var a) { return ad::matmul(a, t.constant(Matrix::Ones(4, 3) * 0.3)); }},
      {4, [](ad::Tape&, ad::Var a) { return ad::transpose(ad::scale(ad::shift(a, 0.2), -1.5)); }},
      {4, [](ad::Tape&, ad::Var a) { return ad::sum_rows(ad::mul(a, a)); }},
      {4, [](ad::Tape& t, ad::Var a) {
         return ad::layer_norm_rows(a, t.constant(Matrix::Constant(1, 4, 1.3)), t.constant(Matrix::Constant(1, 4, 0.1)));
       }},
      {4, [](ad::Tape&, ad::Var a) { return ad::scaled_dot_attention(a, ad::scale(a, 0.7), ad::tanh(a)); }},
      {4, [](ad::Tape&, ad::Var a) { return ad::cross_entropy(ad::row(a, 1), 2); }},
      {4, [](ad::Tape&, ad::Var a) { return ad::bce_with_logit(ad::slice_cols(ad::row(a, 2), 1, 1), 1.0); }},
  };
  for (const auto& [cols, f] : unary) {
    Matrix x = random_matrix(3, cols, rng);
    ad::Tape probe;
    const Matrix w = random_matrix(f(probe, probe.constant(x)).value().rows(), f(probe, probe.constant(x)).value().cols(), rng);
    auto loss = [&] {
      ad::Tape t;
      return ad::sum(ad::mul(f(t, t.constant(x)), t.constant(w))).scalar();
    };
    ad::Tape t;
    const ad::Var in = t.input(x);
    t.backward(ad::sum(ad::mul(f(t, in), t.constant(w))));
    worst = std::max(worst, rel_error(t.grad(in), numeric_gradient(loss, x)));
  }
  return worst;
}

double fuse_suite(std::mt19937_64& rng) {
  const gp::Fusion fusion({8, 6, 10, 4});
  ad::ParamStore params(5);
  fusion.init(params);
  const RowVector xd = random_matrix(1, 8, rng);
  Matrix xg = random_matrix(1, 6, rng);
  const RowVector w = random_matrix(1, 4, rng);
  auto loss = [&] { return fusion.fuse(xd, xg.row(0), params).values.dot(w); };
  ad::Tape t;
  const ad::Var g = t.input(xg);
  const auto grads = t.backward(ad::sum(ad::mul(fusion.fuse(t, t.constant(xd), g, params), t.constant(w))));
  double worst = rel_error(t.grad(g), numeric_gradient(loss, xg));
  for (const auto& [name, grad] : grads) worst = std::max(worst, rel_error(grad, numeric_gradient(loss, params.at(name))));
  return worst;
}

double set_block_suite(std::mt19937_64& rng) {
  dataset::SetEncoderConfig config;
  config.input_dim = 3;
  config.width = 8;
  config.heads = 2;
  config.sab_blocks = 1;
  config.samples_per_class = 3;
  const dataset::SetEncoder enc(config);
  const Matrix y = random_matrix(5, 8, rng);
  double worst = 0.0;
  for (bool pool : {false, true}) {
    ad::ParamStore params(9);
    if (pool) enc.init_pma(params, "b");
    else enc.init_sab(params, "b");
    for (const auto& [name, m] : params.tensors()) params.at(name) += random_matrix(m.rows(), m.cols(), rng, 0.1);
    const Matrix w = random_matrix(pool ? 1 : 5, 8, rng);
    auto forward = [&](ad::Tape& t) {
      const ad::Var in = t.constant(y);
      return ad::sum(ad::mul(pool ? enc.pma(t, in, params, "b") : enc.sab(t, in, params, "b"), t.constant(w)));
    };
    auto loss = [&] {
      ad::Tape t;
      return forward(t).scalar();
    };
    ad::Tape t;
    const auto grads = t.backward(forward(t));
    for (const auto& [name, g] : grads) worst = std::max(worst, rel_error(g, numeric_gradient(loss, params.at(name))));
  }
  return worst;
}

double graph_encoder_suite(std::mt19937_64& rng) {
  gvae::GraphVaeConfig config;
  config.hidden = 6;
  config.latent = 5;
  const gvae::GraphAutoencoder model(config);
  ad::ParamStore params(17);
  model.init_encoder(params);
  for (const auto& [name, m] : params.tensors()) params.at(name) += random_matrix(m.rows(), m.cols(), rng, 0.2);
  const CellGraph g = dag::enumerate_search_space()[9876];
  const Matrix w = random_matrix(1, 5, rng);
  auto loss = [&] {
    ad::Tape t;
    return ad::sum(ad::mul(model.encode(t, g, params), t.constant(w))).scalar();
  };
  ad::Tape t;
  const auto grads = t.backward(ad::sum(ad::mul(model.encode(t, g, params), t.constant(w))));
  double worst = 0.0;
  for (const auto& [name, grad] : grads) worst = std::max(worst, rel_error(grad, numeric_gradient(loss, params.at(name))));
  return worst;
}

double mean_gradient_suite(std::mt19937_64& rng) {
  const gp::Fusion fusion({4, 5, 6, 3});
  double worst = 0.0;
  for (int config = 0; config < 20; ++config) {
    ad::ParamStore params(200 + static_cast<std::uint64_t>(config));
    fusion.init(params);
    const KernelHypers h = random_hypers(3, rng);
    const RowVector xd = random_matrix(1, 4, rng);
    const Matrix fused = fusion.fuse_all(xd, random_matrix(6, 5, rng), params);
    const gp::GPState state = gp::gp_fit(fused, random_matrix(6, 1, rng), h);
    Matrix xg = random_matrix(1, 5, rng);
    const RowVector analytic = gp::grad_mu_wrt_graph_latent(state, xd, xg.row(0), params, fusion);
    const Matrix numeric =
        numeric_gradient([&] { return state.posterior(fusion.fuse(xd, xg.row(0), params).values).mean; }, xg);
    worst = std::max(worst, rel_error(analytic, numeric));
  }
  return worst;
}

double marginal_likelihood_suite(std::mt19937_64& rng) {
  const KernelHypers h = random_hypers(3, rng);
  const Matrix x = random_matrix(8, 3, rng);
  const Vector y = random_matrix(8, 1, rng);
  const auto lml = gp::log_marginal_likelihood(x, y, h);
  Matrix packed(1, 5);
  packed << h.log_lengthscales.transpose(), h.log_signal_variance, h.log_noise_variance;
  const Matrix numeric = numeric_gradient(
      [&] {
        KernelHypers p;
        p.log_lengthscales = packed.leftCols(3).transpose();
        p.log_signal_variance = packed(0, 3);
        p.log_noise_variance = packed(0, 4);
        return gp::log_marginal_likelihood(x, y, p).value;
      },
      packed);
  Matrix analytic(1, 5);
  analytic << lml.hypers.log_lengthscales.transpose(), lml.hypers.log_signal_variance, lml.hypers.log_noise_variance;
  return rel_error(analytic, numeric);
}

Outcome gradient_suites() {
  std::mt19937_64 rng(303);
  const std::vector<std::pair<std::string, double>> suites = {
      {"primitives", primitive_suite(rng)},      {"fuse", fuse_suite(rng)},
      {"sab/pma", set_block_suite(rng)},         {"graph encoder", graph_encoder_suite(rng)},
      {"grad mu (20 configs)", mean_gradient_suite(rng)}, {"lml hypers", marginal_likelihood_suite(rng)},
  };
  double worst = 0.0;
  std::string detail;
  for (const auto& [name, err] : suites) {
    worst = std::max(worst, err);
    detail += (detail.empty() ? "" : ", ") + name + " " + fmt(err, 2);
  }
  return {worst < 1e-4, "max rel err " + fmt(worst, 2) + " (tol 1e-4): " + detail};
}

// ---------------------------------------------------------------------------
// 4. Dataset encoder permutation invariance

Outcome permutation_invariance() {
  const dataset::SetEncoder enc(dataset::SetEncoderConfig{});
  ad::ParamStore params(404);
  enc.init(params);
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (const auto& task : bench::gen_tasks(404, 20)) {
    const RowVector base = enc.encode(task.spec, params, 7).values;
    dataset::TaskSpec shuffled = task.spec;
    std::shuffle(shuffled.classes.begin(), shuffled.classes.end(), rng);
    for (auto& c : shuffled.classes) {
      std::vector<Eigen::Index> p(static_cast<std::size_t>(c.rows()));
      std::iota(p.begin(), p.end(), Eigen::Index{0});
      std::shuffle(p.begin(), p.end(), rng);
      Matrix m(c.rows(), c.cols());
      for (Eigen::Index i = 0; i < c.rows(); ++i) m.row(i) = c.row(p[static_cast<std::size_t>(i)]);
      c = m;
    }
    worst = std::max(worst, (enc.encode(shuffled, params, 7).values - base).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-9, "20 tasks, class and instance shuffles, max |dx_D| " + fmt(worst) + " (tol 1e-9)"};
}

// ---------------------------------------------------------------------------
// 5. Decoder validity fuzz

Outcome decode_fuzz() {
  const gvae::GraphAutoencoder model;
  ad::ParamStore params(505);
  model.init_encoder(params);
  model.init_decoder(params);
  std::mt19937_64 rng(5);
  std::size_t invalid = 0;
  std::size_t max_nodes = 0;
  for (int i = 0; i < 1000; ++i) {
    const CellGraph g = model.decode(random_matrix(1, model.config().latent, rng), params);
    if (!g.is_valid(model.config().max_nodes)) ++invalid;
    max_nodes = std::max(max_nodes, g.size());
  }
  return {invalid == 0, "1000 random latents, " + std::to_string(invalid) + " invalid, largest graph " +
                            std::to_string(max_nodes) + " nodes"};
}

// ---------------------------------------------------------------------------
// 6. Autoencoder memorisation

Outcome memorisation() {
  const gvae::GraphAutoencoder model;
  ad::ParamStore params(606);
  model.init_encoder(params);
  model.init_decoder(params);
  const auto space = dag::enumerate_search_space();
  std::vector<std::size_t> idx(space.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(6);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<CellGraph> cells;
  for (std::size_t i = 0; i < 32; ++i) cells.push_back(space[idx[i]]);

  gvae::AutoencoderTrainConfig config;
  config.epochs = 300;
  config.lr = 5e-3;
  config.batch_size = 8;
  config.seed = 6;
  const auto result = gvae::train_autoencoder(cells, params, model, config);
  int exact = 0;
  for (const auto& g : cells) {
    if (dag::canonical_key(model.decode(model.encode(g, params).values, params)) == dag::canonical_key(g)) ++exact;
  }
  return {exact >= 30, std::to_string(exact) + "/32 reconstructed (need >= 30), final loss " +
                           fmt(result.epoch_losses.back())};
}

// ---------------------------------------------------------------------------
// 7 and 8 share one benchmark and one trained model.

struct World {
  cli::Benchmark bench;
  Model model;
  search::MetaMeans means;
  search::CandidatePool pool;
  double train_seconds = 0.0;
};

World& world() {
  static World* w = [] {
    const auto start = std::chrono::steady_clock::now();
    cli::BenchSetup setup;
    setup.seed = 0;
    setup.train_tasks = 20;
    setup.test_tasks = 5;
    cli::Benchmark b = cli::make_benchmark(setup);
    Model m = cli::train_model(b, cli::TrainSetup{}).model;
    auto* out = new World{std::move(b), std::move(m), {}, {}, 0.0};
    out->means = search::meta_means(out->bench.meta_table);
    out->pool = search::CandidatePool::build(out->bench.space, out->model);
    out->train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }();
  return *w;
}

search::SearchConfig paper_config(std::uint64_t seed) {
  search::SearchConfig c;
  c.iterations = 30;
  c.warmup = 5;
  c.support = 5;
  c.seed = seed;
  return c;
}

Outcome end_to_end() {
  World& w = world();
  std::vector<double> grab, rnd, bo;
  for (const auto& task : w.bench.test) {
    const double optimum = search::best_value(w.bench.space, bench::SyntheticOracle(task));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto c = cli::compare_equal_budget(paper_config(seed), task, w.pool, w.model, w.means, optimum);
      if (c.random.oracle_calls != c.grabnas.oracle_calls || c.bo_only.oracle_calls != c.grabnas.oracle_calls) {
        return {false, "unequal oracle budgets"};
      }
      grab.push_back(c.grabnas.regret);
      rnd.push_back(c.random.regret);
      bo.push_back(c.bo_only.regret);
    }
  }
  const double mg = cli::median(grab), mr = cli::median(rnd), mb = cli::median(bo);
  return {mg <= mr && mg <= mb, "20/5 tasks x 5 seeds, median regret grabnas " + fmt(mg) + ", random " + fmt(mr) +
                                    ", bo-only " + fmt(mb) + " (model training " + fmt(w.train_seconds, 3) + " s)"};
}

struct PruneStats {
  std::size_t runs = 0;
  std::size_t out_of_set = 0;
  std::size_t reached = 0;   // runs with best found >= remaining best
  std::size_t positive = 0;  // runs with best found > remaining best
  std::size_t knn_out_of_set = 0;
  std::vector<std::size_t> out_of_set_per_task;
};

// Same task set as the end-to-end criterion: every held-out task, seeds 0..4.
PruneStats prune_runs(double eta, bool with_knn) {
  World& w = world();
  PruneStats s;
  for (const auto& task : w.bench.test) {
    const bench::SyntheticOracle probe(task);
    const auto pruned = search::prune_space(w.pool.graphs, probe, 50);
    const search::CandidatePool pool = w.pool.subset(pruned.kept);
    const std::unordered_set<std::string> keys(pool.keys.begin(), pool.keys.end());
    const double optimum = search::best_value(w.bench.space, probe);
    std::size_t task_out = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      search::SearchConfig config = paper_config(seed);
      config.eta = eta;
      const auto r = cli::run_synthetic({search::Method::GraBNAS, config}, task, pool, w.model, w.means, optimum,
                                        pruned.remaining_best);
      ++s.runs;
      for (const auto& row : r.result.trace.rows) task_out += keys.count(row.key) == 0 ? 1 : 0;
      s.reached += r.result.best_performance >= pruned.remaining_best ? 1 : 0;
      s.positive += r.result.best_performance > pruned.remaining_best ? 1 : 0;
      if (with_knn) {
        const auto k = cli::run_synthetic({search::Method::Knn, config}, task, pool, w.model, w.means, optimum,
                                          pruned.remaining_best);
        for (const auto& row : k.result.trace.rows) s.knn_out_of_set += keys.count(row.key) == 0 ? 1 : 0;
      }
    }
    s.out_of_set += task_out;
    s.out_of_set_per_task.push_back(task_out);
  }
  return s;
}

Outcome pruning() {
  const PruneStats s = prune_runs(1e-2, true);
  std::string per_task;
  for (std::size_t n : s.out_of_set_per_task) per_task += (per_task.empty() ? "" : "/") + std::to_string(n);
  return {s.out_of_set >= 1 && s.reached >= 1 && s.knn_out_of_set == 0,
          "top-50 removed, 5 tasks x 5 seeds: grabnas out-of-set evals " + std::to_string(s.out_of_set) + " (per task " +
              per_task + "), best >= remaining in " + std::to_string(s.reached) + "/" + std::to_string(s.runs) +
              " (> in " + std::to_string(s.positive) + "), knn out-of-set evals " + std::to_string(s.knn_out_of_set)};
}

// ---------------------------------------------------------------------------
// 9. Tabular fixtures

Outcome fixtures() {
  const auto table = std::make_shared<const bench::PerfTable>(bench::load_tabular(testing::data_path("cifar10_top12.csv")));
  std::vector<CellGraph> cells;
  for (const auto& row : table->rows()) cells.push_back(dag::from_edge_spec(row.cell));
  const bench::TabularOracle oracle(table, "cifar10");
  const double remaining = 100.0 * search::prune_space(cells, oracle, 10).remaining_best;
  const double optimum = 100.0 * search::best_value(cells, oracle);

  const auto small = std::make_shared<const bench::PerfTable>(bench::load_tabular(testing::data_path("cifar10_optimum.csv")));
  std::vector<CellGraph> small_cells;
  for (const auto& row : small->rows()) small_cells.push_back(dag::from_edge_spec(row.cell));
  const double small_optimum = 100.0 * search::best_value(small_cells, bench::TabularOracle(small, "cifar10"));

  const bool ok = std::abs(remaining - 94.22) < 1e-9 && std::abs(optimum - 94.37) < 1e-9 &&
                  std::abs(small_optimum - 94.37) < 1e-9;
  return {ok, "top-10 remaining best " + fmt(remaining, 6) + " (want 94.22), optimum " + fmt(optimum, 6) +
                  " and 3-line optimum " + fmt(small_optimum, 6) + " (want 94.37)"};
}

// ---------------------------------------------------------------------------
// 10. Byte-identical meta-test reruns

int cli(const std::vector<std::string>& args, std::string& err) {
  std::vector<const char*> argv{"grabnas"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, e;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, e);
  err = e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path dir = testing::scratch_dir("acceptance-determinism");
  const std::string bench = (dir / "bench").string(), model = (dir / "model").string();
  std::string err;
  if (cli({"gen-bench", "--seed", "3", "--tasks", "6", "--test-tasks", "2", "--per-task", "40", "--out", bench}, err) != 0 ||
      cli({"meta-train", "--bench", bench, "--seed", "1", "--steps", "30", "--decoder-cells", "100",
           "--decoder-epochs", "5", "--out", model},
          err) != 0) {
    return {false, "setup failed: " + err};
  }
  std::vector<fs::path> runs;
  for (const char* name : {"run-a", "run-b"}) {
    runs.push_back(dir / name);
    if (cli({"meta-test", "--bench", bench, "--model", model + "/model.ckpt", "--compare", "--runs", "2", "--seed", "4",
             "--budget", "12", "--out", runs.back().string()},
            err) != 0) {
      return {false, "meta-test failed: " + err};
    }
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(runs[0])) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), runs[0]);
    if (!fs::exists(runs[1] / rel) || slurp(entry.path()) != slurp(runs[1] / rel)) ++differing;
  }
  std::size_t traces = 0;
  for (const auto& entry : fs::directory_iterator(runs[0] / "traces")) traces += entry.is_regular_file() ? 1 : 0;
  return {differing == 0 && traces > 0, std::to_string(files) + " files (" + std::to_string(traces) + " traces), " +
                                            std::to_string(differing) + " differ between runs"};
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "GP posterior matches dense solve", 10, gp_vs_dense},
      {2, "EI matches Monte Carlo", 60, ei_vs_monte_carlo},
      {3, "gradient suites match finite differences", 120, gradient_suites},
      {4, "dataset encoder permutation invariance", 10, permutation_invariance},
      {5, "decoded graphs are always valid", 30, decode_fuzz},
      {6, "autoencoder memorises 32 cells", 300, memorisation},
      {7, "end-to-end search beats random and bo-only", 1200, end_to_end},
      {8, "pruned space: decoder reaches beyond the candidates", 1200, pruning},
      {9, "tabular fixtures reproduce reference accuracies", 1, fixtures},
      {10, "meta-test reruns are byte-identical", 120, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && selected.count(c.id) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && seconds < c.limit_seconds;
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << c.id << "] " << c.name << ": " << o.detail
              << " | " << std::fixed << std::setprecision(1) << seconds << " s (limit " << std::setprecision(0)
              << c.limit_seconds << " s)" << std::defaultfloat << std::endl;
  }

  // Not a criterion: how often the decoder arm strictly beats the remaining best with a
  // large ascent step, tracked so regressions in the exploration path stay visible.
  if (selected.empty() || selected.count(8) != 0) {
    const PruneStats s = prune_runs(1.0, false);
    std::cout << "INFO  pruned space, eta=1.0: best > remaining in " << s.positive << "/" << s.runs
              << " runs, out-of-set evals " << s.out_of_set << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
