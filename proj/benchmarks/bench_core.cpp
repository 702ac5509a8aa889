// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths of a search: scoring the whole candidate space with
// expected improvement, encoding and decoding cells, and fitting the GP.

#include "grabnas/graph_vae.hpp"
#include "grabnas/surrogate.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace grabnas;

namespace {

ad::Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_GpFit(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const ad::Matrix x = gaussian(n, 32, 1);
  const gp::Vector y = gaussian(n, 1, 2);
  const auto hypers = gp::KernelHypers::isotropic(32, 4.0, 1.0, 1e-2);
  for (auto _ : state) benchmark::DoNotOptimize(gp::gp_fit(x, y, hypers));
}
BENCHMARK(BM_GpFit)->Arg(5)->Arg(35)->Arg(65);

// Posterior and EI for every cell of the 15625-cell space against a support of 35.
void BM_EiScan(benchmark::State& state) {
  const ad::Matrix support = gaussian(35, 32, 3);
  const gp::GPState gp_state = gp::gp_fit(support, gaussian(35, 1, 4), gp::KernelHypers::isotropic(32, 4.0, 1.0, 1e-2));
  const ad::Matrix candidates = gaussian(15625, 32, 5);
  for (auto _ : state) {
    const auto [mean, var] = gp_state.posterior_all(candidates);
    double best = 0.0;
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      best = std::max(best, gp::expected_improvement(mean(i), std::sqrt(var(i)), gp_state.best_standardized()));
    }
    benchmark::DoNotOptimize(best);
  }
  state.SetItemsProcessed(state.iterations() * candidates.rows());
}
BENCHMARK(BM_EiScan)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& state) {
  const gvae::GraphAutoencoder model;
  ad::ParamStore params(6);
  model.init_encoder(params);
  const auto space = dag::enumerate_search_space();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.encode(space[(i++ * 7919) % space.size()], params));
}
BENCHMARK(BM_Encode);

void BM_Decode(benchmark::State& state) {
  const gvae::GraphAutoencoder model;
  ad::ParamStore params(7);
  model.init_decoder(params);
  const ad::Matrix z = gaussian(64, model.config().latent, 8);
  Eigen::Index i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.decode(z.row(i++ % z.rows()), params));
}
BENCHMARK(BM_Decode);

}  // namespace

BENCHMARK_MAIN();
