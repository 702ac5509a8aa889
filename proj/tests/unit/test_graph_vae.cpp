// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/graph_vae.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace grabnas;
using ad::Matrix;
using ad::RowVector;
using dag::CellGraph;
using gvae::GraphAutoencoder;
using gvae::GraphVaeConfig;
using testing::numeric_gradient;
using testing::random_matrix;
using testing::rel_error;

namespace {

ad::ParamStore fresh(const GraphAutoencoder& model, std::uint64_t seed) {
  ad::ParamStore params(seed);
  model.init_encoder(params);
  model.init_decoder(params);
  return params;
}

std::vector<CellGraph> sample_cells(std::size_t n, std::uint64_t seed) {
  const auto space = dag::enumerate_search_space();
  std::vector<std::size_t> idx(space.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<CellGraph> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(space[idx[i]]);
  return out;
}

}  // namespace

TEST_CASE("encoding is deterministic, fixed-width and separates cells") {
  const GraphAutoencoder model;
  const auto params = fresh(model, 1);
  const auto cells = sample_cells(200, 3);
  const auto a = model.encode(cells[0], params).values;
  CHECK(a.size() == 56);
  CHECK(model.encode(cells[0], params).values == a);

  const Matrix all = model.encode_all(cells, params);
  CHECK(all.row(0) == a);
  double smallest = 1e300;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto d = (all.row(static_cast<Eigen::Index>(2 * i)) - all.row(static_cast<Eigen::Index>(2 * i + 1))).norm();
    smallest = std::min(smallest, d);
  }
  CHECK(smallest > 0.0);
}

TEST_CASE("encoding ignores node storage order") {
  const GraphAutoencoder model;
  const auto params = fresh(model, 2);
  std::mt19937_64 rng(5);
  for (const auto& g : sample_cells(20, 4)) {
    std::vector<std::size_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto p = dag::permute_nodes(g, perm);
    CHECK((model.encode(p, params).values - model.encode(g, params).values).cwiseAbs().maxCoeff() < 1e-9);
  }
  const CellGraph broken({dag::OpKind::Input, dag::OpKind::Skip, dag::OpKind::Output}, {{0, 2}});
  CHECK_THROWS_AS(model.encode(broken, params), dag::GraphError);
}

TEST_CASE("decoding random latents always yields valid graphs") {
  const GraphAutoencoder model;
  const auto params = fresh(model, 6);
  std::mt19937_64 rng(7);
  std::size_t failures = 0;
  for (int i = 0; i < 200; ++i) {
    const ad::RowVector z = random_matrix(1, 56, rng);
    const CellGraph g = model.decode(z, params);
    if (!g.is_valid(model.config().max_nodes) || g.size() > model.config().max_nodes) ++failures;
    if (dag::canonical_key(model.decode(z, params)) != dag::canonical_key(g)) ++failures;
  }
  CHECK(failures == 0);
  CHECK_THROWS(model.decode(ad::RowVector::Zero(5), params));
}

TEST_CASE("decoder loss gradient matches finite differences") {
  GraphVaeConfig config;
  config.hidden = 6;
  config.latent = 5;
  const GraphAutoencoder model(config);
  auto params = fresh(model, 9);
  const CellGraph g = sample_cells(1, 11).front();
  std::mt19937_64 rng(3);
  const ad::RowVector z = random_matrix(1, 5, rng);
  auto loss = [&] {
    ad::Tape t;
    return model.teacher_forcing_loss(t, g, t.constant(z), params).scalar();
  };
  ad::Tape t;
  const auto grads = t.backward(model.teacher_forcing_loss(t, g, t.constant(z), params));
  double worst = 0.0;
  std::size_t decoder_tensors = 0;
  for (const auto& [name, grad] : grads) {
    if (name.rfind(model.decoder_prefix(), 0) != 0) continue;
    ++decoder_tensors;
    worst = std::max(worst, rel_error(grad, numeric_gradient(loss, params.at(name))));
  }
  CHECK(decoder_tensors > 10);
  CHECK(worst < 1e-4);
}

TEST_CASE("encoder gradient matches finite differences") {
  GraphVaeConfig config;
  config.hidden = 6;
  config.latent = 5;
  const GraphAutoencoder model(config);
  auto params = fresh(model, 13);
  std::mt19937_64 rng(8);
  // Nonzero biases and source states so every term is exercised.
  for (const auto& [name, m] : params.tensors()) {
    if (name.rfind(model.encoder_prefix(), 0) == 0) params.at(name) += random_matrix(m.rows(), m.cols(), rng, 0.2);
  }
  const CellGraph g = sample_cells(1, 21).front();
  const ad::RowVector w = random_matrix(1, 5, rng);
  auto loss = [&] {
    ad::Tape t;
    return ad::sum(ad::mul(model.encode(t, g, params), t.constant(w))).scalar();
  };
  ad::Tape t;
  const auto grads = t.backward(ad::sum(ad::mul(model.encode(t, g, params), t.constant(w))));
  double worst = 0.0;
  for (const auto& [name, grad] : grads) worst = std::max(worst, rel_error(grad, numeric_gradient(loss, params.at(name))));
  CHECK(worst < 1e-4);
}

TEST_CASE("teacher-forced training updates only the decoder and lowers the loss") {
  const GraphAutoencoder model;
  auto params = fresh(model, 0);
  const auto before = params;
  const auto cells = sample_cells(32, 0);
  const double initial = gvae::reconstruction_loss(cells, params, model);

  gvae::AutoencoderTrainConfig config;
  config.epochs = 15;
  config.batch_size = 0;
  config.seed = 0;
  const auto result = gvae::train_autoencoder(cells, params, model, config);
  REQUIRE(result.epoch_losses.size() == 15);
  CHECK(result.epoch_losses.front() == doctest::Approx(initial).epsilon(1e-12));
  CHECK(result.epoch_losses.back() < result.epoch_losses.front());

  for (const auto& [name, m] : params.tensors()) {
    if (name.rfind(model.encoder_prefix(), 0) == 0) CHECK(m == before.at(name));
  }

  auto again = fresh(model, 0);
  CHECK(gvae::train_autoencoder(cells, again, model, config).epoch_losses == result.epoch_losses);

  CHECK_THROWS_AS(gvae::train_autoencoder({}, params, model, config), std::invalid_argument);
}
