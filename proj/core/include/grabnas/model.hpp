// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// The full learned stack (dataset encoder, graph autoencoder, fusion MLP, GP kernel
// hyperparameters) in one ParamStore, plus marginal-likelihood meta-training.

#pragma once

#include "grabnas/bench.hpp"
#include "grabnas/graph_vae.hpp"
#include "grabnas/set_encoder.hpp"
#include "grabnas/surrogate.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace grabnas {

struct ModelConfig {
  dataset::SetEncoderConfig dataset;
  gvae::GraphVaeConfig graph;
  gp::FusionConfig fusion;
  double init_signal_variance = 1.0;
  double init_noise_variance = 0.05;

  // Consistent widths for the given embedding sizes; the dataset and graph latents
  // share latent_dim.
  static ModelConfig make(Eigen::Index latent_dim = 56, Eigen::Index fused_dim = 32, Eigen::Index input_dim = 8);
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

class Model {
 public:
  // Fresh parameters from seed.
  Model(ModelConfig config, std::uint64_t seed);
  // Existing parameters; throws std::invalid_argument if a tensor is missing.
  Model(ModelConfig config, ad::ParamStore params);

  const ModelConfig& config() const noexcept { return config_; }
  ad::ParamStore& params() noexcept { return params_; }
  const ad::ParamStore& params() const noexcept { return params_; }
  const dataset::SetEncoder& dataset_encoder() const noexcept { return dataset_encoder_; }
  const gvae::GraphAutoencoder& autoencoder() const noexcept { return autoencoder_; }
  const gp::Fusion& fusion() const noexcept { return fusion_; }
  gp::KernelHypers hypers() const { return gp::KernelHypers::from_params(params_); }

  dataset::DatasetEmbedding encode_task(const dataset::TaskSpec& task, std::uint64_t sample_seed = 0) const;

 private:
  ModelConfig config_;
  ad::ParamStore params_;
  dataset::SetEncoder dataset_encoder_;
  gvae::GraphAutoencoder autoencoder_;
  gp::Fusion fusion_;
};

// The configuration travels as checkpoint metadata.
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

struct MetaTrainConfig {
  int steps = 200;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
};

struct MetaTrainResult {
  // Per step, the batch log marginal likelihood per observation before that step's update.
  std::vector<double> objective;
};

// Log marginal likelihood per observation of standardised performances on one task,
// through the dataset encoder, graph encoder, fusion MLP and kernel. With grads set,
// receives d objective / d parameter for every parameter (zero when unreached).
double meta_objective(const Model& model, const dataset::TaskSpec& task, std::span<const dag::CellGraph> graphs,
                      const Eigen::VectorXd& performance, std::uint64_t sample_seed, ad::GradMap* grads = nullptr);

// Each step picks one task uniformly, draws a batch of its observations without
// replacement and takes one clipped Adam ascent step. Decoder weights are untouched.
// Throws std::invalid_argument when no task has two observations.
MetaTrainResult meta_train(const std::vector<bench::MetaSample>& samples,
                           const std::map<std::string, dataset::TaskSpec>& tasks, Model& model,
                           const MetaTrainConfig& config);

}  // namespace grabnas
