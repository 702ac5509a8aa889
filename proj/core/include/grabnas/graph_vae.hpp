// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// GRU message-passing graph encoder (forward and reverse passes) and a sequential
// node-by-node graph decoder. The autoencoder is deterministic: encode() returns a
// point embedding and decode() is greedy.

#pragma once

#include "grabnas/autodiff.hpp"
#include "grabnas/dag.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace grabnas::gvae {

using ad::Matrix;
using ad::ParamStore;
using ad::RowVector;
using ad::Tape;
using ad::Var;
using dag::CellGraph;

struct GraphLatent {
  RowVector values;
};

struct GraphVaeConfig {
  Eigen::Index hidden = 64;
  Eigen::Index latent = 56;
  std::size_t max_nodes = dag::kDefaultMaxNodes;
};

// Decoder output classes: the five searchable ops, then END.
inline constexpr Eigen::Index kDecoderClasses = dag::kNumSearchableOps + 1;
inline constexpr Eigen::Index kEndClass = dag::kNumSearchableOps;

class GraphAutoencoder {
 public:
  explicit GraphAutoencoder(GraphVaeConfig config = {}, std::string prefix = "gvae");

  const GraphVaeConfig& config() const noexcept { return config_; }
  std::string encoder_prefix() const { return prefix_ + ".enc."; }
  std::string decoder_prefix() const { return prefix_ + ".dec."; }

  void init_encoder(ParamStore& params) const;
  void init_decoder(ParamStore& params) const;

  // Throws dag::GraphError on an invalid graph.
  Var encode(Tape& tape, const CellGraph& g, const ParamStore& params) const;
  GraphLatent encode(const CellGraph& g, const ParamStore& params) const;
  // One row per graph.
  Matrix encode_all(std::span<const CellGraph> graphs, const ParamStore& params) const;

  // Greedy decode; the result always satisfies the CellGraph invariants.
  CellGraph decode(const RowVector& z, const ParamStore& params) const;

  // Node cross-entropy plus edge binary cross-entropy of generating g (in canonical
  // order) from latent z, conditioning every step on the true prefix.
  Var teacher_forcing_loss(Tape& tape, const CellGraph& g, Var z, const ParamStore& params) const;

 private:
  void init_gru(ParamStore& params, const std::string& block) const;
  void init_message(ParamStore& params, const std::string& block) const;
  Var gru(Tape& tape, Var x, Var h, const ParamStore& params, const std::string& block) const;
  Var message(Tape& tape, Var h, const ParamStore& params, const std::string& block) const;
  Var propagate(Tape& tape, const CellGraph& g, const std::vector<std::size_t>& order, bool reverse,
                const ParamStore& params) const;
  Var edge_logit(Tape& tape, Var from, Var to, const ParamStore& params) const;
  Var node_logits(Tape& tape, Var state, const ParamStore& params) const;

  GraphVaeConfig config_;
  std::string prefix_;
};

struct AutoencoderTrainConfig {
  int epochs = 200;
  double lr = 5e-3;
  // 0 trains on the whole set each step.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  double clip_norm = 10.0;
};

struct AutoencoderTrainResult {
  // Per epoch, the mean of the batch losses, each taken before that batch's update.
  // With a single batch, entry e is exactly the loss of the parameters entering epoch e.
  std::vector<double> epoch_losses;
};

// Updates only decoder parameters; encoder parameters are read as frozen.
AutoencoderTrainResult train_autoencoder(std::span<const CellGraph> graphs, ParamStore& params,
                                         const GraphAutoencoder& model, const AutoencoderTrainConfig& config);

// Mean teacher-forced loss over graphs using frozen-encoder latents.
double reconstruction_loss(std::span<const CellGraph> graphs, const ParamStore& params,
                           const GraphAutoencoder& model);

}  // namespace grabnas::gvae
