// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/model.hpp"

#include "grabnas/checkpoint.hpp"
#include "grabnas/optim.hpp"
#include "grabnas/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace grabnas {

namespace {

using nlohmann::json;

const std::string kFormatTag = "grabnas-model";

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("model config: " + what);
}

}  // namespace

ModelConfig ModelConfig::make(Eigen::Index latent_dim, Eigen::Index fused_dim, Eigen::Index input_dim) {
  ModelConfig c;
  c.dataset.input_dim = input_dim;
  c.dataset.width = latent_dim;
  c.graph.latent = latent_dim;
  c.fusion.dataset_dim = latent_dim;
  c.fusion.graph_dim = latent_dim;
  c.fusion.fused_dim = fused_dim;
  return c;
}

void ModelConfig::validate() const {
  require(dataset.input_dim > 0 && dataset.width > 0, "dataset widths must be positive");
  require(dataset.heads > 0 && dataset.width % dataset.heads == 0, "head count must divide the dataset width");
  require(dataset.sab_blocks >= 0 && dataset.samples_per_class >= 1, "bad dataset encoder depth or sampling");
  require(graph.hidden > 0 && graph.latent > 0, "graph widths must be positive");
  require(graph.max_nodes >= 3, "max_nodes must allow INPUT, one op and OUTPUT");
  require(fusion.dataset_dim == dataset.width, "fusion dataset_dim must equal the dataset width");
  require(fusion.graph_dim == graph.latent, "fusion graph_dim must equal the graph latent width");
  require(fusion.hidden > 0 && fusion.fused_dim > 0, "fusion widths must be positive");
  require(init_signal_variance > 0.0 && init_noise_variance > 0.0, "kernel variances must be positive");
}

std::string ModelConfig::to_json() const {
  json j;
  j["format"] = kFormatTag;
  j["dataset"] = {{"input_dim", dataset.input_dim},
                  {"width", dataset.width},
                  {"heads", dataset.heads},
                  {"sab_blocks", dataset.sab_blocks},
                  {"samples_per_class", dataset.samples_per_class}};
  j["graph"] = {{"hidden", graph.hidden}, {"latent", graph.latent}, {"max_nodes", graph.max_nodes}};
  j["fusion"] = {{"dataset_dim", fusion.dataset_dim},
                 {"graph_dim", fusion.graph_dim},
                 {"hidden", fusion.hidden},
                 {"fused_dim", fusion.fused_dim}};
  j["kernel"] = {{"init_signal_variance", init_signal_variance}, {"init_noise_variance", init_noise_variance}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    if (j.value("format", std::string{}) != kFormatTag) throw std::invalid_argument("not a model checkpoint");
    const json& d = j.at("dataset");
    c.dataset.input_dim = d.at("input_dim").get<Eigen::Index>();
    c.dataset.width = d.at("width").get<Eigen::Index>();
    c.dataset.heads = d.at("heads").get<Eigen::Index>();
    c.dataset.sab_blocks = d.at("sab_blocks").get<int>();
    c.dataset.samples_per_class = d.at("samples_per_class").get<std::size_t>();
    const json& g = j.at("graph");
    c.graph.hidden = g.at("hidden").get<Eigen::Index>();
    c.graph.latent = g.at("latent").get<Eigen::Index>();
    c.graph.max_nodes = g.at("max_nodes").get<std::size_t>();
    const json& f = j.at("fusion");
    c.fusion.dataset_dim = f.at("dataset_dim").get<Eigen::Index>();
    c.fusion.graph_dim = f.at("graph_dim").get<Eigen::Index>();
    c.fusion.hidden = f.at("hidden").get<Eigen::Index>();
    c.fusion.fused_dim = f.at("fused_dim").get<Eigen::Index>();
    const json& k = j.at("kernel");
    c.init_signal_variance = k.at("init_signal_variance").get<double>();
    c.init_noise_variance = k.at("init_noise_variance").get<double>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Model::Model(ModelConfig config, std::uint64_t seed)
    : config_(config),
      params_(seed),
      dataset_encoder_(config.dataset),
      autoencoder_(config.graph),
      fusion_(config.fusion) {
  config_.validate();
  dataset_encoder_.init(params_);
  autoencoder_.init_encoder(params_);
  autoencoder_.init_decoder(params_);
  fusion_.init(params_);
  // Fused coordinates start at O(1) per dimension, so the squared distance grows with the width.
  gp::KernelHypers::isotropic(config_.fusion.fused_dim, std::sqrt(static_cast<double>(config_.fusion.fused_dim)),
                              config_.init_signal_variance, config_.init_noise_variance)
      .init_params(params_);
}

Model::Model(ModelConfig config, ad::ParamStore params)
    : config_(config),
      params_(std::move(params)),
      dataset_encoder_(config.dataset),
      autoencoder_(config.graph),
      fusion_(config.fusion) {
  config_.validate();
  // A reference store built the same way names every tensor this model reads.
  const Model reference(config_, params_.seed());
  for (const auto& [name, value] : reference.params().tensors()) {
    if (!params_.contains(name)) throw std::invalid_argument("checkpoint lacks tensor " + name);
    if (params_.at(name).rows() != value.rows() || params_.at(name).cols() != value.cols()) {
      throw std::invalid_argument("checkpoint tensor " + name + " has the wrong shape");
    }
  }
}

dataset::DatasetEmbedding Model::encode_task(const dataset::TaskSpec& task, std::uint64_t sample_seed) const {
  return dataset_encoder_.encode(task, params_, sample_seed);
}

void save_model(const std::filesystem::path& path, const Model& model) {
  ad::save_checkpoint(path, model.params(), model.config().to_json());
}

Model load_model(const std::filesystem::path& path) {
  ad::Checkpoint ckpt = ad::load_checkpoint(path);
  return Model(ModelConfig::from_json(ckpt.metadata), std::move(ckpt.params));
}

double meta_objective(const Model& model, const dataset::TaskSpec& task, std::span<const dag::CellGraph> graphs,
                      const Eigen::VectorXd& performance, std::uint64_t sample_seed, ad::GradMap* grads) {
  const auto n = static_cast<Eigen::Index>(graphs.size());
  if (n < 2 || performance.size() != n) throw std::invalid_argument("meta objective needs >= 2 matched observations");
  const ad::ParamStore& params = model.params();

  ad::Tape tape;
  ad::Var xd = model.dataset_encoder().encode(tape, task, params, sample_seed);
  std::vector<ad::Var> rows;
  rows.reserve(graphs.size());
  for (const auto& g : graphs) rows.push_back(model.autoencoder().encode(tape, g, params));
  ad::Var fused = model.fusion().fuse(tape, xd, ad::concat_rows(rows), params);

  // Same standardisation the search applies before fitting.
  const double mean = performance.mean();
  const double var = (performance.array() - mean).square().mean();
  const double scale = var > 0.0 ? std::sqrt(var) : 1.0;
  const Eigen::VectorXd y = (performance.array() - mean) / scale;

  const gp::KernelHypers hypers = model.hypers();
  const gp::MarginalLikelihood lml = gp::log_marginal_likelihood(fused.value(), y, hypers);
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grads != nullptr) {
    *grads = tape.backward(fused, lml.inputs * inv_n);
    (*grads)["gp.log_lengthscale"] = lml.hypers.log_lengthscales.transpose() * inv_n;
    (*grads)["gp.log_signal"] = ad::Matrix::Constant(1, 1, lml.hypers.log_signal_variance * inv_n);
    (*grads)["gp.log_noise"] = ad::Matrix::Constant(1, 1, lml.hypers.log_noise_variance * inv_n);
    ad::fill_missing(*grads, params);
  }
  return lml.value * inv_n;
}

MetaTrainResult meta_train(const std::vector<bench::MetaSample>& samples,
                           const std::map<std::string, dataset::TaskSpec>& tasks, Model& model,
                           const MetaTrainConfig& config) {
  if (samples.empty()) throw std::invalid_argument("meta-dataset is empty");
  if (config.steps < 0 || config.batch_size < 2) throw std::invalid_argument("meta-train needs steps >= 0, batch >= 2");

  // Observations grouped per task, in task-id order.
  std::map<std::string, std::vector<std::size_t>> by_task;
  for (std::size_t i = 0; i < samples.size(); ++i) by_task[samples[i].task_id].push_back(i);
  std::vector<std::string> usable;
  for (const auto& [id, rows] : by_task) {
    if (rows.size() < 2) continue;
    if (tasks.count(id) == 0) throw std::invalid_argument("meta-dataset names unknown task " + id);
    usable.push_back(id);
  }
  if (usable.empty()) throw std::invalid_argument("meta-train needs a task with at least two observations");

  const std::string decoder = model.autoencoder().decoder_prefix();
  ad::Adam adam(config.lr);
  adam.set_filter([&](const std::string& name) { return name.rfind(decoder, 0) != 0; });
  Rng rng(derive_seed(config.seed, "meta-train"));

  MetaTrainResult result;
  result.objective.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 0; step < config.steps; ++step) {
    const std::string& id =
        usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)];
    std::vector<std::size_t> pool = by_task[id];
    const std::size_t batch = std::min(config.batch_size, pool.size());
    for (std::size_t i = 0; i < batch; ++i) {
      std::swap(pool[i], pool[std::uniform_int_distribution<std::size_t>(i, pool.size() - 1)(rng)]);
    }
    std::vector<dag::CellGraph> graphs;
    Eigen::VectorXd perf(static_cast<Eigen::Index>(batch));
    for (std::size_t i = 0; i < batch; ++i) {
      graphs.push_back(samples[pool[i]].graph);
      perf(static_cast<Eigen::Index>(i)) = samples[pool[i]].performance;
    }

    ad::GradMap grads;
    const double value = meta_objective(model, tasks.at(id), graphs, perf,
                                        derive_seed(config.seed, static_cast<std::uint64_t>(step)), &grads);
    result.objective.push_back(value);
    for (auto& [name, g] : grads) g = -g;  // Adam minimises
    ad::clip_global_norm(grads, config.clip_norm);
    adam.step(model.params(), grads);
  }
  return result;
}

}  // namespace grabnas
