// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/graph_vae.hpp"

#include "grabnas/optim.hpp"
#include "grabnas/parallel.hpp"
#include "grabnas/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace grabnas::gvae {

namespace {

Matrix one_hot(dag::OpKind op) {
  Matrix m = Matrix::Zero(1, static_cast<Eigen::Index>(dag::kNumOpKinds));
  m(0, static_cast<Eigen::Index>(dag::op_index(op))) = 1.0;
  return m;
}

Eigen::Index decoder_class(dag::OpKind op) {
  if (!dag::is_searchable(op)) throw dag::GraphError("decoder cannot emit '" + std::string(dag::op_name(op)) + "'");
  return static_cast<Eigen::Index>(dag::op_index(op));
}

}  // namespace

GraphAutoencoder::GraphAutoencoder(GraphVaeConfig config, std::string prefix)
    : config_(config), prefix_(std::move(prefix)) {
  if (config_.hidden < 1 || config_.latent < 1) throw std::invalid_argument("autoencoder widths must be positive");
  if (config_.max_nodes < 2) throw std::invalid_argument("max_nodes must leave room for input and output");
}

void GraphAutoencoder::init_gru(ParamStore& params, const std::string& block) const {
  const auto in = static_cast<Eigen::Index>(dag::kNumOpKinds);
  const auto h = config_.hidden;
  for (const char* gate : {"r", "z", "n"}) {
    params.create(block + ".wx" + gate, in, h);
    params.create(block + ".wh" + gate, h, h);
    params.create(block + ".bx" + gate, 1, h, ad::Init::Zeros);
    params.create(block + ".bh" + gate, 1, h, ad::Init::Zeros);
  }
}

void GraphAutoencoder::init_message(ParamStore& params, const std::string& block) const {
  params.create(block + ".gate.w", config_.hidden, config_.hidden);
  params.create(block + ".gate.b", 1, config_.hidden, ad::Init::Zeros);
  params.create(block + ".map.w", config_.hidden, config_.hidden);
}

void GraphAutoencoder::init_encoder(ParamStore& params) const {
  const std::string p = encoder_prefix();
  for (const char* dir : {"fwd", "rev"}) {
    init_gru(params, p + dir + ".gru");
    init_message(params, p + dir);
    params.create(p + dir + ".source", 1, config_.hidden, ad::Init::Zeros);
  }
  params.create(p + "out.w1", 2 * config_.hidden, config_.hidden);
  params.create(p + "out.b1", 1, config_.hidden, ad::Init::Zeros);
  params.create(p + "out.w2", config_.hidden, config_.latent);
  params.create(p + "out.b2", 1, config_.latent, ad::Init::Zeros);
}

void GraphAutoencoder::init_decoder(ParamStore& params) const {
  const std::string p = decoder_prefix();
  params.create(p + "init.w", config_.latent, config_.hidden);
  params.create(p + "init.b", 1, config_.hidden, ad::Init::Zeros);
  init_gru(params, p + "gru");
  init_message(params, prefix_ + ".dec");
  params.create(p + "node.w1", config_.hidden, config_.hidden);
  params.create(p + "node.b1", 1, config_.hidden, ad::Init::Zeros);
  params.create(p + "node.w2", config_.hidden, kDecoderClasses);
  params.create(p + "node.b2", 1, kDecoderClasses, ad::Init::Zeros);
  params.create(p + "edge.w1", 2 * config_.hidden, config_.hidden);
  params.create(p + "edge.b1", 1, config_.hidden, ad::Init::Zeros);
  params.create(p + "edge.w2", config_.hidden, 1);
  params.create(p + "edge.b2", 1, 1, ad::Init::Zeros);
}

Var GraphAutoencoder::gru(Tape& tape, Var x, Var h, const ParamStore& params, const std::string& block) const {
  auto gate_input = [&](const char* g) {
    const std::string s(g);
    return ad::add(ad::linear(x, tape.param(params, block + ".wx" + s), tape.param(params, block + ".bx" + s)),
                   ad::linear(h, tape.param(params, block + ".wh" + s), tape.param(params, block + ".bh" + s)));
  };
  Var r = ad::sigmoid(gate_input("r"));
  Var z = ad::sigmoid(gate_input("z"));
  Var hn = ad::linear(h, tape.param(params, block + ".whn"), tape.param(params, block + ".bhn"));
  Var n = ad::tanh(ad::add(ad::linear(x, tape.param(params, block + ".wxn"), tape.param(params, block + ".bxn")),
                           ad::mul(r, hn)));
  return ad::add(n, ad::mul(z, ad::sub(h, n)));
}

Var GraphAutoencoder::message(Tape& tape, Var h, const ParamStore& params, const std::string& block) const {
  Var gate = ad::sigmoid(ad::linear(h, tape.param(params, block + ".gate.w"), tape.param(params, block + ".gate.b")));
  return ad::mul(gate, ad::matmul(h, tape.param(params, block + ".map.w")));
}

Var GraphAutoencoder::propagate(Tape& tape, const CellGraph& g, const std::vector<std::size_t>& order, bool reverse,
                                const ParamStore& params) const {
  const std::string block = encoder_prefix() + (reverse ? "rev" : "fwd");
  std::vector<std::vector<std::size_t>> incoming(g.size());
  for (const auto& [s, d] : g.edges()) {
    if (reverse) {
      incoming[s].push_back(d);
    } else {
      incoming[d].push_back(s);
    }
  }
  std::vector<Var> messages(g.size());
  Var last;
  auto visit = [&](std::size_t v) {
    Var h_in;
    if (incoming[v].empty()) {
      h_in = tape.param(params, block + ".source");
    } else {
      h_in = messages[incoming[v].front()];
      for (std::size_t i = 1; i < incoming[v].size(); ++i) h_in = ad::add(h_in, messages[incoming[v][i]]);
    }
    last = gru(tape, tape.constant(one_hot(g.op(v))), h_in, params, block + ".gru");
    messages[v] = message(tape, last, params, block);
  };
  if (reverse) {
    for (auto it = order.rbegin(); it != order.rend(); ++it) visit(*it);
  } else {
    for (std::size_t v : order) visit(v);
  }
  return last;
}

Var GraphAutoencoder::encode(Tape& tape, const CellGraph& g, const ParamStore& params) const {
  g.validate(config_.max_nodes);
  const auto order = dag::topological_order(g);
  Var forward = propagate(tape, g, order, false, params);
  Var backward = propagate(tape, g, order, true, params);
  const std::string p = encoder_prefix();
  const Var both[] = {forward, backward};
  Var h = ad::tanh(ad::linear(ad::concat_cols(both), tape.param(params, p + "out.w1"), tape.param(params, p + "out.b1")));
  return ad::linear(h, tape.param(params, p + "out.w2"), tape.param(params, p + "out.b2"));
}

GraphLatent GraphAutoencoder::encode(const CellGraph& g, const ParamStore& params) const {
  Tape tape;
  return GraphLatent{encode(tape, g, params).value().row(0)};
}

Matrix GraphAutoencoder::encode_all(std::span<const CellGraph> graphs, const ParamStore& params) const {
  Matrix out(static_cast<Eigen::Index>(graphs.size()), config_.latent);
  parallel_for(graphs.size(), [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = encode(graphs[i], params).values;
  });
  return out;
}

namespace {

// Messages of the accepted predecessors plus one from the graph state h_{v_{k-1}}. The
// graph-state term keeps two nodes with the same op and the same predecessors from
// collapsing onto one hidden state, which would make their later edges undecidable.
Var incoming(Var context, const std::vector<Var>& messages, const std::vector<std::size_t>& preds) {
  Var h_in = context;
  for (std::size_t l : preds) h_in = ad::add(h_in, messages[l]);
  return h_in;
}

}  // namespace

Var GraphAutoencoder::edge_logit(Tape& tape, Var from, Var to, const ParamStore& params) const {
  const std::string p = decoder_prefix();
  const Var pair[] = {from, to};
  Var h = ad::tanh(ad::linear(ad::concat_cols(pair), tape.param(params, p + "edge.w1"), tape.param(params, p + "edge.b1")));
  return ad::linear(h, tape.param(params, p + "edge.w2"), tape.param(params, p + "edge.b2"));
}

Var GraphAutoencoder::node_logits(Tape& tape, Var state, const ParamStore& params) const {
  const std::string p = decoder_prefix();
  Var h = ad::tanh(ad::linear(state, tape.param(params, p + "node.w1"), tape.param(params, p + "node.b1")));
  return ad::linear(h, tape.param(params, p + "node.w2"), tape.param(params, p + "node.b2"));
}

CellGraph GraphAutoencoder::decode(const RowVector& z, const ParamStore& params) const {
  if (z.size() != config_.latent) throw ad::ShapeError("latent width mismatch");
  if (!z.allFinite()) throw std::invalid_argument("latent has non-finite entries");
  const std::string p = decoder_prefix();
  Tape tape;
  std::vector<dag::OpKind> nodes{dag::OpKind::Input};
  std::vector<dag::Edge> edges;
  std::vector<Var> states{
      ad::tanh(ad::linear(tape.constant(z), tape.param(params, p + "init.w"), tape.param(params, p + "init.b")))};
  std::vector<Var> messages{message(tape, states.front(), params, prefix_ + ".dec")};

  while (nodes.size() + 1 < config_.max_nodes) {
    const Matrix& logits = node_logits(tape, states.back(), params).value();
    Eigen::Index cls = 0;
    logits.row(0).maxCoeff(&cls);
    if (cls == kEndClass) break;
    const dag::OpKind op = dag::kSearchableOps[static_cast<std::size_t>(cls)];
    const Var x = tape.constant(one_hot(op));
    const std::size_t k = nodes.size();
    const Var context = message(tape, states.back(), params, prefix_ + ".dec");
    Var h = gru(tape, x, context, params, p + "gru");
    std::vector<std::size_t> preds;
    std::size_t best_source = k - 1;
    double best_prob = -1.0;
    for (std::size_t l = k; l-- > 0;) {
      const double logit = edge_logit(tape, states[l], h, params).scalar();
      const double prob = 1.0 / (1.0 + std::exp(-logit));
      if (prob > best_prob) {
        best_prob = prob;
        best_source = l;
      }
      if (prob >= 0.5) {
        preds.push_back(l);
        h = gru(tape, x, incoming(context, messages, preds), params, p + "gru");
      }
    }
    if (preds.empty()) {
      preds.push_back(best_source);
      h = gru(tape, x, incoming(context, messages, preds), params, p + "gru");
    }
    for (std::size_t l : preds) edges.emplace_back(l, k);
    nodes.push_back(op);
    states.push_back(h);
    messages.push_back(message(tape, h, params, prefix_ + ".dec"));
  }

  const std::size_t output = nodes.size();
  std::vector<bool> has_successor(nodes.size(), false);
  for (const auto& [s, d] : edges) has_successor[s] = true;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    if (!has_successor[v]) edges.emplace_back(v, output);
  }
  nodes.push_back(dag::OpKind::Output);
  return CellGraph(std::move(nodes), std::move(edges));
}

Var GraphAutoencoder::teacher_forcing_loss(Tape& tape, const CellGraph& g, Var z, const ParamStore& params) const {
  g.validate(config_.max_nodes);
  const CellGraph cf = dag::canonical_form(g);
  const std::string p = decoder_prefix();
  const std::size_t n = cf.size();

  std::vector<Var> states{ad::tanh(ad::linear(z, tape.param(params, p + "init.w"), tape.param(params, p + "init.b")))};
  std::vector<Var> messages{message(tape, states.front(), params, prefix_ + ".dec")};
  std::vector<Var> terms;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const dag::OpKind op = cf.op(k);
    terms.push_back(ad::cross_entropy(node_logits(tape, states.back(), params), decoder_class(op)));
    const Var x = tape.constant(one_hot(op));
    const Var context = message(tape, states.back(), params, prefix_ + ".dec");
    Var h = gru(tape, x, context, params, p + "gru");
    std::vector<std::size_t> preds;
    for (std::size_t l = k; l-- > 0;) {
      const bool present = cf.has_edge(l, k);
      terms.push_back(ad::bce_with_logit(edge_logit(tape, states[l], h, params), present ? 1.0 : 0.0));
      if (present) {
        preds.push_back(l);
        h = gru(tape, x, incoming(context, messages, preds), params, p + "gru");
      }
    }
    states.push_back(h);
    messages.push_back(message(tape, h, params, prefix_ + ".dec"));
  }
  terms.push_back(ad::cross_entropy(node_logits(tape, states.back(), params), kEndClass));
  return ad::sum(ad::concat_rows(terms));
}

double reconstruction_loss(std::span<const CellGraph> graphs, const ParamStore& params,
                           const GraphAutoencoder& model) {
  if (graphs.empty()) throw std::invalid_argument("no graphs");
  double total = 0.0;
  for (const auto& g : graphs) {
    Tape tape;
    Var z = tape.constant(model.encode(g, params).values);
    total += model.teacher_forcing_loss(tape, g, z, params).scalar();
  }
  return total / static_cast<double>(graphs.size());
}

AutoencoderTrainResult train_autoencoder(std::span<const CellGraph> graphs, ParamStore& params,
                                         const GraphAutoencoder& model, const AutoencoderTrainConfig& config) {
  if (graphs.empty()) throw std::invalid_argument("autoencoder training set is empty");
  if (config.epochs < 0) throw std::invalid_argument("negative epoch count");
  const Matrix latents = model.encode_all(graphs, params);
  const std::string decoder = model.decoder_prefix();
  ad::Adam adam(config.lr);
  adam.set_filter([&](const std::string& name) { return name.rfind(decoder, 0) == 0; });

  const std::size_t batch = config.batch_size == 0 ? graphs.size() : std::min(config.batch_size, graphs.size());
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, "autoencoder"));

  AutoencoderTrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (batch < graphs.size()) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < graphs.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, graphs.size());
      Tape tape;
      std::vector<Var> losses;
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t gi = order[i];
        Var z = tape.constant(latents.row(static_cast<Eigen::Index>(gi)));
        losses.push_back(model.teacher_forcing_loss(tape, graphs[gi], z, params));
      }
      Var loss = ad::scale(ad::sum(ad::concat_rows(losses)), 1.0 / static_cast<double>(stop - start));
      ad::GradMap grads = tape.backward(loss);
      std::erase_if(grads, [&](const auto& kv) { return kv.first.rfind(decoder, 0) != 0; });
      ad::clip_global_norm(grads, config.clip_norm);
      adam.step(params, grads);
      epoch_loss += loss.scalar();
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

}  // namespace grabnas::gvae
