// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/set_encoder.hpp"

#include "grabnas/rng.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace grabnas::dataset {

std::size_t TaskSpec::instance_count() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += static_cast<std::size_t>(c.rows());
  return n;
}

void TaskSpec::validate() const {
  if (classes.size() < 2) throw TaskError("task '" + id + "' needs at least two classes");
  const Eigen::Index dim = classes.front().cols();
  if (dim < 1) throw TaskError("task '" + id + "' has zero-width features");
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].rows() == 0) throw TaskError("task '" + id + "' class " + std::to_string(c) + " is empty");
    if (classes[c].cols() != dim) throw TaskError("task '" + id + "' has non-uniform feature width");
    if (!classes[c].allFinite()) throw TaskError("task '" + id + "' has non-finite features");
  }
}

void write_task(std::ostream& out, const TaskSpec& task) {
  task.validate();
  out << "task " << task.id << " classes=" << task.classes.size() << " dim=" << task.feature_dim() << '\n';
  out << std::setprecision(17);
  for (std::size_t c = 0; c < task.classes.size(); ++c) {
    const Matrix& m = task.classes[c];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << c;
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << m(i, j);
      out << '\n';
    }
  }
}

TaskSpec read_task(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TaskError("empty task file");
  std::istringstream header(line);
  std::string word, id, classes_field, dim_field;
  header >> word >> id >> classes_field >> dim_field;
  if (word != "task" || classes_field.rfind("classes=", 0) != 0 || dim_field.rfind("dim=", 0) != 0) {
    throw TaskError("bad task header: '" + line + "'");
  }
  std::size_t num_classes = 0;
  Eigen::Index dim = 0;
  try {
    num_classes = std::stoul(classes_field.substr(8));
    dim = std::stol(dim_field.substr(4));
  } catch (const std::exception&) {
    throw TaskError("bad task header: '" + line + "'");
  }
  if (dim < 1) throw TaskError("task dim must be positive");
  std::vector<std::vector<std::vector<double>>> rows(num_classes);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    long cls = -1;
    if (!(ls >> cls) || cls < 0 || static_cast<std::size_t>(cls) >= num_classes) {
      throw TaskError("line " + std::to_string(line_no) + ": bad class index");
    }
    std::vector<double> values;
    double v = 0;
    while (ls >> v) values.push_back(v);
    if (static_cast<Eigen::Index>(values.size()) != dim) {
      throw TaskError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) + " values");
    }
    rows[static_cast<std::size_t>(cls)].push_back(std::move(values));
  }
  TaskSpec task;
  task.id = id;
  for (std::size_t c = 0; c < num_classes; ++c) {
    Matrix m(static_cast<Eigen::Index>(rows[c].size()), dim);
    for (std::size_t i = 0; i < rows[c].size(); ++i)
      for (Eigen::Index j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), j) = rows[c][i][j];
    task.classes.push_back(std::move(m));
  }
  task.validate();
  return task;
}

void save_task(const std::filesystem::path& path, const TaskSpec& task) {
  std::ofstream out(path);
  if (!out) throw TaskError("cannot open " + path.string() + " for writing");
  write_task(out, task);
}

TaskSpec load_task(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TaskError("cannot open " + path.string());
  return read_task(in);
}

// ---------------------------------------------------------------------------

SetEncoder::SetEncoder(SetEncoderConfig config, std::string prefix) : config_(config), prefix_(std::move(prefix)) {
  if (config_.heads < 1 || config_.width % config_.heads != 0) {
    throw std::invalid_argument("set encoder head count must divide the model width");
  }
  if (config_.sab_blocks < 0) throw std::invalid_argument("negative SAB block count");
}

void SetEncoder::init_multihead(ParamStore& params, const std::string& block) const {
  const auto w = config_.width;
  for (const char* name : {"wq", "wk", "wv", "wo"}) params.create(block + ".mh." + name, w, w);
  for (const char* name : {"bq", "bk", "bv", "bo"}) params.create(block + ".mh." + name, 1, w, ad::Init::Zeros);
}

void SetEncoder::init_feedforward(ParamStore& params, const std::string& block) const {
  const auto w = config_.width;
  params.create(block + ".w1", w, w);
  params.create(block + ".b1", 1, w, ad::Init::Zeros);
  params.create(block + ".w2", w, w);
  params.create(block + ".b2", 1, w, ad::Init::Zeros);
}

void SetEncoder::init_norm(ParamStore& params, const std::string& block) const {
  params.create(block + ".gain", 1, config_.width, ad::Init::Ones);
  params.create(block + ".offset", 1, config_.width, ad::Init::Zeros);
}

void SetEncoder::init_sab(ParamStore& params, const std::string& block) const {
  init_multihead(params, block);
  init_norm(params, block + ".ln1");
  init_feedforward(params, block + ".ff");
  init_norm(params, block + ".ln2");
}

void SetEncoder::init_pma(ParamStore& params, const std::string& block) const {
  params.create(block + ".seed", 1, config_.width);
  init_feedforward(params, block + ".input_ff");
  init_sab(params, block);
}

void SetEncoder::init(ParamStore& params) const {
  params.create(instance_block("proj.w"), config_.input_dim, config_.width);
  params.create(instance_block("proj.b"), 1, config_.width, ad::Init::Zeros);
  for (int i = 0; i < config_.sab_blocks; ++i) {
    init_sab(params, instance_block("sab" + std::to_string(i)));
    init_sab(params, class_block("sab" + std::to_string(i)));
  }
  init_pma(params, instance_block("pma"));
  init_pma(params, class_block("pma"));
}

Var SetEncoder::feedforward(Tape& tape, Var x, const ParamStore& params, const std::string& block) const {
  Var h = ad::relu(ad::linear(x, tape.param(params, block + ".w1"), tape.param(params, block + ".b1")));
  return ad::linear(h, tape.param(params, block + ".w2"), tape.param(params, block + ".b2"));
}

Var SetEncoder::norm(Tape& tape, Var x, const ParamStore& params, const std::string& block) const {
  return ad::layer_norm_rows(x, tape.param(params, block + ".gain"), tape.param(params, block + ".offset"));
}

Var SetEncoder::multihead(Tape& tape, Var query, Var key, Var value, const ParamStore& params,
                          const std::string& block) const {
  const std::string mh = block + ".mh.";
  Var q = ad::linear(query, tape.param(params, mh + "wq"), tape.param(params, mh + "bq"));
  Var k = ad::linear(key, tape.param(params, mh + "wk"), tape.param(params, mh + "bk"));
  Var v = ad::linear(value, tape.param(params, mh + "wv"), tape.param(params, mh + "bv"));
  const Eigen::Index head_dim = config_.width / config_.heads;
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(config_.heads));
  for (Eigen::Index h = 0; h < config_.heads; ++h) {
    const Eigen::Index at = h * head_dim;
    heads.push_back(ad::scaled_dot_attention(ad::slice_cols(q, at, head_dim), ad::slice_cols(k, at, head_dim),
                                             ad::slice_cols(v, at, head_dim)));
  }
  Var joined = heads.size() == 1 ? heads.front() : ad::concat_cols(heads);
  return ad::linear(joined, tape.param(params, mh + "wo"), tape.param(params, mh + "bo"));
}

Var SetEncoder::sab(Tape& tape, Var set, const ParamStore& params, const std::string& block) const {
  if (set.cols() != config_.width) {
    throw ad::ShapeError("SAB expects width " + std::to_string(config_.width) + ", got " + std::to_string(set.cols()));
  }
  Var h = norm(tape, ad::add(set, multihead(tape, set, set, set, params, block)), params, block + ".ln1");
  return norm(tape, ad::add(h, feedforward(tape, h, params, block + ".ff")), params, block + ".ln2");
}

Var SetEncoder::pma(Tape& tape, Var set, const ParamStore& params, const std::string& block) const {
  if (set.cols() != config_.width) {
    throw ad::ShapeError("PMA expects width " + std::to_string(config_.width) + ", got " + std::to_string(set.cols()));
  }
  Var seed = tape.param(params, block + ".seed");
  Var keys = feedforward(tape, set, params, block + ".input_ff");
  Var h = norm(tape, ad::add(seed, multihead(tape, seed, keys, keys, params, block)), params, block + ".ln1");
  return norm(tape, ad::add(h, feedforward(tape, h, params, block + ".ff")), params, block + ".ln2");
}

namespace {

bool row_less(const Matrix& m, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (m(a, j) != m(b, j)) return m(a, j) < m(b, j);
  }
  return false;
}

std::uint64_t fingerprint(const Matrix& sorted) {
  std::uint64_t h = 0x9ae16a3b2f90404fULL;
  for (Eigen::Index i = 0; i < sorted.rows(); ++i) {
    for (Eigen::Index j = 0; j < sorted.cols(); ++j) {
      std::uint64_t bits = 0;
      const double v = sorted(i, j);
      std::memcpy(&bits, &v, sizeof bits);
      h = splitmix64(h ^ bits);
    }
  }
  return h;
}

}  // namespace

Matrix SetEncoder::sample_class(const Matrix& instances, std::uint64_t seed, std::size_t samples) const {
  const auto n = static_cast<std::size_t>(instances.rows());
  if (n == 0) throw TaskError("cannot sample from an empty class");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return row_less(instances, a, b); });
  Matrix sorted(instances.rows(), instances.cols());
  for (std::size_t i = 0; i < n; ++i) sorted.row(static_cast<Eigen::Index>(i)) = instances.row(order[i]);

  Rng rng(derive_seed(seed, fingerprint(sorted)));
  Matrix out(static_cast<Eigen::Index>(samples), instances.cols());
  if (samples <= n) {
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (std::size_t i = 0; i < samples; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.row(static_cast<Eigen::Index>(i)) = sorted.row(idx[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < samples; ++i) {
      out.row(static_cast<Eigen::Index>(i)) = sorted.row(static_cast<Eigen::Index>(pick(rng)));
    }
  }
  return out;
}

Var SetEncoder::encode(Tape& tape, const TaskSpec& task, const ParamStore& params, std::uint64_t seed,
                       std::size_t samples_per_class) const {
  task.validate();
  if (task.feature_dim() != config_.input_dim) {
    throw ad::ShapeError("task '" + task.id + "' has feature width " + std::to_string(task.feature_dim()) +
                         ", encoder expects " + std::to_string(config_.input_dim));
  }
  const std::size_t samples = samples_per_class ? samples_per_class : config_.samples_per_class;
  if (samples == 0) throw std::invalid_argument("samples_per_class must be at least 1");

  Var proj_w = tape.param(params, instance_block("proj.w"));
  Var proj_b = tape.param(params, instance_block("proj.b"));
  std::vector<Var> prototypes;
  prototypes.reserve(task.classes.size());
  for (const Matrix& instances : task.classes) {
    Var set = ad::linear(tape.constant(sample_class(instances, seed, samples)), proj_w, proj_b);
    for (int i = 0; i < config_.sab_blocks; ++i) set = sab(tape, set, params, instance_block("sab" + std::to_string(i)));
    prototypes.push_back(pma(tape, set, params, instance_block("pma")));
  }
  Var set = ad::concat_rows(prototypes);
  for (int i = 0; i < config_.sab_blocks; ++i) set = sab(tape, set, params, class_block("sab" + std::to_string(i)));
  return pma(tape, set, params, class_block("pma"));
}

DatasetEmbedding SetEncoder::encode(const TaskSpec& task, const ParamStore& params, std::uint64_t seed,
                                    std::size_t samples_per_class) const {
  Tape tape;
  return DatasetEmbedding{encode(tape, task, params, seed, samples_per_class).value().row(0)};
}

}  // namespace grabnas::dataset
