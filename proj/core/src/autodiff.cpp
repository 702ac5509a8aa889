// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/autodiff.hpp"

#include "grabnas/rng.hpp"

#include <cmath>
#include <random>

namespace grabnas::ad {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) throw std::logic_error("variables recorded on different tapes");
  return *a.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_of(a) + " vs " + shape_of(b));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore

Matrix& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init) {
  if (contains(name)) throw std::invalid_argument("parameter '" + name + "' already exists");
  Matrix m(rows, cols);
  switch (init) {
    case Init::Zeros:
      m.setZero();
      break;
    case Init::Ones:
      m.setOnes();
      break;
    case Init::Glorot: {
      Rng rng(derive_seed(seed_, name));
      const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-a, a);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
      break;
    }
  }
  return tensors_.emplace(name, std::move(m)).first->second;
}

Matrix& ParamStore::create_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
  if (contains(name)) throw std::invalid_argument("parameter '" + name + "' already exists");
  return tensors_.emplace(name, Matrix::Constant(rows, cols, value)).first->second;
}

void ParamStore::set(const std::string& name, Matrix value) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    tensors_.emplace(name, std::move(value));
    return;
  }
  if (it->second.rows() != value.rows() || it->second.cols() != value.cols()) {
    throw ShapeError("parameter '" + name + "' is " + shape_of(it->second) + ", got " + shape_of(value));
  }
  it->second = std::move(value);
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

Matrix& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors_) n += static_cast<std::size_t>(m.size());
  return n;
}

void fill_missing(GradMap& grads, const ParamStore& store) {
  for (const auto& [name, m] : store.tensors()) {
    if (!grads.count(name)) grads.emplace(name, Matrix::Zero(m.rows(), m.cols()));
  }
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const {
  if (!tape_) throw std::logic_error("empty variable");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("expected a scalar, got " + shape_of(v));
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Matrix value) { return constant(std::move(value)); }

Var Tape::param(const ParamStore& store, const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var(this, it->second);
  Node n;
  n.ref = &store.at(name);
  n.param_name = &param_names_.emplace_back(name);
  Var v = push(std::move(n));
  param_ids_.emplace(name, v.id());
  return v;
}

Var Tape::record(Matrix value, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  return push(std::move(n));
}

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.ref ? *n.ref : n.value;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

GradMap Tape::backward(Var output) {
  if (output.value().size() != 1) {
    throw ShapeError("backward needs a scalar output, got " + shape_of(output.value()));
  }
  return backward(output, Matrix::Ones(1, 1));
}

GradMap Tape::backward(Var output, const Matrix& seed) {
  if (output.tape() != this) throw std::logic_error("output belongs to another tape");
  require_same_shape(output.value(), seed, "backward seed");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(output.id(), seed);
  for (std::size_t id = output.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
  GradMap grads;
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[id];
    grads.emplace(name, n.has_grad ? n.grad : Matrix::Zero(n.ref->rows(), n.ref->cols()));
  }
  return grads;
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.has_grad) return n.grad;
  const Matrix& value = n.ref ? *n.ref : n.value;
  return Matrix::Zero(value.rows(), value.cols());
}

// ---------------------------------------------------------------------------
// Primitives

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) throw ShapeError("matmul: " + shape_of(av) + " * " + shape_of(bv));
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(av * bv, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    t.accumulate(ia, g * t.value(ib).transpose());
    t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.upstream(self));
    t.accumulate(ib, t.upstream(self));
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.upstream(self));
    t.accumulate(ib, -t.upstream(self));
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var add_row(Var a, Var r) {
  Tape& t = same_tape(a, r);
  const Matrix& av = a.value();
  const Matrix& rv = r.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw ShapeError("add_row: " + shape_of(av) + " + " + shape_of(rv));
  const std::size_t ia = a.id(), ir = r.id();
  Matrix out = av.rowwise() + rv.row(0);
  return t.record(std::move(out), [ia, ir](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    t.accumulate(ia, g);
    t.accumulate(ir, g.colwise().sum());
  });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value() * factor,
                  [ia, factor](Tape& t, std::size_t self) { t.accumulate(ia, t.upstream(self) * factor); });
}

Var shift(Var a, double offset) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record((a.value().array() + offset).matrix(), [ia](Tape& t, std::size_t self) { t.accumulate(ia, t.upstream(self)); });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().array().tanh().matrix(), [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(ia, t.upstream(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  Matrix y = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return t.record(std::move(y), [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(ia, t.upstream(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().cwiseMax(0.0), [ia](Tape& t, std::size_t self) {
    const Matrix mask = (t.value(ia).array() > 0.0).cast<double>().matrix();
    t.accumulate(ia, t.upstream(self).cwiseProduct(mask));
  });
}

namespace {

Matrix softmax_rows_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& g) {
  Matrix dx(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double dot = g.row(i).dot(y.row(i));
    dx.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
  }
  return dx;
}

}  // namespace

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(softmax_rows_value(a.value()), [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, softmax_rows_backward(t.value(self), t.upstream(self)));
  });
}

Var layer_norm_rows(Var x, Var gain, Var offset, double eps) {
  Tape& t = same_tape(x, gain);
  same_tape(x, offset);
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.cols();
  if (gain.value().rows() != 1 || gain.value().cols() != n || offset.value().rows() != 1 ||
      offset.value().cols() != n) {
    throw ShapeError("layer_norm_rows: gain/offset must be 1x" + std::to_string(n));
  }
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Matrix y = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  y.rowwise() += offset.value().row(0);
  const std::size_t ix = x.id(), ig = gain.id(), io = offset.id();
  return t.record(std::move(y), [ix, ig, io, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                                                  std::size_t self) {
    const Matrix& g = t.upstream(self);
    const Matrix& gv = t.value(ig);
    t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
    t.accumulate(io, g.colwise().sum());
    const double n = static_cast<double>(g.cols());
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const Eigen::RowVectorXd dxhat = g.row(i).cwiseProduct(gv.row(0));
      const double s1 = dxhat.sum();
      const double s2 = dxhat.dot(xhat.row(i));
      dx.row(i) = (inv_std(i) / n) * (n * dxhat.array() - s1 - xhat.row(i).array() * s2).matrix();
    }
    t.accumulate(ix, dx);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  return t.record(std::move(out), [spans = std::move(spans)](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    Eigen::Index at = 0;
    for (const auto& [id, width] : spans) {
      t.accumulate(id, g.middleCols(at, width));
      at += width;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    at += p.rows();
  }
  return t.record(std::move(out), [spans = std::move(spans)](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    Eigen::Index at = 0;
    for (const auto& [id, height] : spans) {
      t.accumulate(id, g.middleRows(at, height));
      at += height;
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (start < 0 || count < 0 || start + count > av.cols()) throw ShapeError("slice_cols: range out of bounds");
  const std::size_t ia = a.id();
  const Eigen::Index rows = av.rows(), cols = av.cols();
  return t.record(av.middleCols(start, count), [ia, start, count, rows, cols](Tape& t, std::size_t self) {
    Matrix g = Matrix::Zero(rows, cols);
    g.middleCols(start, count) = t.upstream(self);
    t.accumulate(ia, g);
  });
}

Var row(Var a, Eigen::Index index) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (index < 0 || index >= av.rows()) throw ShapeError("row: index out of bounds");
  const std::size_t ia = a.id();
  const Eigen::Index rows = av.rows(), cols = av.cols();
  return t.record(av.row(index), [ia, index, rows, cols](Tape& t, std::size_t self) {
    Matrix g = Matrix::Zero(rows, cols);
    g.row(index) = t.upstream(self);
    t.accumulate(ia, g);
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().transpose(),
                  [ia](Tape& t, std::size_t self) { t.accumulate(ia, t.upstream(self).transpose()); });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), [ia, rows, cols](Tape& t, std::size_t self) {
    t.accumulate(ia, Matrix::Constant(rows, cols, t.upstream(self)(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of an empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows();
  return t.record(a.value().colwise().sum(), [ia, rows](Tape& t, std::size_t self) {
    t.accumulate(ia, t.upstream(self).replicate(rows, 1));
  });
}

Var scaled_dot_attention(Var q, Var k, Var v) {
  Tape& t = same_tape(q, k);
  same_tape(q, v);
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  if (qv.cols() != kv.cols() || kv.rows() != vv.rows()) {
    throw ShapeError("attention: q " + shape_of(qv) + ", k " + shape_of(kv) + ", v " + shape_of(vv));
  }
  const double c = 1.0 / std::sqrt(static_cast<double>(qv.cols()));
  Matrix p = softmax_rows_value((qv * kv.transpose()) * c);
  Matrix out = p * vv;
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return t.record(std::move(out), [iq, ik, iv, c, p = std::move(p)](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    t.accumulate(iv, p.transpose() * g);
    const Matrix dp = g * t.value(iv).transpose();
    const Matrix ds = softmax_rows_backward(p, dp) * c;
    t.accumulate(iq, ds * t.value(ik));
    t.accumulate(ik, ds.transpose() * t.value(iq));
  });
}

Var cross_entropy(Var logits, Eigen::Index target) {
  Tape& t = *logits.tape();
  const Matrix& z = logits.value();
  if (z.rows() != 1 || target < 0 || target >= z.cols()) throw ShapeError("cross_entropy: bad logits or target");
  Matrix p = softmax_rows_value(z);
  const double loss = -std::log(std::max(p(0, target), 1e-300));
  const std::size_t iz = logits.id();
  return t.record(Matrix::Constant(1, 1, loss), [iz, target, p = std::move(p)](Tape& t, std::size_t self) {
    Matrix g = p;
    g(0, target) -= 1.0;
    t.accumulate(iz, g * t.upstream(self)(0, 0));
  });
}

Var bce_with_logit(Var logit, double target) {
  Tape& t = *logit.tape();
  const double z = logit.scalar();
  const double loss = std::max(z, 0.0) - target * z + std::log1p(std::exp(-std::abs(z)));
  const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  const std::size_t iz = logit.id();
  return t.record(Matrix::Constant(1, 1, loss), [iz, p, target](Tape& t, std::size_t self) {
    t.accumulate(iz, Matrix::Constant(1, 1, (p - target) * t.upstream(self)(0, 0)));
  });
}

}  // namespace grabnas::ad
