// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over dense double matrices.
//
// Activations are row-major in the mathematical sense: a set of alpha elements of
// width beta is an alpha x beta matrix, and a linear layer computes X W + b with
// W of shape (in x out) and b of shape (1 x out).

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace grabnas::ad {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using GradMap = std::map<std::string, Matrix>;

enum class Init { Glorot, Zeros, Ones };

// Named parameter tensors. Initial values depend only on (seed, name), so adding a
// tensor never changes the initialisation of the others.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Matrix& create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init = Init::Glorot);
  Matrix& create_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);
  // Inserts or overwrites; an existing tensor keeps its shape.
  void set(const std::string& name, Matrix value);

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);
  const std::map<std::string, Matrix>& tensors() const noexcept { return tensors_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t parameter_count() const;

 private:
  std::map<std::string, Matrix> tensors_;
  std::uint64_t seed_;
};

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf whose gradient is available through grad() after backward().
  Var input(Matrix value);
  // Leaf bound by reference to a stored parameter; the store must outlive the tape
  // and stay unmodified while the tape is in use. Cached per name.
  Var param(const ParamStore& store, const std::string& name);

  // Seeds d(output) = 1; output must be 1x1.
  GradMap backward(Var output);
  GradMap backward(Var output, const Matrix& seed);

  // Gradient of the last backward() with respect to v (zeros when unreached).
  Matrix grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  // Primitive construction, used by the operations below.
  Var record(Matrix value, BackwardFn backward);
  const Matrix& value(std::size_t id) const;
  void accumulate(std::size_t id, const Matrix& g);
  const Matrix& upstream(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool has_grad = false;
    BackwardFn backward;
    const std::string* param_name = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_ids_;
  std::deque<std::string> param_names_;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Primitives.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                 // elementwise
Var add_row(Var a, Var row);           // broadcast a 1 x c row over every row of a
Var scale(Var a, double factor);
Var shift(Var a, double offset);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gain, Var offset, double eps = 1e-5);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var row(Var a, Eigen::Index index);
Var transpose(Var a);
Var sum(Var a);
Var mean(Var a);
Var sum_rows(Var a);                   // column sums, 1 x c
// softmax(Q K^T / sqrt(d)) V with d = Q.cols().
Var scaled_dot_attention(Var q, Var k, Var v);
// -log softmax(logits)[target] for a 1 x K row.
Var cross_entropy(Var logits, Eigen::Index target);
// Binary cross-entropy of sigmoid(logit) against a 0/1 target, for a 1 x 1 logit.
Var bce_with_logit(Var logit, double target);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

// Affine map x W + b.
inline Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

// Adds zero tensors for every stored parameter missing from grads.
void fill_missing(GradMap& grads, const ParamStore& store);

}  // namespace grabnas::ad
