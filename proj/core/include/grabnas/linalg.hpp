// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>

namespace grabnas::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Diagonal jitter tried in order until the factorization succeeds.
inline constexpr std::array<double, 6> kJitterLadder{0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};

// Lower-triangular factor L with L L^T = A + jitter I.
class Cholesky {
 public:
  // Throws FactorizationError when A + 1e-4 I is still not positive definite.
  explicit Cholesky(const Matrix& a);

  const Matrix& lower() const noexcept { return lower_; }
  double jitter() const noexcept { return jitter_; }
  Eigen::Index size() const noexcept { return lower_.rows(); }

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  // L^{-1} b
  Matrix solve_lower(const Matrix& b) const;
  double log_det() const;
  Matrix inverse() const;

 private:
  Matrix lower_;
  double jitter_ = 0.0;
};

Vector cholesky_solve(const Matrix& a, const Vector& b);

}  // namespace grabnas::linalg
