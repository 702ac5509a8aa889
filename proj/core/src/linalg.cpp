// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/linalg.hpp"

#include <cmath>
#include <string>

namespace grabnas::linalg {

Cholesky::Cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw FactorizationError("matrix is not square");
  if (!a.allFinite()) throw FactorizationError("matrix has non-finite entries");
  const Eigen::Index n = a.rows();
  for (double jitter : kJitterLadder) {
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Matrix l = llt.matrixL();
    if ((l.diagonal().array() > 0.0).all() && l.allFinite()) {
      lower_ = std::move(l);
      jitter_ = jitter;
      return;
    }
  }
  throw FactorizationError("matrix of size " + std::to_string(n) + " is not positive definite even with jitter " +
                           std::to_string(kJitterLadder.back()));
}

Vector Cholesky::solve(const Vector& b) const {
  Vector y = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix Cholesky::solve(const Matrix& b) const {
  Matrix y = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix Cholesky::solve_lower(const Matrix& b) const { return lower_.triangularView<Eigen::Lower>().solve(b); }

double Cholesky::log_det() const { return 2.0 * lower_.diagonal().array().log().sum(); }

Matrix Cholesky::inverse() const { return solve(Matrix(Matrix::Identity(size(), size()))); }

Vector cholesky_solve(const Matrix& a, const Vector& b) { return Cholesky(a).solve(b); }

}  // namespace grabnas::linalg
