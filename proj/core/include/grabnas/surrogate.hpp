// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deep-kernel Gaussian-process surrogate over fused dataset/architecture embeddings.
//
// The GP has zero prior mean and a Matern-5/2 ARD kernel
//
//   k(x, x') = s * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r),
//   r^2 = sum_d ((x_d - x'_d) / l_d)^2,
//
// so targets are standardised before fitting. Posterior quantities are reported in
// standardised units unless a method says otherwise.

#pragma once

#include "grabnas/autodiff.hpp"
#include "grabnas/linalg.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>

namespace grabnas::gp {

using ad::Matrix;
using ad::ParamStore;
using ad::RowVector;
using ad::Tape;
using ad::Var;
using Vector = Eigen::VectorXd;

struct FusedRep {
  RowVector values;
};

struct FusionConfig {
  Eigen::Index dataset_dim = 56;
  Eigen::Index graph_dim = 56;
  Eigen::Index hidden = 64;
  Eigen::Index fused_dim = 32;
};

// MLP([x_D ; x_G]) with two tanh hidden layers and a linear output.
class Fusion {
 public:
  explicit Fusion(FusionConfig config = {}, std::string prefix = "fusion");

  const FusionConfig& config() const noexcept { return config_; }
  void init(ParamStore& params) const;

  // x_D is 1 x dataset_dim; x_G is n x graph_dim (one row per architecture).
  Var fuse(Tape& tape, Var dataset, Var graphs, const ParamStore& params) const;
  FusedRep fuse(const RowVector& dataset, const RowVector& graph, const ParamStore& params) const;
  // Row-wise fusion of many graph latents against one dataset embedding, without a tape.
  Matrix fuse_all(const RowVector& dataset, const Matrix& graphs, const ParamStore& params) const;

 private:
  FusionConfig config_;
  std::string prefix_;
};

struct KernelHypers {
  Vector log_lengthscales;
  double log_signal_variance = 0.0;
  double log_noise_variance = std::log(1e-2);

  static KernelHypers isotropic(Eigen::Index dim, double lengthscale, double signal_variance, double noise_variance);
  double signal_variance() const { return std::exp(log_signal_variance); }
  double noise_variance() const { return std::exp(log_noise_variance); }
  Vector lengthscales() const { return log_lengthscales.array().exp(); }

  // Stored as "<prefix>.log_lengthscale" (1 x d), "<prefix>.log_signal", "<prefix>.log_noise".
  static KernelHypers from_params(const ParamStore& params, const std::string& prefix = "gp");
  void init_params(ParamStore& params, const std::string& prefix = "gp") const;
  void store(ParamStore& params, const std::string& prefix = "gp") const;
};

double matern52(const RowVector& a, const RowVector& b, const KernelHypers& hypers);
// Noise-free kernel matrix of the rows of x.
Matrix kernel_matrix(const Matrix& x, const KernelHypers& hypers);
// k(x_i, query) for every row i.
Vector kernel_column(const Matrix& x, const RowVector& query, const KernelHypers& hypers);
// k(a_i, b_j) for every pair of rows.
Matrix cross_kernel(const Matrix& a, const Matrix& b, const KernelHypers& hypers);
// d k(x_i, query) / d query, one row per support point.
Matrix kernel_column_gradient(const Matrix& x, const RowVector& query, const KernelHypers& hypers);

struct PosteriorStats {
  double mean = 0.0;          // standardised
  double variance = 0.0;      // standardised, clamped at 0
  double raw_variance = 0.0;  // before clamping
  double target_mean = 0.0;
  double target_scale = 1.0;

  double stddev() const { return std::sqrt(variance); }
  double original_mean() const { return target_mean + target_scale * mean; }
  double original_stddev() const { return target_scale * stddev(); }
};

class GPState {
 public:
  // Targets are standardised to zero mean and unit variance (mean shift only for a
  // single observation or constant targets). Throws linalg::FactorizationError.
  GPState(Matrix inputs, const Vector& targets, KernelHypers hypers);

  PosteriorStats posterior(const RowVector& query) const;
  // Standardised means and clamped variances for every row of queries.
  std::pair<Vector, Vector> posterior_all(const Matrix& queries) const;
  // d mu / d query in standardised units.
  RowVector mean_gradient(const RowVector& query) const;

  double standardize(double y) const { return (y - target_mean_) / target_scale_; }
  double best_standardized() const { return targets_.maxCoeff(); }

  const Matrix& inputs() const noexcept { return inputs_; }
  const Vector& targets() const noexcept { return targets_; }
  const Vector& alpha() const noexcept { return alpha_; }
  const linalg::Cholesky& factor() const noexcept { return factor_; }
  const KernelHypers& hypers() const noexcept { return hypers_; }
  double target_mean() const noexcept { return target_mean_; }
  double target_scale() const noexcept { return target_scale_; }
  Eigen::Index size() const noexcept { return inputs_.rows(); }

 private:
  Matrix inputs_;
  Vector targets_;
  KernelHypers hypers_;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
  linalg::Cholesky factor_;
  Vector alpha_;
};

GPState gp_fit(const Matrix& inputs, const Vector& targets, const KernelHypers& hypers);
PosteriorStats gp_posterior(const GPState& state, const RowVector& query);

// E[max(0, f - best)] for f ~ N(mean, variance); standardised units.
double expected_improvement(const PosteriorStats& stats, double best);
double expected_improvement(double mean, double stddev, double best);

// Gradient of the posterior mean at fuse(x_D, x_G) with respect to x_G; the support
// inputs and alpha are constants.
RowVector grad_mu_wrt_graph_latent(const GPState& state, const RowVector& dataset, const RowVector& graph,
                                   const ParamStore& params, const Fusion& fusion);

struct HyperGradient {
  Vector log_lengthscales;
  double log_signal_variance = 0.0;
  double log_noise_variance = 0.0;
};

struct MarginalLikelihood {
  double value = 0.0;
  HyperGradient hypers;
  Matrix inputs;  // d value / d X
};

// log N(y | 0, K + noise I), including the -n/2 log(2 pi) constant, with closed-form
// gradients through dL/dK = (alpha alpha^T - (K + noise I)^{-1}) / 2.
MarginalLikelihood log_marginal_likelihood(const Matrix& inputs, const Vector& targets, const KernelHypers& hypers);

}  // namespace grabnas::gp
