// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/surrogate.hpp"

#include <numbers>
#include <stdexcept>

namespace grabnas::gp {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873127623544;

// Matern-5/2 profile pieces for scaled distance r: value factor and the common factor
// of every derivative, (5/3) (1 + sqrt5 r) exp(-sqrt5 r).
struct MaternTerms {
  double value;
  double slope;
};

MaternTerms matern_terms(double r) {
  const double e = std::exp(-kSqrt5 * r);
  return {(1.0 + kSqrt5 * r + 5.0 * r * r / 3.0) * e, (5.0 / 3.0) * (1.0 + kSqrt5 * r) * e};
}

Vector inverse_sq_lengthscales(const KernelHypers& hypers) { return (-2.0 * hypers.log_lengthscales).array().exp(); }

void check_width(Eigen::Index got, const KernelHypers& hypers) {
  if (got != hypers.log_lengthscales.size()) {
    throw ad::ShapeError("kernel input width " + std::to_string(got) + " does not match " +
                         std::to_string(hypers.log_lengthscales.size()) + " lengthscales");
  }
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double standard_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

// ---------------------------------------------------------------------------
// Fusion

Fusion::Fusion(FusionConfig config, std::string prefix) : config_(config), prefix_(std::move(prefix)) {}

void Fusion::init(ParamStore& params) const {
  params.create(prefix_ + ".w1", config_.dataset_dim + config_.graph_dim, config_.hidden);
  params.create(prefix_ + ".b1", 1, config_.hidden, ad::Init::Zeros);
  params.create(prefix_ + ".w2", config_.hidden, config_.hidden);
  params.create(prefix_ + ".b2", 1, config_.hidden, ad::Init::Zeros);
  params.create(prefix_ + ".w3", config_.hidden, config_.fused_dim);
  params.create(prefix_ + ".b3", 1, config_.fused_dim, ad::Init::Zeros);
}

Var Fusion::fuse(Tape& tape, Var dataset, Var graphs, const ParamStore& params) const {
  if (dataset.rows() != 1 || dataset.cols() != config_.dataset_dim) {
    throw ad::ShapeError("fusion expects a 1x" + std::to_string(config_.dataset_dim) + " dataset embedding");
  }
  if (graphs.cols() != config_.graph_dim) {
    throw ad::ShapeError("fusion expects graph latents of width " + std::to_string(config_.graph_dim));
  }
  // [x_D ; x_G] W1 = x_D W1[:dD] + x_G W1[dD:], so the dataset part is broadcast per row.
  Var w1 = tape.param(params, prefix_ + ".w1");
  Var w1_dataset = ad::transpose(ad::slice_cols(ad::transpose(w1), 0, config_.dataset_dim));
  Var w1_graph = ad::transpose(ad::slice_cols(ad::transpose(w1), config_.dataset_dim, config_.graph_dim));
  Var dataset_term = ad::add(ad::matmul(dataset, w1_dataset), tape.param(params, prefix_ + ".b1"));
  Var h = ad::tanh(ad::add_row(ad::matmul(graphs, w1_graph), dataset_term));
  h = ad::tanh(ad::linear(h, tape.param(params, prefix_ + ".w2"), tape.param(params, prefix_ + ".b2")));
  return ad::linear(h, tape.param(params, prefix_ + ".w3"), tape.param(params, prefix_ + ".b3"));
}

FusedRep Fusion::fuse(const RowVector& dataset, const RowVector& graph, const ParamStore& params) const {
  Tape tape;
  return FusedRep{fuse(tape, tape.constant(dataset), tape.constant(graph), params).value().row(0)};
}

Matrix Fusion::fuse_all(const RowVector& dataset, const Matrix& graphs, const ParamStore& params) const {
  if (dataset.size() != config_.dataset_dim || graphs.cols() != config_.graph_dim) {
    throw ad::ShapeError("fusion input width mismatch");
  }
  const Matrix& w1 = params.at(prefix_ + ".w1");
  const RowVector dataset_term = dataset * w1.topRows(config_.dataset_dim) + params.at(prefix_ + ".b1").row(0);
  Matrix h = ((graphs * w1.bottomRows(config_.graph_dim)).rowwise() + dataset_term).array().tanh().matrix();
  h = ((h * params.at(prefix_ + ".w2")).rowwise() + params.at(prefix_ + ".b2").row(0)).array().tanh().matrix();
  return (h * params.at(prefix_ + ".w3")).rowwise() + params.at(prefix_ + ".b3").row(0);
}

// ---------------------------------------------------------------------------
// Kernel

KernelHypers KernelHypers::isotropic(Eigen::Index dim, double lengthscale, double signal_variance,
                                     double noise_variance) {
  KernelHypers h;
  h.log_lengthscales = Vector::Constant(dim, std::log(lengthscale));
  h.log_signal_variance = std::log(signal_variance);
  h.log_noise_variance = std::log(noise_variance);
  return h;
}

KernelHypers KernelHypers::from_params(const ParamStore& params, const std::string& prefix) {
  KernelHypers h;
  h.log_lengthscales = params.at(prefix + ".log_lengthscale").row(0).transpose();
  h.log_signal_variance = params.at(prefix + ".log_signal")(0, 0);
  h.log_noise_variance = params.at(prefix + ".log_noise")(0, 0);
  return h;
}

void KernelHypers::init_params(ParamStore& params, const std::string& prefix) const {
  params.set(prefix + ".log_lengthscale", log_lengthscales.transpose());
  params.set(prefix + ".log_signal", Matrix::Constant(1, 1, log_signal_variance));
  params.set(prefix + ".log_noise", Matrix::Constant(1, 1, log_noise_variance));
}

void KernelHypers::store(ParamStore& params, const std::string& prefix) const { init_params(params, prefix); }

double matern52(const RowVector& a, const RowVector& b, const KernelHypers& hypers) {
  check_width(a.size(), hypers);
  check_width(b.size(), hypers);
  const double r2 = ((a - b).transpose().array().square() * inverse_sq_lengthscales(hypers).array()).sum();
  return hypers.signal_variance() * matern_terms(std::sqrt(r2)).value;
}

Matrix kernel_matrix(const Matrix& x, const KernelHypers& hypers) {
  check_width(x.cols(), hypers);
  const Vector inv = inverse_sq_lengthscales(hypers);
  const double s = hypers.signal_variance();
  const Eigen::Index n = x.rows();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = s;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r2 = ((x.row(i) - x.row(j)).transpose().array().square() * inv.array()).sum();
      k(i, j) = k(j, i) = s * matern_terms(std::sqrt(r2)).value;
    }
  }
  return k;
}

Vector kernel_column(const Matrix& x, const RowVector& query, const KernelHypers& hypers) {
  check_width(x.cols(), hypers);
  check_width(query.size(), hypers);
  const RowVector inv = inverse_sq_lengthscales(hypers).transpose();
  const double s = hypers.signal_variance();
  Vector k(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double r2 = ((x.row(i) - query).array().square() * inv.array()).sum();
    k(i) = s * matern_terms(std::sqrt(r2)).value;
  }
  return k;
}

Matrix cross_kernel(const Matrix& a, const Matrix& b, const KernelHypers& hypers) {
  check_width(a.cols(), hypers);
  check_width(b.cols(), hypers);
  const RowVector inv = inverse_sq_lengthscales(hypers).transpose();
  const double s = hypers.signal_variance();
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double r2 = ((a.row(i) - b.row(j)).array().square() * inv.array()).sum();
      k(i, j) = s * matern_terms(std::sqrt(r2)).value;
    }
  }
  return k;
}

Matrix kernel_column_gradient(const Matrix& x, const RowVector& query, const KernelHypers& hypers) {
  check_width(x.cols(), hypers);
  check_width(query.size(), hypers);
  const RowVector inv = inverse_sq_lengthscales(hypers).transpose();
  const double s = hypers.signal_variance();
  Matrix grad(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const RowVector diff = query - x.row(i);
    const double r = std::sqrt((diff.array().square() * inv.array()).sum());
    grad.row(i) = -s * matern_terms(r).slope * diff.cwiseProduct(inv);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// GP posterior

namespace {

struct Standardization {
  Vector targets;
  double mean = 0.0;
  double scale = 1.0;
};

Standardization standardize_targets(const Vector& y) {
  if (y.size() == 0) throw std::invalid_argument("GP needs at least one observation");
  if (!y.allFinite()) throw std::invalid_argument("GP targets must be finite");
  Standardization s;
  s.mean = y.mean();
  if (y.size() >= 2) {
    const double var = (y.array() - s.mean).square().mean();
    if (var > 0.0) s.scale = std::sqrt(var);
  }
  s.targets = (y.array() - s.mean) / s.scale;
  return s;
}

Matrix noisy_kernel(const Matrix& x, const KernelHypers& hypers) {
  Matrix k = kernel_matrix(x, hypers);
  k.diagonal().array() += hypers.noise_variance();
  return k;
}

}  // namespace

GPState::GPState(Matrix inputs, const Vector& targets, KernelHypers hypers)
    : inputs_(std::move(inputs)), hypers_(std::move(hypers)), factor_([&] {
        if (inputs_.rows() != targets.size()) throw std::invalid_argument("GP inputs and targets differ in length");
        if (inputs_.rows() == 0) throw std::invalid_argument("GP needs at least one observation");
        if (!inputs_.allFinite()) throw std::invalid_argument("GP inputs must be finite");
        return linalg::Cholesky(noisy_kernel(inputs_, hypers_));
      }()) {
  Standardization s = standardize_targets(targets);
  targets_ = std::move(s.targets);
  target_mean_ = s.mean;
  target_scale_ = s.scale;
  alpha_ = factor_.solve(targets_);
}

PosteriorStats GPState::posterior(const RowVector& query) const {
  const Vector k = kernel_column(inputs_, query, hypers_);
  const Vector v = factor_.solve_lower(k);
  PosteriorStats stats;
  stats.mean = k.dot(alpha_);
  stats.raw_variance = hypers_.signal_variance() - v.squaredNorm();
  stats.variance = std::max(0.0, stats.raw_variance);
  stats.target_mean = target_mean_;
  stats.target_scale = target_scale_;
  return stats;
}

std::pair<Vector, Vector> GPState::posterior_all(const Matrix& queries) const {
  const Matrix k = cross_kernel(inputs_, queries, hypers_);  // n x m
  const Matrix v = factor_.solve_lower(k);
  Vector mean = k.transpose() * alpha_;
  Vector variance = (hypers_.signal_variance() - v.colwise().squaredNorm().array()).max(0.0).transpose();
  return {std::move(mean), std::move(variance)};
}

RowVector GPState::mean_gradient(const RowVector& query) const {
  return alpha_.transpose() * kernel_column_gradient(inputs_, query, hypers_);
}

GPState gp_fit(const Matrix& inputs, const Vector& targets, const KernelHypers& hypers) {
  return GPState(inputs, targets, hypers);
}

PosteriorStats gp_posterior(const GPState& state, const RowVector& query) { return state.posterior(query); }

double expected_improvement(double mean, double stddev, double best) {
  const double gap = mean - best;
  if (!(stddev > 0.0)) return std::max(0.0, gap);
  const double z = gap / stddev;
  return std::max(0.0, gap * standard_normal_cdf(z) + stddev * standard_normal_pdf(z));
}

double expected_improvement(const PosteriorStats& stats, double best) {
  return expected_improvement(stats.mean, stats.stddev(), best);
}

RowVector grad_mu_wrt_graph_latent(const GPState& state, const RowVector& dataset, const RowVector& graph,
                                   const ParamStore& params, const Fusion& fusion) {
  Tape tape;
  Var latent = tape.input(graph);
  Var fused = fusion.fuse(tape, tape.constant(dataset), latent, params);
  tape.backward(fused, state.mean_gradient(fused.value().row(0)));
  return tape.grad(latent).row(0);
}

MarginalLikelihood log_marginal_likelihood(const Matrix& inputs, const Vector& targets, const KernelHypers& hypers) {
  const Eigen::Index n = inputs.rows();
  if (n == 0 || targets.size() != n) throw std::invalid_argument("marginal likelihood needs matching X and y");
  check_width(inputs.cols(), hypers);
  const Matrix k = kernel_matrix(inputs, hypers);
  Matrix noisy = k;
  noisy.diagonal().array() += hypers.noise_variance();
  const linalg::Cholesky chol(noisy);
  const Vector alpha = chol.solve(targets);

  MarginalLikelihood out;
  out.value = -0.5 * targets.dot(alpha) - 0.5 * chol.log_det() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  const Matrix w = 0.5 * (alpha * alpha.transpose() - chol.inverse());
  const Vector inv = inverse_sq_lengthscales(hypers);
  const double s = hypers.signal_variance();
  const Eigen::Index d = inputs.cols();

  out.hypers.log_signal_variance = (w.array() * k.array()).sum();
  out.hypers.log_noise_variance = hypers.noise_variance() * w.trace();
  out.hypers.log_lengthscales = Vector::Zero(d);
  out.inputs = Matrix::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const RowVector diff = inputs.row(i) - inputs.row(j);
      const RowVector scaled = diff.cwiseProduct(inv.transpose());
      const double r = std::sqrt(diff.dot(scaled));
      const double slope = s * matern_terms(r).slope;
      // Both (i,j) and (j,i) entries of the symmetric W.
      const double weight = 2.0 * w(i, j) * slope;
      out.hypers.log_lengthscales += weight * diff.cwiseProduct(scaled).transpose();
      out.inputs.row(i) -= weight * scaled;
      out.inputs.row(j) += weight * scaled;
    }
  }
  return out;
}

}  // namespace grabnas::gp
