#pragma once

// Gaussian responses: Bures-Wasserstein gradient descent on the covariance of
// a Gaussian coefficient law, with the mean solved separately by OLS.

#include <span>
#include <vector>

#include "wls/fit_report.hpp"
#include "wls/transport_core.hpp"

namespace wls {

// Q = N(mean, cov) on R^{dp}; mean = vec(B^T), so coordinates come in p
// blocks of d.
struct CoeffGaussian {
  VectorXd mean;
  SpdMatrix cov;
  int p = 0;
  int d = 0;
};

// (x^T (x) I_d) m and (x^T (x) I_d) S (x (x) I_d).
VectorXd marginal_mean(const VectorXd& mean, const VectorXd& x, int d);
MatrixXd marginal_cov(const MatrixXd& cov, const VectorXd& x, int d);
GaussianMeasure marginal(const CoeffGaussian& q, const VectorXd& x);

// eta = (2/n) sum_i ||x_i||^2, the geodesic smoothness constant of the objective.
double smoothness_constant(const MatrixXd& design);

// One covariance update Sigma <- M Sigma M, M = I + tau * G (see
// kernels::bw_gradient_matrix), symmetrized.
SpdMatrix bw_gradient_step(const SpdMatrix& q_cov, const MatrixXd& design,
                           std::span<const SpdMatrix> response_covs, double tau,
                           bool* regularized = nullptr, Exec exec = Exec::kParallel);

struct GaussianConfig {
  double step = 0.0;  // <= 0 selects 0.5 / eta
  long max_iter = 300;
  double tol = 0.0;   // stop once the first-order residual is at most tol; 0 disables
  int log_every = 1;
  Exec exec = Exec::kParallel;
};

struct GaussianFit {
  CoeffGaussian coeff;
  FitReport<GaussianConfig> report;
};

// Objective (1/n) sum_i W2^2(Q_{x_i}, nu_i).
double gaussian_objective(const CoeffGaussian& q, const MatrixXd& design,
                          std::span<const GaussianMeasure> responses);

// Minimal-norm OLS for the mean block.
VectorXd fit_gaussian_mean(const MatrixXd& design, std::span<const GaussianMeasure> responses);

GaussianFit fit_gaussian(const MatrixXd& design, std::span<const GaussianMeasure> responses,
                         const GaussianConfig& config = {});
GaussianFit fit_gaussian(const MatrixXd& design, std::span<const GaussianMeasure> responses,
                         const GaussianConfig& config, const SpdMatrix& initial_cov);

// Operator norm of the first-order matrix G projected onto range(Sigma_Q).
double gaussian_foc_residual(const CoeffGaussian& q, const MatrixXd& design,
                             std::span<const GaussianMeasure> responses);

}  // namespace wls
