#pragma once

// Global Frechet regression: OLS on quantile functions (with isotonic
// projection) for univariate responses, OLS on mean and covariance entries for
// Gaussian responses.

#include <span>
#include <vector>

#include "wls/transport_core.hpp"
#include "wls/wls_particle.hpp"

namespace wls {

struct FrechetModel1D {
  std::vector<double> levels;
  MatrixXd beta;  // K x p, row l = beta(levels[l])
};

// Quantiles on standard_levels(k), one minimal-norm OLS per level.
FrechetModel1D frechet_fit_1d(const MatrixXd& design, std::span<const Marginal> responses,
                              int k = 200);
FrechetModel1D frechet_fit_1d(const MatrixXd& design, std::span<const EmpiricalDist> responses,
                              int k = 200);

// Euclidean projection onto non-decreasing sequences (pool adjacent violators,
// unit weights).
std::vector<double> pava(std::span<const double> y);

QuantileGrid frechet_predict_1d(const FrechetModel1D& model, const VectorXd& x);

// The K coefficient rows as a uniform cloud, in level order.
ParticleCloud frechet_coeff_law(const FrechetModel1D& model);

struct FrechetModelGauss {
  int p = 0;
  int d = 0;
  MatrixXd mean_coeff;  // p x d
  MatrixXd cov_coeff;   // p x d(d+1)/2, upper-triangle entries in row-major order
};

FrechetModelGauss frechet_fit_gauss(const MatrixXd& design,
                                    std::span<const GaussianMeasure> responses);
// Covariance eigenvalues clamped at 0.
GaussianMeasure frechet_predict_gauss(const FrechetModelGauss& model, const VectorXd& x);

}  // namespace wls
