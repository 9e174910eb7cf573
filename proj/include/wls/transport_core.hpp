#pragma once

// Closed-form optimal transport: 1-D quantile matching and Gaussian
// (Bures-Wasserstein) formulas, plus barycenters in both regimes.

#include <span>
#include <variant>
#include <vector>

#include "wls/linalg_spd.hpp"

namespace wls {

// Uniform empirical measure on m atoms in R^d. Atoms are kept sorted
// lexicographically (ascending for d = 1).
class EmpiricalDist {
 public:
  EmpiricalDist() = default;
  static EmpiricalDist univariate(std::vector<double> atoms);
  // One atom per row.
  static EmpiricalDist multivariate(const MatrixXd& atoms);

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  int dim() const { return dim_; }
  // Sorted atoms; d = 1 only.
  std::span<const double> values() const;
  MatrixXd as_matrix() const;
  const std::vector<double>& raw() const { return data_; }

  friend bool operator==(const EmpiricalDist&, const EmpiricalDist&) = default;

 private:
  int dim_ = 0;
  std::vector<double> data_;  // row-major m x d
};

// Quantile function sampled at strictly increasing levels in (0, 1).
struct QuantileGrid {
  std::vector<double> levels;
  std::vector<double> values;

  void validate() const;
  // Linear interpolation, constant beyond the end levels.
  double at(double level) const;

  friend bool operator==(const QuantileGrid&, const QuantileGrid&) = default;
};

struct GaussianMeasure {
  VectorXd mean;
  SpdMatrix cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

GaussianMeasure make_gaussian(VectorXd mean, const MatrixXd& cov);
GaussianMeasure gaussian_1d(double mean, double variance);

// A response or fitted marginal in one of the supported representations.
using Marginal = std::variant<EmpiricalDist, QuantileGrid, GaussianMeasure>;

int marginal_dim(const Marginal& m);

// K levels uniformly spanning [0.001, 0.999].
std::vector<double> standard_levels(int k = 500);

double normal_quantile(double p);
double normal_cdf(double z);

// Quantile of an empirical measure: atom k sits at level (k + 0.5) / m, linear
// interpolation in between, constant outside [0.5/m, 1 - 0.5/m].
double empirical_quantile(std::span<const double> sorted_atoms, double level);

// Quantile function of any univariate representation.
double quantile_1d(const Marginal& m, double level);
QuantileGrid resample_1d(const Marginal& m, const std::vector<double>& levels);

// Sample mean and covariance (1/(m-1) normalization; zero covariance for m = 1).
GaussianMeasure sample_moments(const EmpiricalDist& d);

// Squared 2-Wasserstein distance between univariate measures. Two empirical
// measures are compared exactly; other combinations integrate the squared
// quantile difference over the merged level grid (standard 500 levels plus any
// grid levels), trapezoid rule, constant extrapolation into the tails.
double w2_squared_1d(const Marginal& a, const Marginal& b);
double w2_squared_1d(std::span<const double> sorted_a, std::span<const double> sorted_b);

// z -> f^{-1}(g(z)) with g the midpoint-rank empirical CDF of the source atoms
// (linear between atoms, ties share the mean level) and f^{-1} the target
// quantile function.
class MonotoneMap1D {
 public:
  MonotoneMap1D(std::vector<double> source_atoms, Marginal target);
  double operator()(double z) const;
  double source_cdf(double z) const;

 private:
  std::vector<double> knots_;
  std::vector<double> levels_;
  Marginal target_;
};

MonotoneMap1D brenier_1d(std::vector<double> source_atoms, Marginal target);

double gaussian_w2_squared(const GaussianMeasure& a, const GaussianMeasure& b);

// Bures-Wasserstein part only: tr A + tr B - 2 tr (A^{1/2} B A^{1/2})^{1/2}.
double bures_squared(const MatrixXd& a, const MatrixXd& b);

struct TransportCoeff {
  MatrixXd map;
  bool regularized = false;
};

// T = S^{-1/2} (S^{1/2} D S^{1/2})^{1/2} S^{-1/2}, the linear part of the
// Brenier map from N(0, S) to N(0, D). A source whose smallest eigenvalue
// falls below 1e-9 tr(S)/d gets that amount added to its diagonal.
TransportCoeff gaussian_transport_coeff(const MatrixXd& src, const MatrixXd& dst);
inline TransportCoeff gaussian_transport_coeff(const SpdMatrix& src, const SpdMatrix& dst) {
  return gaussian_transport_coeff(src.matrix(), dst.matrix());
}

// Pointwise weighted average of quantile grids sharing one level set.
QuantileGrid barycenter_1d(std::span<const QuantileGrid> quantiles,
                           std::span<const double> weights);

struct BarycenterResult {
  SpdMatrix cov;
  int iterations = 0;
  double residual = 0.0;
};

// Fixed point S <- S^{-1/2} (sum_i w_i (S^{1/2} C_i S^{1/2})^{1/2})^2 S^{-1/2},
// started at the Euclidean mean; stops when the barycenter-equation residual
// relative to ||S||_F is at most tol.
BarycenterResult gaussian_barycenter_fixedpoint(std::span<const SpdMatrix> covs,
                                                std::span<const double> weights,
                                                double tol = 1e-10, int max_iter = 1000);

// ||sum_i w_i (S^{1/2} C_i S^{1/2})^{1/2} - S||_F / ||S||_F
double barycenter_residual(const MatrixXd& s, std::span<const SpdMatrix> covs,
                           std::span<const double> weights);

void check_simplex(std::span<const double> weights, std::size_t expected);

}  // namespace wls
