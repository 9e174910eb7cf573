#pragma once

// Template-deformation simulator: latent coefficients from a Gaussian law,
// random monotone deformations, empirical (or exact) responses.

#include <cstdint>
#include <string>
#include <vector>

#include "wls/rng.hpp"
#include "wls/transport_core.hpp"

namespace wls {

enum class NoiseFamily {
  kIdentity,
  kAdditive,
  kRadial,
  kLocationScale,
  kSinusoidal,
  kGaussianBump,
  kTanhWarp,
  kAdditive2d,
  kRadial2d,
  kRotationScale2d,
};

std::string to_string(NoiseFamily f);
NoiseFamily parse_noise_family(const std::string& name);

// Only the fields relevant to a family are read.
struct DeformParams {
  double sigma = 0.0;     // additive noise sd
  double a = 0.0;         // radial half-width
  double sigma_s = 0.0;   // location-scale sd
  double k = 0.0;         // sinusoidal / tanh frequency
  double amp_max = 0.0;   // amplitude half-width (sinusoidal, bump, tanh)
  double sigma_b = 1.0;   // bump width
  double theta_sd = 0.0;  // rotation angle sd
  double s_lo = 1.0;      // rotation-scale eigenvalue range
  double s_hi = 1.0;
};

struct DeformSpec {
  NoiseFamily family = NoiseFamily::kIdentity;
  DeformParams params;
  double alpha = 1.0;
  double beta = 1.0;

  int dim() const;
  // Throws InputError unless 0 < alpha <= 1 <= beta and the family's
  // derivative band lies inside [alpha, beta].
  void validate() const;
  // Analytic almost-sure range of T' (d = 1) or Jacobian eigenvalues (d = 2).
  std::pair<double, double> derivative_band() const;

  // Parameters and bands of the published noise tables.
  static DeformSpec preset(NoiseFamily f);
  // Figure-only variants: sinusoidal k = 2.5, A_max = 0.3.
  static DeformSpec sinusoidal_steep();
};

// A realized map T = grad(phi).
struct Deformation {
  NoiseFamily family = NoiseFamily::kIdentity;
  double shift = 0.0;   // additive, location-scale offset
  double scale = 1.0;   // radial, location-scale slope
  double amp = 0.0;     // sinusoidal, bump, tanh amplitude
  double k = 0.0;
  double sigma_b = 1.0;
  VectorXd shift2;      // d = 2 additive
  MatrixXd linear2;     // d = 2 linear part (radial, rotation-scale)

  int dim() const;
  double apply(double y) const;
  double derivative(double y) const;
  VectorXd apply(const VectorXd& y) const;
  bool is_affine() const;
  // T(y) = A y + b for affine families.
  std::pair<MatrixXd, VectorXd> affine_form(int d) const;
};

Deformation sample_deformation(const DeformSpec& spec, SplitMix64& rng);

enum class TemplateKind { kUnivariateQuadraticVariance, kBivariateQuadraticCov, kCustomGaussian };

std::string to_string(TemplateKind k);
TemplateKind parse_template_kind(const std::string& name);

// Ground-truth coefficient law Q* = N(m, S) on R^{dp} (vec(B^T) layout) with
// polynomial covariates x = (1, t, ..., t^{p-1}).
struct TemplateSpec {
  TemplateKind kind = TemplateKind::kUnivariateQuadraticVariance;
  int p = 2;
  int d = 1;
  VectorXd coeff_mean;
  MatrixXd coeff_cov;

  static TemplateSpec univariate_quadratic_variance();  // Q*_x = N(t, 1 + t^2)
  static TemplateSpec bivariate_quadratic_cov();        // Sigma(t) = A + t(B+B^T) + t^2 C
  static TemplateSpec custom_gaussian(VectorXd mean, MatrixXd cov, int p, int d);

  VectorXd covariates(double t) const;
  GaussianMeasure marginal_at(double t) const;
};

struct SyntheticDataset {
  MatrixXd design;  // n x p
  std::vector<EmpiricalDist> responses;
  std::vector<GaussianMeasure> truth;
  std::vector<Deformation> deformations;
  std::uint64_t seed = 0;
  int m = 0;
  TemplateSpec templ;
  DeformSpec spec;
};

// Row i draws t_i ~ U[-2, 2], a deformation, then m atoms T(Z), Z ~ Q*_{x_i},
// all from the sub-stream derive_seed(seed, i). Rows run in parallel.
SyntheticDataset generate_dataset(const TemplateSpec& templ, const DeformSpec& spec, int n,
                                  int m, std::uint64_t seed);

// Same rows and deformations as generate_dataset(.., seed) but with responses
// observed exactly, (T)_# Q*_{x_i}; affine families only.
struct ExactDataset {
  MatrixXd design;
  std::vector<GaussianMeasure> responses;
  std::vector<GaussianMeasure> truth;
  std::uint64_t seed = 0;
};
ExactDataset generate_exact_dataset(const TemplateSpec& templ, const DeformSpec& spec, int n,
                                    std::uint64_t seed);

struct C2Report {
  double max_deviation = 0.0;        // max over grid of ||mean T(y) - y||
  std::vector<double> deviation;     // per grid point
  std::vector<double> standard_error;  // per grid point, max over coordinates
  // Every grid point within k standard errors (plus 1e-12).
  bool within(double k_sigma) const;
};

// grid: one point per row (d columns).
C2Report check_c2_montecarlo(const DeformSpec& spec, const MatrixXd& grid, int n_draws,
                             std::uint64_t seed);

// Empirical range of T' (central differences, step 1e-5) or of the finite-
// difference Jacobian eigenvalues over draws x grid.
std::pair<double, double> check_c3(const DeformSpec& spec, const MatrixXd& grid, int n_draws,
                                   std::uint64_t seed);

}  // namespace wls
