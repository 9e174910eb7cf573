#pragma once

// Evaluation: Wasserstein errors, R^2, leave-one-out CV, design leverage and
// the convergence-rate harness.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wls/deform_sim.hpp"
#include "wls/frechet_baseline.hpp"
#include "wls/transport_core.hpp"
#include "wls/wls_gaussian.hpp"
#include "wls/wls_particle.hpp"

namespace wls {

// W2^2 between two marginals: Gaussian pairs in closed form, univariate pairs
// by quantiles. Multivariate empirical measures are refused.
double w2_squared(const Marginal& a, const Marginal& b);

// (1/n) sum_i W2^2(model_i, truth_i)
double in_sample_error(std::span<const Marginal> model, std::span<const Marginal> truth);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // 1/(k-1); 0 for k < 2
};
Summary summarize(std::span<const double> values);

struct EvalReport {
  std::vector<double> w2_vs_response;  // non-squared, per row
  std::vector<double> w2_vs_truth;     // empty when no truth is supplied
  Summary vs_response;
  Summary vs_truth;
  std::optional<double> r2;
};

EvalReport evaluate(std::span<const Marginal> fitted, std::span<const Marginal> responses,
                    std::span<const Marginal> truth = {});

// Uniform-weight barycenter of the responses: exact for equal-size univariate
// empirical measures, a quantile average on standard_levels() for other
// univariate inputs, the fixed point for Gaussians.
Marginal response_barycenter(std::span<const Marginal> responses);

// 1 - sum W2^2(nu_i, fit_i) / sum W2^2(nu_i, barycenter). Throws
// DefinedValueError when the denominator vanishes.
double wasserstein_r2(std::span<const Marginal> fitted, std::span<const Marginal> responses);

// Fits on (design, responses) and returns the predicted marginal at x.
using FitPredict = std::function<Marginal(const MatrixXd& design,
                                          std::span<const Marginal> responses,
                                          const VectorXd& x)>;

FitPredict particle_predictor(const SolverConfig& config);
FitPredict gaussian_predictor(const GaussianConfig& config);
FitPredict frechet_predictor(int levels = 200);

struct LooResult {
  std::vector<double> w2;  // per fold, NaN for a failed fold
  int failed = 0;
  Summary summary;         // over successful folds
};

// Folds run in parallel; a fold whose fit diverges or fails to converge is
// excluded and counted.
LooResult loo_cv(const FitPredict& fit_fn, const MatrixXd& design,
                 std::span<const Marginal> responses);

struct Incoherence {
  double mu = 0.0;
  VectorXd leverage;
};

// h_ii = x_i^T (X^T X)^+ x_i, mu = (n / p) max_i h_ii.
Incoherence incoherence(const MatrixXd& design);

struct RateCell {
  int n = 0;
  std::uint64_t seed = 0;
  double error = 0.0;  // (1/n) sum W2^2(fit_i, truth_i); NaN if the fit failed
};

struct RateStudy {
  std::vector<RateCell> cells;
  std::vector<int> n_values;
  std::vector<double> median_error;
  double slope = 0.0;
  // Every median at or below the error floor: nothing to fit a slope to.
  bool slope_skipped = false;
};

inline constexpr double kRateErrorFloor = 1e-10;

// Exact (m = infinity) Gaussian responses from generate_exact_dataset, fitted
// with the Bures-Wasserstein solver; cells (n, seed) run in parallel with
// seed derive_seed(base_seed, s) for replicate s.
RateStudy rate_study(const TemplateSpec& templ, const DeformSpec& spec,
                     const std::vector<int>& n_values, int replicates, std::uint64_t base_seed,
                     const GaussianConfig& config);

}  // namespace wls
