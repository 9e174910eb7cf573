#pragma once

// Conditional inference on a fitted coefficient cloud: keep the particles whose
// predictions fall inside observation windows, then summarize what they imply
// elsewhere.

#include <optional>
#include <span>
#include <vector>

#include "wls/linalg_spd.hpp"
#include "wls/wls_particle.hpp"

namespace wls {

struct Constraint {
  VectorXd x;
  double lo = 0.0;
  double hi = 0.0;
};

struct ConditionSpec {
  std::vector<Constraint> constraints;
  void validate(Eigen::Index p) const;
};

// Particles with x^T beta in [lo, hi] for every constraint, in index order.
// An empty result is legitimate.
std::vector<int> select(const ParticleCloud& cloud, const ConditionSpec& spec);

// Order statistic at probability q with midpoint ranks: the k-th smallest of K
// values sits at (k + 0.5) / K, linear in between, clamped at the ends.
double midpoint_percentile(std::vector<double> values, double q);

struct BandPoint {
  double mean = 0.0;
  std::vector<double> lower;  // one per requested coverage level
  std::vector<double> upper;
};

struct ConditionalBand {
  bool empty = true;  // no retained particles: no bands
  int retained = 0;
  std::vector<double> coverage;
  std::vector<BandPoint> points;  // one per grid covariate
};

// coverage 0.75 -> percentiles 12.5 / 87.5.
ConditionalBand conditional_band(const ParticleCloud& cloud, std::span<const int> indices,
                                 const MatrixXd& x_grid, std::span<const double> coverage);

// Share of retained particles with x^T beta >= threshold. Throws
// DefinedValueError when nothing is retained.
double exceedance_prob(const ParticleCloud& cloud, std::span<const int> indices,
                       const VectorXd& x, double threshold);

struct CoeffSummary {
  VectorXd mean;
  VectorXd sd;
  VectorXd q025;
  VectorXd q975;
  VectorXd prob_positive;
  MatrixXd cov;   // 1/(M-1)
  MatrixXd corr;  // 0 wherever a coordinate has zero variance
  std::vector<bool> zero_variance;
};

CoeffSummary coeff_summary(const ParticleCloud& cloud);

struct SchurResult {
  MatrixXd cov;
  bool regularized = false;
};

// Covariance of the remaining coordinates given coordinate `given`:
// S22 - S21 S11^{-1} S12. A block S11 at or below 1e-12 * max diagonal is
// treated as singular and the conditional term dropped via pseudo-inverse.
SchurResult conditional_variance_schur(const SpdMatrix& cov, int given);

}  // namespace wls
