#include "wls/inference_cond.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wls/error.hpp"

namespace wls {

void ConditionSpec::validate(Eigen::Index p) const {
  if (constraints.empty()) throw InputError("ConditionSpec: at least one constraint required");
  for (const auto& c : constraints) {
    if (c.x.size() != p) throw InputError("ConditionSpec: covariate has wrong length");
    if (!(c.lo <= c.hi)) throw InputError("ConditionSpec: need lo <= hi");
  }
}

std::vector<int> select(const ParticleCloud& cloud, const ConditionSpec& spec) {
  spec.validate(cloud.dim());
  std::vector<char> keep(static_cast<std::size_t>(cloud.size()), 1);
  for (const auto& c : spec.constraints) {
    const VectorXd z = cloud.predictions(c.x);
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      if (!(z(j) >= c.lo && z(j) <= c.hi)) keep[static_cast<std::size_t>(j)] = 0;
    }
  }
  std::vector<int> out;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j]) out.push_back(static_cast<int>(j));
  }
  return out;
}

double midpoint_percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DefinedValueError("midpoint_percentile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("midpoint_percentile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  return empirical_quantile(values, q);
}

ConditionalBand conditional_band(const ParticleCloud& cloud, std::span<const int> indices,
                                 const MatrixXd& x_grid, std::span<const double> coverage) {
  if (x_grid.cols() != cloud.dim()) throw InputError("conditional_band: grid has wrong width");
  for (double c : coverage) {
    if (!(c > 0.0 && c < 1.0)) throw InputError("conditional_band: coverage must lie in (0, 1)");
  }
  ConditionalBand band;
  band.coverage.assign(coverage.begin(), coverage.end());
  band.retained = static_cast<int>(indices.size());
  band.empty = indices.empty();
  if (band.empty) return band;
  MatrixXd kept(static_cast<Eigen::Index>(indices.size()), cloud.dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    kept.row(static_cast<Eigen::Index>(k)) = cloud.particles.row(indices[k]);
  }
  for (Eigen::Index g = 0; g < x_grid.rows(); ++g) {
    const VectorXd z = kept * x_grid.row(g).transpose();
    std::vector<double> sorted(z.data(), z.data() + z.size());
    std::sort(sorted.begin(), sorted.end());
    BandPoint pt;
    pt.mean = z.mean();
    for (double c : coverage) {
      pt.lower.push_back(empirical_quantile(sorted, 0.5 - 0.5 * c));
      pt.upper.push_back(empirical_quantile(sorted, 0.5 + 0.5 * c));
    }
    band.points.push_back(std::move(pt));
  }
  return band;
}

double exceedance_prob(const ParticleCloud& cloud, std::span<const int> indices,
                       const VectorXd& x, double threshold) {
  if (indices.empty()) {
    throw DefinedValueError("exceedance_prob: the conditioning scenario retains no particles");
  }
  const VectorXd z = cloud.predictions(x);
  std::size_t hits = 0;
  for (int j : indices) {
    if (z(j) >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

CoeffSummary coeff_summary(const ParticleCloud& cloud) {
  const Eigen::Index m = cloud.size();
  const Eigen::Index p = cloud.dim();
  if (m < 2) throw InputError("coeff_summary: need at least 2 particles");
  CoeffSummary s;
  s.mean = cloud.particles.colwise().mean().transpose();
  const MatrixXd centred = cloud.particles.rowwise() - s.mean.transpose();
  s.cov = centred.transpose() * centred / static_cast<double>(m - 1);
  s.sd = s.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  s.q025.resize(p);
  s.q975.resize(p);
  s.prob_positive.resize(p);
  s.zero_variance.assign(static_cast<std::size_t>(p), false);
  for (Eigen::Index c = 0; c < p; ++c) {
    const VectorXd col = cloud.particles.col(c);
    std::vector<double> v(col.data(), col.data() + col.size());
    std::sort(v.begin(), v.end());
    s.q025(c) = empirical_quantile(v, 0.025);
    s.q975(c) = empirical_quantile(v, 0.975);
    s.prob_positive(c) = static_cast<double>((col.array() > 0.0).count()) / static_cast<double>(m);
    s.zero_variance[static_cast<std::size_t>(c)] = !(s.sd(c) > 0.0);
  }
  s.corr = MatrixXd::Zero(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b < p; ++b) {
      if (s.sd(a) > 0.0 && s.sd(b) > 0.0) s.corr(a, b) = s.cov(a, b) / (s.sd(a) * s.sd(b));
    }
  }
  return s;
}

SchurResult conditional_variance_schur(const SpdMatrix& cov, int given) {
  const Eigen::Index d = cov.dim();
  if (d < 2) throw InputError("conditional_variance_schur: need at least 2 coordinates");
  if (given < 0 || given >= d) throw InputError("conditional_variance_schur: index out of range");
  std::vector<Eigen::Index> rest;
  for (Eigen::Index c = 0; c < d; ++c) {
    if (c != given) rest.push_back(c);
  }
  const auto r = static_cast<Eigen::Index>(rest.size());
  const MatrixXd& s = cov.matrix();
  MatrixXd s22(r, r);
  VectorXd s21(r);
  for (Eigen::Index a = 0; a < r; ++a) {
    s21(a) = s(rest[static_cast<std::size_t>(a)], given);
    for (Eigen::Index b = 0; b < r; ++b) {
      s22(a, b) = s(rest[static_cast<std::size_t>(a)], rest[static_cast<std::size_t>(b)]);
    }
  }
  const double s11 = s(given, given);
  SchurResult out;
  if (s11 <= 1e-12 * s.diagonal().maxCoeff()) {
    out.regularized = true;
    out.cov = s22;
  } else {
    out.cov = psd_clip(symmetrize(s22 - s21 * s21.transpose() / s11));
  }
  return out;
}

}  // namespace wls
