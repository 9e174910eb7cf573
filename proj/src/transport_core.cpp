#include "wls/transport_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "wls/error.hpp"

namespace wls {

// ---------------------------------------------------------------------------
// Representations

EmpiricalDist EmpiricalDist::univariate(std::vector<double> atoms) {
  if (atoms.empty()) throw InputError("EmpiricalDist: empty atom list");
  for (double a : atoms) {
    if (!std::isfinite(a)) throw InputError("EmpiricalDist: non-finite atom");
  }
  std::sort(atoms.begin(), atoms.end());
  EmpiricalDist d;
  d.dim_ = 1;
  d.data_ = std::move(atoms);
  return d;
}

EmpiricalDist EmpiricalDist::multivariate(const MatrixXd& atoms) {
  if (atoms.rows() == 0 || atoms.cols() == 0) {
    throw InputError("EmpiricalDist: empty atom list");
  }
  if (!atoms.allFinite()) throw InputError("EmpiricalDist: non-finite atom");
  const Eigen::Index m = atoms.rows();
  const Eigen::Index d = atoms.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < d; ++k) {
      if (atoms(a, k) < atoms(b, k)) return true;
      if (atoms(a, k) > atoms(b, k)) return false;
    }
    return false;
  });
  EmpiricalDist out;
  out.dim_ = static_cast<int>(d);
  out.data_.reserve(static_cast<std::size_t>(m * d));
  for (Eigen::Index r : order) {
    for (Eigen::Index k = 0; k < d; ++k) out.data_.push_back(atoms(r, k));
  }
  return out;
}

std::span<const double> EmpiricalDist::values() const {
  if (dim_ != 1) throw InputError("EmpiricalDist::values: measure is not univariate");
  return {data_.data(), data_.size()};
}

MatrixXd EmpiricalDist::as_matrix() const {
  const auto m = static_cast<Eigen::Index>(size());
  MatrixXd out(m, dim_);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (int k = 0; k < dim_; ++k) out(r, k) = data_[static_cast<std::size_t>(r * dim_ + k)];
  }
  return out;
}

void QuantileGrid::validate() const {
  if (levels.empty() || levels.size() != values.size()) {
    throw InputError("QuantileGrid: levels and values must be non-empty and aligned");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0)) {
      throw InputError("QuantileGrid: level outside (0,1)");
    }
    if (!std::isfinite(values[i])) throw InputError("QuantileGrid: non-finite value");
    if (i > 0 && !(levels[i] > levels[i - 1])) {
      throw InputError("QuantileGrid: levels not strictly increasing");
    }
    if (i > 0 && values[i] < values[i - 1]) {
      throw InputError("QuantileGrid: values not monotone");
    }
  }
}

double QuantileGrid::at(double level) const {
  if (level <= levels.front()) return values.front();
  if (level >= levels.back()) return values.back();
  auto it = std::upper_bound(levels.begin(), levels.end(), level);
  const auto hi = static_cast<std::size_t>(it - levels.begin());
  const std::size_t lo = hi - 1;
  const double w = (level - levels[lo]) / (levels[hi] - levels[lo]);
  return values[lo] + w * (values[hi] - values[lo]);
}

GaussianMeasure make_gaussian(VectorXd mean, const MatrixXd& cov) {
  if (!mean.allFinite()) throw InputError("GaussianMeasure: non-finite mean");
  if (cov.rows() != mean.size()) {
    throw InputError("GaussianMeasure: mean/covariance dimension mismatch");
  }
  return {std::move(mean), SpdMatrix(cov)};
}

GaussianMeasure gaussian_1d(double mean, double variance) {
  return make_gaussian(VectorXd::Constant(1, mean), MatrixXd::Constant(1, 1, variance));
}

int marginal_dim(const Marginal& m) {
  return std::visit(
      [](const auto& v) -> int {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, QuantileGrid>) {
          return 1;
        } else {
          return v.dim();
        }
      },
      m);
}

// ---------------------------------------------------------------------------
// Quantiles

std::vector<double> standard_levels(int k) {
  if (k < 2) throw InputError("standard_levels: need at least 2 levels");
  std::vector<double> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = 0.001 + 0.998 * i / (k - 1);
  return out;
}

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> std_normal;
  return boost::math::quantile(std_normal, p);
}

double normal_cdf(double z) {
  static const boost::math::normal_distribution<double> std_normal;
  return boost::math::cdf(std_normal, z);
}

double empirical_quantile(std::span<const double> sorted, double level) {
  const auto m = static_cast<double>(sorted.size());
  const double pos = level * m - 0.5;
  if (pos <= 0.0) return sorted.front();
  if (pos >= m - 1.0) return sorted.back();
  const auto lo = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

double quantile_1d(const Marginal& m, double level) {
  if (const auto* e = std::get_if<EmpiricalDist>(&m)) {
    return empirical_quantile(e->values(), level);
  }
  if (const auto* q = std::get_if<QuantileGrid>(&m)) return q->at(level);
  const auto& g = std::get<GaussianMeasure>(m);
  if (g.dim() != 1) throw InputError("quantile_1d: Gaussian is not univariate");
  const double sd = std::sqrt(std::max(g.cov(0, 0), 0.0));
  if (sd == 0.0) return g.mean(0);
  const double p = std::clamp(level, 1e-16, 1.0 - 1e-16);
  return g.mean(0) + sd * normal_quantile(p);
}

QuantileGrid resample_1d(const Marginal& m, const std::vector<double>& levels) {
  if (marginal_dim(m) != 1) throw InputError("resample_1d: measure is not univariate");
  QuantileGrid out{levels, std::vector<double>(levels.size())};
  for (std::size_t i = 0; i < levels.size(); ++i) out.values[i] = quantile_1d(m, levels[i]);
  // guard against round-off producing tiny decreases
  for (std::size_t i = 1; i < out.values.size(); ++i) {
    out.values[i] = std::max(out.values[i], out.values[i - 1]);
  }
  return out;
}

GaussianMeasure sample_moments(const EmpiricalDist& d) {
  MatrixXd x = d.as_matrix();
  VectorXd mean = x.colwise().mean();
  MatrixXd centered = x.rowwise() - mean.transpose();
  MatrixXd cov = MatrixXd::Zero(d.dim(), d.dim());
  if (x.rows() > 1) cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  return make_gaussian(std::move(mean), symmetrize(cov));
}

// ---------------------------------------------------------------------------
// 1-D distances

double w2_squared_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("w2_squared_1d: empty atom list");
  const std::size_t ma = a.size();
  const std::size_t mb = b.size();
  if (ma == mb) {
    double acc = 0.0;
    for (std::size_t k = 0; k < ma; ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
    return acc / static_cast<double>(ma);
  }
  // Exact: both quantile functions are step functions; walk the merged
  // breakpoints k/ma and l/mb using integer cross-multiplication.
  std::size_t i = 0;
  std::size_t j = 0;
  double acc = 0.0;
  std::size_t prev = 0;  // in units of 1/(ma*mb)
  while (i < ma && j < mb) {
    const std::size_t next_a = (i + 1) * mb;
    const std::size_t next_b = (j + 1) * ma;
    const std::size_t next = std::min(next_a, next_b);
    const double diff = a[i] - b[j];
    acc += diff * diff * static_cast<double>(next - prev);
    prev = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return acc / static_cast<double>(ma * mb);
}

namespace {

std::vector<double> merged_levels(const Marginal& a, const Marginal& b) {
  std::vector<double> levels = standard_levels();
  for (const Marginal* m : {&a, &b}) {
    if (const auto* q = std::get_if<QuantileGrid>(m)) {
      levels.insert(levels.end(), q->levels.begin(), q->levels.end());
    }
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

}  // namespace

double w2_squared_1d(const Marginal& a, const Marginal& b) {
  if (marginal_dim(a) != 1 || marginal_dim(b) != 1) {
    throw InputError("w2_squared_1d: both measures must be univariate");
  }
  const auto* ea = std::get_if<EmpiricalDist>(&a);
  const auto* eb = std::get_if<EmpiricalDist>(&b);
  if (ea && eb) return w2_squared_1d(ea->values(), eb->values());
  const auto* ga = std::get_if<GaussianMeasure>(&a);
  const auto* gb = std::get_if<GaussianMeasure>(&b);
  if (ga && gb) return gaussian_w2_squared(*ga, *gb);

  const std::vector<double> levels = merged_levels(a, b);
  std::vector<double> sq(levels.size());
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double d = quantile_1d(a, levels[k]) - quantile_1d(b, levels[k]);
    sq[k] = d * d;
  }
  double acc = sq.front() * levels.front() + sq.back() * (1.0 - levels.back());
  for (std::size_t k = 1; k < levels.size(); ++k) {
    acc += 0.5 * (sq[k] + sq[k - 1]) * (levels[k] - levels[k - 1]);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// 1-D Brenier maps

MonotoneMap1D::MonotoneMap1D(std::vector<double> source, Marginal target)
    : target_(std::move(target)) {
  if (source.empty()) throw InputError("brenier_1d: empty source");
  if (marginal_dim(target_) != 1) throw InputError("brenier_1d: target is not univariate");
  std::sort(source.begin(), source.end());
  const auto m = static_cast<double>(source.size());
  for (std::size_t k = 0; k < source.size();) {
    std::size_t e = k;
    while (e + 1 < source.size() && source[e + 1] == source[k]) ++e;
    // tied atoms share the mean of their midpoint levels
    const double level = (0.5 * static_cast<double>(k + e) + 0.5) / m;
    knots_.push_back(source[k]);
    levels_.push_back(level);
    k = e + 1;
  }
}

double MonotoneMap1D::source_cdf(double z) const {
  if (z <= knots_.front()) return levels_.front();
  if (z >= knots_.back()) return levels_.back();
  auto it = std::upper_bound(knots_.begin(), knots_.end(), z);
  const auto hi = static_cast<std::size_t>(it - knots_.begin());
  const std::size_t lo = hi - 1;
  const double w = (z - knots_[lo]) / (knots_[hi] - knots_[lo]);
  return levels_[lo] + w * (levels_[hi] - levels_[lo]);
}

double MonotoneMap1D::operator()(double z) const { return quantile_1d(target_, source_cdf(z)); }

MonotoneMap1D brenier_1d(std::vector<double> source_atoms, Marginal target) {
  return MonotoneMap1D(std::move(source_atoms), std::move(target));
}

// ---------------------------------------------------------------------------
// Gaussian formulas

double bures_squared(const MatrixXd& a, const MatrixXd& b) {
  const MatrixXd ra = spd_sqrt(a);
  const MatrixXd cross = spd_sqrt(MatrixXd(ra * b * ra));
  return std::max(a.trace() + b.trace() - 2.0 * cross.trace(), 0.0);
}

double gaussian_w2_squared(const GaussianMeasure& a, const GaussianMeasure& b) {
  if (a.dim() != b.dim()) throw InputError("gaussian_w2_squared: dimension mismatch");
  return (a.mean - b.mean).squaredNorm() + bures_squared(a.cov.matrix(), b.cov.matrix());
}

TransportCoeff gaussian_transport_coeff(const MatrixXd& src, const MatrixXd& dst) {
  if (src.rows() != dst.rows() || src.rows() != src.cols() || dst.rows() != dst.cols()) {
    throw InputError("gaussian_transport_coeff: dimension mismatch");
  }
  const auto d = static_cast<double>(src.rows());
  const double floor = 1e-9 * std::max(src.trace() / d, 1e-300);
  SymEigen eig = sym_eigen(src);
  TransportCoeff out;
  VectorXd lam = eig.values;
  if (lam.minCoeff() <= floor) {
    lam.array() += floor;
    out.regularized = true;
  }
  lam = lam.cwiseMax(0.0);
  const MatrixXd& v = eig.vectors;
  const MatrixXd half = v * lam.cwiseSqrt().asDiagonal() * v.transpose();
  const MatrixXd inv_half = v * lam.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  const MatrixXd middle = spd_sqrt(MatrixXd(half * dst * half));
  out.map = symmetrize(inv_half * middle * inv_half);
  return out;
}

// ---------------------------------------------------------------------------
// Barycenters

void check_simplex(std::span<const double> weights, std::size_t expected) {
  if (weights.size() != expected) throw InputError("weights: length mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InputError("weights: negative or non-finite weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InputError("weights: sum " + std::to_string(sum) + " differs from 1");
  }
}

QuantileGrid barycenter_1d(std::span<const QuantileGrid> quantiles,
                           std::span<const double> weights) {
  if (quantiles.empty()) throw InputError("barycenter_1d: no inputs");
  check_simplex(weights, quantiles.size());
  const std::vector<double>& levels = quantiles.front().levels;
  QuantileGrid out{levels, std::vector<double>(levels.size(), 0.0)};
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    if (quantiles[i].levels != levels) {
      throw InputError("barycenter_1d: inputs must share one level grid (resample first)");
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
      out.values[k] += weights[i] * quantiles[i].values[k];
    }
  }
  for (std::size_t k = 1; k < out.values.size(); ++k) {
    out.values[k] = std::max(out.values[k], out.values[k - 1]);
  }
  return out;
}

namespace {

MatrixXd barycenter_map_sum(const MatrixXd& root, std::span<const SpdMatrix> covs,
                            std::span<const double> weights) {
  MatrixXd acc = MatrixXd::Zero(root.rows(), root.cols());
  for (std::size_t i = 0; i < covs.size(); ++i) {
    acc += weights[i] * spd_sqrt(MatrixXd(root * covs[i].matrix() * root));
  }
  return symmetrize(acc);
}

}  // namespace

double barycenter_residual(const MatrixXd& s, std::span<const SpdMatrix> covs,
                           std::span<const double> weights) {
  const MatrixXd root = spd_sqrt(s);
  const MatrixXd r = barycenter_map_sum(root, covs, weights);
  return (r - s).norm() / std::max(s.norm(), 1e-300);
}

BarycenterResult gaussian_barycenter_fixedpoint(std::span<const SpdMatrix> covs,
                                                std::span<const double> weights, double tol,
                                                int max_iter) {
  if (covs.empty()) throw InputError("gaussian_barycenter_fixedpoint: no inputs");
  check_simplex(weights, covs.size());
  const Eigen::Index d = covs.front().dim();
  MatrixXd s = MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < covs.size(); ++i) {
    if (covs[i].dim() != d) throw InputError("gaussian_barycenter_fixedpoint: dimension mismatch");
    s += weights[i] * covs[i].matrix();
  }
  double residual = 0.0;
  for (int it = 0; it <= max_iter; ++it) {
    const MatrixXd root = spd_sqrt(s);
    const MatrixXd r = barycenter_map_sum(root, covs, weights);
    residual = (r - s).norm() / std::max(s.norm(), 1e-300);
    if (residual <= tol) return {SpdMatrix::trusted(s), it, residual};
    if (it == max_iter) break;
    const double floor = 1e-14 * std::max(s.trace() / static_cast<double>(d), 1e-300);
    const MatrixXd inv_root = spd_inv_sqrt(s, floor);
    s = symmetrize(inv_root * r * r * inv_root);
  }
  throw ConvergenceError("gaussian_barycenter_fixedpoint: no convergence within " +
                             std::to_string(max_iter) + " iterations",
                         residual);
}

}  // namespace wls
