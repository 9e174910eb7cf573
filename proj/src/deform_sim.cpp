#include "wls/deform_sim.hpp"

#include <cmath>
#include <map>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "wls/error.hpp"
#include "wls/wls_gaussian.hpp"

namespace wls {

namespace {

const std::map<NoiseFamily, std::string>& family_names() {
  static const std::map<NoiseFamily, std::string> names = {
      {NoiseFamily::kIdentity, "identity"},
      {NoiseFamily::kAdditive, "additive"},
      {NoiseFamily::kRadial, "radial"},
      {NoiseFamily::kLocationScale, "location_scale"},
      {NoiseFamily::kSinusoidal, "sinusoidal"},
      {NoiseFamily::kGaussianBump, "gaussian_bump"},
      {NoiseFamily::kTanhWarp, "tanh_warp"},
      {NoiseFamily::kAdditive2d, "additive2d"},
      {NoiseFamily::kRadial2d, "radial2d"},
      {NoiseFamily::kRotationScale2d, "rotation_scale2d"},
  };
  return names;
}

double uniform(SplitMix64& rng, double lo, double hi) {
  return boost::random::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(SplitMix64& rng, double mean, double sd) {
  if (sd == 0.0) return mean;
  return boost::random::normal_distribution<double>(mean, sd)(rng);
}

constexpr double kBandSlack = 1e-12;

}  // namespace

std::string to_string(NoiseFamily f) { return family_names().at(f); }

NoiseFamily parse_noise_family(const std::string& name) {
  for (const auto& [f, s] : family_names()) {
    if (s == name) return f;
  }
  throw InputError("unknown noise family '" + name + "'");
}

int DeformSpec::dim() const {
  switch (family) {
    case NoiseFamily::kAdditive2d:
    case NoiseFamily::kRadial2d:
    case NoiseFamily::kRotationScale2d:
      return 2;
    default:
      return 1;
  }
}

std::pair<double, double> DeformSpec::derivative_band() const {
  const DeformParams& q = params;
  switch (family) {
    case NoiseFamily::kIdentity:
    case NoiseFamily::kAdditive:
    case NoiseFamily::kAdditive2d:
      return {1.0, 1.0};
    case NoiseFamily::kRadial:
    case NoiseFamily::kRadial2d:
      return {1.0 - q.a, 1.0 + q.a};
    case NoiseFamily::kLocationScale:
      // scale truncated to 1 +- 3 sigma_s
      return {1.0 - 3.0 * q.sigma_s, 1.0 + 3.0 * q.sigma_s};
    case NoiseFamily::kSinusoidal:
    case NoiseFamily::kTanhWarp:
      return {1.0 - q.amp_max * q.k, 1.0 + q.amp_max * q.k};
    case NoiseFamily::kGaussianBump:
      // d/dy [y exp(-y^2 / 2 s^2)] ranges over [-2 e^{-3/2}, 1]
      return {1.0 - q.amp_max, 1.0 + q.amp_max};
    case NoiseFamily::kRotationScale2d:
      return {q.s_lo, q.s_hi};
  }
  return {1.0, 1.0};
}

void DeformSpec::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0 && beta >= 1.0)) {
    throw InputError("DeformSpec: need 0 < alpha <= 1 <= beta");
  }
  const DeformParams& q = params;
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InputError(std::string("DeformSpec: ") + what);
  };
  switch (family) {
    case NoiseFamily::kAdditive:
    case NoiseFamily::kAdditive2d:
      require(q.sigma >= 0.0, "sigma must be >= 0");
      break;
    case NoiseFamily::kRadial:
    case NoiseFamily::kRadial2d:
      require(q.a >= 0.0 && q.a < 1.0, "radial a must lie in [0, 1)");
      break;
    case NoiseFamily::kLocationScale:
      require(q.sigma_s >= 0.0 && 3.0 * q.sigma_s < 1.0, "sigma_s must lie in [0, 1/3)");
      break;
    case NoiseFamily::kSinusoidal:
    case NoiseFamily::kTanhWarp:
      require(q.k > 0.0 && q.amp_max >= 0.0 && q.amp_max * q.k < 1.0,
              "need k > 0 and A_max * k < 1");
      break;
    case NoiseFamily::kGaussianBump:
      require(q.sigma_b > 0.0 && q.amp_max >= 0.0 && q.amp_max < 1.0,
              "need sigma_b > 0 and A_max < 1");
      break;
    case NoiseFamily::kRotationScale2d:
      require(q.theta_sd >= 0.0, "theta_sd must be >= 0");
      require(q.s_lo > 0.0 && q.s_lo <= q.s_hi, "need 0 < s_lo <= s_hi");
      require(std::abs(0.5 * (q.s_lo + q.s_hi) - 1.0) < 1e-12,
              "scale range must be centred at 1 for a mean-identity map");
      break;
    case NoiseFamily::kIdentity:
      break;
  }
  const auto [lo, hi] = derivative_band();
  if (lo < alpha - kBandSlack || hi > beta + kBandSlack) {
    throw InputError("DeformSpec: parameters leave the curvature band [alpha, beta]");
  }
}

DeformSpec DeformSpec::preset(NoiseFamily f) {
  DeformSpec s;
  s.family = f;
  switch (f) {
    case NoiseFamily::kIdentity:
      break;
    case NoiseFamily::kAdditive:
    case NoiseFamily::kAdditive2d:
      s.params.sigma = 0.3;
      break;
    case NoiseFamily::kRadial:
    case NoiseFamily::kRadial2d:
      s.params.a = 0.3;
      s.alpha = 0.70;
      s.beta = 1.30;
      break;
    case NoiseFamily::kLocationScale:
      s.params.sigma_s = 0.2;
      s.alpha = 0.40;
      s.beta = 1.60;
      break;
    case NoiseFamily::kSinusoidal:
      s.params.k = 1.2;
      s.params.amp_max = 0.25;
      s.alpha = 0.70;
      s.beta = 1.30;
      break;
    case NoiseFamily::kGaussianBump:
      s.params.amp_max = 0.8;
      s.params.sigma_b = 1.0;
      s.alpha = 0.20;
      s.beta = 1.80;
      break;
    case NoiseFamily::kTanhWarp:
      s.params.k = 0.8;
      s.params.amp_max = 0.4;
      s.alpha = 0.68;
      s.beta = 1.32;
      break;
    case NoiseFamily::kRotationScale2d:
      s.params.theta_sd = 0.3;
      s.params.s_lo = 0.8;
      s.params.s_hi = 1.2;
      s.alpha = 0.80;
      s.beta = 1.20;
      break;
  }
  return s;
}

DeformSpec DeformSpec::sinusoidal_steep() {
  DeformSpec s;
  s.family = NoiseFamily::kSinusoidal;
  s.params.k = 2.5;
  s.params.amp_max = 0.30;
  s.alpha = 0.25;
  s.beta = 1.75;
  return s;
}

// ---------------------------------------------------------------------------

int Deformation::dim() const {
  switch (family) {
    case NoiseFamily::kAdditive2d:
    case NoiseFamily::kRadial2d:
    case NoiseFamily::kRotationScale2d:
      return 2;
    default:
      return 1;
  }
}

double Deformation::apply(double y) const {
  switch (family) {
    case NoiseFamily::kIdentity:
      return y;
    case NoiseFamily::kAdditive:
      return y + shift;
    case NoiseFamily::kRadial:
      return scale * y;
    case NoiseFamily::kLocationScale:
      return scale * y + shift;
    case NoiseFamily::kSinusoidal:
      return y + amp * std::sin(k * y);
    case NoiseFamily::kGaussianBump:
      return y + amp * y * std::exp(-y * y / (2.0 * sigma_b * sigma_b));
    case NoiseFamily::kTanhWarp:
      return y + amp * std::tanh(k * y);
    default:
      throw InputError("Deformation: scalar apply on a 2-D family");
  }
}

double Deformation::derivative(double y) const {
  switch (family) {
    case NoiseFamily::kIdentity:
    case NoiseFamily::kAdditive:
      return 1.0;
    case NoiseFamily::kRadial:
    case NoiseFamily::kLocationScale:
      return scale;
    case NoiseFamily::kSinusoidal:
      return 1.0 + amp * k * std::cos(k * y);
    case NoiseFamily::kGaussianBump: {
      const double s2 = sigma_b * sigma_b;
      return 1.0 + amp * (1.0 - y * y / s2) * std::exp(-y * y / (2.0 * s2));
    }
    case NoiseFamily::kTanhWarp: {
      const double c = std::cosh(k * y);
      return 1.0 + amp * k / (c * c);
    }
    default:
      throw InputError("Deformation: scalar derivative on a 2-D family");
  }
}

VectorXd Deformation::apply(const VectorXd& y) const {
  if (dim() == 1) {
    if (y.size() != 1) throw InputError("Deformation: dimension mismatch");
    return VectorXd::Constant(1, apply(y(0)));
  }
  if (y.size() != 2) throw InputError("Deformation: dimension mismatch");
  switch (family) {
    case NoiseFamily::kAdditive2d:
      return y + shift2;
    default:
      return linear2 * y;
  }
}

bool Deformation::is_affine() const {
  switch (family) {
    case NoiseFamily::kSinusoidal:
    case NoiseFamily::kGaussianBump:
    case NoiseFamily::kTanhWarp:
      return false;
    default:
      return true;
  }
}

std::pair<MatrixXd, VectorXd> Deformation::affine_form(int d) const {
  if (!is_affine()) throw InputError("Deformation: family " + to_string(family) + " is not affine");
  if (d != dim()) throw InputError("Deformation: dimension mismatch");
  if (d == 1) {
    return {MatrixXd::Constant(1, 1, derivative(0.0)), VectorXd::Constant(1, apply(0.0))};
  }
  if (family == NoiseFamily::kAdditive2d) return {MatrixXd::Identity(2, 2), shift2};
  return {linear2, VectorXd::Zero(2)};
}

Deformation sample_deformation(const DeformSpec& spec, SplitMix64& rng) {
  spec.validate();
  const DeformParams& q = spec.params;
  Deformation t;
  t.family = spec.family;
  t.k = q.k;
  t.sigma_b = q.sigma_b;
  switch (spec.family) {
    case NoiseFamily::kIdentity:
      break;
    case NoiseFamily::kAdditive:
      t.shift = normal(rng, 0.0, q.sigma);
      break;
    case NoiseFamily::kRadial:
      t.scale = 1.0 + uniform(rng, -q.a, q.a);
      break;
    case NoiseFamily::kLocationScale: {
      // symmetric rejection keeps E[scale] = 1
      double a = 1.0;
      if (q.sigma_s > 0.0) {
        do {
          a = normal(rng, 1.0, q.sigma_s);
        } while (std::abs(a - 1.0) > 3.0 * q.sigma_s);
      }
      t.scale = a;
      t.shift = normal(rng, 0.0, q.sigma_s);
      break;
    }
    case NoiseFamily::kSinusoidal:
    case NoiseFamily::kGaussianBump:
    case NoiseFamily::kTanhWarp:
      t.amp = q.amp_max > 0.0 ? uniform(rng, -q.amp_max, q.amp_max) : 0.0;
      break;
    case NoiseFamily::kAdditive2d:
      t.shift2 = VectorXd(2);
      t.shift2(0) = normal(rng, 0.0, q.sigma);
      t.shift2(1) = normal(rng, 0.0, q.sigma);
      break;
    case NoiseFamily::kRadial2d:
      t.linear2 = (1.0 + uniform(rng, -q.a, q.a)) * MatrixXd::Identity(2, 2);
      break;
    case NoiseFamily::kRotationScale2d: {
      const double theta = normal(rng, 0.0, q.theta_sd);
      const double s1 = q.s_hi > q.s_lo ? uniform(rng, q.s_lo, q.s_hi) : q.s_lo;
      const double s2 = q.s_hi > q.s_lo ? uniform(rng, q.s_lo, q.s_hi) : q.s_lo;
      MatrixXd r(2, 2);
      r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
      MatrixXd dm = MatrixXd::Zero(2, 2);
      dm(0, 0) = s1;
      dm(1, 1) = s2;
      t.linear2 = symmetrize(r.transpose() * dm * r);
      break;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Templates

std::string to_string(TemplateKind k) {
  switch (k) {
    case TemplateKind::kUnivariateQuadraticVariance: return "univariate";
    case TemplateKind::kBivariateQuadraticCov: return "bivariate";
    case TemplateKind::kCustomGaussian: return "custom";
  }
  return "custom";
}

TemplateKind parse_template_kind(const std::string& name) {
  if (name == "univariate") return TemplateKind::kUnivariateQuadraticVariance;
  if (name == "bivariate") return TemplateKind::kBivariateQuadraticCov;
  if (name == "custom") return TemplateKind::kCustomGaussian;
  throw InputError("unknown template '" + name + "'");
}

TemplateSpec TemplateSpec::univariate_quadratic_variance() {
  TemplateSpec t;
  t.kind = TemplateKind::kUnivariateQuadraticVariance;
  t.p = 2;
  t.d = 1;
  t.coeff_mean = (VectorXd(2) << 0.0, 1.0).finished();
  t.coeff_cov = MatrixXd::Identity(2, 2);
  return t;
}

TemplateSpec TemplateSpec::bivariate_quadratic_cov() {
  TemplateSpec t;
  t.kind = TemplateKind::kBivariateQuadraticCov;
  t.p = 2;
  t.d = 2;
  t.coeff_mean = (VectorXd(4) << 0.0, 0.0, 0.0, 1.0).finished();
  MatrixXd a = MatrixXd::Identity(2, 2);
  MatrixXd b(2, 2);
  b << 0.5, 0.2, 0.2, 0.1;
  MatrixXd c(2, 2);
  c << 1.0, 0.0, 0.0, 0.3;
  t.coeff_cov = MatrixXd(4, 4);
  t.coeff_cov << a, b, b.transpose(), c;
  return t;
}

TemplateSpec TemplateSpec::custom_gaussian(VectorXd mean, MatrixXd cov, int p, int d) {
  if (p < 1 || d < 1) throw InputError("custom template: p and d must be positive");
  if (mean.size() != p * d || cov.rows() != p * d) {
    throw InputError("custom template: mean/cov must have dimension p*d");
  }
  SpdMatrix checked(cov);
  TemplateSpec t;
  t.kind = TemplateKind::kCustomGaussian;
  t.p = p;
  t.d = d;
  t.coeff_mean = std::move(mean);
  t.coeff_cov = checked.matrix();
  return t;
}

VectorXd TemplateSpec::covariates(double t) const {
  VectorXd x(p);
  double v = 1.0;
  for (int k = 0; k < p; ++k) {
    x(k) = v;
    v *= t;
  }
  return x;
}

GaussianMeasure TemplateSpec::marginal_at(double t) const {
  const VectorXd x = covariates(t);
  const MatrixXd cov = marginal_cov(coeff_cov, x, d);
  SymEigen e = sym_eigen(cov);
  if (!(e.values.minCoeff() > 0.0)) {
    throw InputError("template covariance is not SPD at t = " + std::to_string(t));
  }
  return {marginal_mean(coeff_mean, x, d), SpdMatrix::trusted(cov)};
}

// ---------------------------------------------------------------------------
// Datasets

namespace {

struct RowDraw {
  double t = 0.0;
  GaussianMeasure truth;
  Deformation deformation;
};

RowDraw draw_row(const TemplateSpec& templ, const DeformSpec& spec, SplitMix64& rng) {
  RowDraw r;
  r.t = uniform(rng, -2.0, 2.0);
  r.truth = templ.marginal_at(r.t);
  r.deformation = sample_deformation(spec, rng);
  return r;
}

void check_inputs(const TemplateSpec& templ, const DeformSpec& spec, int n) {
  if (n < 1) throw InputError("generate_dataset: n must be >= 1");
  spec.validate();
  if (spec.dim() != templ.d) {
    throw InputError("generate_dataset: noise family dimension does not match template");
  }
}

}  // namespace

SyntheticDataset generate_dataset(const TemplateSpec& templ, const DeformSpec& spec, int n, int m,
                                  std::uint64_t seed) {
  check_inputs(templ, spec, n);
  if (m < 1) throw InputError("generate_dataset: m must be >= 1");
  SyntheticDataset ds;
  ds.seed = seed;
  ds.m = m;
  ds.templ = templ;
  ds.spec = spec;
  ds.design.resize(n, templ.p);
  ds.responses.resize(static_cast<std::size_t>(n));
  ds.truth.resize(static_cast<std::size_t>(n));
  ds.deformations.resize(static_cast<std::size_t>(n));

  std::vector<std::string> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      RowDraw row = draw_row(templ, spec, rng);
      const MatrixXd root = spd_sqrt(row.truth.cov.matrix());
      MatrixXd atoms(m, templ.d);
      VectorXd z(templ.d);
      for (int j = 0; j < m; ++j) {
        for (int c = 0; c < templ.d; ++c) z(c) = normal(rng, 0.0, 1.0);
        const VectorXd y = row.truth.mean + root * z;
        atoms.row(j) = row.deformation.apply(y).transpose();
      }
      ds.design.row(i) = templ.covariates(row.t).transpose();
      ds.responses[ui] = templ.d == 1
                             ? EmpiricalDist::univariate(std::vector<double>(
                                   atoms.data(), atoms.data() + atoms.size()))
                             : EmpiricalDist::multivariate(atoms);
      ds.truth[ui] = std::move(row.truth);
      ds.deformations[ui] = std::move(row.deformation);
    } catch (const std::exception& e) {
      errors[ui] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw InputError(e);
  }
  return ds;
}

ExactDataset generate_exact_dataset(const TemplateSpec& templ, const DeformSpec& spec, int n,
                                    std::uint64_t seed) {
  check_inputs(templ, spec, n);
  ExactDataset ds;
  ds.seed = seed;
  ds.design.resize(n, templ.p);
  for (int i = 0; i < n; ++i) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    RowDraw row = draw_row(templ, spec, rng);
    const auto [a, b] = row.deformation.affine_form(templ.d);
    ds.design.row(i) = templ.covariates(row.t).transpose();
    ds.responses.push_back(
        {a * row.truth.mean + b,
         SpdMatrix::trusted(symmetrize(a * row.truth.cov.matrix() * a.transpose()))});
    ds.truth.push_back(std::move(row.truth));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Model-condition checks

bool C2Report::within(double k_sigma) const {
  for (std::size_t i = 0; i < deviation.size(); ++i) {
    if (deviation[i] > k_sigma * standard_error[i] + 1e-12) return false;
  }
  return true;
}

C2Report check_c2_montecarlo(const DeformSpec& spec, const MatrixXd& grid, int n_draws,
                             std::uint64_t seed) {
  spec.validate();
  if (grid.cols() != spec.dim()) throw InputError("check_c2_montecarlo: grid dimension mismatch");
  if (n_draws < 1) throw InputError("check_c2_montecarlo: n_draws must be >= 1");
  const Eigen::Index g = grid.rows();
  const int d = spec.dim();
  MatrixXd sum = MatrixXd::Zero(g, d);
  MatrixXd sum_sq = MatrixXd::Zero(g, d);
  SplitMix64 rng(seed);
  for (int k = 0; k < n_draws; ++k) {
    const Deformation t = sample_deformation(spec, rng);
    for (Eigen::Index r = 0; r < g; ++r) {
      const VectorXd y = grid.row(r).transpose();
      const VectorXd dev = t.apply(y) - y;
      sum.row(r) += dev.transpose();
      sum_sq.row(r) += dev.cwiseProduct(dev).transpose();
    }
  }
  const double nd = n_draws;
  C2Report rep;
  for (Eigen::Index r = 0; r < g; ++r) {
    const VectorXd mean = sum.row(r).transpose() / nd;
    const VectorXd var = (sum_sq.row(r).transpose() / nd - mean.cwiseProduct(mean)).cwiseMax(0.0);
    const double dev = mean.norm();
    rep.deviation.push_back(dev);
    // norm of the mean deviation has sd at most sqrt(sum of coordinate variances / n)
    rep.standard_error.push_back(std::sqrt(var.sum() * nd / std::max(nd - 1.0, 1.0) / nd));
    rep.max_deviation = std::max(rep.max_deviation, dev);
  }
  return rep;
}

std::pair<double, double> check_c3(const DeformSpec& spec, const MatrixXd& grid, int n_draws,
                                   std::uint64_t seed) {
  spec.validate();
  if (grid.cols() != spec.dim()) throw InputError("check_c3: grid dimension mismatch");
  constexpr double h = 1e-5;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  SplitMix64 rng(seed);
  const int d = spec.dim();
  for (int k = 0; k < n_draws; ++k) {
    const Deformation t = sample_deformation(spec, rng);
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
      if (d == 1) {
        const double y = grid(r, 0);
        const double der = (t.apply(y + h) - t.apply(y - h)) / (2.0 * h);
        lo = std::min(lo, der);
        hi = std::max(hi, der);
      } else {
        const VectorXd y = grid.row(r).transpose();
        MatrixXd jac(d, d);
        for (int c = 0; c < d; ++c) {
          VectorXd e = VectorXd::Zero(d);
          e(c) = h;
          jac.col(c) = (t.apply(VectorXd(y + e)) - t.apply(VectorXd(y - e))) / (2.0 * h);
        }
        const SymEigen eig = sym_eigen(jac);
        lo = std::min(lo, eig.values.minCoeff());
        hi = std::max(hi, eig.values.maxCoeff());
      }
    }
  }
  return {lo, hi};
}

}  // namespace wls
