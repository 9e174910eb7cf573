#include "wls/wls_gaussian.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "wls/error.hpp"
#include "wls/kernels.hpp"

namespace wls {

namespace {

MatrixXd selector(const VectorXd& x, int d) {
  return kron(x.transpose(), MatrixXd::Identity(d, d));
}

void check_design(const MatrixXd& design, std::size_t n, const char* who) {
  if (design.rows() == 0) throw InputError(std::string(who) + ": empty design");
  if (static_cast<std::size_t>(design.rows()) != n) {
    throw InputError(std::string(who) + ": design rows (" + std::to_string(design.rows()) +
                     ") != responses (" + std::to_string(n) + ")");
  }
  if (!design.allFinite()) throw InputError(std::string(who) + ": non-finite design");
}

int response_dim(std::span<const GaussianMeasure> responses, const char* who) {
  const int d = responses.front().dim();
  for (const auto& r : responses) {
    if (r.dim() != d) throw InputError(std::string(who) + ": responses differ in dimension");
  }
  return d;
}

std::vector<MatrixXd> covariances(std::span<const GaussianMeasure> responses) {
  std::vector<MatrixXd> out;
  out.reserve(responses.size());
  for (const auto& r : responses) out.push_back(r.cov.matrix());
  return out;
}

double operator_norm_sym(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  SymEigen e = sym_eigen(a);
  return std::max(std::abs(e.values.minCoeff()), std::abs(e.values.maxCoeff()));
}

}  // namespace

VectorXd marginal_mean(const VectorXd& mean, const VectorXd& x, int d) {
  if (mean.size() != x.size() * d) throw InputError("marginal: dimension mismatch");
  return selector(x, d) * mean;
}

MatrixXd marginal_cov(const MatrixXd& cov, const VectorXd& x, int d) {
  if (cov.rows() != x.size() * d) throw InputError("marginal: dimension mismatch");
  const MatrixXd sel = selector(x, d);
  return symmetrize(sel * cov * sel.transpose());
}

GaussianMeasure marginal(const CoeffGaussian& q, const VectorXd& x) {
  if (x.size() != q.p) throw InputError("marginal: covariate has wrong length");
  return {marginal_mean(q.mean, x, q.d), SpdMatrix::trusted(marginal_cov(q.cov.matrix(), x, q.d))};
}

double smoothness_constant(const MatrixXd& design) {
  return 2.0 * design.rowwise().squaredNorm().sum() / static_cast<double>(design.rows());
}

SpdMatrix bw_gradient_step(const SpdMatrix& q_cov, const MatrixXd& design,
                           std::span<const SpdMatrix> response_covs, double tau,
                           bool* regularized, Exec exec) {
  if (!(tau > 0.0)) throw InputError("bw_gradient_step: step must be positive");
  check_design(design, response_covs.size(), "bw_gradient_step");
  const int d = static_cast<int>(response_covs.front().dim());
  if (q_cov.dim() != design.cols() * d) throw InputError("bw_gradient_step: dimension mismatch");
  std::vector<MatrixXd> covs;
  for (const auto& c : response_covs) covs.push_back(c.matrix());
  MatrixXd g;
  const bool reg = kernels::bw_gradient_matrix(exec, q_cov.matrix(), design, covs, d, g);
  if (regularized) *regularized = reg;
  const MatrixXd m = MatrixXd::Identity(g.rows(), g.cols()) + tau * g;
  return SpdMatrix::trusted(symmetrize(m * q_cov.matrix() * m));
}

double gaussian_objective(const CoeffGaussian& q, const MatrixXd& design,
                          std::span<const GaussianMeasure> responses) {
  check_design(design, responses.size(), "gaussian_objective");
  double acc = 0.0;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    acc += gaussian_w2_squared(marginal(q, design.row(static_cast<Eigen::Index>(i)).transpose()),
                               responses[i]);
  }
  return acc / static_cast<double>(responses.size());
}

VectorXd fit_gaussian_mean(const MatrixXd& design, std::span<const GaussianMeasure> responses) {
  check_design(design, responses.size(), "fit_gaussian");
  const int d = response_dim(responses, "fit_gaussian");
  const auto n = design.rows();
  const auto p = design.cols();
  MatrixXd k(n * d, p * d);
  VectorXd y(n * d);
  for (Eigen::Index i = 0; i < n; ++i) {
    k.block(i * d, 0, d, p * d) = selector(design.row(i).transpose(), d);
    y.segment(i * d, d) = responses[static_cast<std::size_t>(i)].mean;
  }
  return pinv(k) * y;
}

GaussianFit fit_gaussian(const MatrixXd& design, std::span<const GaussianMeasure> responses,
                         const GaussianConfig& config) {
  if (responses.empty()) throw InputError("fit_gaussian: no responses");
  const auto dp = design.cols() * responses.front().dim();
  return fit_gaussian(design, responses, config, SpdMatrix::identity(dp));
}

GaussianFit fit_gaussian(const MatrixXd& design, std::span<const GaussianMeasure> responses,
                         const GaussianConfig& config, const SpdMatrix& initial_cov) {
  const auto start = std::chrono::steady_clock::now();
  if (responses.empty()) throw InputError("fit_gaussian: no responses");
  check_design(design, responses.size(), "fit_gaussian");
  const int d = response_dim(responses, "fit_gaussian");
  const auto p = static_cast<int>(design.cols());
  if (initial_cov.dim() != static_cast<Eigen::Index>(p) * d) {
    throw InputError("fit_gaussian: initial covariance has wrong dimension");
  }
  if (config.max_iter < 0) throw InputError("fit_gaussian: negative iteration budget");
  if (config.log_every < 1) throw InputError("fit_gaussian: log_every must be >= 1");

  GaussianFit fit;
  fit.report.config = config;
  const double tau = config.step > 0.0 ? config.step : 0.5 / smoothness_constant(design);
  fit.report.config.step = tau;

  fit.coeff.p = p;
  fit.coeff.d = d;
  fit.coeff.mean = fit_gaussian_mean(design, responses);
  fit.coeff.cov = initial_cov;

  const std::vector<MatrixXd> covs = covariances(responses);
  auto& rep = fit.report;
  MatrixXd g;
  double last_logged = 0.0;
  int increases = 0;
  long k = 0;
  for (;; ++k) {
    const bool reg = kernels::bw_gradient_matrix(config.exec, fit.coeff.cov.matrix(), design,
                                                 covs, d, g);
    rep.regularized = rep.regularized || reg;
    const double grad_norm = operator_norm_sym(g);
    rep.final_gradient_norm = grad_norm;
    const bool last = k == config.max_iter;
    const bool converged = config.tol > 0.0 && grad_norm <= config.tol;
    if (k % config.log_every == 0 || last || converged) {
      const double obj = gaussian_objective(fit.coeff, design, responses);
      if (!std::isfinite(obj)) {
        throw DivergenceError("fit_gaussian: non-finite objective at iteration " +
                                  std::to_string(k),
                              k);
      }
      if (k == 0) rep.initial_objective = obj;
      if (k > 0 && obj > last_logged + 1e-12 * std::abs(last_logged) + 1e-15) {
        if (++increases >= 10) {
          throw DivergenceError("fit_gaussian: objective increased over 10 logged steps", k);
        }
      } else {
        increases = 0;
      }
      last_logged = obj;
      rep.trace_iteration.push_back(k);
      rep.trace_objective.push_back(obj);
      rep.final_objective = obj;
    }
    if (converged) {
      rep.stopped_on_tolerance = true;
      break;
    }
    if (last) break;
    const MatrixXd m = MatrixXd::Identity(g.rows(), g.cols()) + tau * g;
    MatrixXd next = symmetrize(m * fit.coeff.cov.matrix() * m);
    if (!next.allFinite()) {
      throw DivergenceError("fit_gaussian: non-finite covariance at iteration " +
                                std::to_string(k + 1),
                            k + 1);
    }
    fit.coeff.cov = SpdMatrix::trusted(std::move(next));
  }
  rep.iterations = k;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return fit;
}

double gaussian_foc_residual(const CoeffGaussian& q, const MatrixXd& design,
                             std::span<const GaussianMeasure> responses) {
  check_design(design, responses.size(), "gaussian_foc_residual");
  const int d = response_dim(responses, "gaussian_foc_residual");
  MatrixXd g;
  kernels::serial::bw_gradient_matrix(q.cov.matrix(), design, covariances(responses), d, g);
  SymEigen e = sym_eigen(q.cov.matrix());
  const double top = std::max(e.values.maxCoeff(), 0.0);
  MatrixXd basis(e.vectors.rows(), 0);
  for (Eigen::Index c = 0; c < e.values.size(); ++c) {
    if (e.values(c) > 1e-10 * top && e.values(c) > 0.0) {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = e.vectors.col(c);
    }
  }
  const MatrixXd proj = basis * basis.transpose();
  return operator_norm_sym(proj * g * proj);
}

}  // namespace wls
