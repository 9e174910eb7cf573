#include "wls/wls_particle.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "wls/error.hpp"
#include "wls/kernels.hpp"
#include "wls/rng.hpp"

namespace wls {

namespace {

void check_problem(const MatrixXd& design, std::span<const Marginal> responses,
                   const char* who) {
  if (responses.empty()) throw InputError(std::string(who) + ": no responses");
  if (static_cast<std::size_t>(design.rows()) != responses.size()) {
    throw InputError(std::string(who) + ": design rows (" + std::to_string(design.rows()) +
                     ") != responses (" + std::to_string(responses.size()) + ")");
  }
  if (!design.allFinite()) throw InputError(std::string(who) + ": non-finite design");
  for (const auto& r : responses) {
    if (marginal_dim(r) != 1) throw InputError(std::string(who) + ": responses must be univariate");
  }
}

void check_cloud(const ParticleCloud& cloud, const MatrixXd& design, const char* who) {
  if (cloud.dim() != design.cols()) {
    throw InputError(std::string(who) + ": particle dimension != design columns");
  }
  if (cloud.size() < 1) throw InputError(std::string(who) + ": empty cloud");
}

std::vector<int> all_rows(Eigen::Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

MatrixXd gather_rows(const MatrixXd& design, std::span<const int> rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), design.cols());
  for (std::size_t c = 0; c < rows.size(); ++c) {
    out.row(static_cast<Eigen::Index>(c)) = design.row(rows[c]);
  }
  return out;
}

// (1/|rows|) D X_rows, the mean transport displacement per particle.
MatrixXd displacement(const ParticleCloud& cloud, const MatrixXd& design,
                      std::span<const VectorXd> targets, std::span<const int> rows, Exec exec) {
  MatrixXd resid;
  kernels::transport_residuals(exec, cloud.particles, design, rows, targets, resid);
  return resid * gather_rows(design, rows) / static_cast<double>(rows.size());
}

double objective_impl(const ParticleCloud& cloud, const MatrixXd& design,
                      std::span<const Marginal> responses) {
  const auto n = static_cast<long>(responses.size());
  std::vector<double> per_row(responses.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    per_row[ui] = w2_squared_1d(Marginal(cloud.pushforward(design.row(i).transpose())),
                                responses[ui]);
  }
  return std::accumulate(per_row.begin(), per_row.end(), 0.0) / static_cast<double>(n);
}

void validate_config(const SolverConfig& c, Eigen::Index n) {
  if (!(c.step > 0.0)) throw InputError("particle solver: step must be positive");
  if (!(c.decay >= 0.0)) throw InputError("particle solver: decay must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) {
    throw InputError("particle solver: momentum must lie in [0, 1)");
  }
  if (c.batch < 0 || c.batch > n) {
    throw InputError("particle solver: batch must lie in [1, n] (0 = full batch)");
  }
  if (c.iterations < 0) throw InputError("particle solver: negative iteration budget");
  if (c.log_every < 1) throw InputError("particle solver: log_every must be >= 1");
  if (c.tol < 0.0) throw InputError("particle solver: negative tolerance");
}

}  // namespace

VectorXd ParticleCloud::predictions(const VectorXd& x) const {
  if (x.size() != particles.cols()) throw InputError("ParticleCloud: covariate has wrong length");
  return particles * x;
}

EmpiricalDist ParticleCloud::pushforward(const VectorXd& x) const {
  const VectorXd z = predictions(x);
  return EmpiricalDist::univariate(std::vector<double>(z.data(), z.data() + z.size()));
}

std::vector<Marginal> as_marginals(std::span<const EmpiricalDist> responses) {
  return {responses.begin(), responses.end()};
}

std::vector<VectorXd> transport_targets(std::span<const Marginal> responses, Eigen::Index m) {
  std::vector<VectorXd> out(responses.size());
  const auto n = static_cast<long>(responses.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto& r = responses[static_cast<std::size_t>(i)];
    VectorXd t(m);
    const auto* emp = std::get_if<EmpiricalDist>(&r);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double level = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
      t(k) = emp ? empirical_quantile(emp->values(), level) : quantile_1d(r, level);
    }
    out[static_cast<std::size_t>(i)] = std::move(t);
  }
  return out;
}

double objective(const ParticleCloud& cloud, const MatrixXd& design,
                 std::span<const Marginal> responses) {
  check_problem(design, responses, "objective");
  check_cloud(cloud, design, "objective");
  return objective_impl(cloud, design, responses);
}

double objective(const ParticleCloud& cloud, const MatrixXd& design,
                 std::span<const EmpiricalDist> responses) {
  const auto m = as_marginals(responses);
  return objective(cloud, design, m);
}

ParticleCloud gradient_step(const ParticleCloud& cloud, const MatrixXd& design,
                            std::span<const Marginal> responses, double tau, Exec exec) {
  if (!(tau > 0.0)) throw InputError("gradient_step: step must be positive");
  check_problem(design, responses, "gradient_step");
  check_cloud(cloud, design, "gradient_step");
  const auto targets = transport_targets(responses, cloud.size());
  const auto rows = all_rows(design.rows());
  ParticleCloud next = cloud;
  next.particles += tau * displacement(cloud, design, targets, rows, exec);
  return next;
}

ParticleCloud gradient_step(const ParticleCloud& cloud, const MatrixXd& design,
                            std::span<const EmpiricalDist> responses, double tau, Exec exec) {
  const auto m = as_marginals(responses);
  return gradient_step(cloud, design, m, tau, exec);
}

double normal_equation_residual(const ParticleCloud& cloud, const MatrixXd& design,
                                std::span<const Marginal> responses) {
  check_problem(design, responses, "normal_equation_residual");
  check_cloud(cloud, design, "normal_equation_residual");
  const auto targets = transport_targets(responses, cloud.size());
  const auto rows = all_rows(design.rows());
  const MatrixXd g = displacement(cloud, design, targets, rows, Exec::kParallel);
  return g.rowwise().norm().mean();
}

double normal_equation_residual(const ParticleCloud& cloud, const MatrixXd& design,
                                std::span<const EmpiricalDist> responses) {
  const auto m = as_marginals(responses);
  return normal_equation_residual(cloud, design, m);
}

ParticleFit fit(const MatrixXd& design, std::span<const Marginal> responses,
                const SolverConfig& config) {
  if (config.particles < 2) throw InputError("particle solver: need at least 2 particles");
  if (design.cols() < 1) throw InputError("particle solver: design has no columns");
  SplitMix64 rng(derive_seed(config.seed, 0));
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  ParticleCloud init;
  init.particles.resize(config.particles, design.cols());
  // row-major draw order, independent of Eigen's storage
  for (Eigen::Index j = 0; j < init.particles.rows(); ++j) {
    for (Eigen::Index c = 0; c < init.particles.cols(); ++c) init.particles(j, c) = normal(rng);
  }
  return fit(design, responses, config, init);
}

ParticleFit fit(const MatrixXd& design, std::span<const EmpiricalDist> responses,
                const SolverConfig& config) {
  const auto m = as_marginals(responses);
  return fit(design, m, config);
}

ParticleFit fit(const MatrixXd& design, std::span<const Marginal> responses,
                const SolverConfig& config, const ParticleCloud& initial) {
  const auto start = std::chrono::steady_clock::now();
  check_problem(design, responses, "fit");
  check_cloud(initial, design, "fit");
  if (initial.size() < 2) throw InputError("particle solver: need at least 2 particles");
  if (!initial.particles.allFinite()) throw InputError("fit: non-finite initial particles");
  validate_config(config, design.rows());

  ParticleFit out;
  out.cloud = initial;
  auto& rep = out.report;
  rep.config = config;
  rep.config.particles = static_cast<int>(initial.size());

  const auto n = design.rows();
  const int batch = config.batch == 0 ? static_cast<int>(n) : config.batch;
  const auto targets = transport_targets(responses, initial.size());
  const auto everything = all_rows(n);
  std::vector<int> pool = everything;
  SplitMix64 rng(derive_seed(config.seed, 1));
  MatrixXd velocity = MatrixXd::Zero(initial.size(), initial.dim());

  auto log_point = [&](long k) {
    const double obj = objective_impl(out.cloud, design, responses);
    if (!std::isfinite(obj)) {
      throw DivergenceError("fit: non-finite objective at iteration " + std::to_string(k), k);
    }
    if (k == 0) rep.initial_objective = obj;
    rep.trace_iteration.push_back(k);
    rep.trace_objective.push_back(obj);
    rep.final_objective = obj;
  };

  long k = 0;
  for (;; ++k) {
    const bool last = k == config.iterations;
    if (k % config.log_every == 0 || last) {
      log_point(k);
      if (config.tol > 0.0) {
        const MatrixXd g = displacement(out.cloud, design, targets, everything, config.exec);
        if (g.rowwise().norm().mean() <= config.tol) {
          rep.stopped_on_tolerance = true;
          break;
        }
      }
    }
    if (last) break;

    std::span<const int> rows = everything;
    if (batch < n) {
      for (int b = 0; b < batch; ++b) {
        boost::random::uniform_int_distribution<int> pick(b, static_cast<int>(n) - 1);
        std::swap(pool[static_cast<std::size_t>(b)],
                  pool[static_cast<std::size_t>(pick(rng))]);
      }
      rows = std::span<const int>(pool.data(), static_cast<std::size_t>(batch));
    }
    const double tau = config.step / (1.0 + config.decay * static_cast<double>(k));
    velocity = config.momentum * velocity +
               tau * displacement(out.cloud, design, targets, rows, config.exec);
    out.cloud.particles += velocity;
    if (!out.cloud.particles.allFinite()) {
      throw DivergenceError("fit: non-finite particles at iteration " + std::to_string(k + 1),
                            k + 1);
    }
  }
  rep.iterations = k;
  rep.final_gradient_norm = displacement(out.cloud, design, targets, everything, config.exec)
                                .rowwise()
                                .norm()
                                .mean();
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace wls
