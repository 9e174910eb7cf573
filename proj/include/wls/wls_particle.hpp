#pragma once

// Univariate responses: interacting-particle gradient descent on a uniform
// cloud of coefficient vectors.

#include <cstdint>
#include <span>
#include <vector>

#include "wls/fit_report.hpp"
#include "wls/transport_core.hpp"

namespace wls {

// Q = (1/M) sum_j delta_{beta_j}; one particle per row of an M x p matrix.
struct ParticleCloud {
  MatrixXd particles;

  Eigen::Index size() const { return particles.rows(); }
  Eigen::Index dim() const { return particles.cols(); }
  // Atoms {x^T beta_j}.
  VectorXd predictions(const VectorXd& x) const;
  EmpiricalDist pushforward(const VectorXd& x) const;
};

struct SolverConfig {
  int particles = 2000;
  double step = 0.1;       // tau_0
  double decay = 1e-3;     // tau_k = tau_0 / (1 + decay * k)
  double momentum = 0.9;   // heavy-ball coefficient on the particle displacement
  int batch = 5;           // rows per step; 0 = all rows
  long iterations = 3000;
  std::uint64_t seed = 0;
  double tol = 0.0;        // optional stop on normal_equation_residual, checked when logging
  int log_every = 100;
  Exec exec = Exec::kParallel;
};

struct ParticleFit {
  ParticleCloud cloud;
  FitReport<SolverConfig> report;
};

// targets[i](k) = f_i^{-1}((k + 0.5) / M).
std::vector<VectorXd> transport_targets(std::span<const Marginal> responses, Eigen::Index m);

double objective(const ParticleCloud& cloud, const MatrixXd& design,
                 std::span<const Marginal> responses);
double objective(const ParticleCloud& cloud, const MatrixXd& design,
                 std::span<const EmpiricalDist> responses);

// Full-batch step beta_j += (tau/n) sum_i (T_ij - z_ij) x_i, all particles
// moved against the same frozen rankings.
ParticleCloud gradient_step(const ParticleCloud& cloud, const MatrixXd& design,
                            std::span<const Marginal> responses, double tau,
                            Exec exec = Exec::kParallel);
ParticleCloud gradient_step(const ParticleCloud& cloud, const MatrixXd& design,
                            std::span<const EmpiricalDist> responses, double tau,
                            Exec exec = Exec::kParallel);

// Initial particles i.i.d. N(0, I_p) from config.seed.
ParticleFit fit(const MatrixXd& design, std::span<const Marginal> responses,
                const SolverConfig& config = {});
ParticleFit fit(const MatrixXd& design, std::span<const EmpiricalDist> responses,
                const SolverConfig& config = {});
// Warm start; config.particles is ignored.
ParticleFit fit(const MatrixXd& design, std::span<const Marginal> responses,
                const SolverConfig& config, const ParticleCloud& initial);

// Mean over particles of ||(1/n) sum_i x_i (T_ij - x_i^T beta_j)||.
double normal_equation_residual(const ParticleCloud& cloud, const MatrixXd& design,
                                std::span<const Marginal> responses);
double normal_equation_residual(const ParticleCloud& cloud, const MatrixXd& design,
                                std::span<const EmpiricalDist> responses);

std::vector<Marginal> as_marginals(std::span<const EmpiricalDist> responses);

}  // namespace wls
