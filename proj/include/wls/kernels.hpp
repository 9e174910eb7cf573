#pragma once

// Data-parallel inner loops of both solvers. Each kernel exists as a serial
// reference and an OpenMP version; the two produce identical results (rows are
// independent and every reduction runs in a fixed order).

#include <span>
#include <vector>

#include "wls/fit_report.hpp"
#include "wls/linalg_spd.hpp"

namespace wls::kernels {

// For each listed row r = rows[c]: z = particles * x_r, rank the particles by
// (z, index), and store residuals(j, c) = targets[r][rank(j)] - z_j, where
// targets[r][k] is the response quantile at level (k + 0.5) / M.
// particles is M x p, design n x p; residuals is resized to M x rows.size().
namespace serial {
void transport_residuals(const MatrixXd& particles, const MatrixXd& design,
                         std::span<const int> rows, std::span<const VectorXd> targets,
                         MatrixXd& residuals);
}
namespace omp {
void transport_residuals(const MatrixXd& particles, const MatrixXd& design,
                         std::span<const int> rows, std::span<const VectorXd> targets,
                         MatrixXd& residuals);
}

// G = (1/n) sum_i x_i x_i^T (x) (T_i - I_d) with T_i the Gaussian transport
// coefficient from the marginal covariance at x_i to response_covs[i].
// Returns true if any T_i needed regularization.
namespace serial {
bool bw_gradient_matrix(const MatrixXd& cov, const MatrixXd& design,
                        std::span<const MatrixXd> response_covs, int d, MatrixXd& out);
}
namespace omp {
bool bw_gradient_matrix(const MatrixXd& cov, const MatrixXd& design,
                        std::span<const MatrixXd> response_covs, int d, MatrixXd& out);
}

inline void transport_residuals(Exec exec, const MatrixXd& particles, const MatrixXd& design,
                                std::span<const int> rows, std::span<const VectorXd> targets,
                                MatrixXd& residuals) {
  if (exec == Exec::kParallel) {
    omp::transport_residuals(particles, design, rows, targets, residuals);
  } else {
    serial::transport_residuals(particles, design, rows, targets, residuals);
  }
}

inline bool bw_gradient_matrix(Exec exec, const MatrixXd& cov, const MatrixXd& design,
                               std::span<const MatrixXd> response_covs, int d, MatrixXd& out) {
  return exec == Exec::kParallel
             ? omp::bw_gradient_matrix(cov, design, response_covs, d, out)
             : serial::bw_gradient_matrix(cov, design, response_covs, d, out);
}

}  // namespace wls::kernels
