#include "wls/kernels.hpp"

#include <algorithm>
#include <numeric>

#include <omp.h>

#include "wls/transport_core.hpp"
#include "wls/wls_gaussian.hpp"

namespace wls::kernels {

namespace {

void row_residuals(const MatrixXd& particles, const VectorXd& x, const VectorXd& target,
                   std::vector<Eigen::Index>& order, VectorXd& z,
                   Eigen::Ref<VectorXd> out) {
  z.noalias() = particles * x;
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&z](Eigen::Index a, Eigen::Index b) {
    return z(a) < z(b) || (z(a) == z(b) && a < b);
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Eigen::Index j = order[k];
    out(j) = target(static_cast<Eigen::Index>(k)) - z(j);
  }
}

MatrixXd row_term(const MatrixXd& cov, const VectorXd& x, const MatrixXd& response_cov, int d,
                  bool& regularized) {
  TransportCoeff t = gaussian_transport_coeff(marginal_cov(cov, x, d), response_cov);
  regularized = t.regularized;
  return t.map - MatrixXd::Identity(d, d);
}

void accumulate(const MatrixXd& design, const std::vector<MatrixXd>& terms, MatrixXd& out) {
  const auto n = design.rows();
  out.setZero(design.cols() * terms.front().rows(), design.cols() * terms.front().rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd x = design.row(i).transpose();
    out += kron(x * x.transpose(), terms[static_cast<std::size_t>(i)]);
  }
  out /= static_cast<double>(n);
  out = symmetrize(out);
}

}  // namespace

namespace serial {

void transport_residuals(const MatrixXd& particles, const MatrixXd& design,
                         std::span<const int> rows, std::span<const VectorXd> targets,
                         MatrixXd& residuals) {
  const Eigen::Index m = particles.rows();
  residuals.resize(m, static_cast<Eigen::Index>(rows.size()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  VectorXd z(m);
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const int r = rows[c];
    row_residuals(particles, design.row(r).transpose(), targets[static_cast<std::size_t>(r)],
                  order, z, residuals.col(static_cast<Eigen::Index>(c)));
  }
}

bool bw_gradient_matrix(const MatrixXd& cov, const MatrixXd& design,
                        std::span<const MatrixXd> response_covs, int d, MatrixXd& out) {
  const auto n = static_cast<std::size_t>(design.rows());
  std::vector<MatrixXd> terms(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    bool reg = false;
    terms[i] = row_term(cov, design.row(static_cast<Eigen::Index>(i)).transpose(),
                        response_covs[i], d, reg);
    any = any || reg;
  }
  accumulate(design, terms, out);
  return any;
}

}  // namespace serial

namespace omp {

void transport_residuals(const MatrixXd& particles, const MatrixXd& design,
                         std::span<const int> rows, std::span<const VectorXd> targets,
                         MatrixXd& residuals) {
  const Eigen::Index m = particles.rows();
  residuals.resize(m, static_cast<Eigen::Index>(rows.size()));
  const auto count = static_cast<long>(rows.size());
#pragma omp parallel
  {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    VectorXd z(m);
#pragma omp for schedule(dynamic)
    for (long c = 0; c < count; ++c) {
      const int r = rows[static_cast<std::size_t>(c)];
      row_residuals(particles, design.row(r).transpose(), targets[static_cast<std::size_t>(r)],
                    order, z, residuals.col(c));
    }
  }
}

bool bw_gradient_matrix(const MatrixXd& cov, const MatrixXd& design,
                        std::span<const MatrixXd> response_covs, int d, MatrixXd& out) {
  const auto n = static_cast<long>(design.rows());
  std::vector<MatrixXd> terms(static_cast<std::size_t>(n));
  std::vector<char> reg(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    bool r = false;
    terms[static_cast<std::size_t>(i)] =
        row_term(cov, design.row(i).transpose(), response_covs[static_cast<std::size_t>(i)], d, r);
    reg[static_cast<std::size_t>(i)] = r ? 1 : 0;
  }
  accumulate(design, terms, out);
  return std::any_of(reg.begin(), reg.end(), [](char c) { return c != 0; });
}

}  // namespace omp

}  // namespace wls::kernels
