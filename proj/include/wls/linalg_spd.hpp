#pragma once

// Dense kernels used by the Gaussian solver: SPD square roots, pseudo-inverse,
// Kronecker products and column-stacking vec().

#include <Eigen/Dense>

namespace wls {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Symmetric positive semidefinite matrix. Construction validates symmetry
// (relative to the max-abs entry) and clamps eigenvalues in
// [-1e-10 * lambda_max, 0) to zero; anything more negative is rejected.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(const MatrixXd& m);

  static SpdMatrix identity(Eigen::Index dim);
  // Skips validation. Caller guarantees the invariants.
  static SpdMatrix trusted(MatrixXd m);

  Eigen::Index dim() const { return m_.rows(); }
  const MatrixXd& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  MatrixXd m_;
};

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kNegEigenTol = 1e-10;
inline constexpr double kPinvRelTol = 1e-12;

struct SymEigen {
  VectorXd values;   // ascending
  MatrixXd vectors;  // columns
};

// Symmetric eigendecomposition; the input is symmetrized first.
SymEigen sym_eigen(const MatrixXd& a);

// S with S*S = A; eigenvalues clamped at 0.
SpdMatrix spd_sqrt(const SpdMatrix& a);
MatrixXd spd_sqrt(const MatrixXd& a);

// A^{-1/2} with eigenvalues floored at `floor`.
MatrixXd spd_inv_sqrt(const MatrixXd& a, double floor);

// Moore-Penrose pseudo-inverse via SVD; singular values below
// kPinvRelTol * sigma_max are treated as zero.
MatrixXd pinv(const MatrixXd& a);

MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

// Column-stacking vec and its inverse.
VectorXd vec(const MatrixXd& a);
MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols);

MatrixXd symmetrize(const MatrixXd& a);

// Clamp negative eigenvalues to zero.
MatrixXd psd_clip(const MatrixXd& a);

bool all_finite(const MatrixXd& a);

}  // namespace wls
