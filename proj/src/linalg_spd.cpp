#include "wls/linalg_spd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wls/error.hpp"

namespace wls {

bool all_finite(const MatrixXd& a) { return a.allFinite(); }

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

SymEigen sym_eigen(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a));
  if (es.info() != Eigen::Success) {
    throw InputError("sym_eigen: eigendecomposition failed");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

SpdMatrix::SpdMatrix(const MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw InputError("SpdMatrix: matrix is not square (" + std::to_string(m.rows()) +
                     " x " + std::to_string(m.cols()) + ")");
  }
  if (!m.allFinite()) throw InputError("SpdMatrix: non-finite entries");
  if (m.size() == 0) throw InputError("SpdMatrix: empty matrix");
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * std::max(scale, 1e-300)) {
    throw InputError("SpdMatrix: matrix is not symmetric (asymmetry " +
                     std::to_string(asym) + ")");
  }
  SymEigen eig = sym_eigen(m);
  const double top = std::max(eig.values.maxCoeff(), 0.0);
  if (eig.values.minCoeff() < -kNegEigenTol * top ||
      (top == 0.0 && eig.values.minCoeff() < 0.0)) {
    throw InputError("SpdMatrix: negative eigenvalue " +
                     std::to_string(eig.values.minCoeff()));
  }
  if (eig.values.minCoeff() < 0.0) {
    VectorXd clamped = eig.values.cwiseMax(0.0);
    m_ = symmetrize(eig.vectors * clamped.asDiagonal() * eig.vectors.transpose());
  } else {
    m_ = symmetrize(m);
  }
}

SpdMatrix SpdMatrix::identity(Eigen::Index dim) {
  return trusted(MatrixXd::Identity(dim, dim));
}

SpdMatrix SpdMatrix::trusted(MatrixXd m) {
  SpdMatrix s;
  s.m_ = std::move(m);
  return s;
}

MatrixXd spd_sqrt(const MatrixXd& a) {
  if (!a.allFinite()) throw InputError("spd_sqrt: non-finite entries");
  SymEigen eig = sym_eigen(a);
  VectorXd r = eig.values.cwiseMax(0.0).cwiseSqrt();
  return symmetrize(eig.vectors * r.asDiagonal() * eig.vectors.transpose());
}

SpdMatrix spd_sqrt(const SpdMatrix& a) { return SpdMatrix::trusted(spd_sqrt(a.matrix())); }

MatrixXd spd_inv_sqrt(const MatrixXd& a, double floor) {
  if (!a.allFinite()) throw InputError("spd_inv_sqrt: non-finite entries");
  SymEigen eig = sym_eigen(a);
  VectorXd r = eig.values.cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return symmetrize(eig.vectors * r.asDiagonal() * eig.vectors.transpose());
}

MatrixXd pinv(const MatrixXd& a) {
  if (!a.allFinite()) throw InputError("pinv: non-finite entries");
  if (a.size() == 0) return MatrixXd(a.cols(), a.rows());
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double cutoff = kPinvRelTol * (s.size() > 0 ? s(0) : 0.0);
  VectorXd inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    inv(i) = (s(i) > cutoff && s(i) > 0.0) ? 1.0 / s(i) : 0.0;
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

VectorXd vec(const MatrixXd& a) {
  return Eigen::Map<const VectorXd>(a.data(), a.size());
}

MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw InputError("unvec: size mismatch");
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

MatrixXd psd_clip(const MatrixXd& a) {
  SymEigen eig = sym_eigen(a);
  VectorXd clamped = eig.values.cwiseMax(0.0);
  return symmetrize(eig.vectors * clamped.asDiagonal() * eig.vectors.transpose());
}

}  // namespace wls
