#pragma once

// Brute-force multimarginal oracle for tiny discrete problems: uniform
// responses with equal atom counts, couplings enumerated as tuples of
// permutations.

#include <vector>

#include "wls/transport_core.hpp"

namespace wls {

inline constexpr int kOracleMaxAtoms = 4;
inline constexpr int kOracleMaxResponses = 4;

struct OlsCost {
  double value = 0.0;  // (1/n) sum_i ||y_i - B^T x_i||^2
  MatrixXd coeff;      // minimal-norm B = (X^T X)^+ X^T Y, p x d
};

// y: n x d, one point per row.
OlsCost inner_ols_cost(const MatrixXd& y, const MatrixXd& design);

// (1/n) ||((X^T X)^+)^{1/2} X^T Y||_F^2
double explained_variance(const MatrixXd& y, const MatrixXd& design);

struct DiscreteProblem {
  MatrixXd design;
  std::vector<EmpiricalDist> responses;
};

struct OracleResult {
  double value = 0.0;
  // Same optimum reached as const - max explained variance, where const is
  // the mean second moment of the responses.
  double value_explained = 0.0;
  // matching[i][a]: atom of response i used by the a-th support tuple;
  // matching[0] is the identity.
  std::vector<std::vector<int>> matching;
  // Law of B*, one p x d matrix per support tuple (uniform weights).
  std::vector<MatrixXd> coeff_law;
};

// Throws RefusalError beyond kOracleMaxAtoms atoms or kOracleMaxResponses
// responses.
OracleResult solve_multimarginal(const DiscreteProblem& prob);

}  // namespace wls
