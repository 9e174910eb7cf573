#include "wls/mm_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "wls/error.hpp"

namespace wls {

OlsCost inner_ols_cost(const MatrixXd& y, const MatrixXd& design) {
  if (y.rows() != design.rows()) throw InputError("inner_ols_cost: tuple length != design rows");
  OlsCost out;
  out.coeff = pinv(design) * y;
  out.value = (y - design * out.coeff).squaredNorm() / static_cast<double>(y.rows());
  return out;
}

double explained_variance(const MatrixXd& y, const MatrixXd& design) {
  const MatrixXd gram_inv = pinv(design.transpose() * design);
  const MatrixXd root = spd_sqrt(symmetrize(gram_inv));
  return (root * design.transpose() * y).squaredNorm() / static_cast<double>(y.rows());
}

namespace {

struct Tables {
  std::vector<double> cost;       // per tuple, indexed in base m
  std::vector<double> explained;
  std::vector<MatrixXd> coeff;
  double second_moment = 0.0;
};

Tables tabulate(const DiscreteProblem& prob, int n, int m, int d) {
  std::vector<MatrixXd> atoms;
  for (const auto& r : prob.responses) atoms.push_back(r.as_matrix());
  Tables t;
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(m);
  t.cost.resize(total);
  t.explained.resize(total);
  t.coeff.resize(total);
  MatrixXd y(n, d);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (int i = 0; i < n; ++i) {
      y.row(i) = atoms[static_cast<std::size_t>(i)].row(static_cast<Eigen::Index>(c % m));
      c /= static_cast<std::size_t>(m);
    }
    OlsCost ols = inner_ols_cost(y, prob.design);
    t.cost[code] = ols.value;
    t.explained[code] = explained_variance(y, prob.design);
    t.coeff[code] = std::move(ols.coeff);
  }
  for (const auto& a : atoms) t.second_moment += a.squaredNorm() / static_cast<double>(m);
  t.second_moment /= static_cast<double>(n);
  return t;
}

std::size_t tuple_code(const std::vector<std::vector<int>>& perms, int a, int m) {
  std::size_t code = 0;
  std::size_t base = 1;
  for (const auto& perm : perms) {
    code += static_cast<std::size_t>(perm[static_cast<std::size_t>(a)]) * base;
    base *= static_cast<std::size_t>(m);
  }
  return code;
}

// Visits every (n-1)-tuple of permutations in lexicographic order.
template <class F>
void for_each_coupling(int n, int m, F&& visit) {
  std::vector<int> identity(static_cast<std::size_t>(m));
  std::iota(identity.begin(), identity.end(), 0);
  std::vector<std::vector<int>> perms(static_cast<std::size_t>(n), identity);
  for (;;) {
    visit(perms);
    int i = n - 1;
    while (i >= 1 && !std::next_permutation(perms[static_cast<std::size_t>(i)].begin(),
                                            perms[static_cast<std::size_t>(i)].end())) {
      --i;  // this slot wrapped back to the identity; carry
    }
    if (i < 1) return;
  }
}

bool improves(double candidate, double best) {
  if (!std::isfinite(best)) return std::isfinite(candidate);
  return candidate < best - 1e-12 * std::max(1.0, std::abs(best));
}

}  // namespace

OracleResult solve_multimarginal(const DiscreteProblem& prob) {
  const auto n = static_cast<int>(prob.responses.size());
  if (n < 1) throw InputError("solve_multimarginal: no responses");
  if (n > kOracleMaxResponses) {
    throw RefusalError("solve_multimarginal: n = " + std::to_string(n) + " exceeds the limit n <= " +
                       std::to_string(kOracleMaxResponses));
  }
  if (prob.design.rows() != n) throw InputError("solve_multimarginal: design rows != responses");
  const auto m = static_cast<int>(prob.responses.front().size());
  const int d = prob.responses.front().dim();
  if (m > kOracleMaxAtoms) {
    throw RefusalError("solve_multimarginal: m = " + std::to_string(m) + " exceeds the limit m <= " +
                       std::to_string(kOracleMaxAtoms));
  }
  for (const auto& r : prob.responses) {
    if (static_cast<int>(r.size()) != m || r.dim() != d) {
      throw InputError("solve_multimarginal: responses need equal atom counts and dimension");
    }
  }
  if (m < 1) throw InputError("solve_multimarginal: empty response");

  const Tables t = tabulate(prob, n, m, d);
  double best = std::numeric_limits<double>::infinity();
  double best_explained = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> argbest;
  for_each_coupling(n, m, [&](const std::vector<std::vector<int>>& perms) {
    double cost = 0.0;
    double expl = 0.0;
    for (int a = 0; a < m; ++a) {
      const std::size_t code = tuple_code(perms, a, m);
      cost += t.cost[code];
      expl += t.explained[code];
    }
    cost /= m;
    expl /= m;
    if (improves(cost, best)) {
      best = cost;
      argbest = perms;
    }
    if (improves(-expl, -best_explained)) best_explained = expl;
  });

  OracleResult out;
  out.value = best;
  out.value_explained = t.second_moment - best_explained;
  out.matching = argbest;
  for (int a = 0; a < m; ++a) out.coeff_law.push_back(t.coeff[tuple_code(argbest, a, m)]);
  return out;
}

}  // namespace wls
