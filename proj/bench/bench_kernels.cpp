// Serial vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "wls/kernels.hpp"

using namespace wls;

namespace {

MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> z;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

struct ParticleCase {
  MatrixXd particles, design;
  std::vector<int> rows;
  std::vector<VectorXd> targets;
};

// M particles, n rows, p = 2 (intercept and t)
ParticleCase particle_case(Eigen::Index m, Eigen::Index n) {
  std::mt19937_64 rng(1);
  ParticleCase c;
  c.particles = normal_matrix(rng, m, 2);
  c.design = MatrixXd::Ones(n, 2);
  c.design.col(1) = normal_matrix(rng, n, 1);
  c.rows.resize(static_cast<std::size_t>(n));
  std::iota(c.rows.begin(), c.rows.end(), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXd t = normal_matrix(rng, m, 1);
    std::sort(t.data(), t.data() + t.size());
    c.targets.push_back(t);
  }
  return c;
}

template <Exec E>
void BM_transport_residuals(benchmark::State& state) {
  const ParticleCase c = particle_case(state.range(0), state.range(1));
  MatrixXd resid;
  for (auto _ : state) {
    kernels::transport_residuals(E, c.particles, c.design, c.rows, c.targets, resid);
    benchmark::DoNotOptimize(resid.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

struct GaussianCase {
  MatrixXd cov, design;
  std::vector<MatrixXd> responses;
  int d = 2;
};

GaussianCase gaussian_case(Eigen::Index n) {
  std::mt19937_64 rng(2);
  GaussianCase c;
  const MatrixXd g = normal_matrix(rng, 4, 4);
  c.cov = g * g.transpose() / 4.0 + 0.5 * MatrixXd::Identity(4, 4);
  c.design = MatrixXd::Ones(n, 2);
  c.design.col(1) = normal_matrix(rng, n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const MatrixXd r = normal_matrix(rng, 2, 2);
    c.responses.push_back(r * r.transpose() + 0.3 * MatrixXd::Identity(2, 2));
  }
  return c;
}

template <Exec E>
void BM_bw_gradient_matrix(benchmark::State& state) {
  const GaussianCase c = gaussian_case(state.range(0));
  MatrixXd out;
  for (auto _ : state) {
    kernels::bw_gradient_matrix(E, c.cov, c.design, c.responses, c.d, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_transport_residuals<Exec::kSerial>)->Args({2000, 5})->Args({2000, 50})->Args({20000, 50});
BENCHMARK(BM_transport_residuals<Exec::kParallel>)->Args({2000, 5})->Args({2000, 50})->Args({20000, 50});
BENCHMARK(BM_bw_gradient_matrix<Exec::kSerial>)->Arg(50)->Arg(500)->Arg(5000);
BENCHMARK(BM_bw_gradient_matrix<Exec::kParallel>)->Arg(50)->Arg(500)->Arg(5000);

BENCHMARK_MAIN();
