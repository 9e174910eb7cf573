#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"
#include "wls/error.hpp"
#include "wls/wls_gaussian.hpp"
#include "wls/wls_particle.hpp"

using namespace wls;

namespace {

ParticleCloud cloud_of(std::initializer_list<double> v) {
  ParticleCloud c;
  c.particles = Eigen::Map<const VectorXd>(v.begin(), static_cast<Eigen::Index>(v.size()));
  return c;
}

std::vector<Marginal> one(std::vector<double> atoms) {
  return {Marginal(EmpiricalDist::univariate(std::move(atoms)))};
}

MatrixXd ones(Eigen::Index n) { return MatrixXd::Ones(n, 1); }

SolverConfig plain(long iters, double step) {
  SolverConfig c;
  c.step = step;
  c.decay = 0.0;
  c.momentum = 0.0;
  c.batch = 0;
  c.iterations = iters;
  c.log_every = 1;
  return c;
}

// n responses of m atoms each, covariates (1, t).
struct Problem {
  MatrixXd design;
  std::vector<Marginal> responses;
};

Problem random_problem(std::mt19937_64& rng, int n, int m) {
  Problem pr;
  pr.design.resize(n, 2);
  std::uniform_real_distribution<double> t(-2, 2);
  std::normal_distribution<double> z;
  for (int i = 0; i < n; ++i) {
    const double ti = t(rng);
    pr.design.row(i) << 1.0, ti;
    std::vector<double> atoms(static_cast<std::size_t>(m));
    for (auto& a : atoms) a = ti + std::sqrt(1 + ti * ti) * z(rng);
    pr.responses.push_back(EmpiricalDist::univariate(atoms));
  }
  return pr;
}

}  // namespace

TEST_CASE("objective examples") {
  CHECK(objective(cloud_of({0, 0, 0}), ones(1), one({2.5})) == doctest::Approx(6.25));
  CHECK(objective(cloud_of({0, 1}), ones(1), one({1, 2})) == doctest::Approx(1.0));

  // pushforwards x_i beta match every response atom for atom
  MatrixXd design(2, 1);
  design << 1.0, 2.0;
  std::vector<Marginal> resp = {EmpiricalDist::univariate({-1, 0.5, 3}),
                                EmpiricalDist::univariate({-2, 1, 6})};
  CHECK(objective(cloud_of({-1, 0.5, 3}), design, resp) == 0.0);
  CHECK_THROWS_AS(objective(cloud_of({0, 1}), ones(2), one({1})), InputError);
  CHECK_THROWS_AS(objective(cloud_of({0, 1}), MatrixXd::Ones(1, 2), one({1})), InputError);
}

TEST_CASE("gradient_step examples") {
  MatrixXd design(2, 1);
  design << 1.0, 2.0;
  std::vector<Marginal> resp = {EmpiricalDist::univariate({-1, 0.5, 3}),
                                EmpiricalDist::univariate({-2, 1, 6})};
  const ParticleCloud matched = cloud_of({3, -1, 0.5});
  CHECK(gradient_step(matched, design, resp, 0.3).particles == matched.particles);

  // delta_c target contracts every particle toward c
  const ParticleCloud c0 = cloud_of({-2, 0.5, 4, 4});
  const ParticleCloud c1 = gradient_step(c0, ones(1), one({1.5}), 0.25);
  for (Eigen::Index j = 0; j < 4; ++j) {
    CHECK(c1.particles(j, 0) == doctest::Approx(c0.particles(j, 0) + 0.25 * (1.5 - c0.particles(j, 0))));
  }
  CHECK_THROWS_AS(gradient_step(c0, ones(1), one({1.5}), 0.0), InputError);
}

TEST_CASE("gradient_step uses frozen rankings and the mean over rows") {
  std::mt19937_64 rng(3);
  const Problem pr = random_problem(rng, 4, 6);
  ParticleCloud c;
  c.particles = test::random_matrix(rng, 6, 2);
  const ParticleCloud next = gradient_step(c, pr.design, pr.responses, 0.2);
  // direct evaluation: sort each row's predictions, pair with sorted atoms
  MatrixXd disp = MatrixXd::Zero(6, 2);
  for (int i = 0; i < 4; ++i) {
    const VectorXd x = pr.design.row(i).transpose();
    const VectorXd z = c.particles * x;
    std::vector<Eigen::Index> order(6);
    for (Eigen::Index j = 0; j < 6; ++j) order[static_cast<std::size_t>(j)] = j;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return z(a) < z(b); });
    const auto atoms = std::get<EmpiricalDist>(pr.responses[static_cast<std::size_t>(i)]).values();
    for (std::size_t k = 0; k < 6; ++k) {
      const Eigen::Index j = order[k];
      disp.row(j) += (atoms[k] - z(j)) * x.transpose() / 4.0;
    }
  }
  CHECK(test::rel_frob(next.particles, c.particles + 0.2 * disp) < 1e-13);
}

TEST_CASE("normal_equation_residual examples") {
  CHECK(normal_equation_residual(cloud_of({1.5, 1.5}), ones(1), one({1.5})) == 0.0);
  CHECK(normal_equation_residual(cloud_of({-1, 3, 0.5}), ones(1), one({-1, 0.5, 3})) == 0.0);
  CHECK(normal_equation_residual(cloud_of({0, 0}), ones(1), one({2})) == doctest::Approx(2.0));
}

TEST_CASE("fit with no iterations returns the initial cloud") {
  const ParticleCloud init = cloud_of({0.3, -0.7, 1.1});
  SolverConfig cfg = plain(0, 0.1);
  const ParticleFit f = fit(ones(1), one({1, 2, 3}), cfg, init);
  CHECK(f.cloud.particles == init.particles);
  CHECK(f.report.iterations == 0);
}

TEST_CASE("delta target converges geometrically at rate 1 - tau") {
  const ParticleCloud init = cloud_of({-3, 0.2, 5});
  const double c = 0.7, tau = 0.3;
  for (long k : {1L, 5L, 20L}) {
    const ParticleFit f = fit(ones(1), one({c}), plain(k, tau), init);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double expect = c + std::pow(1 - tau, static_cast<double>(k)) * (init.particles(j, 0) - c);
      CHECK(f.cloud.particles(j, 0) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("single-atom responses are allowed with many particles") {
  const ParticleFit f = fit(ones(1), one({2.0}), plain(50, 0.5));
  CHECK((f.cloud.particles.array() - 2.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("config validation and divergence") {
  std::mt19937_64 rng(1);
  const Problem pr = random_problem(rng, 5, 10);
  SolverConfig bad;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(fit(pr.design, pr.responses, bad), InputError);
  bad = SolverConfig{};
  bad.batch = 6;
  CHECK_THROWS_AS(fit(pr.design, pr.responses, bad), InputError);
  bad = SolverConfig{};
  bad.step = -1;
  CHECK_THROWS_AS(fit(pr.design, pr.responses, bad), InputError);
  bad = SolverConfig{};
  bad.particles = 1;
  CHECK_THROWS_AS(fit(pr.design, pr.responses, bad), InputError);

  SolverConfig wild = plain(200, 1e300);
  wild.particles = 10;
  try {
    fit(pr.design, pr.responses, wild);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() >= 1);
  }
}

TEST_CASE("fit is reproducible and independent of the execution mode") {
  std::mt19937_64 rng(4);
  const Problem pr = random_problem(rng, 20, 40);
  SolverConfig cfg;
  cfg.particles = 80;
  cfg.iterations = 200;
  cfg.seed = 9;
  const ParticleFit a = fit(pr.design, pr.responses, cfg);
  const ParticleFit b = fit(pr.design, pr.responses, cfg);
  cfg.exec = Exec::kSerial;
  const ParticleFit s = fit(pr.design, pr.responses, cfg);
  CHECK(a.cloud.particles == b.cloud.particles);
  CHECK(a.cloud.particles == s.cloud.particles);
  CHECK(a.report.trace_objective == s.report.trace_objective);
  cfg.seed = 10;
  CHECK_FALSE(fit(pr.design, pr.responses, cfg).cloud.particles == a.cloud.particles);
}

TEST_CASE("final objective does not exceed the initial one") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Problem pr = random_problem(rng, 30, 50);
    SolverConfig cfg;
    cfg.particles = 100;
    cfg.iterations = 500;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const ParticleFit f = fit(pr.design, pr.responses, cfg);
    CHECK(f.report.final_objective <= f.report.initial_objective);
    CHECK(f.report.final_objective == doctest::Approx(objective(f.cloud, pr.design, pr.responses)));
    for (double v : f.report.trace_objective) CHECK(std::isfinite(v));
  }
}

TEST_CASE("descent with full batch, no momentum and tau = 1/eta") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Problem pr = random_problem(rng, 2 + trial % 5, 3 + trial % 4);
    ParticleCloud c;
    c.particles = test::random_matrix(rng, 3 + trial % 4, 2);
    const double tau = 1.0 / smoothness_constant(pr.design);
    double g = objective(c, pr.design, pr.responses);
    for (int k = 0; k < 30; ++k) {
      c = gradient_step(c, pr.design, pr.responses, tau);
      const double next = objective(c, pr.design, pr.responses);
      CHECK(next <= g + 1e-12 * std::max(1.0, g));
      g = next;
    }
  }
}

TEST_CASE("permuting rows leaves a full-batch fit unchanged") {
  std::mt19937_64 rng(7);
  const Problem pr = random_problem(rng, 8, 12);
  std::vector<int> perm = {3, 7, 0, 5, 1, 6, 2, 4};
  Problem q;
  q.design.resize(8, 2);
  for (int i = 0; i < 8; ++i) {
    q.design.row(i) = pr.design.row(perm[static_cast<std::size_t>(i)]);
    q.responses.push_back(pr.responses[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
  }
  SolverConfig cfg = plain(300, 0.2);
  cfg.particles = 12;
  cfg.seed = 3;
  const ParticleFit a = fit(pr.design, pr.responses, cfg);
  const ParticleFit b = fit(q.design, q.responses, cfg);
  CHECK(test::rel_frob(a.cloud.particles, b.cloud.particles) < 1e-10);
  CHECK(a.report.final_objective == doctest::Approx(b.report.final_objective).epsilon(1e-10));
}

TEST_CASE("constant design reduces to the quantile-average barycenter") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  std::vector<Marginal> resp;
  std::vector<QuantileGrid> grids;
  const auto levels = standard_levels();
  for (int i = 0; i < 4; ++i) {
    std::vector<double> atoms(300);
    for (auto& a : atoms) a = 0.5 * i + (1.0 + 0.3 * i) * z(rng) + (i == 2 ? z(rng) * z(rng) : 0.0);
    resp.push_back(EmpiricalDist::univariate(atoms));
    grids.push_back(resample_1d(resp.back(), levels));
  }
  const double w[] = {0.25, 0.25, 0.25, 0.25};
  const QuantileGrid bary = barycenter_1d(grids, w);

  SolverConfig cfg = plain(200, 0.5);
  cfg.particles = 300;
  const ParticleFit f = fit(ones(4), resp, cfg);
  const EmpiricalDist push = f.cloud.pushforward(VectorXd::Ones(1));
  double worst = 0.0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    worst = std::max(worst, std::abs(empirical_quantile(push.values(), levels[k]) - bary.values[k]));
  }
  CHECK(worst <= 1e-3);

  // shifting every response by c shifts the pushforward by c
  const double c = 1.75;
  std::vector<Marginal> shifted;
  for (const auto& r : resp) {
    std::vector<double> a(std::get<EmpiricalDist>(r).values().begin(), std::get<EmpiricalDist>(r).values().end());
    for (auto& v : a) v += c;
    shifted.push_back(EmpiricalDist::univariate(a));
  }
  const EmpiricalDist push2 = fit(ones(4), shifted, cfg).cloud.pushforward(VectorXd::Ones(1));
  double dev = 0.0;
  for (double p : levels) {
    dev = std::max(dev, std::abs(empirical_quantile(push2.values(), p) - empirical_quantile(push.values(), p) - c));
  }
  CHECK(dev <= 1e-3);
}

TEST_CASE("tolerance stop") {
  SolverConfig cfg = plain(10000, 0.5);
  cfg.particles = 20;
  cfg.tol = 1e-8;
  cfg.log_every = 10;
  const ParticleFit f = fit(ones(2), std::vector<Marginal>{EmpiricalDist::univariate({0, 1}),
                                                           EmpiricalDist::univariate({2, 5})},
                            cfg);
  CHECK(f.report.stopped_on_tolerance);
  CHECK(f.report.iterations < 10000);
  CHECK(f.report.final_gradient_norm <= 1e-8);
}

TEST_CASE("Gaussian targets use exact quantiles") {
  const std::vector<Marginal> resp = {gaussian_1d(1.0, 4.0)};
  const auto t = transport_targets(resp, 4);
  for (Eigen::Index k = 0; k < 4; ++k) {
    CHECK(t[0](k) == doctest::Approx(1.0 + 2.0 * normal_quantile((k + 0.5) / 4.0)).epsilon(1e-12));
  }
}
