#include <doctest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "wls/deform_sim.hpp"
#include "wls/error.hpp"
#include "wls/frechet_baseline.hpp"
#include "wls/inference_cond.hpp"

using namespace wls;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ParticleCloud cloud_1d(std::initializer_list<double> v) {
  ParticleCloud c;
  c.particles.resize(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index j = 0;
  for (double x : v) c.particles(j++, 0) = x;
  return c;
}

ParticleCloud normal_cloud(std::mt19937_64& rng, Eigen::Index m, Eigen::Index p) {
  std::normal_distribution<double> z;
  ParticleCloud c;
  c.particles.resize(m, p);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < p; ++k) c.particles(j, k) = z(rng);
  return c;
}

ConditionSpec window(VectorXd x, double lo, double hi) { return {{Constraint{std::move(x), lo, hi}}}; }

}  // namespace

TEST_CASE("select examples") {
  const ParticleCloud c = cloud_1d({28, 31, 35});
  const VectorXd one = VectorXd::Ones(1);
  CHECK(select(c, window(one, -kInf, kInf)) == std::vector<int>{0, 1, 2});
  CHECK(select(c, window(one, 30, 32)) == std::vector<int>{1});
  CHECK(select(c, window(one, 40, 50)).empty());
  CHECK_THROWS_AS(select(c, window(one, 2, 1)), InputError);
  CHECK_THROWS_AS(select(c, ConditionSpec{}), InputError);
  CHECK_THROWS_AS(select(c, window(VectorXd::Ones(2), 0, 1)), InputError);
}

TEST_CASE("double conditioning on a level-ordered coefficient curve can be empty") {
  // quantile curves of N(t, (1 + t/2)^2): beta(u) = (z(u), 1 + z(u)/2)
  MatrixXd design(20, 2);
  std::vector<Marginal> resp;
  for (int i = 0; i < 20; ++i) {
    const double t = 0.1 * i;
    design.row(i) << 1.0, t;
    resp.push_back(gaussian_1d(t, (1 + 0.5 * t) * (1 + 0.5 * t)));
  }
  const ParticleCloud curve = frechet_coeff_law(frechet_fit_1d(design, resp));
  const VectorXd x0 = Eigen::Vector2d(1.0, 0.0);
  const VectorXd x1 = Eigen::Vector2d(1.0, 1.0);
  ConditionSpec both = window(x0, 0.9, 1.1);  // upper part of the curve at t = 0
  CHECK_FALSE(select(curve, both).empty());
  both.constraints.push_back({x1, 0.5, 1.5});  // implies z near 0 at t = 1
  CHECK(select(curve, both).empty());
}

TEST_CASE("select is monotone in the constraint set") {
  std::mt19937_64 rng(5);
  const ParticleCloud c = normal_cloud(rng, 2000, 3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    ConditionSpec spec;
    std::size_t prev = c.size();
    for (int k = 0; k < 4; ++k) {
      const VectorXd x = test::random_matrix(rng, 3, 1);
      const double a = u(rng);
      spec.constraints.push_back({x, a - 1.0, a + 1.0});
      const auto idx = select(c, spec);
      CHECK(idx.size() <= prev);
      prev = idx.size();
    }
  }
}

TEST_CASE("midpoint percentile") {
  CHECK(midpoint_percentile({3, 1, 2}, 0.5) == doctest::Approx(2.0));
  CHECK(midpoint_percentile({1, 2}, 0.25) == doctest::Approx(1.0));
  CHECK(midpoint_percentile({1, 2}, 0.5) == doctest::Approx(1.5));
  CHECK(midpoint_percentile({1, 2}, 0.0) == 1.0);
  CHECK(midpoint_percentile({1, 2}, 1.0) == 2.0);
}

TEST_CASE("conditional bands") {
  SUBCASE("empty scenario") {
    const ParticleCloud c = cloud_1d({1, 2});
    const std::vector<double> cov = {0.75};
    const ConditionalBand b = conditional_band(c, {}, MatrixXd::Ones(1, 1), cov);
    CHECK(b.empty);
    CHECK(b.retained == 0);
    CHECK(b.points.empty());
  }
  SUBCASE("single particle collapses to its trajectory") {
    ParticleCloud c;
    c.particles.resize(3, 2);
    c.particles << 0, 0, 1, 2, 5, 5;
    const std::vector<int> idx = {1};
    MatrixXd grid(3, 2);
    grid << 1, 0, 1, 1, 1, -2;
    const std::vector<double> cov = {0.75, 0.99};
    const ConditionalBand b = conditional_band(c, idx, grid, cov);
    REQUIRE(b.points.size() == 3);
    for (int g = 0; g < 3; ++g) {
      const double v = grid.row(g).dot(c.particles.row(1));
      CHECK(b.points[g].mean == doctest::Approx(v));
      for (int l = 0; l < 2; ++l) {
        CHECK(b.points[g].lower[l] == doctest::Approx(v));
        CHECK(b.points[g].upper[l] == doctest::Approx(v));
      }
    }
  }
  SUBCASE("nested coverage levels and symmetric mean") {
    std::mt19937_64 rng(9);
    ParticleCloud c = normal_cloud(rng, 20000, 2);
    c.particles.col(1).array() += 1.0;
    std::vector<int> idx(c.size());
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<int>(j);
    MatrixXd grid(5, 2);
    for (int g = 0; g < 5; ++g) grid.row(g) << 1.0, -2.0 + g;
    const std::vector<double> cov = {0.5, 0.75, 0.99};
    const ConditionalBand b = conditional_band(c, idx, grid, cov);
    for (int g = 0; g < 5; ++g) {
      const auto& pt = b.points[g];
      const double t = grid(g, 1);
      CHECK(std::abs(pt.mean - t) <= 0.05);
      for (int l = 0; l + 1 < 3; ++l) {
        CHECK(pt.lower[l + 1] <= pt.lower[l]);
        CHECK(pt.upper[l] <= pt.upper[l + 1]);
      }
    }
  }
}

TEST_CASE("conditioned band widens away from the conditioning point") {
  const auto ds = generate_dataset(TemplateSpec::univariate_quadratic_variance(),
                                   DeformSpec::preset(NoiseFamily::kAdditive), 50, 300, 7);
  SolverConfig cfg;
  cfg.particles = 2000;
  cfg.iterations = 1500;
  cfg.seed = 2;
  const ParticleFit f = fit(ds.design, as_marginals(ds.responses), cfg);
  const TemplateSpec u = TemplateSpec::univariate_quadratic_variance();
  MatrixXd grid(2, 2);
  grid.row(0) = u.covariates(0.0).transpose();
  grid.row(1) = u.covariates(1.8).transpose();
  const std::vector<double> cov = {0.75};

  std::vector<int> all(f.cloud.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
  const ConditionalBand ub = conditional_band(f.cloud, all, grid, cov);
  const double w0 = ub.points[0].upper[0] - ub.points[0].lower[0];
  const double w1 = ub.points[1].upper[0] - ub.points[1].lower[0];
  CHECK(w0 / w1 == doctest::Approx(1.0 / std::sqrt(4.24)).epsilon(0.15));

  const auto idx = select(f.cloud, window(u.covariates(0.0), -0.5, 0.5));
  REQUIRE(!idx.empty());
  const ConditionalBand cb = conditional_band(f.cloud, idx, grid, cov);
  const double c0 = cb.points[0].upper[0] - cb.points[0].lower[0];
  const double c1 = cb.points[1].upper[0] - cb.points[1].lower[0];
  CHECK(c0 <= 1.0);
  CHECK(c1 > 2.0 * c0);
}

TEST_CASE("exceedance probability") {
  const ParticleCloud c = cloud_1d({28, 31, 35});
  const std::vector<int> idx = {0, 1, 2};
  const VectorXd one = VectorXd::Ones(1);
  CHECK(exceedance_prob(c, idx, one, 30) == doctest::Approx(2.0 / 3.0));
  CHECK(exceedance_prob(c, idx, one, 0) == 1.0);
  CHECK(exceedance_prob(c, idx, one, 100) == 0.0);
  CHECK(exceedance_prob(c, idx, one, 31) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(exceedance_prob(c, {}, one, 30), DefinedValueError);

  std::mt19937_64 rng(2);
  const ParticleCloud n = normal_cloud(rng, 500, 2);
  std::vector<int> all(500);
  for (int j = 0; j < 500; ++j) all[j] = j;
  const VectorXd x = Eigen::Vector2d(1.0, 0.7);
  double prev = 1.0;
  for (double th = -4; th <= 4; th += 0.05) {
    const double p = exceedance_prob(n, all, x, th);
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("coefficient summary") {
  SUBCASE("point mass") {
    ParticleCloud c;
    c.particles = MatrixXd::Ones(10, 2);
    c.particles.col(1).setConstant(-3.0);
    const CoeffSummary s = coeff_summary(c);
    CHECK(s.sd.isZero());
    CHECK(s.zero_variance == std::vector<bool>{true, true});
    CHECK(s.corr.isZero());
    CHECK(s.mean(1) == -3.0);
    CHECK(s.prob_positive(0) == 1.0);
    CHECK(s.prob_positive(1) == 0.0);
  }
  SUBCASE("isotropic cloud") {
    std::mt19937_64 rng(11);
    const ParticleCloud c = normal_cloud(rng, 100000, 3);
    const CoeffSummary s = coeff_summary(c);
    for (int a = 0; a < 3; ++a) {
      CHECK(s.corr(a, a) == doctest::Approx(1.0));
      for (int b = 0; b < 3; ++b)
        if (a != b) CHECK(std::abs(s.corr(a, b)) <= 0.02);
    }
    CHECK(s.q025(0) == doctest::Approx(-1.96).epsilon(0.03));
    CHECK(s.q975(0) == doctest::Approx(1.96).epsilon(0.03));
  }
  SUBCASE("symmetric cloud") {
    std::mt19937_64 rng(12);
    ParticleCloud c = normal_cloud(rng, 50000, 1);
    ParticleCloud sym;
    sym.particles.resize(100000, 1);
    sym.particles << c.particles, -c.particles;
    CHECK(std::abs(coeff_summary(sym).prob_positive(0) - 0.5) <= 0.01);
  }
  SUBCASE("covariance uses M - 1") {
    const ParticleCloud c = cloud_1d({0, 2});
    CHECK(coeff_summary(c).cov(0, 0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(coeff_summary(cloud_1d({1})), InputError);
  }
}

TEST_CASE("Schur complement") {
  MatrixXd d = Eigen::Vector3d(2, 3, 5).asDiagonal();
  const SchurResult sd = conditional_variance_schur(SpdMatrix(d), 1);
  REQUIRE(sd.cov.rows() == 2);
  CHECK(sd.cov(0, 0) == doctest::Approx(2));
  CHECK(sd.cov(1, 1) == doctest::Approx(5));
  CHECK(sd.cov(0, 1) == doctest::Approx(0));
  CHECK_FALSE(sd.regularized);

  MatrixXd two(2, 2);
  two << 2, 1, 1, 2;
  CHECK(conditional_variance_schur(SpdMatrix(two), 0).cov(0, 0) == doctest::Approx(1.5));

  MatrixXd r1(2, 2);
  r1 << 1, 2, 2, 4;
  CHECK(conditional_variance_schur(SpdMatrix(r1), 0).cov(0, 0) == doctest::Approx(0).scale(1.0).epsilon(1e-9));
  MatrixXd z(2, 2);
  z << 0, 0, 0, 1;
  const SchurResult sz = conditional_variance_schur(SpdMatrix(z), 0);
  CHECK(sz.regularized);
  CHECK(sz.cov(0, 0) == doctest::Approx(1.0));

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 2 + trial % 4;
    const MatrixXd s = test::random_spd(rng, p);
    const int g = trial % p;
    const SchurResult r = conditional_variance_schur(SpdMatrix(s), g);
    MatrixXd s22(p - 1, p - 1);
    for (int a = 0, ia = 0; a < p; ++a) {
      if (a == g) continue;
      for (int b = 0, ib = 0; b < p; ++b) {
        if (b == g) continue;
        s22(ia, ib++) = s(a, b);
      }
      ++ia;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s22 - r.cov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    Eigen::SelfAdjointEigenSolver<MatrixXd> ec(r.cov);
    CHECK(ec.eigenvalues().minCoeff() >= -1e-10);
  }
  CHECK_THROWS_AS(conditional_variance_schur(SpdMatrix(two), 2), InputError);
}
