#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "wls/deform_sim.hpp"
#include "wls/error.hpp"
#include "wls/eval_metrics.hpp"

using namespace wls;

namespace {

std::vector<Marginal> gaussians_1d(std::initializer_list<std::pair<double, double>> mv) {
  std::vector<Marginal> out;
  for (const auto& [m, v] : mv) out.push_back(gaussian_1d(m, v));
  return out;
}

template <class T>
std::vector<Marginal> as_marg(const std::vector<T>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("in_sample_error examples") {
  const auto a = gaussians_1d({{0, 1}, {2, 3}});
  CHECK(in_sample_error(a, a) == 0.0);
  const auto b = gaussians_1d({{0, 4}, {0, 4}});
  const auto c = gaussians_1d({{0, 1}, {0, 1}});
  CHECK(in_sample_error(b, c) == doctest::Approx(1.0));

  const std::vector<Marginal> emp = {EmpiricalDist::univariate({0, 1, 5})};
  CHECK(in_sample_error(emp, emp) == 0.0);
  CHECK(in_sample_error(emp, std::vector<Marginal>{EmpiricalDist::univariate({0, 1, 5.5})}) > 0.0);
  const std::vector<Marginal> two = {make_gaussian(Eigen::Vector2d::Zero(), MatrixXd::Identity(2, 2))};
  const std::vector<Marginal> emp2 = {EmpiricalDist::multivariate(MatrixXd::Zero(3, 2))};
  CHECK_THROWS_AS(in_sample_error(two, emp2), InputError);
  CHECK_THROWS_AS(in_sample_error(a, std::span<const Marginal>(b).subspan(0, 1)), InputError);
}

TEST_CASE("evaluate aggregates are consistent with per-row values") {
  const auto fit = gaussians_1d({{0, 1}, {1, 1}, {2, 2}});
  const auto resp = gaussians_1d({{0.5, 1}, {1, 4}, {2, 2}});
  const EvalReport r = evaluate(fit, resp, resp);
  REQUIRE(r.w2_vs_response.size() == 3);
  CHECK(r.w2_vs_response[0] == doctest::Approx(0.5));
  CHECK(r.w2_vs_response[1] == doctest::Approx(1.0));
  CHECK(r.w2_vs_response[2] == doctest::Approx(0.0));
  CHECK(r.vs_response.mean == doctest::Approx(0.5));
  CHECK(r.vs_response.sd == doctest::Approx(0.5));
  CHECK(r.w2_vs_truth == r.w2_vs_response);
  REQUIRE(r.r2.has_value());
}

TEST_CASE("wasserstein_r2 examples") {
  const auto resp = gaussians_1d({{0, 1}, {1, 4}, {3, 9}});
  CHECK(wasserstein_r2(resp, resp) == doctest::Approx(1.0));
  const Marginal bary = response_barycenter(resp);
  const std::vector<Marginal> flat(3, bary);
  CHECK(wasserstein_r2(flat, resp) == doctest::Approx(0.0).scale(1.0));
  // the 1-D Gaussian barycenter: mean of means, mean of standard deviations
  CHECK(std::get<GaussianMeasure>(bary).mean(0) == doctest::Approx(4.0 / 3.0));
  CHECK(std::get<GaussianMeasure>(bary).cov(0, 0) == doctest::Approx(4.0));

  const auto same = gaussians_1d({{1, 2}, {1, 2}});
  CHECK_THROWS_AS(wasserstein_r2(same, same), DefinedValueError);
  const auto worse = gaussians_1d({{10, 1}, {-10, 1}, {0, 100}});
  CHECK(wasserstein_r2(worse, resp) < 0.0);

  const std::vector<Marginal> multi = {EmpiricalDist::multivariate(MatrixXd::Ones(2, 2)),
                                       EmpiricalDist::multivariate(MatrixXd::Zero(2, 2))};
  CHECK_THROWS_AS(wasserstein_r2(multi, multi), RefusalError);
}

TEST_CASE("R2 is invariant under a common shift") {
  std::mt19937_64 rng(1);
  std::vector<Marginal> resp, shifted;
  std::normal_distribution<double> z;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> a(100);
    for (auto& v : a) v = 0.3 * i + (1 + 0.1 * i) * z(rng);
    resp.push_back(EmpiricalDist::univariate(a));
    for (auto& v : a) v += 4.2;
    shifted.push_back(EmpiricalDist::univariate(a));
  }
  SolverConfig cfg;
  cfg.particles = 100;
  cfg.batch = 0;
  cfg.momentum = 0.0;
  cfg.decay = 0.0;
  cfg.step = 0.5;
  cfg.iterations = 200;
  const MatrixXd design = MatrixXd::Ones(6, 1);
  const auto predict = [&](const std::vector<Marginal>& r) {
    const ParticleFit f = fit(design, r, cfg);
    return std::vector<Marginal>(6, Marginal(f.cloud.pushforward(VectorXd::Ones(1))));
  };
  const double r0 = wasserstein_r2(predict(resp), resp);
  const double r1 = wasserstein_r2(predict(shifted), shifted);
  CHECK(r0 == doctest::Approx(r1).epsilon(1e-6).scale(1.0));
}

TEST_CASE("WLS and Frechet R2 agree when quantiles are linear in x") {
  MatrixXd cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.09;
  const TemplateSpec corr = TemplateSpec::custom_gaussian(Eigen::Vector2d(0, 1), cov, 2, 1);
  const auto ds = generate_dataset(corr, DeformSpec::preset(NoiseFamily::kAdditive), 50, 300, 12);
  const auto resp = as_marg(ds.responses);
  SolverConfig cfg;
  cfg.particles = 300;
  cfg.iterations = 3000;
  cfg.seed = 1;
  const ParticleFit p = fit(ds.design, resp, cfg);
  const FrechetModel1D f = frechet_fit_1d(ds.design, resp);
  std::vector<Marginal> wfit, ffit;
  for (Eigen::Index i = 0; i < ds.design.rows(); ++i) {
    wfit.push_back(p.cloud.pushforward(ds.design.row(i).transpose()));
    ffit.push_back(frechet_predict_1d(f, ds.design.row(i).transpose()));
  }
  CHECK(std::abs(wasserstein_r2(wfit, resp) - wasserstein_r2(ffit, resp)) <= 0.02);
}

TEST_CASE("loo_cv examples") {
  // responses exactly on the model: mean and variance of b0 + b1 t, b ~ N(mu, S)
  MatrixXd design(6, 2);
  std::vector<Marginal> resp;
  for (int i = 0; i < 6; ++i) {
    const double t = -1.0 + 0.4 * i;
    design.row(i) << 1.0, t;
    resp.push_back(gaussian_1d(0.5 + t, 1.0 + 0.4 * t + 0.5 * t * t));
  }
  GaussianConfig gcfg;
  gcfg.max_iter = 3000;
  gcfg.tol = 1e-10;
  const LooResult lin = loo_cv(gaussian_predictor(gcfg), design, resp);
  CHECK(lin.failed == 0);
  CHECK(lin.summary.mean <= 1e-3);

  const std::vector<Marginal> same(3, gaussian_1d(1.0, 2.0));
  const LooResult eq = loo_cv(gaussian_predictor(gcfg), MatrixXd::Ones(3, 1), same);
  CHECK(eq.summary.mean < 1e-6);
  CHECK_THROWS_AS(loo_cv(gaussian_predictor(gcfg), MatrixXd::Ones(2, 1), std::span<const Marginal>(same).subspan(0, 2)), InputError);
}

TEST_CASE("loo_cv counts failed folds") {
  const std::vector<Marginal> resp(4, gaussian_1d(0.0, 1.0));
  int calls = 0;
  const FitPredict flaky = [&calls](const MatrixXd&, std::span<const Marginal>, const VectorXd&) -> Marginal {
    int k;
#pragma omp atomic capture
    k = calls++;
    if (k % 2 == 0) throw DivergenceError("boom", 3);
    return gaussian_1d(0.0, 1.0);
  };
  const LooResult r = loo_cv(flaky, MatrixXd::Ones(4, 1), resp);
  CHECK(r.failed == 2);
  CHECK(r.summary.mean == 0.0);
  const FitPredict broken = [](const MatrixXd&, std::span<const Marginal>, const VectorXd&) -> Marginal {
    throw InputError("bad");
  };
  CHECK_THROWS_AS(loo_cv(broken, MatrixXd::Ones(4, 1), resp), InputError);
}

TEST_CASE("LOO error stays within twice the in-sample error") {
  const auto ds = generate_dataset(TemplateSpec::univariate_quadratic_variance(),
                                   DeformSpec::preset(NoiseFamily::kAdditive), 30, 200, 21);
  const auto resp = as_marg(ds.responses);
  SolverConfig cfg;
  cfg.particles = 200;
  cfg.iterations = 800;
  cfg.seed = 4;
  const ParticleFit p = fit(ds.design, resp, cfg);
  std::vector<Marginal> fitted;
  for (Eigen::Index i = 0; i < ds.design.rows(); ++i) fitted.push_back(p.cloud.pushforward(ds.design.row(i).transpose()));
  const double in_sample = evaluate(fitted, resp).vs_response.mean;
  const LooResult loo = loo_cv(particle_predictor(cfg), ds.design, resp);
  CHECK(loo.failed == 0);
  CHECK(loo.summary.mean <= 2.0 * in_sample);
}

TEST_CASE("incoherence examples and leverage properties") {
  const Incoherence id = incoherence(MatrixXd::Identity(4, 4));
  CHECK(id.mu == doctest::Approx(1.0));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(id.leverage(i) == doctest::Approx(1.0));

  const Incoherence dup = incoherence(MatrixXd::Ones(5, 1));
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(dup.leverage(i) == doctest::Approx(0.2));
  CHECK(dup.mu == doctest::Approx(1.0));

  MatrixXd out(10, 2);
  for (int i = 0; i < 10; ++i) out.row(i) << 1.0, 0.01 * i;
  out.row(9) << 1.0, 1000.0;
  const Incoherence o = incoherence(out);
  CHECK(o.leverage(9) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(o.mu == doctest::Approx(5.0).epsilon(1e-4));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd x = test::random_matrix(rng, 8, 1 + trial % 4);
    if (trial % 3 == 0 && x.cols() > 1) x.col(1) = 2.0 * x.col(0);
    const Incoherence inc = incoherence(x);
    Eigen::FullPivLU<MatrixXd> lu(x);
    CHECK(inc.leverage.sum() == doctest::Approx(static_cast<double>(lu.rank())).epsilon(1e-10));
    CHECK(inc.leverage.minCoeff() >= -1e-12);
    CHECK(inc.leverage.maxCoeff() <= 1 + 1e-12);
  }
}

TEST_CASE("rate study edge cases") {
  const TemplateSpec u = TemplateSpec::univariate_quadratic_variance();
  GaussianConfig cfg;
  cfg.max_iter = 200;
  const RateStudy clean = rate_study(u, DeformSpec{}, {10, 20, 40}, 3, 1, cfg);
  CHECK(clean.slope_skipped);
  for (double e : clean.median_error) CHECK(e <= kRateErrorFloor);

  const RateStudy smoke = rate_study(u, DeformSpec::preset(NoiseFamily::kAdditive), {10, 20}, 2, 1, cfg);
  CHECK_FALSE(smoke.slope_skipped);
  CHECK(std::isfinite(smoke.slope));
  CHECK(smoke.cells.size() == 4);
  const RateStudy again = rate_study(u, DeformSpec::preset(NoiseFamily::kAdditive), {10, 20}, 2, 1, cfg);
  CHECK(again.slope == smoke.slope);
  CHECK_THROWS_AS(rate_study(u, DeformSpec::preset(NoiseFamily::kAdditive), {1}, 2, 1, cfg), InputError);
}
