#include "wls/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <string>

#include "wls/error.hpp"
#include "wls/rng.hpp"

namespace wls {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const GaussianMeasure* as_gaussian(const Marginal& m) { return std::get_if<GaussianMeasure>(&m); }

std::vector<GaussianMeasure> gaussians(std::span<const Marginal> responses, const char* who) {
  std::vector<GaussianMeasure> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    const auto* g = as_gaussian(r);
    if (!g) throw InputError(std::string(who) + ": responses must be Gaussian");
    out.push_back(*g);
  }
  return out;
}

void check_aligned(std::size_t a, std::size_t b, const char* who) {
  if (a != b) throw InputError(std::string(who) + ": lists differ in length");
  if (a == 0) throw InputError(std::string(who) + ": empty input");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

}  // namespace

double w2_squared(const Marginal& a, const Marginal& b) {
  const auto* ga = as_gaussian(a);
  const auto* gb = as_gaussian(b);
  if (ga && gb) return gaussian_w2_squared(*ga, *gb);
  if (marginal_dim(a) == 1 && marginal_dim(b) == 1) return w2_squared_1d(a, b);
  throw InputError("w2_squared: no closed form for this pair of representations");
}

double in_sample_error(std::span<const Marginal> model, std::span<const Marginal> truth) {
  check_aligned(model.size(), truth.size(), "in_sample_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) acc += w2_squared(model[i], truth[i]);
  return acc / static_cast<double>(model.size());
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double k = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (k - 1.0));
  }
  return s;
}

EvalReport evaluate(std::span<const Marginal> fitted, std::span<const Marginal> responses,
                    std::span<const Marginal> truth) {
  check_aligned(fitted.size(), responses.size(), "evaluate");
  EvalReport rep;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    rep.w2_vs_response.push_back(std::sqrt(w2_squared(fitted[i], responses[i])));
  }
  rep.vs_response = summarize(rep.w2_vs_response);
  if (!truth.empty()) {
    check_aligned(fitted.size(), truth.size(), "evaluate");
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      rep.w2_vs_truth.push_back(std::sqrt(w2_squared(fitted[i], truth[i])));
    }
    rep.vs_truth = summarize(rep.w2_vs_truth);
  }
  if (responses.size() >= 2) {
    try {
      rep.r2 = wasserstein_r2(fitted, responses);
    } catch (const DefinedValueError&) {
      rep.r2.reset();
    }
  }
  return rep;
}

Marginal response_barycenter(std::span<const Marginal> responses) {
  if (responses.empty()) throw InputError("response_barycenter: no responses");
  const std::size_t n = responses.size();
  const std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  if (as_gaussian(responses.front())) {
    const auto gs = gaussians(responses, "response_barycenter");
    std::vector<SpdMatrix> covs;
    VectorXd mean = VectorXd::Zero(gs.front().dim());
    for (const auto& g : gs) {
      if (g.dim() != gs.front().dim()) throw InputError("response_barycenter: mixed dimensions");
      covs.push_back(g.cov);
      mean += g.mean / static_cast<double>(n);
    }
    return GaussianMeasure{mean, gaussian_barycenter_fixedpoint(covs, weights).cov};
  }
  for (const auto& r : responses) {
    if (marginal_dim(r) != 1) {
      throw RefusalError("response_barycenter: no closed form for multivariate empirical responses");
    }
  }
  const auto* first = std::get_if<EmpiricalDist>(&responses.front());
  const bool equal_empirical =
      first && std::all_of(responses.begin(), responses.end(), [&](const Marginal& r) {
        const auto* e = std::get_if<EmpiricalDist>(&r);
        return e && e->size() == first->size();
      });
  if (equal_empirical) {
    std::vector<double> atoms(first->size(), 0.0);
    for (const auto& r : responses) {
      const auto v = std::get<EmpiricalDist>(r).values();
      for (std::size_t k = 0; k < atoms.size(); ++k) atoms[k] += v[k] / static_cast<double>(n);
    }
    return EmpiricalDist::univariate(std::move(atoms));
  }
  const auto levels = standard_levels();
  std::vector<QuantileGrid> grids;
  for (const auto& r : responses) grids.push_back(resample_1d(r, levels));
  return barycenter_1d(grids, weights);
}

double wasserstein_r2(std::span<const Marginal> fitted, std::span<const Marginal> responses) {
  check_aligned(fitted.size(), responses.size(), "wasserstein_r2");
  if (responses.size() < 2) throw InputError("wasserstein_r2: need at least 2 responses");
  const Marginal bary = response_barycenter(responses);
  double num = 0.0;
  double den = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    num += w2_squared(responses[i], fitted[i]);
    den += w2_squared(responses[i], bary);
    scale += w2_squared(responses[i], bary) + 1.0;
  }
  if (!(den > 1e-14 * scale)) {
    throw DefinedValueError("wasserstein_r2: responses coincide with their barycenter (0/0)");
  }
  return 1.0 - num / den;
}

FitPredict particle_predictor(const SolverConfig& config) {
  return [config](const MatrixXd& design, std::span<const Marginal> responses,
                  const VectorXd& x) -> Marginal {
    SolverConfig c = config;
    c.batch = std::min<int>(c.batch, static_cast<int>(design.rows()));
    return fit(design, responses, c).cloud.pushforward(x);
  };
}

FitPredict gaussian_predictor(const GaussianConfig& config) {
  return [config](const MatrixXd& design, std::span<const Marginal> responses,
                  const VectorXd& x) -> Marginal {
    const auto gs = gaussians(responses, "gaussian_predictor");
    return marginal(fit_gaussian(design, gs, config).coeff, x);
  };
}

FitPredict frechet_predictor(int levels) {
  return [levels](const MatrixXd& design, std::span<const Marginal> responses,
                  const VectorXd& x) -> Marginal {
    if (as_gaussian(responses.front()) && marginal_dim(responses.front()) > 1) {
      const auto gs = gaussians(responses, "frechet_predictor");
      return frechet_predict_gauss(frechet_fit_gauss(design, gs), x);
    }
    return frechet_predict_1d(frechet_fit_1d(design, responses, levels), x);
  };
}

LooResult loo_cv(const FitPredict& fit_fn, const MatrixXd& design,
                 std::span<const Marginal> responses) {
  check_aligned(static_cast<std::size_t>(design.rows()), responses.size(), "loo_cv");
  const auto n = static_cast<long>(responses.size());
  if (n < 3) throw InputError("loo_cv: need at least 3 rows");
  LooResult out;
  out.w2.assign(static_cast<std::size_t>(n), kNaN);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      MatrixXd train(n - 1, design.cols());
      std::vector<Marginal> resp;
      resp.reserve(static_cast<std::size_t>(n - 1));
      for (long r = 0, k = 0; r < n; ++r) {
        if (r == i) continue;
        train.row(k++) = design.row(r);
        resp.push_back(responses[static_cast<std::size_t>(r)]);
      }
      const Marginal pred = fit_fn(train, resp, design.row(i).transpose());
      out.w2[ui] = std::sqrt(w2_squared(pred, responses[ui]));
    } catch (const DivergenceError&) {
    } catch (const ConvergenceError&) {
    } catch (...) {
      errors[ui] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<double> ok;
  for (double v : out.w2) {
    if (std::isnan(v)) {
      ++out.failed;
    } else {
      ok.push_back(v);
    }
  }
  out.summary = summarize(ok);
  return out;
}

Incoherence incoherence(const MatrixXd& design) {
  if (design.rows() == 0 || design.cols() == 0) throw InputError("incoherence: empty design");
  if (!design.allFinite()) throw InputError("incoherence: non-finite design");
  Incoherence out;
  const MatrixXd hat_factor = pinv(design);  // p x n
  out.leverage = (design.array() * hat_factor.transpose().array()).rowwise().sum();
  out.mu = static_cast<double>(design.rows()) / static_cast<double>(design.cols()) *
           out.leverage.maxCoeff();
  return out;
}

RateStudy rate_study(const TemplateSpec& templ, const DeformSpec& spec,
                     const std::vector<int>& n_values, int replicates, std::uint64_t base_seed,
                     const GaussianConfig& config) {
  if (n_values.empty() || replicates < 1) throw InputError("rate_study: empty study");
  for (int n : n_values) {
    if (n < templ.p) throw InputError("rate_study: n must be at least p");
  }
  RateStudy out;
  out.n_values = n_values;
  const auto cells = static_cast<long>(n_values.size()) * replicates;
  out.cells.resize(static_cast<std::size_t>(cells));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cells));
#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < cells; ++c) {
    RateCell& cell = out.cells[static_cast<std::size_t>(c)];
    cell.n = n_values[static_cast<std::size_t>(c / replicates)];
    cell.seed = derive_seed(base_seed, static_cast<std::uint64_t>(c % replicates));
    cell.error = kNaN;
    try {
      const ExactDataset ds = generate_exact_dataset(templ, spec, cell.n, cell.seed);
      GaussianConfig cfg = config;
      cfg.exec = Exec::kSerial;
      const GaussianFit f = fit_gaussian(ds.design, ds.responses, cfg);
      double acc = 0.0;
      for (int i = 0; i < cell.n; ++i) {
        acc += gaussian_w2_squared(marginal(f.coeff, ds.design.row(i).transpose()),
                                   ds.truth[static_cast<std::size_t>(i)]);
      }
      cell.error = acc / cell.n;
    } catch (const DivergenceError&) {
    } catch (const ConvergenceError&) {
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<double> log_n;
  std::vector<double> log_e;
  for (std::size_t k = 0; k < n_values.size(); ++k) {
    std::vector<double> errs;
    for (int s = 0; s < replicates; ++s) {
      const double e = out.cells[k * static_cast<std::size_t>(replicates) +
                                 static_cast<std::size_t>(s)].error;
      if (!std::isnan(e)) errs.push_back(e);
    }
    if (errs.empty()) {
      throw ConvergenceError("rate_study: every replicate failed at n = " +
                                 std::to_string(n_values[k]),
                             kNaN);
    }
    const double med = median(errs);
    out.median_error.push_back(med);
    if (med > kRateErrorFloor) {
      log_n.push_back(std::log(static_cast<double>(n_values[k])));
      log_e.push_back(std::log(med));
    }
  }
  if (log_n.size() < 2) {
    out.slope_skipped = true;
    out.slope = kNaN;
    return out;
  }
  const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / static_cast<double>(log_n.size());
  const double my = std::accumulate(log_e.begin(), log_e.end(), 0.0) / static_cast<double>(log_e.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < log_n.size(); ++k) {
    sxy += (log_n[k] - mx) * (log_e[k] - my);
    sxx += (log_n[k] - mx) * (log_n[k] - mx);
  }
  if (!(sxx > 0.0)) {
    out.slope_skipped = true;
    out.slope = kNaN;
    return out;
  }
  out.slope = sxy / sxx;
  return out;
}

}  // namespace wls
