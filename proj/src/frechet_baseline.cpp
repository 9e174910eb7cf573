#include "wls/frechet_baseline.hpp"

#include <string>

#include "wls/error.hpp"

namespace wls {

namespace {

void check_rows(const MatrixXd& design, std::size_t n, const char* who) {
  if (n == 0) throw InputError(std::string(who) + ": no responses");
  if (static_cast<std::size_t>(design.rows()) != n) {
    throw InputError(std::string(who) + ": design rows != responses");
  }
  if (!design.allFinite()) throw InputError(std::string(who) + ": non-finite design");
}

}  // namespace

FrechetModel1D frechet_fit_1d(const MatrixXd& design, std::span<const Marginal> responses,
                              int k) {
  check_rows(design, responses.size(), "frechet_fit_1d");
  if (k < 2) throw InputError("frechet_fit_1d: need at least 2 levels");
  FrechetModel1D model;
  model.levels = standard_levels(k);
  const auto n = static_cast<Eigen::Index>(responses.size());
  MatrixXd q(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = responses[static_cast<std::size_t>(i)];
    if (marginal_dim(r) != 1) throw InputError("frechet_fit_1d: responses must be univariate");
    for (int l = 0; l < k; ++l) q(i, l) = quantile_1d(r, model.levels[static_cast<std::size_t>(l)]);
  }
  model.beta = (pinv(design) * q).transpose();
  return model;
}

FrechetModel1D frechet_fit_1d(const MatrixXd& design, std::span<const EmpiricalDist> responses,
                              int k) {
  const auto m = as_marginals(responses);
  return frechet_fit_1d(design, m, k);
}

std::vector<double> pava(std::span<const double> y) {
  struct Block {
    double sum;
    double count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (double v : y) {
    blocks.push_back({v, 1.0});
    while (blocks.size() > 1) {
      const Block& hi = blocks.back();
      const Block& lo = blocks[blocks.size() - 2];
      if (lo.sum / lo.count <= hi.sum / hi.count) break;
      const Block merged{lo.sum + hi.sum, lo.count + hi.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), static_cast<std::size_t>(b.count), b.sum / b.count);
  return out;
}

QuantileGrid frechet_predict_1d(const FrechetModel1D& model, const VectorXd& x) {
  if (x.size() != model.beta.cols()) throw InputError("frechet_predict_1d: covariate has wrong length");
  const VectorXd raw = model.beta * x;
  return {model.levels, pava(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())))};
}

ParticleCloud frechet_coeff_law(const FrechetModel1D& model) { return {model.beta}; }

FrechetModelGauss frechet_fit_gauss(const MatrixXd& design,
                                    std::span<const GaussianMeasure> responses) {
  check_rows(design, responses.size(), "frechet_fit_gauss");
  const int d = responses.front().dim();
  const int e = d * (d + 1) / 2;
  const auto n = static_cast<Eigen::Index>(responses.size());
  MatrixXd means(n, d);
  MatrixXd entries(n, e);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = responses[static_cast<std::size_t>(i)];
    if (r.dim() != d) throw InputError("frechet_fit_gauss: responses differ in dimension");
    means.row(i) = r.mean.transpose();
    int c = 0;
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) entries(i, c++) = r.cov(a, b);
    }
  }
  const MatrixXd pi = pinv(design);
  FrechetModelGauss model;
  model.p = static_cast<int>(design.cols());
  model.d = d;
  model.mean_coeff = pi * means;
  model.cov_coeff = pi * entries;
  return model;
}

GaussianMeasure frechet_predict_gauss(const FrechetModelGauss& model, const VectorXd& x) {
  if (x.size() != model.p) throw InputError("frechet_predict_gauss: covariate has wrong length");
  const int d = model.d;
  const VectorXd e = model.cov_coeff.transpose() * x;
  MatrixXd cov(d, d);
  int c = 0;
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      cov(a, b) = e(c);
      cov(b, a) = e(c);
      ++c;
    }
  }
  return {model.mean_coeff.transpose() * x, SpdMatrix::trusted(psd_clip(cov))};
}

}  // namespace wls
