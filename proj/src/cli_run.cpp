#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>

#include "wls/cli_io.hpp"
#include "wls/error.hpp"
#include "wls/eval_metrics.hpp"
#include "wls/inference_cond.hpp"
#include "wls/mm_oracle.hpp"

namespace wls::io {

namespace {

struct Artifact {
  std::string path;
  std::string contents;
  bool is_json = false;
};

struct Outcome {
  std::vector<Artifact> files;
  json summary;  // printed on stdout
};

using Builder = std::function<Outcome()>;

json manifest(const std::string& command, const std::vector<std::string>& args,
              std::optional<std::uint64_t> seed, const json& config) {
  json m = {{"format_version", kFormatVersion},
            {"tool", "wls"},
            {"version", kToolVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                          "." + std::to_string(EIGEN_MINOR_VERSION)},
            {"command", command},
            {"args", args},
            {"config", config}};
  m["seed"] = seed ? json(*seed) : json(nullptr);
  return m;
}

Artifact json_artifact(const std::string& path, const json& j) {
  return {path, j.dump(1) + "\n", true};
}

// Wall-clock fields are the only non-reproducible content.
json strip_timing(json j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [k, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

void write_all(const Outcome& out) {
  for (const auto& a : out.files) atomic_write(a.path, a.contents);
}

void verify(const Outcome& first, const Builder& build) {
  const Outcome again = build();
  if (again.files.size() != first.files.size()) throw VerifyError("verify: artifact count differs");
  for (std::size_t k = 0; k < first.files.size(); ++k) {
    const Artifact& a = first.files[k];
    const Artifact& b = again.files[k];
    const bool same = a.is_json ? strip_timing(json::parse(a.contents)) ==
                                      strip_timing(json::parse(b.contents))
                                : a.contents == b.contents;
    if (!same) throw VerifyError("verify: re-run produced a different '" + a.path + "'");
  }
}

std::string csv_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<Marginal> fitted_marginals(const Model& model, const MatrixXd& design) {
  std::vector<Marginal> out;
  for (Eigen::Index i = 0; i < design.rows(); ++i) out.push_back(model.predict(design.row(i).transpose()));
  return out;
}

std::vector<GaussianMeasure> gaussian_responses(const Dataset& ds) {
  std::vector<GaussianMeasure> out;
  for (const auto& r : ds.responses) {
    if (const auto* g = std::get_if<GaussianMeasure>(&r)) {
      out.push_back(*g);
    } else if (const auto* e = std::get_if<EmpiricalDist>(&r)) {
      out.push_back(sample_moments(*e));
    } else {
      throw InputError("gaussian solver: quantile-grid responses have no Gaussian form");
    }
  }
  return out;
}

json trace_json(const std::vector<long>& it, const std::vector<double>& obj) {
  json t = json::array();
  for (std::size_t k = 0; k < it.size(); ++k) t.push_back({it[k], obj[k]});
  return t;
}

template <class Config>
json report_json(const FitReport<Config>& r) {
  return {{"objective_trace", trace_json(r.trace_iteration, r.trace_objective)},
          {"initial_objective", r.initial_objective},
          {"final_objective", r.final_objective},
          {"final_gradient_norm", r.final_gradient_norm},
          {"iterations", r.iterations},
          {"stopped_on_tolerance", r.stopped_on_tolerance},
          {"regularized", r.regularized},
          {"timing", {{"wall_seconds", r.wall_seconds}}}};
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw InputError("cannot parse integer list '" + s + "'");
    }
  }
  if (out.empty()) throw InputError("empty integer list");
  return out;
}

TemplateSpec template_by_name(const std::string& name) {
  switch (parse_template_kind(name)) {
    case TemplateKind::kUnivariateQuadraticVariance: return TemplateSpec::univariate_quadratic_variance();
    case TemplateKind::kBivariateQuadraticCov: return TemplateSpec::bivariate_quadratic_cov();
    case TemplateKind::kCustomGaussian: break;
  }
  throw InputError("template 'custom' is only available through the library");
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Wasserstein least squares: regression with distribution-valued responses"};
  app.require_subcommand(1);
  int threads = 0;
  bool do_verify = false;
  app.add_option("--threads", threads, "OpenMP threads (default: WLS_NUM_THREADS or all cores)");
  app.add_flag("--verify", do_verify, "re-run the command and check the artifacts match");

  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);

  Builder build;

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a template-deformation dataset");
  std::string templ_name = "univariate";
  std::string noise = "additive";
  int n = 50;
  int m = 500;
  std::uint64_t seed = 0;
  bool exact = false;
  bool moments = false;
  std::string out_path;
  std::string csv_path;
  sim->add_option("--template", templ_name, "univariate | bivariate");
  sim->add_option("--noise", noise, "noise family");
  sim->add_option("--n", n, "number of responses");
  sim->add_option("--m", m, "samples per response");
  sim->add_option("--seed", seed, "64-bit seed")->required();
  sim->add_flag("--exact", exact, "exact Gaussian responses (affine families)");
  sim->add_flag("--moments", moments, "store the sample mean and covariance of each response");
  sim->add_option("--out", out_path, "dataset JSON")->required();
  sim->add_option("--csv", csv_path, "also export samples as CSV");
  sim->callback([&] {
    build = [&]() -> Outcome {
      const TemplateSpec templ = template_by_name(templ_name);
      const DeformSpec spec = DeformSpec::preset(parse_noise_family(noise));
      Dataset ds;
      if (exact) {
        ds = from_exact(generate_exact_dataset(templ, spec, n, seed), templ, spec);
      } else {
        ds = from_synthetic(generate_dataset(templ, spec, n, m, seed));
        if (moments) {
          ds.representation = Representation::kGaussian;
          for (auto& r : ds.responses) r = sample_moments(std::get<EmpiricalDist>(r));
          ds.provenance["moments"] = true;
        }
      }
      json j = dataset_to_json(ds);
      j["manifest"] = manifest("simulate", args, seed,
                               {{"template", templ_name}, {"noise", to_json(spec)}, {"n", n},
                                {"m", m}, {"exact", exact}, {"moments", moments}});
      Outcome out;
      out.files.push_back(json_artifact(out_path, j));
      if (!csv_path.empty()) {
        out.files.push_back({csv_path, samples_csv(ds), false});
      }
      out.summary = {{"written", out_path}, {"n", ds.responses.size()}, {"seed", seed}};
      return out;
    };
  });

  // fit
  auto* fitc = app.add_subcommand("fit", "fit a model to a dataset");
  std::string data_path;
  std::string solver = "particle";
  std::size_t min_count = 1;
  SolverConfig pcfg;
  GaussianConfig gcfg;
  int levels = 200;
  long iters = -1;
  double step = -1.0;
  double tol = 0.0;
  std::optional<std::uint64_t> fit_seed;
  fitc->add_option("--data", data_path, "dataset (.json or .csv)")->required();
  fitc->add_option("--solver", solver, "particle | gaussian | frechet");
  fitc->add_option("--min-count", min_count, "drop cells with fewer samples");
  fitc->add_option("--particles", pcfg.particles, "particle count M");
  fitc->add_option("--iters", iters, "iterations (particle T, gaussian K)");
  fitc->add_option("--step", step, "step size (particle tau_0; gaussian tau, default 0.5/eta)");
  fitc->add_option("--decay", pcfg.decay, "step decay: tau_k = tau_0 / (1 + decay k)");
  fitc->add_option("--momentum", pcfg.momentum, "heavy-ball momentum");
  fitc->add_option("--batch", pcfg.batch, "rows per step (0 = all)");
  fitc->add_option("--seed", fit_seed, "64-bit seed (particle solver)");
  fitc->add_option("--tol", tol, "optional stopping tolerance on the first-order residual");
  fitc->add_option("--log-every", pcfg.log_every, "objective logging interval");
  fitc->add_option("--levels", levels, "Frechet quantile levels K");
  fitc->add_option("--out", out_path, "model JSON")->required();
  fitc->callback([&] {
    build = [&]() -> Outcome {
      IngestReport ingest_rep;
      const Dataset ds = ingest(data_path, {min_count}, &ingest_rep);
      Model model;
      model.solver = solver;
      json config;
      json report;
      std::optional<std::uint64_t> used_seed;
      if (solver == "particle") {
        if (!fit_seed) throw InputError("fit: --seed is required for the particle solver");
        SolverConfig c = pcfg;
        c.seed = *fit_seed;
        if (iters >= 0) c.iterations = iters;
        if (step > 0.0) c.step = step;
        c.tol = tol;
        c.batch = std::min<int>(c.batch, static_cast<int>(ds.design.rows()));
        const ParticleFit f = fit(ds.design, ds.responses, c);
        model.cloud = f.cloud;
        config = to_json(f.report.config);
        report = report_json(f.report);
        used_seed = c.seed;
      } else if (solver == "gaussian") {
        GaussianConfig c = gcfg;
        if (iters >= 0) c.max_iter = iters;
        if (step > 0.0) c.step = step;
        c.tol = tol;
        const GaussianFit f = fit_gaussian(ds.design, gaussian_responses(ds), c);
        model.gaussian = f.coeff;
        config = to_json(f.report.config);
        report = report_json(f.report);
        report["foc_residual"] = gaussian_foc_residual(f.coeff, ds.design, gaussian_responses(ds));
      } else if (solver == "frechet") {
        if (ds.representation == Representation::kGaussian &&
            marginal_dim(ds.responses.front()) > 1) {
          model.frechet_gauss = frechet_fit_gauss(ds.design, gaussian_responses(ds));
        } else {
          model.frechet_1d = frechet_fit_1d(ds.design, ds.responses, levels);
        }
        config = {{"levels", levels}};
      } else {
        throw InputError("fit: unknown solver '" + solver + "'");
      }
      json j = model_to_json(model);
      j["config"] = config;
      j["seed"] = used_seed ? json(*used_seed) : json(nullptr);
      j["report"] = report;
      j["data"] = {{"path", data_path}, {"rows", ds.responses.size()},
                   {"dropped_cells", ingest_rep.dropped.size()}};
      j["manifest"] = manifest("fit", args, used_seed, config);
      Outcome out;
      out.files.push_back(json_artifact(out_path, j));
      out.summary = {{"written", out_path}, {"solver", solver}};
      if (!report.is_null()) out.summary["final_objective"] = report["final_objective"];
      return out;
    };
  });

  // eval
  auto* evalc = app.add_subcommand("eval", "evaluate a fitted model on a dataset");
  std::string model_path;
  evalc->add_option("--data", data_path, "dataset")->required();
  evalc->add_option("--model", model_path, "model JSON")->required();
  evalc->add_option("--out", out_path, "report JSON")->required();
  evalc->add_option("--csv", csv_path, "per-row CSV");
  evalc->callback([&] {
    build = [&]() -> Outcome {
      const Dataset ds = ingest(data_path);
      const Model model = model_from_json(read_json(model_path));
      std::vector<Marginal> responses = ds.responses;
      if (model.gaussian || model.frechet_gauss) {
        const auto gs = gaussian_responses(ds);
        responses.assign(gs.begin(), gs.end());
      }
      const auto fitted = fitted_marginals(model, ds.design);
      std::vector<Marginal> truth(ds.truth.begin(), ds.truth.end());
      const EvalReport rep = evaluate(fitted, responses, truth);
      json j = {{"format_version", kFormatVersion},
                {"kind", "eval"},
                {"solver", model.solver},
                {"w2_vs_response", rep.w2_vs_response},
                {"vs_response", summary_json(rep.vs_response)},
                {"objective", in_sample_error(fitted, responses)}};
      j["r2"] = rep.r2 ? json(*rep.r2) : json(nullptr);
      if (!truth.empty()) {
        j["w2_vs_truth"] = rep.w2_vs_truth;
        j["vs_truth"] = summary_json(rep.vs_truth);
        j["in_sample_error"] = in_sample_error(fitted, truth);
      }
      const Incoherence inc = incoherence(ds.design);
      j["incoherence_mu"] = inc.mu;
      j["manifest"] = manifest("eval", args, std::nullopt,
                               {{"data", data_path}, {"model", model_path}});
      Outcome out;
      out.files.push_back(json_artifact(out_path, j));
      if (!csv_path.empty()) {
        std::ostringstream os;
        os << "row,w2_vs_response" << (truth.empty() ? "" : ",w2_vs_truth") << ",leverage\n";
        for (std::size_t i = 0; i < rep.w2_vs_response.size(); ++i) {
          os << i << ',' << csv_double(rep.w2_vs_response[i]);
          if (!truth.empty()) os << ',' << csv_double(rep.w2_vs_truth[i]);
          os << ',' << csv_double(inc.leverage(static_cast<Eigen::Index>(i))) << '\n';
        }
        out.files.push_back({csv_path, os.str(), false});
      }
      out.summary = {{"written", out_path}, {"mean_w2_vs_response", rep.vs_response.mean}};
      out.summary["r2"] = j["r2"];
      return out;
    };
  });

  // oracle
  auto* orc = app.add_subcommand("oracle", "exact multimarginal optimum of a tiny discrete dataset");
  orc->add_option("--data", data_path, "dataset with sample responses")->required();
  orc->add_option("--out", out_path, "result JSON")->required();
  orc->callback([&] {
    build = [&]() -> Outcome {
      const Dataset ds = ingest(data_path);
      if (ds.representation != Representation::kSamples) {
        throw InputError("oracle: needs sample (empirical) responses");
      }
      DiscreteProblem prob{ds.design, {}};
      for (const auto& r : ds.responses) prob.responses.push_back(std::get<EmpiricalDist>(r));
      const OracleResult res = solve_multimarginal(prob);
      json law = json::array();
      for (const auto& b : res.coeff_law) law.push_back(to_json(b));
      json j = {{"format_version", kFormatVersion},
                {"kind", "oracle"},
                {"value", res.value},
                {"value_explained_variance", res.value_explained},
                {"matching", res.matching},
                {"coeff_law", law}};
      j["manifest"] = manifest("oracle", args, std::nullopt, {{"data", data_path}});
      Outcome out;
      out.files.push_back(json_artifact(out_path, j));
      out.summary = {{"written", out_path}, {"value", res.value}};
      return out;
    };
  });

  // rate-study
  auto* rate = app.add_subcommand("rate-study", "error-versus-n study with exact Gaussian responses");
  std::string n_list = "10,25,50,100,200,500";
  int replicates = 20;
  rate->add_option("--template", templ_name, "univariate | bivariate");
  rate->add_option("--noise", noise, "affine noise family");
  rate->add_option("--n-list", n_list, "comma-separated sample sizes");
  rate->add_option("--replicates", replicates, "datasets per sample size");
  rate->add_option("--seed", seed, "base seed")->required();
  rate->add_option("--iters", iters, "gradient steps per fit (default 500)");
  rate->add_option("--out", out_path, "summary JSON")->required();
  rate->add_option("--csv", csv_path, "per-cell CSV (n,seed,error)");
  rate->callback([&] {
    build = [&]() -> Outcome {
      GaussianConfig c;
      c.max_iter = iters >= 0 ? iters : 500;
      const TemplateSpec templ = template_by_name(templ_name);
      const DeformSpec spec = DeformSpec::preset(parse_noise_family(noise));
      const RateStudy rs = rate_study(templ, spec, parse_int_list(n_list), replicates, seed, c);
      json j = {{"format_version", kFormatVersion},
                {"kind", "rate-study"},
                {"n", rs.n_values},
                {"median_error", rs.median_error},
                {"slope_skipped", rs.slope_skipped}};
      j["slope"] = rs.slope_skipped ? json(nullptr) : json(rs.slope);
      j["manifest"] = manifest("rate-study", args, seed,
                               {{"template", templ_name}, {"noise", to_json(spec)},
                                {"replicates", replicates}, {"solver", to_json(c)}});
      Outcome out;
      out.files.push_back(json_artifact(out_path, j));
      if (!csv_path.empty()) {
        std::ostringstream os;
        os << "n,seed,error\n";
        for (const auto& cell : rs.cells) os << cell.n << ',' << cell.seed << ',' << csv_double(cell.error) << '\n';
        out.files.push_back({csv_path, os.str(), false});
      }
      out.summary = {{"written", out_path}, {"slope", j["slope"]}};
      return out;
    };
  });

  // condition
  auto* cond = app.add_subcommand("condition", "condition a coefficient cloud on observation windows");
  std::string query_path;
  cond->add_option("--model", model_path, "particle or univariate Frechet model")->required();
  cond->add_option("--query", query_path, "query JSON")->required();
  cond->add_option("--out", out_path, "result JSON")->required();
  cond->callback([&] {
    build = [&]() -> Outcome {
      const Model model = model_from_json(read_json(model_path));
      const ParticleCloud cloud = model.coefficient_cloud();
      const json q = read_json(query_path);
      ConditionSpec spec;
      for (const auto& c : q.at("constraints")) {
        spec.constraints.push_back({vector_from_json(c.at("x")), c.at("lo").get<double>(),
                                    c.at("hi").get<double>()});
      }
      const auto kept = select(cloud, spec);
      const MatrixXd grid = q.contains("grid") ? matrix_from_json(q.at("grid")) : MatrixXd(0, cloud.dim());
      const std::vector<double> cov = q.value("levels", std::vector<double>{0.75, 0.99});
      const ConditionalBand band = conditional_band(cloud, kept, grid, cov);
      json j = {{"format_version", kFormatVersion},
                {"kind", "condition"},
                {"solver", model.solver},
                {"cloud_size", cloud.size()},
                {"retained", band.retained},
                {"empty", band.empty},
                {"coverage", band.coverage}};
      json pts = json::array();
      for (const auto& p : band.points) {
        pts.push_back({{"mean", p.mean}, {"lower", p.lower}, {"upper", p.upper}});
      }
      j["bands"] = pts;
      if (q.contains("threshold")) {
        const auto& t = q.at("threshold");
        if (kept.empty()) {
          j["exceedance"] = nullptr;
        } else {
          j["exceedance"] = exceedance_prob(cloud, kept, vector_from_json(t.at("x")),
                                            t.at("value").get<double>());
        }
      }
      j["manifest"] = manifest("condition", args, std::nullopt,
                               {{"model", model_path}, {"query", q}});
      Outcome out;
      out.files.push_back(json_artifact(out_path, j));
      out.summary = {{"written", out_path}, {"retained", band.retained}, {"empty", band.empty}};
      return out;
    };
  });

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << error_json(static_cast<int>(ErrorCode::kInput), "input_error", e.what()).dump()
                << "\n";
      return static_cast<int>(ErrorCode::kInput);
    }
    if (threads <= 0) {
      if (const char* env = std::getenv("WLS_NUM_THREADS")) threads = std::atoi(env);
    }
    if (threads > 0) omp_set_num_threads(threads);
    const Outcome out = build();
    if (do_verify) verify(out, build);
    write_all(out);
    json summary = out.summary;
    if (do_verify) summary["verified"] = true;
    std::cout << summary.dump() << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << error_json(static_cast<int>(e.code()), error_code_name(e.code()), e.what()).dump()
              << "\n";
    return static_cast<int>(e.code());
  } catch (const json::exception& e) {
    std::cerr << error_json(static_cast<int>(ErrorCode::kInput), "input_error", e.what()).dump()
              << "\n";
    return static_cast<int>(ErrorCode::kInput);
  } catch (const std::exception& e) {
    std::cerr << error_json(70, "internal_error", e.what()).dump() << "\n";
    return 70;
  }
}

}  // namespace wls::io
