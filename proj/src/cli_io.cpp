#include "wls/cli_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "wls/error.hpp"

namespace wls::io {

namespace fs = std::filesystem;

std::string to_string(Representation r) {
  switch (r) {
    case Representation::kSamples: return "samples";
    case Representation::kQuantile: return "quantile";
    case Representation::kGaussian: return "gaussian";
  }
  return "samples";
}

Representation parse_representation(const std::string& s) {
  if (s == "samples") return Representation::kSamples;
  if (s == "quantile") return Representation::kQuantile;
  if (s == "gaussian") return Representation::kGaussian;
  throw InputError("unknown response representation '" + s + "'");
}

namespace {

bool matches(const Marginal& m, Representation r) {
  switch (r) {
    case Representation::kSamples: return std::holds_alternative<EmpiricalDist>(m);
    case Representation::kQuantile: return std::holds_alternative<QuantileGrid>(m);
    case Representation::kGaussian: return std::holds_alternative<GaussianMeasure>(m);
  }
  return false;
}

double parse_double(std::string_view field, std::size_t line, const std::string& name) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw InputError(name + ":" + std::to_string(line) + ": cannot parse number '" +
                     std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

json response_to_json(const Marginal& m) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, EmpiricalDist>) {
          if (v.dim() == 1) return json(std::vector<double>(v.values().begin(), v.values().end()));
          return to_json(v.as_matrix());
        } else if constexpr (std::is_same_v<T, QuantileGrid>) {
          return json{{"levels", v.levels}, {"values", v.values}};
        } else {
          return to_json(v);
        }
      },
      m);
}

Marginal response_from_json(const json& j, Representation r) {
  switch (r) {
    case Representation::kSamples: {
      if (!j.is_array() || j.empty()) throw InputError("dataset: empty sample list");
      if (j.front().is_array()) return EmpiricalDist::multivariate(matrix_from_json(j));
      return EmpiricalDist::univariate(j.get<std::vector<double>>());
    }
    case Representation::kQuantile: {
      QuantileGrid g{j.at("levels").get<std::vector<double>>(),
                     j.at("values").get<std::vector<double>>()};
      g.validate();
      return g;
    }
    case Representation::kGaussian:
      return gaussian_from_json(j);
  }
  throw InputError("dataset: unknown representation");
}

}  // namespace

void validate(const Dataset& ds) {
  if (ds.responses.empty()) throw InputError("dataset: no responses");
  if (static_cast<std::size_t>(ds.design.rows()) != ds.responses.size()) {
    throw InputError("dataset: design rows != responses");
  }
  if (!ds.truth.empty() && ds.truth.size() != ds.responses.size()) {
    throw InputError("dataset: truth rows != responses");
  }
  if (!ds.cell_ids.empty() && ds.cell_ids.size() != ds.responses.size()) {
    throw InputError("dataset: cell_ids rows != responses");
  }
  if (!ds.design.allFinite()) throw InputError("dataset: non-finite design");
  const int d = marginal_dim(ds.responses.front());
  for (std::size_t i = 0; i < ds.responses.size(); ++i) {
    if (!matches(ds.responses[i], ds.representation)) {
      throw InputError("dataset: row " + std::to_string(i) +
                       " mixes response representations");
    }
    if (marginal_dim(ds.responses[i]) != d) {
      throw InputError("dataset: row " + std::to_string(i) + " has a different dimension");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON conversions

json to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw InputError("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.front().size());
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw InputError("matrix rows differ in length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const GaussianMeasure& g) {
  return {{"mean", to_json(g.mean)}, {"cov", to_json(g.cov.matrix())}};
}

GaussianMeasure gaussian_from_json(const json& j) {
  return make_gaussian(vector_from_json(j.at("mean")), matrix_from_json(j.at("cov")));
}

json to_json(const SolverConfig& c) {
  return {{"particles", c.particles}, {"step", c.step},         {"decay", c.decay},
          {"momentum", c.momentum},   {"batch", c.batch},       {"iterations", c.iterations},
          {"seed", c.seed},           {"tol", c.tol},           {"log_every", c.log_every}};
}

SolverConfig solver_config_from_json(const json& j) {
  SolverConfig c;
  c.particles = j.value("particles", c.particles);
  c.step = j.value("step", c.step);
  c.decay = j.value("decay", c.decay);
  c.momentum = j.value("momentum", c.momentum);
  c.batch = j.value("batch", c.batch);
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  c.tol = j.value("tol", c.tol);
  c.log_every = j.value("log_every", c.log_every);
  return c;
}

json to_json(const GaussianConfig& c) {
  return {{"step", c.step}, {"max_iter", c.max_iter}, {"tol", c.tol}, {"log_every", c.log_every}};
}

GaussianConfig gaussian_config_from_json(const json& j) {
  GaussianConfig c;
  c.step = j.value("step", c.step);
  c.max_iter = j.value("max_iter", c.max_iter);
  c.tol = j.value("tol", c.tol);
  c.log_every = j.value("log_every", c.log_every);
  return c;
}

json to_json(const DeformSpec& s) {
  const DeformParams& q = s.params;
  return {{"family", to_string(s.family)},
          {"alpha", s.alpha},
          {"beta", s.beta},
          {"params",
           {{"sigma", q.sigma},
            {"a", q.a},
            {"sigma_s", q.sigma_s},
            {"k", q.k},
            {"amp_max", q.amp_max},
            {"sigma_b", q.sigma_b},
            {"theta_sd", q.theta_sd},
            {"s_lo", q.s_lo},
            {"s_hi", q.s_hi}}}};
}

DeformSpec deform_spec_from_json(const json& j) {
  DeformSpec s = DeformSpec::preset(parse_noise_family(j.at("family").get<std::string>()));
  s.alpha = j.value("alpha", s.alpha);
  s.beta = j.value("beta", s.beta);
  if (j.contains("params")) {
    const json& p = j.at("params");
    DeformParams& q = s.params;
    q.sigma = p.value("sigma", q.sigma);
    q.a = p.value("a", q.a);
    q.sigma_s = p.value("sigma_s", q.sigma_s);
    q.k = p.value("k", q.k);
    q.amp_max = p.value("amp_max", q.amp_max);
    q.sigma_b = p.value("sigma_b", q.sigma_b);
    q.theta_sd = p.value("theta_sd", q.theta_sd);
    q.s_lo = p.value("s_lo", q.s_lo);
    q.s_hi = p.value("s_hi", q.s_hi);
  }
  s.validate();
  return s;
}

json to_json(const TemplateSpec& t) {
  return {{"kind", to_string(t.kind)},
          {"p", t.p},
          {"d", t.d},
          {"coeff_mean", to_json(t.coeff_mean)},
          {"coeff_cov", to_json(t.coeff_cov)}};
}

TemplateSpec template_from_json(const json& j) {
  TemplateSpec t = TemplateSpec::custom_gaussian(vector_from_json(j.at("coeff_mean")),
                                                 matrix_from_json(j.at("coeff_cov")),
                                                 j.at("p").get<int>(), j.at("d").get<int>());
  if (j.contains("kind")) t.kind = parse_template_kind(j.at("kind").get<std::string>());
  return t;
}

json dataset_to_json(const Dataset& ds) {
  validate(ds);
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "dataset";
  j["representation"] = to_string(ds.representation);
  j["design"] = to_json(ds.design);
  j["cell_ids"] = ds.cell_ids;
  json resp = json::array();
  for (const auto& r : ds.responses) resp.push_back(response_to_json(r));
  j["responses"] = std::move(resp);
  json truth = json::array();
  for (const auto& t : ds.truth) truth.push_back(to_json(t));
  j["truth"] = std::move(truth);
  j["provenance"] = ds.provenance;
  return j;
}

Dataset dataset_from_json(const json& j) {
  if (j.value("kind", std::string("dataset")) != "dataset") {
    throw InputError("expected a dataset file, found kind '" + j.value("kind", std::string()) + "'");
  }
  const int version = j.value("format_version", 0);
  if (version != kFormatVersion) {
    throw InputError("unsupported dataset format_version " + std::to_string(version));
  }
  Dataset ds;
  ds.representation = parse_representation(j.at("representation").get<std::string>());
  ds.design = matrix_from_json(j.at("design"));
  for (const auto& r : j.at("responses")) ds.responses.push_back(response_from_json(r, ds.representation));
  if (j.contains("truth")) {
    for (const auto& t : j.at("truth")) ds.truth.push_back(gaussian_from_json(t));
  }
  if (j.contains("cell_ids")) ds.cell_ids = j.at("cell_ids").get<std::vector<std::string>>();
  if (j.contains("provenance")) ds.provenance = j.at("provenance");
  validate(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Files

void atomic_write(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move '" + tmp + "' to '" + path + "'");
  }
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void persist(const Dataset& ds, const std::string& path) {
  atomic_write(path, dataset_to_json(ds).dump(1) + "\n");
}

Dataset ingest_csv(std::istream& in, const std::string& name, const IngestOptions& opts,
                   IngestReport* report) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) break;
  }
  for (auto f : split(line)) header.push_back(trim(f));
  if (header.size() < 2 || header.front() != "cell_id" || header.back() != "value") {
    throw InputError(name + ":" + std::to_string(lineno) +
                     ": header must read cell_id,x1,..,xp,value");
  }
  const std::size_t p = header.size() - 2;

  struct Cell {
    VectorXd x;
    std::vector<double> values;
    std::size_t first_line = 0;
  };
  std::map<std::string, std::size_t> index;
  std::vector<std::string> order;
  std::vector<Cell> cells;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw InputError(name + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    const std::string id = trim(fields.front());
    if (id.empty()) throw InputError(name + ":" + std::to_string(lineno) + ": empty cell_id");
    VectorXd x(static_cast<Eigen::Index>(p));
    for (std::size_t c = 0; c < p; ++c) {
      x(static_cast<Eigen::Index>(c)) = parse_double(fields[c + 1], lineno, name);
    }
    const double value = parse_double(fields.back(), lineno, name);
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, cells.size()).first;
      order.push_back(id);
      cells.push_back({x, {}, lineno});
    } else if (cells[it->second].x != x) {
      throw InputError(name + ":" + std::to_string(lineno) + ": covariates of cell '" + id +
                       "' differ from line " + std::to_string(cells[it->second].first_line));
    }
    cells[it->second].values.push_back(value);
  }
  if (cells.empty()) throw InputError(name + ": no data rows");

  Dataset ds;
  ds.representation = Representation::kSamples;
  IngestReport rep;
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].values.size() < opts.min_count) {
      rep.dropped.emplace_back(order[c], cells[c].values.size());
    } else {
      kept.push_back(c);
    }
  }
  if (kept.empty()) throw InputError(name + ": every cell is below the minimum sample count");
  ds.design.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(p));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    Cell& cell = cells[kept[k]];
    ds.design.row(static_cast<Eigen::Index>(k)) = cell.x.transpose();
    ds.responses.emplace_back(EmpiricalDist::univariate(std::move(cell.values)));
    ds.cell_ids.push_back(order[kept[k]]);
  }
  rep.kept = kept.size();
  ds.provenance = {{"source", name}, {"min_count", opts.min_count},
                   {"dropped_cells", rep.dropped.size()}};
  if (report) *report = std::move(rep);
  return ds;
}

Dataset ingest(const std::string& path, const IngestOptions& opts, IngestReport* report) {
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".csv") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return ingest_csv(in, path, opts, report);
  }
  if (ext != ".json") throw InputError("ingest: unsupported file extension '" + ext + "'");
  Dataset ds = dataset_from_json(read_json(path));
  if (ds.representation == Representation::kSamples && opts.min_count > 1) {
    IngestReport rep;
    Dataset kept = ds;
    kept.responses.clear();
    kept.cell_ids.clear();
    kept.truth.clear();
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < ds.responses.size(); ++i) {
      const std::size_t count = std::get<EmpiricalDist>(ds.responses[i]).size();
      const std::string id = ds.cell_ids.empty() ? std::to_string(i) : ds.cell_ids[i];
      if (count < opts.min_count) {
        rep.dropped.emplace_back(id, count);
        continue;
      }
      rows.push_back(static_cast<Eigen::Index>(i));
      kept.responses.push_back(ds.responses[i]);
      if (!ds.cell_ids.empty()) kept.cell_ids.push_back(id);
      if (!ds.truth.empty()) kept.truth.push_back(ds.truth[i]);
    }
    if (rows.empty()) throw InputError(path + ": every cell is below the minimum sample count");
    kept.design.resize(static_cast<Eigen::Index>(rows.size()), ds.design.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      kept.design.row(static_cast<Eigen::Index>(k)) = ds.design.row(rows[k]);
    }
    rep.kept = rows.size();
    if (report) *report = std::move(rep);
    return kept;
  }
  if (report) report->kept = ds.responses.size();
  return ds;
}

std::string samples_csv(const Dataset& ds) {
  validate(ds);
  if (ds.representation != Representation::kSamples ||
      marginal_dim(ds.responses.front()) != 1) {
    throw InputError("export_csv: only univariate sample datasets have a CSV form");
  }
  std::ostringstream os;
  os << "cell_id";
  for (Eigen::Index c = 0; c < ds.design.cols(); ++c) os << ",x" << (c + 1);
  os << ",value\n";
  for (std::size_t i = 0; i < ds.responses.size(); ++i) {
    const std::string id = ds.cell_ids.empty() ? std::to_string(i) : ds.cell_ids[i];
    std::string prefix = id;
    for (Eigen::Index c = 0; c < ds.design.cols(); ++c) {
      prefix += "," + format_double(ds.design(static_cast<Eigen::Index>(i), c));
    }
    for (double v : std::get<EmpiricalDist>(ds.responses[i]).values()) {
      os << prefix << ',' << format_double(v) << '\n';
    }
  }
  return os.str();
}

void export_csv(const Dataset& ds, const std::string& path) { atomic_write(path, samples_csv(ds)); }

Dataset from_synthetic(const SyntheticDataset& sim) {
  Dataset ds;
  ds.design = sim.design;
  ds.representation = Representation::kSamples;
  ds.responses.assign(sim.responses.begin(), sim.responses.end());
  ds.truth = sim.truth;
  for (std::size_t i = 0; i < sim.responses.size(); ++i) ds.cell_ids.push_back(std::to_string(i));
  ds.provenance = {{"generator", "simulate"},
                   {"seed", sim.seed},
                   {"m", sim.m},
                   {"template", to_json(sim.templ)},
                   {"noise", to_json(sim.spec)}};
  return ds;
}

Dataset from_exact(const ExactDataset& sim, const TemplateSpec& templ, const DeformSpec& spec) {
  Dataset ds;
  ds.design = sim.design;
  ds.representation = Representation::kGaussian;
  ds.responses.assign(sim.responses.begin(), sim.responses.end());
  ds.truth = sim.truth;
  for (std::size_t i = 0; i < sim.responses.size(); ++i) ds.cell_ids.push_back(std::to_string(i));
  ds.provenance = {{"generator", "simulate"},
                   {"seed", sim.seed},
                   {"exact", true},
                   {"template", to_json(templ)},
                   {"noise", to_json(spec)}};
  return ds;
}

// ---------------------------------------------------------------------------
// Models

Marginal Model::predict(const VectorXd& x) const {
  if (cloud) return cloud->pushforward(x);
  if (gaussian) return marginal(*gaussian, x);
  if (frechet_1d) return frechet_predict_1d(*frechet_1d, x);
  if (frechet_gauss) return frechet_predict_gauss(*frechet_gauss, x);
  throw InputError("model: nothing fitted");
}

ParticleCloud Model::coefficient_cloud() const {
  if (cloud) return *cloud;
  if (frechet_1d) return frechet_coeff_law(*frechet_1d);
  throw InputError("model: solver '" + solver + "' has no coefficient cloud to condition on");
}

json model_to_json(const Model& m) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "model";
  j["solver"] = m.solver;
  if (m.cloud) j["particles"] = to_json(m.cloud->particles);
  if (m.gaussian) {
    j["p"] = m.gaussian->p;
    j["d"] = m.gaussian->d;
    j["mean"] = to_json(m.gaussian->mean);
    j["cov"] = to_json(m.gaussian->cov.matrix());
  }
  if (m.frechet_1d) {
    j["representation"] = "quantile";
    j["levels"] = m.frechet_1d->levels;
    j["beta"] = to_json(m.frechet_1d->beta);
  }
  if (m.frechet_gauss) {
    j["representation"] = "gaussian";
    j["p"] = m.frechet_gauss->p;
    j["d"] = m.frechet_gauss->d;
    j["mean_coeffs"] = to_json(m.frechet_gauss->mean_coeff);
    j["cov_coeffs"] = to_json(m.frechet_gauss->cov_coeff);
  }
  return j;
}

Model model_from_json(const json& j) {
  if (j.value("kind", std::string()) != "model") throw InputError("expected a model file");
  if (j.value("format_version", 0) != kFormatVersion) {
    throw InputError("unsupported model format_version");
  }
  Model m;
  m.solver = j.at("solver").get<std::string>();
  if (m.solver == "particle") {
    m.cloud = ParticleCloud{matrix_from_json(j.at("particles"))};
  } else if (m.solver == "gaussian") {
    CoeffGaussian q;
    q.p = j.at("p").get<int>();
    q.d = j.at("d").get<int>();
    q.mean = vector_from_json(j.at("mean"));
    q.cov = SpdMatrix(matrix_from_json(j.at("cov")));
    m.gaussian = std::move(q);
  } else if (m.solver == "frechet") {
    if (j.at("representation").get<std::string>() == "quantile") {
      m.frechet_1d = FrechetModel1D{j.at("levels").get<std::vector<double>>(),
                                    matrix_from_json(j.at("beta"))};
    } else {
      FrechetModelGauss g;
      g.p = j.at("p").get<int>();
      g.d = j.at("d").get<int>();
      g.mean_coeff = matrix_from_json(j.at("mean_coeffs"));
      g.cov_coeff = matrix_from_json(j.at("cov_coeffs"));
      m.frechet_gauss = std::move(g);
    }
  } else {
    throw InputError("unknown solver '" + m.solver + "' in model file");
  }
  return m;
}

json error_json(int code, const std::string& name, const std::string& message) {
  return {{"error", {{"code", code}, {"name", name}, {"message", message}}}};
}

}  // namespace wls::io
