#pragma once

// Datasets, models and artifacts on disk, and the command-line driver.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wls/deform_sim.hpp"
#include "wls/frechet_baseline.hpp"
#include "wls/transport_core.hpp"
#include "wls/wls_gaussian.hpp"
#include "wls/wls_particle.hpp"

namespace wls::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

enum class Representation { kSamples, kQuantile, kGaussian };
std::string to_string(Representation r);
Representation parse_representation(const std::string& s);

struct Dataset {
  MatrixXd design;
  Representation representation = Representation::kSamples;
  std::vector<Marginal> responses;
  std::vector<GaussianMeasure> truth;  // empty when unknown
  std::vector<std::string> cell_ids;
  json provenance = json::object();    // seed and generator config, or source path
};

// Throws InputError if rows are misaligned or representations are mixed.
void validate(const Dataset& ds);

struct IngestOptions {
  std::size_t min_count = 1;  // cells with fewer samples are dropped
};

struct IngestReport {
  std::vector<std::pair<std::string, std::size_t>> dropped;  // (cell id, sample count)
  std::size_t kept = 0;
};

// CSV: header cell_id,x1,..,xp,value, one row per sample. JSON: the dataset
// schema written by persist(). Format follows the file extension.
Dataset ingest(const std::string& path, const IngestOptions& opts = {},
               IngestReport* report = nullptr);
Dataset ingest_csv(std::istream& in, const std::string& name, const IngestOptions& opts,
                   IngestReport* report);

json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const json& j);
void persist(const Dataset& ds, const std::string& path);
// Univariate sample datasets only, same schema as ingest_csv.
std::string samples_csv(const Dataset& ds);
void export_csv(const Dataset& ds, const std::string& path);

Dataset from_synthetic(const SyntheticDataset& sim);
Dataset from_exact(const ExactDataset& sim, const TemplateSpec& templ, const DeformSpec& spec);

// Writes to path.tmp then renames over path.
void atomic_write(const std::string& path, const std::string& contents);
json read_json(const std::string& path);

json to_json(const MatrixXd& m);
json to_json(const VectorXd& v);
MatrixXd matrix_from_json(const json& j);
VectorXd vector_from_json(const json& j);
json to_json(const GaussianMeasure& g);
GaussianMeasure gaussian_from_json(const json& j);
json to_json(const SolverConfig& c);
SolverConfig solver_config_from_json(const json& j);
json to_json(const GaussianConfig& c);
GaussianConfig gaussian_config_from_json(const json& j);
json to_json(const DeformSpec& s);
DeformSpec deform_spec_from_json(const json& j);
json to_json(const TemplateSpec& t);
TemplateSpec template_from_json(const json& j);

// A fitted model of any solver.
struct Model {
  std::string solver;  // particle | gaussian | frechet
  std::optional<ParticleCloud> cloud;
  std::optional<CoeffGaussian> gaussian;
  std::optional<FrechetModel1D> frechet_1d;
  std::optional<FrechetModelGauss> frechet_gauss;

  Marginal predict(const VectorXd& x) const;
  // Coefficient cloud for conditioning (particle, or the Frechet level curve).
  ParticleCloud coefficient_cloud() const;
};

json model_to_json(const Model& m);
Model model_from_json(const json& j);

// Error payload {"error": {"code", "name", "message"}}.
json error_json(int code, const std::string& name, const std::string& message);

// Entry point of the wls executable; returns the process exit status.
int run(int argc, const char* const* argv);

}  // namespace wls::io
