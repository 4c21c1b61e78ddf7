#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "netchoice/dataset.hpp"
#include "netchoice/econometrics.hpp"
#include "netchoice/estimation.hpp"
#include "netchoice/graph.hpp"

namespace netchoice {

// ---- loading -------------------------------------------------------------------

/// Column roles of a feature CSV.
///
/// Binary data lists its (differenced) attribute columns in `attributes`.
/// Multinomial data lists one column list per alternative in
/// `alternative_columns`, each in the same attribute order, and names the
/// attributes in `attribute_names` (defaults to the first list).
struct Manifest {
  std::string id;  // optional; row numbers are used when empty
  std::string choice;
  std::size_t alternatives = 2;
  std::vector<std::string> attributes;
  std::vector<std::vector<std::string>> alternative_columns;
  std::vector<std::string> attribute_names;
  std::vector<std::string> sociodemographics;

  bool multinomial() const noexcept { return !alternative_columns.empty(); }
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::filesystem::path& path);

/// Reads a feature CSV (and optionally an edge list whose node i is data
/// row i). Rows with missing cells (empty, NA, NaN) are dropped with a
/// warning naming their line, and the graph is restricted to the kept rows
/// before `normalization` is applied. Malformed cells and out-of-range
/// choices raise LoadError with file and line.
ChoiceDataset load_dataset(const std::filesystem::path& features, const std::optional<std::filesystem::path>& graph,
                           const Manifest& manifest, Normalization normalization = Normalization::none);

/// Canonical feature CSV: id, choice, then the manifest's attribute and
/// socio-demographic columns in manifest order.
void write_features(const ChoiceDataset& data, const Manifest& manifest, const std::filesystem::path& path);

/// Manifest matching write_features output for a dataset built in memory.
Manifest default_manifest(const ChoiceDataset& data);

// ---- synthetic data ----------------------------------------------------------------

enum class Process { logit, sae, sal, sarar };
enum class ErrorDistribution { logistic, normal };

std::string to_string(Process p);

/// Binary latent-utility processes on a graph W:
///   logit  u = v + e
///   sae    u = v + (I - rho_eps W)^-1 e
///   sal    u = (I - rho W)^-1 (v + e)
///   sarar  u = (I - rho W)^-1 (X (b + (I - rho_beta W)^-1 tau) + Q gamma + c + (I - rho_eps W)^-1 e)
/// with v = X beta + Q gamma + c and y = 1[u > 0]. In sarar, tau is n x k
/// with independent Normal(0, tau_beta^2) entries, one column per attribute.
struct SimulationSpec {
  Process process = Process::logit;
  std::size_t n = 200;
  double rho = 0.0;
  double rho_eps = 0.0;
  double rho_beta = 0.0;
  std::vector<double> beta{1.0, -1.0};
  std::vector<double> gamma;
  double intercept = 0.0;
  double tau_beta = 0.0;
  ErrorDistribution error = ErrorDistribution::logistic;
  std::uint64_t seed = 0;

  // Graph: k nearest neighbours of uniform points in the unit square.
  std::size_t knn = 3;
  bool symmetrize = true;
  Normalization normalization = Normalization::row;
};

nlohmann::json to_json(const SimulationSpec& spec);
SimulationSpec simulation_spec_from_json(const nlohmann::json& j, SimulationSpec base = {});

struct Simulation {
  ChoiceDataset data;  // graph set to the W used
  std::vector<double> latent;
  std::vector<double> private_utility;  // X beta + Q gamma + c
  std::vector<double> epsilon;
};

/// Seeded coordinates and the raw (unnormalised) knn graph on them.
AdjacencyGraph simulation_graph(const SimulationSpec& spec, DenseMatrix* coords = nullptr);

/// Draws X, Q (standard normal), then e, then tau, all from one stream.
Simulation simulate(const SimulationSpec& spec, const AdjacencyGraph& w);

// ---- results -------------------------------------------------------------------------

struct IndividualTable {
  std::string name;
  std::vector<std::string> ids;
  std::vector<std::optional<double>> estimates;
  std::vector<Interval> intervals;  // empty: point estimates only
};

struct NamedHistogram {
  std::string name;
  Histogram histogram;
};

struct ExportBundle {
  nlohmann::json config;
  nlohmann::json metrics;  // null when absent
  std::optional<CvReport> cv;
  std::optional<SearchResult> search;
  std::vector<IndividualTable> individuals;
  std::vector<NamedHistogram> histograms;
};

/// Writes config.json always, and when there is anything else
/// summary.json, cv_folds.csv, trials.csv, <name>.csv per individual table
/// and <name>_histogram.csv per histogram. Returns the written paths.
std::vector<std::filesystem::path> export_results(const ExportBundle& bundle, const std::filesystem::path& out_dir);

IndividualTable read_individual_table(const std::filesystem::path& path);

/// Pretty JSON text with a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace netchoice
