#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "netchoice/dataset.hpp"
#include "netchoice/estimation.hpp"
#include "netchoice/models.hpp"

namespace netchoice {

/// Per-individual own derivatives du_i / dv_i for each requested variable,
/// in utility units per variable unit. `values` is n x variables.
struct MarginalUtilities {
  std::vector<std::string> variables;
  std::size_t alternative = 0;
  DenseMatrix values;
};

struct MarginalOptions {
  /// Utility whose derivatives are taken (multinomial); binary models have
  /// a single utility. Attributes are read from this alternative's block.
  std::size_t alternative = 0;
};

/// Variable names resolve against the dataset's attribute names first, then
/// its socio-demographic names. Derivatives run through the whole network
/// including the graph operator, in infer mode.
MarginalUtilities marginal_utilities(const ChoiceModel& model, const Weights& weights, const AdjacencyGraph* graph,
                                     const ChoiceDataset& data, const std::vector<std::string>& variables,
                                     const MarginalOptions& options = {});

/// Spillover derivatives d u_i / d v_j for every pair: row i holds the
/// derivatives of individual i's utility. Not part of the summary outputs.
DenseMatrix spillover_derivatives(const ChoiceModel& model, const Weights& weights, const AdjacencyGraph* graph,
                                  const ChoiceDataset& data, const std::string& variable,
                                  const MarginalOptions& options = {});

inline constexpr double kCostDerivativeFloor = 1e-8;

struct VottEstimates {
  std::vector<std::optional<double>> values;  // empty where the cost derivative vanishes
  std::optional<double> median;
  std::optional<double> mean;
  std::size_t undefined = 0;
};

/// (mu_time / mu_cost) * minutes_per_hour per individual.
VottEstimates vott(const std::vector<double>& mu_time, const std::vector<double>& mu_cost,
                   double minutes_per_hour = 60.0);

/// exp(delta * du_i / dv_i) for a binary model.
std::vector<double> odds_ratio(const ChoiceModel& model, const Weights& weights, const AdjacencyGraph* graph,
                               const ChoiceDataset& data, const std::string& variable, double delta);

// ---- posterior summaries ----------------------------------------------------------------

/// Linear interpolation between order statistics (R type 7). `sorted` must
/// be ascending and non-empty; p in [0, 1].
double percentile(const std::vector<double>& sorted, double p);

struct Interval {
  double lower = 0.0;
  double median = 0.0;
  double upper = 0.0;
  bool defined = true;

  bool operator==(const Interval&) const = default;
};

inline constexpr std::size_t kMinPosteriorSamples = 20;

/// draws[s][i] is the functional for individual i under sample s (empty
/// when undefined). An individual whose value is undefined in more than half
/// of the samples gets an undefined interval.
std::vector<Interval> credible_intervals(const std::vector<std::vector<std::optional<double>>>& draws,
                                         double level = 0.95);

enum class FunctionalKind { marginal_utility, vott, odds_ratio };

struct Functional {
  FunctionalKind kind = FunctionalKind::marginal_utility;
  std::string variable;       // marginal utility / odds-ratio variable, VOTT time variable
  std::string cost_variable;  // VOTT only
  double delta = 1.0;         // odds ratio increment
  std::size_t alternative = 0;
  std::string name;           // output label

  std::string label() const;
};

nlohmann::json to_json(const Functional& f);
Functional functional_from_json(const nlohmann::json& j);

/// One value per individual for a single weight vector.
std::vector<std::optional<double>> evaluate_functional(const ChoiceModel& model, const Weights& weights,
                                                       const AdjacencyGraph* graph, const ChoiceDataset& data,
                                                       const Functional& functional);

/// credible_intervals of a functional over posterior samples.
std::vector<Interval> posterior_intervals(const ChoiceModel& model, const PosteriorSamples& samples,
                                          const AdjacencyGraph* graph, const ChoiceDataset& data,
                                          const Functional& functional, double level = 0.95);

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max] of the values; the last bin is closed.
Histogram histogram(const std::vector<double>& values, std::size_t bins = 30);

}  // namespace netchoice
