#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "netchoice/dataset.hpp"
#include "netchoice/models.hpp"

namespace netchoice {

// ---- configuration -------------------------------------------------------------

enum class StepSchedule { constant, polynomial };

struct SgldConfig {
  bool enabled = false;
  std::size_t steps = 20000;
  std::size_t thinning = 200;
  double burn_in = 0.2;  // leading fraction of steps discarded
  StepSchedule schedule = StepSchedule::constant;
  double step_size = 1e-4;     // constant alpha, or a in a * (b + t)^-0.55
  double decay_offset = 1.0;   // b
  bool noise = true;

  bool operator==(const SgldConfig&) const = default;
};

inline constexpr double kSgldDecayPower = 0.55;

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 1e-3;  // precision of the Gaussian prior on the weights
  std::size_t epochs = 200;
  std::size_t batch_size = 0;  // 0 = full batch
  bool momentum = false;       // heavy ball with coefficient 0.9
  std::uint64_t seed = 0;
  std::vector<double> class_weights;  // empty = inverse class frequency, mean 1
  std::size_t swa_cycle = 0;          // 0 = plain SGD
  SgldConfig sgld;

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Reads the fields present in `j` on top of `base`. The seed is not part of
/// the JSON form; runs take it from the top-level configuration.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
void validate(const TrainConfig& cfg);

/// splitmix64 mix of (seed, a, b): independent streams for trials and folds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// ---- loss ----------------------------------------------------------------------------

/// -sum_i w(y_i) log p_i(y_i) / sum_i w(y_i). probs is n x 1 (P(y = 1)) for
/// binary data or n x J. Probabilities below 1e-12 are clamped with a
/// warning unless `clamp` is off.
double loss_weighted_xent(const DenseMatrix& probs, std::span<const int> y, std::span<const double> class_weights,
                          bool clamp = true);

/// Inverse class frequencies over `rows` (all when empty), scaled to mean 1
/// across the classes present. Absent classes get weight 1.
std::vector<double> default_class_weights(std::span<const int> y, std::size_t n_classes,
                                          std::span<const std::size_t> rows = {});

// ---- point estimation ---------------------------------------------------------------

struct TrainResult {
  Weights weights;
  std::vector<double> initial;
  std::vector<double> epoch_loss;  // training objective after each epoch
  std::size_t updates = 0;
  // SWA only: the iterates entering the average, in order.
  std::vector<std::vector<double>> swa_iterates;
};

/// Minibatch gradient descent on mean weighted cross-entropy plus
/// weight_decay / (2 N) * |w|^2. The forward pass always covers the whole
/// graph; a minibatch only selects the rows whose loss is differentiated
/// (and whose batch-normalisation statistics are used). `train_rows`
/// restricts training to a subset (all rows when empty). `initial` replaces
/// the seeded initialisation when non-empty.
TrainResult train_sgd(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
                      const TrainConfig& cfg, std::span<const std::size_t> train_rows = {},
                      std::span<const double> initial = {});

/// train_sgd with stochastic weight averaging: after every `swa_cycle`
/// updates the current iterate enters the running average. The returned
/// weights are that average (the initial weights if no iterate was taken).
TrainResult train_swa(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
                      const TrainConfig& cfg, std::span<const std::size_t> train_rows = {},
                      std::span<const double> initial = {});

// ---- posterior sampling -----------------------------------------------------------------

struct PosteriorSamples {
  std::vector<std::vector<double>> samples;
  std::vector<ad::BatchNormStats> batchnorm;  // whole-sample statistics per sample
  std::vector<double> step_sizes;             // alpha_t at each recorded step
  std::vector<std::size_t> steps;             // 0-based index of each recorded step
};

/// Sum over `batch` of d log p(y_i | w) / dw, written into `grad`.
using LogLikGradient =
    std::function<void(std::span<const double> w, std::span<const std::size_t> batch, std::vector<double>& grad)>;

/// Langevin updates
///   w += alpha_t / 2 * (-weight_decay * w + N / n * sum_batch grad log p) + Normal(0, alpha_t)
/// over the `n_obs` observations 0..n_obs-1 drawn in shuffled minibatches.
/// After burn-in every `thinning`-th iterate is kept.
PosteriorSamples sgld_run(std::vector<double> initial, std::size_t n_obs, const LogLikGradient& gradient,
                          const TrainConfig& cfg);

/// SGLD for a choice model. The likelihood is the unweighted choice
/// likelihood of the training rows.
PosteriorSamples sgld_sample(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
                             const TrainConfig& cfg, std::span<const std::size_t> train_rows = {},
                             std::span<const double> initial = {});

// ---- scoring and model selection ----------------------------------------------------------

struct AccuracyScore {
  double value = 0.0;
  bool flagged = false;  // binary: one class missing, averaged over defined rates
};

/// Binary (n_classes = 2): (sensitivity + specificity) / 2.
/// Multinomial: mean per-class precision, classes never predicted scoring 0;
/// `recall` switches to mean per-class recall.
AccuracyScore score_accuracy(std::span<const int> predicted, std::span<const int> y, std::size_t n_classes,
                             bool recall = false);
double weighted_accuracy(std::span<const int> predicted, std::span<const int> y, std::size_t n_classes,
                         bool recall = false);

struct CvFold {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  bool flagged = false;
};

struct CvReport {
  std::vector<CvFold> folds;
  std::vector<std::size_t> assignment;  // fold of every row
  double mean = 0.0;
  std::uint64_t seed = 0;  // seed of the fold shuffle
};

/// Shuffled k-fold partition of n rows.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed);

/// Trains on k - 1 folds and scores the held-out fold. Held-out rows stay in
/// the graph (their features are visible, their labels are not). Folds run
/// on up to `jobs` threads; `trial` only enters the per-fold seeds.
CvReport kfold_cv(const ModelSpec& spec, const ChoiceDataset& data, const AdjacencyGraph* graph,
                  const TrainConfig& cfg, std::size_t k = 5, std::size_t jobs = 1, std::uint64_t trial = 0);

/// Discrete search space. An empty list keeps the base value.
struct SearchSpace {
  std::vector<std::size_t> fc_width;
  std::vector<std::size_t> fc_layers;
  std::vector<std::size_t> gcn_layers;
  std::vector<double> weight_decay;
  std::vector<double> learning_rate;

  std::size_t size() const;
  /// Mixed-radix decoding of point `index` applied to the base settings.
  void apply(std::size_t index, ModelSpec& spec, TrainConfig& cfg) const;
};

nlohmann::json to_json(const SearchSpace& space);
SearchSpace search_space_from_json(const nlohmann::json& j);

struct SearchTrial {
  std::size_t trial = 0;
  std::size_t point = 0;  // index into the space
  ModelSpec spec;
  TrainConfig train;
  CvReport cv;
};

struct SearchResult {
  std::vector<SearchTrial> trials;
  std::size_t best = 0;  // position in `trials`
};

/// Draws min(trials, space size) distinct points uniformly, scores each by
/// k-fold CV and keeps the best mean accuracy (earliest trial on ties).
SearchResult random_grid_search(const ModelSpec& base, const SearchSpace& space, std::size_t trials,
                                const ChoiceDataset& data, const AdjacencyGraph* graph, const TrainConfig& cfg,
                                std::size_t folds = 5, std::size_t jobs = 1);

}  // namespace netchoice
