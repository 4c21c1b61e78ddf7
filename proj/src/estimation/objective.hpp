#pragma once

#include <span>
#include <vector>

#include "netchoice/dataset.hpp"
#include "netchoice/models.hpp"

namespace netchoice::detail {

/// All rows when `rows` is empty, otherwise a bounds-checked copy.
std::vector<std::size_t> resolve_rows(const ChoiceDataset& data, std::span<const std::size_t> rows);

double l2_norm(std::span<const double> w);

/// Choice negative log-likelihood of a model on a dataset, full-graph
/// forward with the loss restricted to a row subset.
class Objective {
 public:
  Objective(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
            std::vector<double> class_weights);

  /// Weighted NLL over `batch` (mean when `mean`), train-mode batch
  /// statistics from the same rows. Fills `grad` when non-null.
  double nll(std::span<const double> w, std::span<const std::size_t> batch, ad::BatchNormStats* running, bool mean,
             std::vector<double>* grad) const;

 private:
  const ChoiceModel& model_;
  const ChoiceDataset& data_;
  const AdjacencyGraph* graph_;
  std::vector<double> class_weights_;
};

}  // namespace netchoice::detail
