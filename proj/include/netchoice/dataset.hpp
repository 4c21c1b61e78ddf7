#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "netchoice/graph.hpp"
#include "netchoice/matrix.hpp"
#include "netchoice/models.hpp"

namespace netchoice {

/// Observed choices with their explanatory variables.
///
/// Binary data holds one column per (differenced) attribute in `x`;
/// multinomial data holds J consecutive blocks of k attribute columns, block
/// j describing alternative j. Row i is node i of `graph` when one is set.
struct ChoiceDataset {
  std::vector<std::string> ids;
  DenseMatrix x;
  DenseMatrix q;
  std::vector<int> y;
  std::size_t alternatives = 2;
  bool alternative_blocks = false;
  std::vector<std::string> attribute_names;         // k names
  std::vector<std::string> sociodemographic_names;  // r names
  std::optional<AdjacencyGraph> graph;

  std::size_t size() const noexcept { return y.size(); }
  ModelDims dims() const {
    return {attribute_names.size(), sociodemographic_names.size(), alternatives, alternative_blocks};
  }
  const AdjacencyGraph* graph_ptr() const noexcept { return graph ? &*graph : nullptr; }

  /// Throws DataError on inconsistent shapes, non-finite values or labels
  /// outside [0, J).
  void validate() const;
};

/// Rows `rows` of the dataset, with the graph restricted to them.
ChoiceDataset subset(const ChoiceDataset& data, const std::vector<std::size_t>& rows);

}  // namespace netchoice
