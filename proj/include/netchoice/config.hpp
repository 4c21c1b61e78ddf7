#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "netchoice/dataio.hpp"
#include "netchoice/econometrics.hpp"
#include "netchoice/estimation.hpp"
#include "netchoice/models.hpp"

namespace netchoice {

struct DataConfig {
  std::filesystem::path features;
  std::optional<std::filesystem::path> graph;
  std::optional<std::filesystem::path> manifest_path;
  std::optional<Manifest> manifest;  // inline manifest
  Normalization normalization = Normalization::row;
};

struct PosteriorConfig {
  std::vector<Functional> functionals;
  double level = 0.95;
  std::size_t bins = 30;
  bool warm_start = true;  // fit a point estimate first and start the chain there
};

/// Everything a CLI run needs. Paths in the file are relative to the file.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::filesystem::path out = "netchoice-out";
  DataConfig data;
  ModelSpec model;
  TrainConfig train;
  std::size_t folds = 5;
  SearchSpace space;
  std::size_t trials = 10;
  SimulationSpec simulation;
  PosteriorConfig posterior;
  std::optional<std::filesystem::path> checkpoint;  // model for `infer`

  /// Copies the run seed into the training and simulation settings.
  void propagate_seed();
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved configuration, defaults included. The output directory is
/// left out so that the echo does not depend on where results go.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace netchoice
