#include <algorithm>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "netchoice/error.hpp"
#include "netchoice/estimation.hpp"

namespace netchoice {

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ParameterError("k-fold validation needs k >= 2");
  if (n < k) throw ParameterError("k-fold validation needs at least k = " + std::to_string(k) + " rows");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, 0x666f6c64ULL));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t p = 0; p < n; ++p) fold[perm[p]] = p % k;
  return fold;
}

CvReport kfold_cv(const ModelSpec& spec, const ChoiceDataset& data, const AdjacencyGraph* graph,
                  const TrainConfig& cfg, std::size_t k, std::size_t jobs, std::uint64_t trial) {
  validate(cfg);
  const auto model = make_model(spec, data.dims());
  model->check_inputs(data.x, data.q, graph);

  CvReport report;
  report.seed = cfg.seed;
  report.assignment = fold_assignment(data.size(), k, cfg.seed);
  report.folds.resize(k);
  std::vector<std::exception_ptr> errors(k);

  const int threads = static_cast<int>(std::max<std::size_t>(1, std::min(jobs, k)));
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (std::size_t f = 0; f < k; ++f) {
    try {
      std::vector<std::size_t> train, test;
      for (std::size_t i = 0; i < data.size(); ++i) (report.assignment[i] == f ? test : train).push_back(i);
      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = derive_seed(cfg.seed, trial, f);
      const TrainResult fit = cfg.swa_cycle > 0 ? train_swa(*model, data, graph, fold_cfg, train)
                                                : train_sgd(*model, data, graph, fold_cfg, train);
      const ForwardResult out = predict(*model, fit.weights, data.x, data.q, graph);
      const std::vector<int> predicted = predict_classes(out.probabilities, model->head());
      std::vector<int> p_test, y_test;
      for (const std::size_t i : test) {
        p_test.push_back(predicted[i]);
        y_test.push_back(data.y[i]);
      }
      const AccuracyScore score = score_accuracy(p_test, y_test, data.alternatives);
      report.folds[f] = {f, train.size(), test.size(), fold_cfg.seed, score.value, score.flagged};
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  double sum = 0.0;
  for (const auto& fold : report.folds) {
    if (fold.flagged) spdlog::warn("fold {} lacks a class; accuracy averaged over the defined rates", fold.fold);
    sum += fold.accuracy;
  }
  report.mean = sum / static_cast<double>(k);
  return report;
}

std::size_t SearchSpace::size() const {
  std::size_t total = 1;
  for (const std::size_t dim :
       {fc_width.size(), fc_layers.size(), gcn_layers.size(), weight_decay.size(), learning_rate.size()}) {
    if (dim == 0) continue;
    if (total > std::numeric_limits<std::size_t>::max() / dim) throw ParameterError("search space too large");
    total *= dim;
  }
  return total;
}

void SearchSpace::apply(std::size_t index, ModelSpec& spec, TrainConfig& cfg) const {
  auto take = [&index](const auto& values, auto& target) {
    if (values.empty()) return;
    target = values[index % values.size()];
    index /= values.size();
  };
  take(fc_width, spec.fc_width);
  take(fc_layers, spec.fc_layers);
  take(gcn_layers, spec.gcn_layers);
  take(weight_decay, cfg.weight_decay);
  take(learning_rate, cfg.learning_rate);
}

SearchResult random_grid_search(const ModelSpec& base, const SearchSpace& space, std::size_t trials,
                                const ChoiceDataset& data, const AdjacencyGraph* graph, const TrainConfig& cfg,
                                std::size_t folds, std::size_t jobs) {
  const std::size_t size = space.size();
  if (trials == 0) throw ParameterError("grid search needs at least one trial");
  const std::size_t count = std::min(trials, size);
  if (trials > size) spdlog::info("{} trials requested over {} points; evaluating the whole space", trials, size);

  // Distinct points, uniformly: partial Fisher-Yates for spaces that fit in
  // memory, rejection otherwise.
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x67726964ULL));
  std::vector<std::size_t> points;
  if (size <= (std::size_t{1} << 22)) {
    std::vector<std::size_t> all(size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, size - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    points.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    std::unordered_set<std::size_t> seen;
    std::uniform_int_distribution<std::size_t> pick(0, size - 1);
    while (points.size() < count) {
      const std::size_t p = pick(rng);
      if (seen.insert(p).second) points.push_back(p);
    }
  }

  SearchResult result;
  for (std::size_t t = 0; t < count; ++t) {
    SearchTrial trial;
    trial.trial = t;
    trial.point = points[t];
    trial.spec = base;
    trial.train = cfg;
    space.apply(points[t], trial.spec, trial.train);
    trial.cv = kfold_cv(trial.spec, data, graph, trial.train, folds, jobs, t);
    spdlog::info("trial {} (point {}): mean weighted accuracy {:.6f}", t, trial.point, trial.cv.mean);
    if (t == 0 || trial.cv.mean > result.trials[result.best].cv.mean) result.best = t;
    result.trials.push_back(std::move(trial));
  }
  return result;
}

}  // namespace netchoice
