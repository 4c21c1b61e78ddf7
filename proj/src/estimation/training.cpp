#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "objective.hpp"
#include "netchoice/error.hpp"
#include "netchoice/estimation.hpp"

namespace netchoice {

namespace detail {

std::vector<std::size_t> resolve_rows(const ChoiceDataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  for (const std::size_t r : rows) {
    if (r >= data.size()) throw ParameterError("training row " + std::to_string(r) + " is out of range");
  }
  return {rows.begin(), rows.end()};
}

Objective::Objective(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
                     std::vector<double> class_weights)
    : model_(model), data_(data), graph_(graph), class_weights_(std::move(class_weights)) {
  model.check_inputs(data.x, data.q, graph);
  if (data.y.size() != data.x.rows()) throw ShapeError("dataset has mismatched label count");
}

double Objective::nll(std::span<const double> w, std::span<const std::size_t> batch, ad::BatchNormStats* running,
                      bool mean, std::vector<double>* grad) const {
  ad::Tape tape;
  const BoundParams params = bind_params(tape, model_.layout(), w);
  ForwardContext ctx;
  ctx.mode = ad::Mode::train;
  ctx.batchnorm = running;
  ctx.stat_rows = batch;
  ctx.graph = graph_;
  const ad::Var u = model_.utilities(tape, params, tape.constant(data_.x), tape.constant(data_.q), ctx);
  const ad::Var loss = ad::choice_nll(u, model_.head(), data_.y, batch, class_weights_, mean);
  if (grad != nullptr) {
    tape.backward(loss);
    *grad = collect_grads(tape, params, model_.layout());
  }
  return loss.value()(0, 0);
}

double l2_norm(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}

}  // namespace detail

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ParameterError("learning_rate must be finite and non-negative");
  }
  if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay)) {
    throw ParameterError("weight_decay must be finite and non-negative");
  }
  if (cfg.epochs < 1) throw ParameterError("epochs must be at least 1");
  for (double w : cfg.class_weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw ParameterError("class weights must be positive");
  const auto& s = cfg.sgld;
  if (s.thinning < 1) throw ParameterError("sgld.thinning must be at least 1");
  if (!(s.burn_in >= 0.0 && s.burn_in < 1.0)) throw ParameterError("sgld.burn_in must lie in [0, 1)");
  if (!(s.step_size >= 0.0) || !std::isfinite(s.step_size)) throw ParameterError("sgld.step_size must be >= 0");
  if (s.schedule == StepSchedule::polynomial && !(s.decay_offset > 0.0)) {
    throw ParameterError("sgld.decay_offset must be positive");
  }
}

namespace {

using UpdateHook = std::function<void(std::size_t update, std::span<const double> w)>;

TrainResult run_descent(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
                        const TrainConfig& cfg, std::span<const std::size_t> train_rows,
                        std::span<const double> initial, const UpdateHook& hook) {
  validate(cfg);
  const std::vector<std::size_t> rows = detail::resolve_rows(data, train_rows);
  const std::size_t N = rows.size();
  if (N == 0) throw ParameterError("no training rows");

  std::vector<double> weights = cfg.class_weights;
  if (weights.empty()) weights = default_class_weights(data.y, data.alternatives, rows);
  const detail::Objective objective(model, data, graph, weights);

  TrainResult result;
  result.initial = initial.empty() ? model.initialize(cfg.seed)
                                   : std::vector<double>(initial.begin(), initial.end());
  if (result.initial.size() != model.layout().size()) throw ShapeError("initial weights have the wrong length");
  std::vector<double> w = result.initial;

  const std::size_t batch = (cfg.batch_size == 0 || cfg.batch_size >= N) ? N : cfg.batch_size;
  const double decay = cfg.weight_decay / static_cast<double>(N);
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x7261696eULL));
  std::vector<double> velocity(w.size(), 0.0), grad;
  ad::BatchNormStats running;
  std::vector<std::size_t> order = rows;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (batch < N) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0, b = 0; start < N; ++b) {
      std::size_t stop = std::min(N, start + batch);
      // A lone trailing row would leave batch statistics undefined.
      if (N - stop < 2) stop = N;
      const std::span<const std::size_t> rows_b(order.data() + start, stop - start);
      const double loss = objective.nll(w, rows_b, &running, true, &grad);
      const double norm = detail::l2_norm(w);
      if (!std::isfinite(loss) || !std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); })) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + " (parameter norm " + std::to_string(norm) + ")");
      }
      for (std::size_t p = 0; p < w.size(); ++p) {
        const double g = grad[p] + decay * w[p];
        if (cfg.momentum) {
          velocity[p] = 0.9 * velocity[p] + g;
          w[p] -= cfg.learning_rate * velocity[p];
        } else {
          w[p] -= cfg.learning_rate * g;
        }
      }
      ++result.updates;
      if (hook) hook(result.updates, w);
      start = stop;
    }
    const double full = objective.nll(w, rows, nullptr, true, nullptr);
    const double norm = detail::l2_norm(w);
    const double objective_value = full + 0.5 * decay * norm * norm;
    if (!std::isfinite(objective_value)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + " (parameter norm " +
                         std::to_string(norm) + ")");
    }
    result.epoch_loss.push_back(objective_value);
    spdlog::debug("epoch {} loss {:.10g}", epoch, objective_value);
  }
  result.weights.values = std::move(w);
  return result;
}

}  // namespace

TrainResult train_sgd(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
                      const TrainConfig& cfg, std::span<const std::size_t> train_rows,
                      std::span<const double> initial) {
  TrainResult result = run_descent(model, data, graph, cfg, train_rows, initial, {});
  result.weights.batchnorm =
      whole_sample_statistics(model, result.weights.values, data.x, data.q, graph, train_rows);
  return result;
}

TrainResult train_swa(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
                      const TrainConfig& cfg, std::span<const std::size_t> train_rows,
                      std::span<const double> initial) {
  if (cfg.swa_cycle < 1) throw ParameterError("SWA needs swa_cycle >= 1");
  std::vector<double> average;
  std::size_t models = 0;
  std::vector<std::vector<double>> iterates;
  const UpdateHook hook = [&](std::size_t update, std::span<const double> w) {
    if (update % cfg.swa_cycle != 0) return;
    const double m = static_cast<double>(models);
    for (std::size_t p = 0; p < average.size(); ++p) average[p] = (average[p] * m + w[p]) / (m + 1.0);
    ++models;
    iterates.emplace_back(w.begin(), w.end());
  };
  // The average starts at the initial weights, which the first iterate
  // replaces (it enters with zero models counted).
  average = initial.empty() ? model.initialize(cfg.seed) : std::vector<double>(initial.begin(), initial.end());
  TrainResult result = run_descent(model, data, graph, cfg, train_rows, average, hook);
  result.weights.values = average;
  result.swa_iterates = std::move(iterates);
  result.weights.batchnorm = whole_sample_statistics(model, average, data.x, data.q, graph, train_rows);
  return result;
}

}  // namespace netchoice
