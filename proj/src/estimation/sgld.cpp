#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "objective.hpp"
#include "netchoice/error.hpp"
#include "netchoice/estimation.hpp"

namespace netchoice {

namespace {

constexpr double kDivergenceNorm = 1e6;

double step_size(const SgldConfig& s, std::size_t t) {
  if (s.schedule == StepSchedule::constant) return s.step_size;
  return s.step_size * std::pow(s.decay_offset + static_cast<double>(t), -kSgldDecayPower);
}

}  // namespace

PosteriorSamples sgld_run(std::vector<double> initial, std::size_t n_obs, const LogLikGradient& gradient,
                          const TrainConfig& cfg) {
  validate(cfg);
  const SgldConfig& s = cfg.sgld;
  if (!(cfg.weight_decay > 0.0)) throw ParameterError("SGLD needs weight_decay > 0 for a proper Gaussian prior");
  if (n_obs == 0) throw ParameterError("SGLD needs at least one observation");
  if (s.steps < 1) throw ParameterError("sgld.steps must be at least 1");
  const auto burn = static_cast<std::size_t>(std::floor(s.burn_in * static_cast<double>(s.steps)));
  const std::size_t kept = s.steps - burn;
  if (kept == 0 || kept % s.thinning != 0) {
    throw ParameterError("sgld.thinning (" + std::to_string(s.thinning) + ") must divide the " +
                         std::to_string(kept) + " post-burn-in steps");
  }

  const std::size_t n = (cfg.batch_size == 0 || cfg.batch_size >= n_obs) ? n_obs : cfg.batch_size;
  const double scale = static_cast<double>(n_obs) / static_cast<double>(n);
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x73676c64ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::size_t> order(n_obs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t pos = n_obs;  // forces a shuffle before the first minibatch

  PosteriorSamples out;
  out.samples.reserve(kept / s.thinning);
  std::vector<double> w = std::move(initial), grad;
  for (std::size_t t = 0; t < s.steps; ++t) {
    std::span<const std::size_t> batch(order);
    if (n < n_obs) {
      if (pos + n > n_obs) {
        std::shuffle(order.begin(), order.end(), rng);
        pos = 0;
      }
      batch = std::span<const std::size_t>(order.data() + pos, n);
      pos += n;
    }
    const double alpha = step_size(s, t);
    grad.assign(w.size(), 0.0);
    gradient(w, batch, grad);
    if (grad.size() != w.size()) throw ShapeError("SGLD gradient has the wrong length");
    const double sd = std::sqrt(alpha);
    for (std::size_t p = 0; p < w.size(); ++p) {
      w[p] += 0.5 * alpha * (-cfg.weight_decay * w[p] + scale * grad[p]);
      if (s.noise) w[p] += sd * normal(rng);
    }
    const double norm = detail::l2_norm(w);
    if (!(norm <= kDivergenceNorm)) {
      throw NumericError("SGLD diverged at step " + std::to_string(t) + " (parameter norm " + std::to_string(norm) +
                         ", step size " + std::to_string(alpha) + ")");
    }
    if (t >= burn && (t + 1 - burn) % s.thinning == 0) {
      out.samples.push_back(w);
      out.step_sizes.push_back(alpha);
      out.steps.push_back(t);
    }
  }
  spdlog::debug("SGLD kept {} of {} steps", out.samples.size(), s.steps);
  return out;
}

PosteriorSamples sgld_sample(const ChoiceModel& model, const ChoiceDataset& data, const AdjacencyGraph* graph,
                             const TrainConfig& cfg, std::span<const std::size_t> train_rows,
                             std::span<const double> initial) {
  const std::vector<std::size_t> rows = detail::resolve_rows(data, train_rows);
  // Posterior sampling uses the plain likelihood; class weights would
  // distort it.
  const detail::Objective objective(model, data, graph, {});
  std::vector<double> start =
      initial.empty() ? model.initialize(cfg.seed) : std::vector<double>(initial.begin(), initial.end());
  if (start.size() != model.layout().size()) throw ShapeError("initial weights have the wrong length");

  std::vector<std::size_t> batch_rows;
  const LogLikGradient gradient = [&](std::span<const double> w, std::span<const std::size_t> batch,
                                      std::vector<double>& grad) {
    batch_rows.clear();
    for (const std::size_t b : batch) batch_rows.push_back(rows[b]);
    const double nll = objective.nll(w, batch_rows, nullptr, false, &grad);
    if (!std::isfinite(nll)) throw NumericError("non-finite likelihood during SGLD");
    for (double& g : grad) g = -g;
  };
  PosteriorSamples out = sgld_run(std::move(start), rows.size(), gradient, cfg);
  out.batchnorm.reserve(out.samples.size());
  for (const auto& w : out.samples) {
    out.batchnorm.push_back(whole_sample_statistics(model, w, data.x, data.q, graph, train_rows));
  }
  return out;
}

}  // namespace netchoice
