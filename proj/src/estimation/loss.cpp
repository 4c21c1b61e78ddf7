#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "netchoice/error.hpp"
#include "netchoice/estimation.hpp"

namespace netchoice {

namespace {

constexpr double kProbabilityFloor = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

double loss_weighted_xent(const DenseMatrix& probs, std::span<const int> y, std::span<const double> class_weights,
                          bool clamp) {
  if (probs.rows() != y.size()) {
    throw ShapeError("loss: " + std::to_string(y.size()) + " labels for " + shape_string(probs));
  }
  if (y.empty()) throw ParameterError("loss: no observations");
  const bool binary = probs.cols() == 1;
  const std::size_t n_classes = binary ? 2 : probs.cols();
  if (!class_weights.empty() && class_weights.size() != n_classes) {
    throw ShapeError("loss: " + std::to_string(class_weights.size()) + " class weights for " +
                     std::to_string(n_classes) + " classes");
  }
  double num = 0.0, den = 0.0;
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int c = y[i];
    if (c < 0 || static_cast<std::size_t>(c) >= n_classes) {
      throw ParameterError("loss: label " + std::to_string(c) + " out of range at row " + std::to_string(i));
    }
    double p = binary ? (c == 1 ? probs(i, 0) : 1.0 - probs(i, 0)) : probs(i, static_cast<std::size_t>(c));
    if (!(p >= 0.0 && p <= 1.0)) throw NumericError("loss: invalid probability at row " + std::to_string(i));
    if (clamp && p < kProbabilityFloor) {
      p = kProbabilityFloor;
      ++clamped;
    }
    const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(c)];
    if (!(w > 0.0)) throw ParameterError("loss: class weights must be positive");
    num -= w * std::log(p);
    den += w;
  }
  if (clamped > 0) spdlog::warn("loss: {} observed-class probabilities clamped at 1e-12", clamped);
  return num / den;
}

std::vector<double> default_class_weights(std::span<const int> y, std::size_t n_classes,
                                          std::span<const std::size_t> rows) {
  std::vector<double> counts(n_classes, 0.0);
  auto count = [&](std::size_t i) {
    const int c = y[i];
    if (c >= 0 && static_cast<std::size_t>(c) < n_classes) counts[static_cast<std::size_t>(c)] += 1.0;
  };
  if (rows.empty())
    for (std::size_t i = 0; i < y.size(); ++i) count(i);
  else
    for (const std::size_t i : rows) count(i);

  std::vector<double> w(n_classes, 1.0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (counts[c] > 0.0) {
      w[c] = 1.0 / counts[c];
      sum += w[c];
      ++present;
    }
  }
  if (present == 0) return w;
  const double mean = sum / static_cast<double>(present);
  for (std::size_t c = 0; c < n_classes; ++c)
    if (counts[c] > 0.0) w[c] /= mean;
  return w;
}

AccuracyScore score_accuracy(std::span<const int> predicted, std::span<const int> y, std::size_t n_classes,
                             bool recall) {
  if (y.empty()) throw ParameterError("weighted accuracy of an empty set");
  if (predicted.size() != y.size()) throw ShapeError("weighted accuracy: prediction and label counts differ");
  if (n_classes < 2) throw ParameterError("weighted accuracy needs at least 2 classes");
  // confusion[true][predicted]
  std::vector<std::vector<double>> confusion(n_classes, std::vector<double>(n_classes, 0.0));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto t = static_cast<std::size_t>(y[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (y[i] < 0 || t >= n_classes || predicted[i] < 0 || p >= n_classes) {
      throw ParameterError("weighted accuracy: class label out of range at position " + std::to_string(i));
    }
    confusion[t][p] += 1.0;
  }

  AccuracyScore score;
  if (n_classes == 2 || recall) {
    // Balanced accuracy: mean recall over the classes that occur.
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      double row = 0.0;
      for (double v : confusion[c]) row += v;
      if (row == 0.0) continue;
      sum += confusion[c][c] / row;
      ++defined;
    }
    score.flagged = defined < n_classes;
    score.value = sum / static_cast<double>(defined);
    return score;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    double col = 0.0;
    for (std::size_t t = 0; t < n_classes; ++t) col += confusion[t][c];
    if (col > 0.0) sum += confusion[c][c] / col;
  }
  score.value = sum / static_cast<double>(n_classes);
  return score;
}

double weighted_accuracy(std::span<const int> predicted, std::span<const int> y, std::size_t n_classes, bool recall) {
  return score_accuracy(predicted, y, n_classes, recall).value;
}

}  // namespace netchoice
