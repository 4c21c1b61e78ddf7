#pragma once

// Define-by-run reverse-mode differentiation over DenseMatrix values.
//
// A Tape is built fresh for every forward pass. Each recorded node keeps its
// value, the ids of its inputs (always earlier nodes, so the tape is
// topologically ordered by construction) and a closure that maps the
// upstream gradient onto the inputs' gradient buffers.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "netchoice/graph.hpp"
#include "netchoice/matrix.hpp"

namespace netchoice::ad {

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const DenseMatrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (parameter or input feature).
  Var leaf(DenseMatrix value);
  /// Non-differentiable input.
  Var constant(DenseMatrix value);
  /// Records an operation. `backward` is dropped when no input needs a gradient.
  Var record(DenseMatrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(DenseMatrix value, std::span<const Var> inputs, BackwardFn backward);

  const DenseMatrix& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(output)/d(output) = 1; output must be 1x1.
  void backward(Var output);
  /// Vector-Jacobian product: seeds `seed` (same shape as output).
  void backward(Var output, const DenseMatrix& seed);

  /// Gradient from the last backward call; zeros if v was not reached.
  DenseMatrix grad(Var v) const;

  /// Used by backward closures.
  void accumulate(Var v, const DenseMatrix& g);
  DenseMatrix& grad_buffer(Var v);

 private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };
  void check(Var v) const;

  std::vector<Node> nodes_;
};

// ---- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);
/// W * a with the sparse adjacency matrix. The graph must outlive the tape.
Var spmm(const AdjacencyGraph& w, Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// a (n x c) plus a 1 x c row broadcast over rows.
Var add_row(Var a, Var bias);
Var sum(Var a);

Var relu(Var a);
Var sigmoid(Var a);
Var softmax_rows(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t count);

// ---- batch normalisation ---------------------------------------------------

enum class Mode { train, infer };

/// Stabiliser added to the variance. See README for why it is this small.
inline constexpr double kBatchNormEpsilon = 1e-10;
inline constexpr double kBatchNormMomentum = 0.1;

/// Per-column location/scale used in infer mode. Exponential moving average
/// during training; replaced by whole-sample statistics when training ends.
struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;
  bool ready = false;

  bool operator==(const BatchNormStats&) const = default;
};

/// Parameter-free batch normalisation.
///
/// train: each column is centred and scaled by its mean and (biased) variance
///        over `stat_rows` (all rows when empty); every row is normalised with
///        those statistics. When `running` is non-null its moving averages are
///        updated.
/// infer: normalises with `running`, which must hold statistics.
Var batchnorm(Var z, Mode mode, BatchNormStats* running, std::span<const std::size_t> stat_rows = {});

/// Per-column batch statistics over the given rows (all rows when empty).
void column_moments(const DenseMatrix& z, std::span<const std::size_t> rows, std::vector<double>& mean,
                    std::vector<double>& var);

// ---- likelihood ------------------------------------------------------------

enum class Head { sigmoid, softmax };

/// Weighted negative log-likelihood of observed choices, evaluated from
/// utilities in a numerically stable form.
///   sigmoid head: utilities n x 1, P(y = 1) = sigmoid(u)
///   softmax head: utilities n x J
/// The result is sum_i w(y_i) * nll_i over `rows`, divided by sum_i w(y_i)
/// when `mean` is set. Empty class_weights means unit weights.
Var choice_nll(Var utilities, Head head, std::span<const int> y, std::span<const std::size_t> rows,
               std::span<const double> class_weights, bool mean);

}  // namespace netchoice::ad
