#include "netchoice/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netchoice/error.hpp"
#include "netchoice/kernels.hpp"

namespace netchoice::ad {

const DenseMatrix& Var::value() const {
  if (tape_ == nullptr) throw StateError("use of an unbound Var");
  return tape_->value(*this);
}

Var Tape::leaf(DenseMatrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(DenseMatrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(DenseMatrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(DenseMatrix value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    check(v);
    needs = needs || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, false, needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::check(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) throw StateError("Var belongs to another tape");
}

const DenseMatrix& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id()].value;
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id()].requires_grad;
}

void Tape::backward(Var output) {
  const auto& out = value(output);
  if (out.rows() != 1 || out.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_string(out));
  }
  backward(output, DenseMatrix(1, 1, 1.0));
}

void Tape::backward(Var output, const DenseMatrix& seed) {
  check(output);
  require_same_shape(nodes_[output.id()].value, seed, "backward seed");
  for (auto& n : nodes_) n.has_grad = false;
  auto& root = nodes_[output.id()];
  root.grad = seed;
  root.has_grad = true;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    // Closures may grow other nodes' gradient buffers but never this one.
    node.backward(*this, node.grad);
  }
}

DenseMatrix Tape::grad(Var v) const {
  check(v);
  const auto& node = nodes_[v.id()];
  if (!node.has_grad) return DenseMatrix(node.value.rows(), node.value.cols());
  return node.grad;
}

DenseMatrix& Tape::grad_buffer(Var v) {
  check(v);
  auto& node = nodes_[v.id()];
  if (!node.has_grad) {
    if (node.grad.rows() != node.value.rows() || node.grad.cols() != node.value.cols())
      node.grad = DenseMatrix(node.value.rows(), node.value.cols());
    else
      node.grad.fill(0.0);
    node.has_grad = true;
  }
  return node.grad;
}

void Tape::accumulate(Var v, const DenseMatrix& g) {
  if (!requires_grad(v)) return;
  grad_buffer(v) += g;
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw StateError("use of an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw StateError("operands recorded on different tapes");
  return t;
}

void require_finite(const DenseMatrix& m, const char* op) {
  if (!m.all_finite()) throw NumericError(std::string(op) + ": non-finite input");
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  DenseMatrix out;
  kernels::gemm(a.value(), b.value(), out);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const DenseMatrix& g) {
    if (tape.requires_grad(a)) {
      DenseMatrix ga;
      kernels::gemm_nt(g, tape.value(b), ga);
      tape.accumulate(a, ga);
    }
    if (tape.requires_grad(b)) {
      DenseMatrix gb;
      kernels::gemm_tn(tape.value(a), g, gb);
      tape.accumulate(b, gb);
    }
  });
}

Var spmm(const AdjacencyGraph& w, Var a) {
  Tape& t = tape_of(a);
  DenseMatrix out;
  kernels::spmm(w.csr(), a.value(), out);
  const AdjacencyGraph* graph = &w;
  return t.record(std::move(out), {a}, [graph, a](Tape& tape, const DenseMatrix& g) {
    DenseMatrix ga;
    kernels::spmm(graph->csr_transposed(), g, ga);
    tape.accumulate(a, ga);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  DenseMatrix out = a.value();
  out += b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const DenseMatrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  DenseMatrix out = a.value();
  out -= b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const DenseMatrix& g) {
    tape.accumulate(a, g);
    if (tape.requires_grad(b)) tape.grad_buffer(b) -= g;
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "hadamard");
  DenseMatrix out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const DenseMatrix& g) {
    if (tape.requires_grad(a)) {
      DenseMatrix ga = g;
      const auto& bv = tape.value(b);
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] *= bv.data()[i];
      tape.accumulate(a, ga);
    }
    if (tape.requires_grad(b)) {
      DenseMatrix gb = g;
      const auto& av = tape.value(a);
      for (std::size_t i = 0; i < gb.size(); ++i) gb.data()[i] *= av.data()[i];
      tape.accumulate(b, gb);
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  DenseMatrix out = a.value();
  out *= s;
  return t.record(std::move(out), {a}, [a, s](Tape& tape, const DenseMatrix& g) {
    DenseMatrix ga = g;
    ga *= s;
    tape.accumulate(a, ga);
  });
}

Var add_row(Var a, Var bias) {
  Tape& t = tape_of(a, bias);
  const auto& av = a.value();
  const auto& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row: bias " + shape_string(bv) + " does not broadcast over " +
                     shape_string(av));
  }
  DenseMatrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
  return t.record(std::move(out), {a, bias}, [a, bias](Tape& tape, const DenseMatrix& g) {
    tape.accumulate(a, g);
    if (tape.requires_grad(bias)) {
      DenseMatrix gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      tape.accumulate(bias, gb);
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return t.record(DenseMatrix(1, 1, s), {a}, [a](Tape& tape, const DenseMatrix& g) {
    const auto& av = tape.value(a);
    tape.accumulate(a, DenseMatrix(av.rows(), av.cols(), g(0, 0)));
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  require_finite(a.value(), "relu");
  DenseMatrix out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(out), {a}, [a](Tape& tape, const DenseMatrix& g) {
    const auto& av = tape.value(a);
    DenseMatrix ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (!(av.data()[i] > 0.0)) ga.data()[i] = 0.0;
    tape.accumulate(a, ga);
  });
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  require_finite(a.value(), "sigmoid");
  DenseMatrix out = a.value();
  for (double& v : out.data()) v = stable_sigmoid(v);
  return t.record(std::move(out), {a}, [a](Tape& tape, const DenseMatrix& g) {
    const auto& av = tape.value(a);
    DenseMatrix ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double s = stable_sigmoid(av.data()[i]);
      ga.data()[i] *= s * (1.0 - s);
    }
    tape.accumulate(a, ga);
  });
}

namespace {

DenseMatrix softmax_values(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      z += v;
    }
    for (double& v : row) v /= z;
  }
  return out;
}

}  // namespace

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  if (a.value().cols() < 2) throw ShapeError("softmax_rows needs at least 2 columns");
  require_finite(a.value(), "softmax_rows");
  DenseMatrix out = softmax_values(a.value());
  return t.record(std::move(out), {a}, [a](Tape& tape, const DenseMatrix& g) {
    const DenseMatrix p = softmax_values(tape.value(a));
    DenseMatrix ga(p.rows(), p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < p.cols(); ++c) dot += g(r, c) * p(r, c);
      for (std::size_t c = 0; c < p.cols(); ++c) ga(r, c) = p(r, c) * (g(r, c) - dot);
    }
    tape.accumulate(a, ga);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw StateError("operands recorded on different tapes");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row counts differ (" + std::to_string(rows) + " vs " +
                       std::to_string(p.rows()) + ")");
    }
    cols += p.cols();
  }
  DenseMatrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [inputs](Tape& tape, const DenseMatrix& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t c = tape.value(p).cols();
      if (tape.requires_grad(p)) {
        DenseMatrix& buf = tape.grad_buffer(p);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < c; ++j) buf(r, j) += g(r, offset + j);
      }
      offset += c;
    }
  });
}

Var concat_cols(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(parts);
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(a);
  const auto& av = a.value();
  if (begin + count > av.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + shape_string(av));
  }
  DenseMatrix out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, begin + c);
  return t.record(std::move(out), {a}, [a, begin, count](Tape& tape, const DenseMatrix& g) {
    DenseMatrix& buf = tape.grad_buffer(a);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) buf(r, begin + c) += g(r, c);
  });
}

void column_moments(const DenseMatrix& z, std::span<const std::size_t> rows, std::vector<double>& mean,
                    std::vector<double>& var) {
  const std::size_t cols = z.cols();
  const std::size_t m = rows.empty() ? z.rows() : rows.size();
  mean.assign(cols, 0.0);
  var.assign(cols, 0.0);
  auto row_at = [&](std::size_t k) { return rows.empty() ? k : rows[k]; };
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t c = 0; c < cols; ++c) mean[c] += z(row_at(k), c);
  for (double& v : mean) v /= static_cast<double>(m);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = z(row_at(k), c) - mean[c];
      var[c] += d * d;
    }
  for (double& v : var) v /= static_cast<double>(m);
}

Var batchnorm(Var z, Mode mode, BatchNormStats* running, std::span<const std::size_t> stat_rows) {
  Tape& t = tape_of(z);
  const auto& zv = z.value();
  require_finite(zv, "batchnorm");
  const std::size_t cols = zv.cols();

  if (mode == Mode::infer) {
    if (running == nullptr || !running->ready) {
      throw StateError("batchnorm: inference requested before statistics were stored");
    }
    if (running->mean.size() != cols) throw ShapeError("batchnorm: statistics have wrong width");
    std::vector<double> inv(cols);
    for (std::size_t c = 0; c < cols; ++c) inv[c] = 1.0 / std::sqrt(running->var[c] + kBatchNormEpsilon);
    DenseMatrix out = zv;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c) out(r, c) = (out(r, c) - running->mean[c]) * inv[c];
    return t.record(std::move(out), {z}, [z, inv](Tape& tape, const DenseMatrix& g) {
      DenseMatrix gz = g;
      for (std::size_t r = 0; r < gz.rows(); ++r)
        for (std::size_t c = 0; c < gz.cols(); ++c) gz(r, c) *= inv[c];
      tape.accumulate(z, gz);
    });
  }

  const std::size_t m = stat_rows.empty() ? zv.rows() : stat_rows.size();
  if (m < 2) throw ParameterError("batchnorm: train mode needs a batch of at least 2 rows");
  std::vector<double> mean, var;
  column_moments(zv, stat_rows, mean, var);
  std::vector<double> inv(cols);
  for (std::size_t c = 0; c < cols; ++c) inv[c] = 1.0 / std::sqrt(var[c] + kBatchNormEpsilon);

  if (running != nullptr) {
    if (!running->ready || running->mean.size() != cols) {
      running->mean = mean;
      running->var = var;
      running->ready = true;
    } else {
      for (std::size_t c = 0; c < cols; ++c) {
        running->mean[c] = (1.0 - kBatchNormMomentum) * running->mean[c] + kBatchNormMomentum * mean[c];
        running->var[c] = (1.0 - kBatchNormMomentum) * running->var[c] + kBatchNormMomentum * var[c];
      }
    }
  }

  DenseMatrix out = zv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = (out(r, c) - mean[c]) * inv[c];

  std::vector<std::size_t> rows(stat_rows.begin(), stat_rows.end());
  return t.record(std::move(out), {z}, [z, rows, mean, inv](Tape& tape, const DenseMatrix& g) {
    const auto& zv = tape.value(z);
    const std::size_t cols = zv.cols();
    const std::size_t m = rows.empty() ? zv.rows() : rows.size();
    auto row_at = [&](std::size_t k) { return rows.empty() ? k : rows[k]; };
    // out_i = (z_i - mu) * inv for every row i; mu and var come from the
    // statistic rows only.
    std::vector<double> dmu(cols, 0.0), dvar(cols, 0.0);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        dmu[c] -= g(r, c) * inv[c];
        dvar[c] += g(r, c) * (zv(r, c) - mean[c]) * -0.5 * inv[c] * inv[c] * inv[c];
      }
    DenseMatrix gz(zv.rows(), cols);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c) gz(r, c) = g(r, c) * inv[c];
    const double mm = static_cast<double>(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t r = row_at(k);
      for (std::size_t c = 0; c < cols; ++c)
        gz(r, c) += dmu[c] / mm + dvar[c] * 2.0 * (zv(r, c) - mean[c]) / mm;
    }
    tape.accumulate(z, gz);
  });
}

Var choice_nll(Var utilities, Head head, std::span<const int> y, std::span<const std::size_t> rows,
               std::span<const double> class_weights, bool mean) {
  Tape& t = tape_of(utilities);
  const auto& u = utilities.value();
  require_finite(u, "choice_nll");
  if (y.size() != u.rows()) {
    throw ShapeError("choice_nll: " + std::to_string(y.size()) + " labels for " +
                     std::to_string(u.rows()) + " utility rows");
  }
  const std::size_t n_classes = head == Head::sigmoid ? 2 : u.cols();
  if (head == Head::sigmoid && u.cols() != 1) throw ShapeError("choice_nll: sigmoid head needs n x 1 utilities");
  if (!class_weights.empty() && class_weights.size() != n_classes) {
    throw ShapeError("choice_nll: expected " + std::to_string(n_classes) + " class weights");
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  if (idx.empty()) {
    idx.resize(u.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  }
  std::vector<double> weights(n_classes, 1.0);
  if (!class_weights.empty()) weights.assign(class_weights.begin(), class_weights.end());

  double total = 0.0;
  double wsum = 0.0;
  for (std::size_t i : idx) {
    const int yi = y[i];
    if (yi < 0 || static_cast<std::size_t>(yi) >= n_classes) {
      throw DataError("choice_nll: label " + std::to_string(yi) + " out of range at row " +
                      std::to_string(i));
    }
    const double w = weights[static_cast<std::size_t>(yi)];
    double nll = 0.0;
    if (head == Head::sigmoid) {
      nll = softplus(u(i, 0)) - (yi == 1 ? u(i, 0) : 0.0);
    } else {
      const auto row = u.row(i);
      const double m = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (double v : row) z += std::exp(v - m);
      nll = m + std::log(z) - row[static_cast<std::size_t>(yi)];
    }
    total += w * nll;
    wsum += w;
  }
  const double denom = mean ? (wsum > 0.0 ? wsum : 1.0) : 1.0;
  std::vector<int> labels(y.begin(), y.end());
  return t.record(DenseMatrix(1, 1, total / denom), {utilities},
                  [utilities, head, labels, idx, weights, denom](Tape& tape, const DenseMatrix& g) {
                    const auto& u = tape.value(utilities);
                    DenseMatrix& buf = tape.grad_buffer(utilities);
                    const double scale = g(0, 0) / denom;
                    for (std::size_t i : idx) {
                      const int yi = labels[i];
                      const double w = weights[static_cast<std::size_t>(yi)] * scale;
                      if (head == Head::sigmoid) {
                        buf(i, 0) += w * (stable_sigmoid(u(i, 0)) - (yi == 1 ? 1.0 : 0.0));
                      } else {
                        const auto row = u.row(i);
                        const double m = *std::max_element(row.begin(), row.end());
                        double z = 0.0;
                        for (double v : row) z += std::exp(v - m);
                        for (std::size_t c = 0; c < row.size(); ++c) {
                          const double p = std::exp(row[c] - m) / z;
                          buf(i, c) += w * (p - (static_cast<std::size_t>(yi) == c ? 1.0 : 0.0));
                        }
                      }
                    }
                  });
}

}  // namespace netchoice::ad
