#include <cmath>
#include <random>

#include "model_impl.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

std::size_t ParamLayout::add(std::string name, std::size_t rows, std::size_t cols, ParamInit init) {
  blocks_.push_back(ParamBlock{std::move(name), rows, cols, total_, init});
  total_ += rows * cols;
  return blocks_.size() - 1;
}

std::size_t ParamLayout::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return i;
  throw ParameterError("no parameter block named '" + name + "'");
}

std::vector<double> ParamLayout::initialize(std::uint64_t seed) const {
  std::vector<double> values(total_, 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& b : blocks_) {
    if (b.init == ParamInit::zero || b.size() == 0) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < b.size(); ++i) values[b.offset + i] = dist(rng);
  }
  return values;
}

DenseMatrix ParamLayout::view(std::span<const double> flat, std::size_t block) const {
  const auto& b = blocks_.at(block);
  if (flat.size() != total_) throw ShapeError("parameter vector has the wrong length");
  return DenseMatrix(b.rows, b.cols,
                     std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                         flat.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size())));
}

void ParamLayout::assign(std::span<double> flat, std::size_t block, const DenseMatrix& value) const {
  const auto& b = blocks_.at(block);
  if (value.rows() != b.rows || value.cols() != b.cols) {
    throw ShapeError("parameter block '" + b.name + "' expects " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + ", got " + shape_string(value));
  }
  std::copy(value.data().begin(), value.data().end(), flat.begin() + static_cast<std::ptrdiff_t>(b.offset));
}

BoundParams bind_params(ad::Tape& tape, const ParamLayout& layout, std::span<const double> values) {
  if (values.size() != layout.size()) {
    throw ShapeError("parameter vector has " + std::to_string(values.size()) + " entries, layout needs " +
                     std::to_string(layout.size()));
  }
  BoundParams bound;
  bound.vars.reserve(layout.blocks().size());
  for (std::size_t i = 0; i < layout.blocks().size(); ++i) bound.vars.push_back(tape.leaf(layout.view(values, i)));
  return bound;
}

std::vector<double> collect_grads(const ad::Tape& tape, const BoundParams& params, const ParamLayout& layout) {
  std::vector<double> grads(layout.size(), 0.0);
  for (std::size_t i = 0; i < layout.blocks().size(); ++i) {
    const DenseMatrix g = tape.grad(params[i]);
    std::copy(g.data().begin(), g.data().end(),
              grads.begin() + static_cast<std::ptrdiff_t>(layout.block(i).offset));
  }
  return grads;
}

namespace detail {

Mlp add_mlp(ParamLayout& layout, const std::string& prefix, std::size_t in, std::size_t hidden_layers,
            std::size_t width, std::size_t out) {
  Mlp mlp;
  std::size_t fan_in = in;
  for (std::size_t l = 0; l <= hidden_layers; ++l) {
    const bool last = l == hidden_layers;
    const std::size_t fan_out = last ? out : width;
    const std::string tag = prefix + "." + std::to_string(l);
    mlp.weights.push_back(layout.add(tag + ".weight", fan_in, fan_out, ParamInit::glorot));
    mlp.biases.push_back(layout.add(tag + ".bias", 1, fan_out, ParamInit::zero));
    fan_in = fan_out;
  }
  return mlp;
}

ad::Var mlp_forward(const Mlp& mlp, const BoundParams& params, ad::Var input) {
  ad::Var h = input;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    h = ad::add_row(ad::matmul(h, params[mlp.weights[l]]), params[mlp.biases[l]]);
    if (l + 1 < mlp.weights.size()) h = ad::relu(h);
  }
  return h;
}

ad::Var linear_term(ad::Tape& tape, ad::Var x, const BoundParams& params, std::size_t block, bool present) {
  if (!present || x.cols() == 0) return tape.constant(DenseMatrix(x.rows(), 1));
  return ad::matmul(x, params[block]);
}

ad::Var apply_activation(ad::Var v, Activation activation) {
  return activation == Activation::relu ? ad::relu(v) : v;
}

}  // namespace detail
}  // namespace netchoice
