#pragma once

// Concrete model classes. Only the factory and tests in this directory see
// them; everything else goes through ChoiceModel.

#include <cstddef>
#include <string>
#include <vector>

#include "netchoice/models.hpp"

namespace netchoice::detail {

/// Fully connected ReLU network with a linear output layer.
struct Mlp {
  std::vector<std::size_t> weights;
  std::vector<std::size_t> biases;
  bool empty() const { return weights.empty(); }
};

Mlp add_mlp(ParamLayout& layout, const std::string& prefix, std::size_t in,
            std::size_t hidden_layers, std::size_t width, std::size_t out);
ad::Var mlp_forward(const Mlp& mlp, const BoundParams& params, ad::Var input);

/// x (n x k) times a k x 1 column, or a zero column when k == 0.
ad::Var linear_term(ad::Tape& tape, ad::Var x, const BoundParams& params, std::size_t block,
                    bool present);

ad::Var apply_activation(ad::Var v, Activation activation);

class LogitModel final : public ChoiceModel {
 public:
  LogitModel(const ModelSpec& spec, const ModelDims& dims);
  ad::Var utilities(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                    const ForwardContext& ctx) const override;

  std::size_t beta() const { return beta_; }
  std::size_t gamma() const { return gamma_; }
  std::size_t intercept() const { return intercept_; }
  std::size_t gamma_alternatives() const { return gamma_alts_; }

 private:
  std::size_t beta_ = 0;
  std::size_t gamma_ = 0;
  std::size_t intercept_ = 0;  // ASC row (1 x (J-1)) in the multinomial case
  std::size_t gamma_alts_ = 0;
};

class GcnModel final : public ChoiceModel {
 public:
  GcnModel(const ModelSpec& spec, const ModelDims& dims);
  bool uses_graph() const override { return true; }
  ad::Var utilities(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                    const ForwardContext& ctx) const override;

 private:
  std::vector<std::size_t> theta_;
  std::vector<std::size_t> bias_;
};

/// Binary, unrestricted multinomial and IIA Skip-GNN.
class SkipGnnModel final : public ChoiceModel {
 public:
  SkipGnnModel(const ModelSpec& spec, const ModelDims& dims);
  bool uses_graph() const override { return true; }
  std::size_t batchnorm_width() const override { return bn_width_; }
  ad::Var utilities(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                    const ForwardContext& ctx) const override;

  /// n x C private utilities (C = 1 binary, J multinomial).
  ad::Var private_utilities(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                            const ForwardContext& ctx) const;

  const std::vector<std::size_t>& graph_blocks() const { return graph_blocks_; }

 private:
  struct Channel {
    std::vector<std::size_t> theta;  // per graph layer
    bool with_q = true;
  };

  ad::Var social_channel(ad::Tape& tape, const BoundParams& params, const Channel& channel,
                         ad::Var features, ad::Var late_features, std::size_t late_layer,
                         ad::Var u_pr, const AdjacencyGraph& w) const;

  ad::Var binary_private(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                         const ForwardContext& ctx) const;
  ad::Var multinomial_private(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                              const ForwardContext& ctx) const;
  ad::Var iia_private(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q_embed,
                      const ForwardContext& ctx) const;

  std::size_t bn_width_ = 0;
  std::size_t q_alts_ = 0;  // alternatives receiving socio-demographics
  std::size_t beta_ = 0, gamma_ = 0, intercept_ = 0;
  bool has_gamma_ = false, has_intercept_ = false;
  Mlp f_;
  Mlp embed_;
  std::vector<Channel> channels_;
  std::vector<std::size_t> graph_blocks_;
};

}  // namespace netchoice::detail
