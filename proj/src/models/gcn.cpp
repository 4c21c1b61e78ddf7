#include "model_impl.hpp"
#include "netchoice/error.hpp"

namespace netchoice::detail {

GcnModel::GcnModel(const ModelSpec& spec, const ModelDims& dims) : ChoiceModel(spec, dims) {
  const std::size_t L = spec.gcn_layers;
  const std::size_t out = dims.alternative_blocks ? dims.alternatives : 1;
  std::size_t in = dims.x_cols() + dims.sociodemographics;
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t width = l == L ? out : spec.gcn_width;
    theta_.push_back(layout_.add("gcn." + std::to_string(l) + ".theta", in, width, ParamInit::glorot));
    bias_.push_back(layout_.add("gcn." + std::to_string(l) + ".bias", 1, width, ParamInit::zero));
    in = width;
  }
}

ad::Var GcnModel::utilities(ad::Tape&, const BoundParams& params, ad::Var x, ad::Var q,
                            const ForwardContext& ctx) const {
  if (ctx.graph == nullptr) throw StateError("GCN forward needs an adjacency graph");
  ad::Var a = dims_.sociodemographics > 0 ? ad::concat_cols(x, q) : x;
  for (std::size_t l = 0; l < theta_.size(); ++l) {
    // W (A Theta) == (W A) Theta; projecting first keeps the sparse product narrow.
    a = ad::add_row(ad::spmm(*ctx.graph, ad::matmul(a, params[theta_[l]])), params[bias_[l]]);
    if (l + 1 < theta_.size()) a = apply_activation(a, spec_.activation);
  }
  return a;
}

}  // namespace netchoice::detail
