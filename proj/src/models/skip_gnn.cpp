#include "model_impl.hpp"
#include "netchoice/error.hpp"

namespace netchoice::detail {

namespace {

std::vector<std::size_t> add_thetas(ParamLayout& layout, const std::string& prefix, std::size_t layers,
                                    std::size_t first_width, std::size_t later_width,
                                    std::size_t late_extra, std::size_t late_layer) {
  std::vector<std::size_t> ids;
  for (std::size_t l = 1; l <= layers; ++l) {
    // theta^(l) multiplies A^(l-1). A^(0) has first_width columns; later
    // layers prepend the scalar social channel. late_extra columns (IIA
    // embeddings) are present in A^(m) once m >= late_layer.
    std::size_t width = l == 1 ? first_width : 1 + later_width;
    if (late_extra > 0 && late_layer > 0 && l - 1 >= late_layer) width += late_extra;
    ids.push_back(layout.add(prefix + ".theta" + std::to_string(l), width, 1, ParamInit::zero));
  }
  return ids;
}

}  // namespace

SkipGnnModel::SkipGnnModel(const ModelSpec& spec, const ModelDims& dims) : ChoiceModel(spec, dims) {
  const std::size_t k = dims.attributes;
  const std::size_t r = dims.sociodemographics;
  const std::size_t J = dims.alternatives;
  const std::size_t L = spec.gcn_layers;

  if (!dims.alternative_blocks) {
    beta_ = layout_.add("beta", k, 1, ParamInit::glorot);
    gamma_ = layout_.add("gamma", r, 1, ParamInit::glorot);
    has_gamma_ = r > 0;
    has_intercept_ = spec.intercept;
    intercept_ = layout_.add("intercept", has_intercept_ ? 1 : 0, 1, ParamInit::zero);
    if (spec.fc_layers > 0) {
      f_ = add_mlp(layout_, "f", k + r, spec.fc_layers, spec.fc_width, 1);
      bn_width_ = 1;
    }
    channels_.push_back({add_thetas(layout_, "gcn", L, k + r, k + r, 0, 0), true});
  } else if (!spec.iia) {
    q_alts_ = r == 0 ? 0
              : spec.sociodemographic_alternatives < 0
                  ? J - 1
                  : static_cast<std::size_t>(spec.sociodemographic_alternatives);
    beta_ = layout_.add("beta", k, 1, ParamInit::glorot);
    gamma_ = layout_.add("gamma", r, q_alts_, ParamInit::glorot);
    has_gamma_ = r > 0 && q_alts_ > 0;
    has_intercept_ = spec.intercept;
    intercept_ = layout_.add("asc", has_intercept_ ? 1 : 0, J - 1, ParamInit::zero);
    // f depends on Q, so its outputs only feed alternatives that may carry
    // socio-demographics; without Q every non-base alternative gets one.
    const std::size_t f_out = r > 0 ? q_alts_ : J - 1;
    if (spec.fc_layers > 0 && f_out > 0) {
      f_ = add_mlp(layout_, "f", J * k + r, spec.fc_layers, spec.fc_width, f_out);
      bn_width_ = f_out;
    }
    for (std::size_t j = 0; j < J; ++j) {
      const bool with_q = j < q_alts_;
      const std::size_t width = J * k + (with_q ? r : 0);
      channels_.push_back(
          {add_thetas(layout_, "gcn.alt" + std::to_string(j), L, width, width, 0, 0), with_q});
    }
  } else {
    const std::size_t K = r > 0 ? spec.embed_dim : 0;
    const std::size_t entry = spec.embed_entry_layer;
    if (K > 0) embed_ = add_mlp(layout_, "embed", r, spec.embed_hidden_layers, spec.fc_width, J * K);
    const std::size_t early_q = entry == 0 ? K : 0;
    beta_ = layout_.add("beta", k, 1, ParamInit::glorot);
    gamma_ = layout_.add("gamma", early_q, 1, ParamInit::glorot);
    has_gamma_ = early_q > 0;
    if (spec.fc_layers > 0) {
      f_ = add_mlp(layout_, "f", k + early_q, spec.fc_layers, spec.fc_width, 1);
      bn_width_ = J;  // one statistic per alternative slot
    }
    channels_.push_back({add_thetas(layout_, "gcn", L, k + early_q, k + early_q, K, entry), K > 0});
  }
  for (const auto& ch : channels_) graph_blocks_.insert(graph_blocks_.end(), ch.theta.begin(), ch.theta.end());
}

ad::Var SkipGnnModel::social_channel(ad::Tape&, const BoundParams& params, const Channel& channel,
                                     ad::Var features, ad::Var late_features, std::size_t late_layer,
                                     ad::Var u_pr, const AdjacencyGraph& w) const {
  const std::size_t L = channel.theta.size();
  ad::Var a = features;
  for (std::size_t l = 1; l < L; ++l) {
    const ad::Var h = ad::add(ad::spmm(w, ad::matmul(a, params[channel.theta[l - 1]])), u_pr);
    std::vector<ad::Var> parts{apply_activation(h, spec_.activation), features};
    if (late_features.valid() && late_layer > 0 && l >= late_layer) parts.push_back(late_features);
    a = ad::concat_cols(parts);
  }
  return ad::add(ad::spmm(w, ad::matmul(a, params[channel.theta[L - 1]])), u_pr);
}

ad::Var SkipGnnModel::binary_private(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                                     const ForwardContext& ctx) const {
  ad::Var u = linear_term(tape, x, params, beta_, true);
  if (has_gamma_) u = ad::add(u, ad::matmul(q, params[gamma_]));
  if (has_intercept_) u = ad::add_row(u, params[intercept_]);
  if (!f_.empty()) {
    const ad::Var in = has_gamma_ ? ad::concat_cols(x, q) : x;
    u = ad::add(u, ad::batchnorm(mlp_forward(f_, params, in), ctx.mode, ctx.batchnorm, ctx.stat_rows));
  }
  return u;
}

ad::Var SkipGnnModel::multinomial_private(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                                          const ForwardContext& ctx) const {
  const std::size_t J = dims_.alternatives;
  const std::size_t k = dims_.attributes;
  ad::Var qg;
  if (has_gamma_) qg = ad::matmul(q, params[gamma_]);
  ad::Var fo;
  if (!f_.empty()) {
    const ad::Var in = dims_.sociodemographics > 0 ? ad::concat_cols(x, q) : x;
    fo = ad::batchnorm(mlp_forward(f_, params, in), ctx.mode, ctx.batchnorm, ctx.stat_rows);
  }
  std::vector<ad::Var> cols;
  for (std::size_t j = 0; j < J; ++j) {
    ad::Var uj = k > 0 ? ad::matmul(ad::slice_cols(x, j * k, k), params[beta_])
                       : tape.constant(DenseMatrix(x.rows(), 1));
    if (qg.valid() && j < q_alts_) uj = ad::add(uj, ad::slice_cols(qg, j, 1));
    if (fo.valid() && j < bn_width_) uj = ad::add(uj, ad::slice_cols(fo, j, 1));
    cols.push_back(uj);
  }
  ad::Var u = ad::concat_cols(cols);
  if (has_intercept_) u = ad::add_row(u, ad::concat_cols(params[intercept_], tape.constant(DenseMatrix(1, 1))));
  return u;
}

ad::Var SkipGnnModel::iia_private(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q_embed,
                                  const ForwardContext& ctx) const {
  const std::size_t J = dims_.alternatives;
  const std::size_t k = dims_.attributes;
  const std::size_t K = q_embed.valid() ? spec_.embed_dim : 0;
  std::vector<ad::Var> lin, fs;
  for (std::size_t j = 0; j < J; ++j) {
    const ad::Var xj = ad::slice_cols(x, j * k, k);
    ad::Var in = xj;
    ad::Var uj = linear_term(tape, xj, params, beta_, true);
    if (has_gamma_) {
      const ad::Var qj = ad::slice_cols(q_embed, j * K, K);
      uj = ad::add(uj, ad::matmul(qj, params[gamma_]));
      in = ad::concat_cols(xj, qj);
    }
    lin.push_back(uj);
    if (!f_.empty()) fs.push_back(mlp_forward(f_, params, in));
  }
  ad::Var u = ad::concat_cols(lin);
  if (!f_.empty()) u = ad::add(u, ad::batchnorm(ad::concat_cols(fs), ctx.mode, ctx.batchnorm, ctx.stat_rows));
  return u;
}

ad::Var SkipGnnModel::private_utilities(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                                        const ForwardContext& ctx) const {
  if (!dims_.alternative_blocks) return binary_private(tape, params, x, q, ctx);
  if (!spec_.iia) return multinomial_private(tape, params, x, q, ctx);
  ad::Var q_embed;
  if (!embed_.empty()) q_embed = mlp_forward(embed_, params, q);
  return iia_private(tape, params, x, q_embed, ctx);
}

ad::Var SkipGnnModel::utilities(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                                const ForwardContext& ctx) const {
  if (ctx.graph == nullptr) throw StateError("Skip-GNN forward needs an adjacency graph");
  const AdjacencyGraph& w = *ctx.graph;
  const bool with_q = dims_.sociodemographics > 0;

  if (!dims_.alternative_blocks) {
    const ad::Var u_pr = binary_private(tape, params, x, q, ctx);
    const ad::Var features = with_q ? ad::concat_cols(x, q) : x;
    return social_channel(tape, params, channels_[0], features, {}, 0, u_pr, w);
  }

  const std::size_t J = dims_.alternatives;
  std::vector<ad::Var> cols;
  cols.reserve(J);
  if (!spec_.iia) {
    const ad::Var u_pr = multinomial_private(tape, params, x, q, ctx);
    const ad::Var full = with_q ? ad::concat_cols(x, q) : x;
    for (std::size_t j = 0; j < J; ++j) {
      const ad::Var features = channels_[j].with_q ? full : x;
      cols.push_back(social_channel(tape, params, channels_[j], features, {}, 0, ad::slice_cols(u_pr, j, 1), w));
    }
    return ad::concat_cols(cols);
  }

  const std::size_t k = dims_.attributes;
  ad::Var q_embed;
  if (!embed_.empty()) q_embed = mlp_forward(embed_, params, q);
  const std::size_t K = q_embed.valid() ? spec_.embed_dim : 0;
  const ad::Var u_pr = iia_private(tape, params, x, q_embed, ctx);
  const std::size_t entry = spec_.embed_entry_layer;
  for (std::size_t j = 0; j < J; ++j) {
    const ad::Var xj = ad::slice_cols(x, j * k, k);
    ad::Var qj;
    if (K > 0) qj = ad::slice_cols(q_embed, j * K, K);
    const ad::Var features = (K > 0 && entry == 0) ? ad::concat_cols(xj, qj) : xj;
    cols.push_back(social_channel(tape, params, channels_[0], features, qj, entry, ad::slice_cols(u_pr, j, 1), w));
  }
  return ad::concat_cols(cols);
}

}  // namespace netchoice::detail
