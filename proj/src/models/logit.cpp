#include <cmath>
#include <limits>

#include "model_impl.hpp"
#include "netchoice/error.hpp"

namespace netchoice {
namespace detail {

LogitModel::LogitModel(const ModelSpec& spec, const ModelDims& dims) : ChoiceModel(spec, dims) {
  const std::size_t k = dims.attributes;
  const std::size_t r = dims.sociodemographics;
  const std::size_t J = dims.alternatives;
  beta_ = layout_.add("beta", k, 1, ParamInit::glorot);
  if (!dims.alternative_blocks) {
    gamma_ = layout_.add("gamma", r, 1, ParamInit::glorot);
    intercept_ = layout_.add("intercept", spec.intercept ? 1 : 0, 1, ParamInit::zero);
    return;
  }
  gamma_alts_ = spec.sociodemographic_alternatives < 0
                    ? J - 1
                    : static_cast<std::size_t>(spec.sociodemographic_alternatives);
  gamma_ = layout_.add("gamma", r, gamma_alts_, ParamInit::glorot);
  intercept_ = layout_.add("asc", spec.intercept ? 1 : 0, J - 1, ParamInit::zero);
}

ad::Var LogitModel::utilities(ad::Tape& tape, const BoundParams& params, ad::Var x, ad::Var q,
                              const ForwardContext&) const {
  const std::size_t n = x.rows();
  const std::size_t k = dims_.attributes;
  const std::size_t r = dims_.sociodemographics;
  if (!dims_.alternative_blocks) {
    ad::Var u = linear_term(tape, x, params, beta_, k > 0);
    if (r > 0) u = ad::add(u, ad::matmul(q, params[gamma_]));
    if (spec_.intercept) u = ad::add_row(u, params[intercept_]);
    return u;
  }
  const std::size_t J = dims_.alternatives;
  ad::Var qg;
  if (r > 0 && gamma_alts_ > 0) qg = ad::matmul(q, params[gamma_]);
  std::vector<ad::Var> cols;
  cols.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    ad::Var uj = k > 0 ? ad::matmul(ad::slice_cols(x, j * k, k), params[beta_])
                       : tape.constant(DenseMatrix(n, 1));
    if (qg.valid() && j < gamma_alts_) uj = ad::add(uj, ad::slice_cols(qg, j, 1));
    cols.push_back(uj);
  }
  ad::Var u = ad::concat_cols(cols);
  if (spec_.intercept) {
    const ad::Var asc = ad::concat_cols(params[intercept_], tape.constant(DenseMatrix(1, 1)));
    u = ad::add_row(u, asc);
  }
  return u;
}

}  // namespace detail

std::vector<double> logit_forward(const LinearUtilityParams& params, const DenseMatrix& x,
                                  const DenseMatrix& q) {
  if (params.beta.size() != x.cols()) {
    throw ShapeError("logit_forward: " + std::to_string(params.beta.size()) + " beta entries for " +
                     std::to_string(x.cols()) + " attribute columns");
  }
  if (params.gamma.size() != q.cols()) {
    throw ShapeError("logit_forward: " + std::to_string(params.gamma.size()) + " gamma entries for " +
                     std::to_string(q.cols()) + " socio-demographic columns");
  }
  if (q.cols() > 0 && q.rows() != x.rows()) throw ShapeError("logit_forward: X and Q row counts differ");
  std::vector<double> p(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double v = params.intercept;
    for (std::size_t c = 0; c < x.cols(); ++c) v += x(i, c) * params.beta[c];
    for (std::size_t c = 0; c < q.cols(); ++c) v += q(i, c) * params.gamma[c];
    p[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return p;
}

DenseMatrix conditional_logit_forward(const ConditionalLogitParams& params, const DenseMatrix& x,
                                      const DenseMatrix& q, std::size_t alternatives) {
  const std::size_t J = alternatives;
  if (J < 2) throw ParameterError("conditional logit needs at least 2 alternatives");
  const std::size_t k = params.beta.size();
  if (x.cols() != J * k) {
    throw ShapeError("conditional_logit_forward: X has " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(J) + " blocks of " + std::to_string(k));
  }
  if (!params.asc.empty() && params.asc.size() != J - 1) {
    throw IdentificationError("conditional logit: alternative-specific constants allowed on at most J-1 alternatives");
  }
  const std::size_t m = params.gamma.cols();
  if (m > J - 1) {
    throw IdentificationError("conditional logit: socio-demographics may enter at most J-1 = " +
                              std::to_string(J - 1) + " utilities, got " + std::to_string(m));
  }
  if (m > 0 && params.gamma.rows() != q.cols()) throw ShapeError("conditional_logit_forward: gamma rows != Q columns");
  DenseMatrix p(x.rows(), J);
  std::vector<double> u(J);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) {
      double v = 0.0;
      for (std::size_t c = 0; c < k; ++c) v += x(i, j * k + c) * params.beta[c];
      if (!params.asc.empty() && j < J - 1) v += params.asc[j];
      if (j < m)
        for (std::size_t c = 0; c < q.cols(); ++c) v += q(i, c) * params.gamma(c, j);
      u[j] = v;
      top = std::max(top, v);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < J; ++j) z += std::exp(u[j] - top);
    for (std::size_t j = 0; j < J; ++j) p(i, j) = std::exp(u[j] - top) / z;
  }
  return p;
}

std::vector<double> logit_weights(const ChoiceModel& model, const LinearUtilityParams& params) {
  const auto* logit = dynamic_cast<const detail::LogitModel*>(&model);
  if (logit == nullptr || model.dims().alternative_blocks) {
    throw UnsupportedOperation("logit_weights needs a binary logit model");
  }
  const auto& layout = model.layout();
  std::vector<double> values(layout.size(), 0.0);
  layout.assign(values, logit->beta(), DenseMatrix::column(params.beta));
  layout.assign(values, logit->gamma(), DenseMatrix::column(params.gamma));
  if (model.spec().intercept) layout.assign(values, logit->intercept(), DenseMatrix(1, 1, params.intercept));
  else if (params.intercept != 0.0) throw ParameterError("model has no intercept");
  return values;
}

}  // namespace netchoice
