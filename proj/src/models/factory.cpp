#include <algorithm>
#include <cmath>
#include <set>

#include "model_impl.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logit: return "logit";
    case ModelKind::gcn: return "gcn";
    case ModelKind::skip_gnn: return "skip_gnn";
  }
  return "?";
}

std::string to_string(Activation activation) {
  return activation == Activation::relu ? "relu" : "identity";
}

namespace {

ModelKind parse_kind(const std::string& s) {
  if (s == "logit") return ModelKind::logit;
  if (s == "gcn") return ModelKind::gcn;
  if (s == "skip_gnn") return ModelKind::skip_gnn;
  throw ParameterError("unknown model kind '" + s + "' (expected logit, gcn or skip_gnn)");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity" || s == "linear") return Activation::identity;
  throw ParameterError("unknown activation '" + s + "' (expected relu or identity)");
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ParameterError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ParameterError(std::string("unknown ") + what + " field '" + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const ModelSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"intercept", spec.intercept},
          {"fc_layers", spec.fc_layers},
          {"fc_width", spec.fc_width},
          {"gcn_layers", spec.gcn_layers},
          {"gcn_width", spec.gcn_width},
          {"activation", to_string(spec.activation)},
          {"iia", spec.iia},
          {"embed_dim", spec.embed_dim},
          {"embed_hidden_layers", spec.embed_hidden_layers},
          {"embed_entry_layer", spec.embed_entry_layer},
          {"sociodemographic_alternatives", spec.sociodemographic_alternatives}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"kind", "intercept", "fc_layers", "fc_width", "gcn_layers", "gcn_width", "activation", "iia",
                  "embed_dim", "embed_hidden_layers", "embed_entry_layer", "sociodemographic_alternatives"},
                 "model");
  ModelSpec spec;
  std::string kind = to_string(spec.kind);
  std::string activation = to_string(spec.activation);
  read(j, "kind", kind);
  read(j, "activation", activation);
  spec.kind = parse_kind(kind);
  spec.activation = parse_activation(activation);
  read(j, "intercept", spec.intercept);
  read(j, "fc_layers", spec.fc_layers);
  read(j, "fc_width", spec.fc_width);
  read(j, "gcn_layers", spec.gcn_layers);
  read(j, "gcn_width", spec.gcn_width);
  read(j, "iia", spec.iia);
  read(j, "embed_dim", spec.embed_dim);
  read(j, "embed_hidden_layers", spec.embed_hidden_layers);
  read(j, "embed_entry_layer", spec.embed_entry_layer);
  read(j, "sociodemographic_alternatives", spec.sociodemographic_alternatives);
  return spec;
}

nlohmann::json to_json(const ModelDims& dims) {
  return {{"attributes", dims.attributes},
          {"sociodemographics", dims.sociodemographics},
          {"alternatives", dims.alternatives},
          {"alternative_blocks", dims.alternative_blocks}};
}

ModelDims model_dims_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"attributes", "sociodemographics", "alternatives", "alternative_blocks"}, "dims");
  ModelDims dims;
  read(j, "attributes", dims.attributes);
  read(j, "sociodemographics", dims.sociodemographics);
  read(j, "alternatives", dims.alternatives);
  read(j, "alternative_blocks", dims.alternative_blocks);
  return dims;
}

void validate(const ModelSpec& spec, const ModelDims& dims) {
  const std::size_t J = dims.alternatives;
  if (J < 2) throw ParameterError("a choice model needs at least 2 alternatives");
  if (!dims.alternative_blocks && J != 2) {
    throw ParameterError("binary models take differenced attributes; " + std::to_string(J) +
                         " alternatives need per-alternative attribute blocks");
  }
  if (spec.kind != ModelKind::logit && spec.gcn_layers < 1) throw ParameterError("gcn_layers must be at least 1");
  if (spec.kind == ModelKind::gcn && spec.gcn_layers > 1 && spec.gcn_width < 1) {
    throw ParameterError("gcn_width must be at least 1");
  }
  if (spec.fc_layers > 0 && spec.fc_width < 1) throw ParameterError("fc_width must be at least 1");

  if (spec.iia) {
    if (spec.kind != ModelKind::skip_gnn) throw ParameterError("the IIA restriction is a Skip-GNN variant");
    if (!dims.alternative_blocks) throw ParameterError("the IIA variant needs a multinomial (softmax) model");
    if (dims.sociodemographics > 0 && spec.embed_dim < 1) {
      throw ParameterError("the IIA variant needs embed_dim >= 1");
    }
    if (spec.embed_entry_layer >= spec.gcn_layers) {
      throw ParameterError("embed_entry_layer must be below gcn_layers (" + std::to_string(spec.gcn_layers) + ")");
    }
    return;
  }

  if (dims.alternative_blocks && dims.sociodemographics > 0 && spec.kind != ModelKind::gcn) {
    const int m = spec.sociodemographic_alternatives;
    if (m >= 0 && static_cast<std::size_t>(m) >= J) {
      throw IdentificationError("socio-demographics may enter at most J-1 = " + std::to_string(J - 1) +
                                " utilities; sociodemographic_alternatives = " + std::to_string(m));
    }
  }
  if (spec.sociodemographic_alternatives < -1) {
    throw ParameterError("sociodemographic_alternatives must be -1 (all but the base) or a count");
  }
}

std::unique_ptr<ChoiceModel> make_model(const ModelSpec& spec, const ModelDims& dims) {
  validate(spec, dims);
  switch (spec.kind) {
    case ModelKind::logit: return std::make_unique<detail::LogitModel>(spec, dims);
    case ModelKind::gcn: return std::make_unique<detail::GcnModel>(spec, dims);
    case ModelKind::skip_gnn: return std::make_unique<detail::SkipGnnModel>(spec, dims);
  }
  throw ParameterError("unknown model kind");
}

void ChoiceModel::check_inputs(const DenseMatrix& x, const DenseMatrix& q, const AdjacencyGraph* graph,
                               bool graph_required) const {
  if (x.cols() != dims_.x_cols()) {
    throw ShapeError("model expects " + std::to_string(dims_.x_cols()) + " attribute columns, got " +
                     shape_string(x));
  }
  if (q.cols() != dims_.sociodemographics) {
    throw ShapeError("model expects " + std::to_string(dims_.sociodemographics) +
                     " socio-demographic columns, got " + shape_string(q));
  }
  if (q.rows() != x.rows()) throw ShapeError("X is " + shape_string(x) + " but Q is " + shape_string(q));
  if (uses_graph() && (graph_required || graph != nullptr)) {
    if (graph == nullptr) throw StateError(to_string(spec_.kind) + " model needs an adjacency graph");
    if (graph->n() != x.rows()) {
      throw ShapeError("graph has " + std::to_string(graph->n()) + " nodes for " + std::to_string(x.rows()) +
                       " rows");
    }
  }
}

ad::Var probabilities(ad::Var utilities, ad::Head head) {
  return head == ad::Head::sigmoid ? ad::sigmoid(utilities) : ad::softmax_rows(utilities);
}

ForwardResult predict(const ChoiceModel& model, const Weights& weights, const DenseMatrix& x, const DenseMatrix& q,
                      const AdjacencyGraph* graph, ad::Mode mode) {
  model.check_inputs(x, q, graph);
  ad::Tape tape;
  const BoundParams params = bind_params(tape, model.layout(), weights.values);
  ad::BatchNormStats stats = weights.batchnorm;
  ForwardContext ctx;
  ctx.mode = mode;
  ctx.batchnorm = mode == ad::Mode::infer ? &stats : nullptr;
  ctx.graph = graph;
  const ad::Var u = model.utilities(tape, params, tape.constant(x), tape.constant(q), ctx);
  const ad::Var p = probabilities(u, model.head());
  return {u.value(), p.value()};
}

ad::BatchNormStats whole_sample_statistics(const ChoiceModel& model, std::span<const double> values,
                                           const DenseMatrix& x, const DenseMatrix& q, const AdjacencyGraph* graph,
                                           std::span<const std::size_t> rows) {
  ad::BatchNormStats stats;
  if (model.batchnorm_width() == 0) return stats;
  model.check_inputs(x, q, graph);
  ad::Tape tape;
  const BoundParams params = bind_params(tape, model.layout(), values);
  ForwardContext ctx;
  ctx.mode = ad::Mode::train;
  ctx.batchnorm = &stats;  // empty, so the first (only) batch seeds it exactly
  ctx.stat_rows = rows;
  ctx.graph = graph;
  model.utilities(tape, params, tape.constant(x), tape.constant(q), ctx);
  return stats;
}

std::vector<int> predict_classes(const DenseMatrix& probabilities, ad::Head head) {
  std::vector<int> out(probabilities.rows());
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    if (head == ad::Head::sigmoid) {
      out[i] = probabilities(i, 0) > 0.5 ? 1 : 0;
      continue;
    }
    const auto row = probabilities.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

DenseMatrix private_utility(const ChoiceModel& skip_gnn, const Weights& weights, const DenseMatrix& x,
                            const DenseMatrix& q, ad::Mode mode) {
  const auto* model = dynamic_cast<const detail::SkipGnnModel*>(&skip_gnn);
  if (model == nullptr) throw UnsupportedOperation("private_utility is defined for Skip-GNN models");
  skip_gnn.check_inputs(x, q, nullptr, false);
  ad::Tape tape;
  const BoundParams params = bind_params(tape, skip_gnn.layout(), weights.values);
  ad::BatchNormStats stats = weights.batchnorm;
  ForwardContext ctx;
  ctx.mode = mode;
  ctx.batchnorm = mode == ad::Mode::infer ? &stats : nullptr;
  return model->private_utilities(tape, params, tape.constant(x), tape.constant(q), ctx).value();
}

void zero_social_block(const ChoiceModel& skip_gnn, std::span<double> values) {
  const auto* model = dynamic_cast<const detail::SkipGnnModel*>(&skip_gnn);
  if (model == nullptr) throw UnsupportedOperation("zero_social_block is defined for Skip-GNN models");
  const auto& layout = skip_gnn.layout();
  if (values.size() != layout.size()) throw ShapeError("parameter vector has the wrong length");
  for (const std::size_t b : model->graph_blocks()) {
    const auto& block = layout.block(b);
    std::fill_n(values.begin() + static_cast<std::ptrdiff_t>(block.offset), block.size(), 0.0);
  }
}

}  // namespace netchoice
