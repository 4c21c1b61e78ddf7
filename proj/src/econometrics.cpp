#include "netchoice/econometrics.hpp"

#include <algorithm>
#include <cmath>

#include "netchoice/error.hpp"

namespace netchoice {

namespace {

struct VariableRef {
  bool sociodemographic = false;
  std::size_t column = 0;  // column of x or q
};

VariableRef resolve(const ChoiceDataset& data, const std::string& name, std::size_t alternative) {
  const auto& attrs = data.attribute_names;
  if (auto it = std::find(attrs.begin(), attrs.end(), name); it != attrs.end()) {
    const auto c = static_cast<std::size_t>(it - attrs.begin());
    return {false, data.alternative_blocks ? alternative * attrs.size() + c : c};
  }
  const auto& socio = data.sociodemographic_names;
  if (auto it = std::find(socio.begin(), socio.end(), name); it != socio.end()) {
    return {true, static_cast<std::size_t>(it - socio.begin())};
  }
  throw ParameterError("variable '" + name + "' is not in the dataset schema");
}

/// Forward pass with the inputs as differentiable leaves.
struct InputTape {
  ad::Tape tape;
  ad::BatchNormStats stats;
  ad::Var x, q, u;

  InputTape(const ChoiceModel& model, const Weights& weights, const AdjacencyGraph* graph, const ChoiceDataset& data)
      : stats(weights.batchnorm) {
    model.check_inputs(data.x, data.q, graph);
    const BoundParams params = bind_params(tape, model.layout(), weights.values);
    x = tape.leaf(data.x);
    q = tape.leaf(data.q);
    ForwardContext ctx;
    ctx.mode = ad::Mode::infer;
    ctx.batchnorm = &stats;
    ctx.graph = graph;
    u = model.utilities(tape, params, x, q, ctx);
  }

  DenseMatrix input_grad(const VariableRef& v) const { return tape.grad(v.sociodemographic ? q : x); }
};

std::size_t utility_column(const ChoiceModel& model, std::size_t alternative) {
  if (model.head() == ad::Head::sigmoid) return 0;
  if (alternative >= model.n_alternatives()) {
    throw ParameterError("alternative " + std::to_string(alternative) + " out of range");
  }
  return alternative;
}

}  // namespace

MarginalUtilities marginal_utilities(const ChoiceModel& model, const Weights& weights, const AdjacencyGraph* graph,
                                     const ChoiceDataset& data, const std::vector<std::string>& variables,
                                     const MarginalOptions& options) {
  std::vector<VariableRef> refs;
  for (const auto& v : variables) refs.push_back(resolve(data, v, options.alternative));
  const std::size_t col = utility_column(model, options.alternative);

  InputTape run(model, weights, graph, data);
  const std::size_t n = data.size();
  MarginalUtilities out{variables, options.alternative, DenseMatrix(n, variables.size())};
  DenseMatrix seed(n, run.u.cols());

  if (!model.uses_graph()) {
    // Without a graph u_i depends on row i alone, so one pass yields every
    // own derivative.
    for (std::size_t i = 0; i < n; ++i) seed(i, col) = 1.0;
    run.tape.backward(run.u, seed);
    const DenseMatrix gx = run.tape.grad(run.x), gq = run.tape.grad(run.q);
    for (std::size_t v = 0; v < refs.size(); ++v)
      for (std::size_t i = 0; i < n; ++i) out.values(i, v) = (refs[v].sociodemographic ? gq : gx)(i, refs[v].column);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    seed(i, col) = 1.0;
    run.tape.backward(run.u, seed);
    seed(i, col) = 0.0;
    const DenseMatrix gx = run.tape.grad(run.x), gq = run.tape.grad(run.q);
    for (std::size_t v = 0; v < refs.size(); ++v) out.values(i, v) = (refs[v].sociodemographic ? gq : gx)(i, refs[v].column);
  }
  return out;
}

DenseMatrix spillover_derivatives(const ChoiceModel& model, const Weights& weights, const AdjacencyGraph* graph,
                                  const ChoiceDataset& data, const std::string& variable,
                                  const MarginalOptions& options) {
  const VariableRef ref = resolve(data, variable, options.alternative);
  const std::size_t col = utility_column(model, options.alternative);
  InputTape run(model, weights, graph, data);
  const std::size_t n = data.size();
  DenseMatrix out(n, n);
  DenseMatrix seed(n, run.u.cols());
  for (std::size_t i = 0; i < n; ++i) {
    seed(i, col) = 1.0;
    run.tape.backward(run.u, seed);
    seed(i, col) = 0.0;
    const DenseMatrix g = run.input_grad(ref);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = g(j, ref.column);
  }
  return out;
}

VottEstimates vott(const std::vector<double>& mu_time, const std::vector<double>& mu_cost, double minutes_per_hour) {
  if (mu_time.size() != mu_cost.size()) throw ShapeError("vott: time and cost derivative counts differ");
  VottEstimates out;
  std::vector<double> defined;
  for (std::size_t i = 0; i < mu_time.size(); ++i) {
    if (!(std::abs(mu_cost[i]) >= kCostDerivativeFloor)) {
      out.values.emplace_back();
      ++out.undefined;
      continue;
    }
    const double v = mu_time[i] / mu_cost[i] * minutes_per_hour;
    out.values.emplace_back(v);
    defined.push_back(v);
  }
  if (!defined.empty()) {
    double sum = 0.0;
    for (double v : defined) sum += v;
    out.mean = sum / static_cast<double>(defined.size());
    std::sort(defined.begin(), defined.end());
    out.median = percentile(defined, 0.5);
  }
  return out;
}

std::vector<double> odds_ratio(const ChoiceModel& model, const Weights& weights, const AdjacencyGraph* graph,
                               const ChoiceDataset& data, const std::string& variable, double delta) {
  if (model.head() != ad::Head::sigmoid) {
    throw UnsupportedOperation("odds ratios are defined for binary models only");
  }
  const MarginalUtilities mu = marginal_utilities(model, weights, graph, data, {variable});
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(delta * mu.values(i, 0));
  return out;
}

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ParameterError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("percentile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::vector<Interval> credible_intervals(const std::vector<std::vector<std::optional<double>>>& draws, double level) {
  if (draws.size() < kMinPosteriorSamples) {
    throw ParameterError("credible intervals need at least " + std::to_string(kMinPosteriorSamples) +
                         " posterior samples, got " + std::to_string(draws.size()));
  }
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("credible level must lie in (0, 1)");
  const std::size_t n = draws.front().size();
  for (const auto& d : draws)
    if (d.size() != n) throw ShapeError("credible intervals: samples cover different numbers of individuals");

  const double tail = (1.0 - level) / 2.0;
  std::vector<Interval> out(n);
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    values.clear();
    for (const auto& d : draws)
      if (d[i]) values.push_back(*d[i]);
    if (2 * values.size() < draws.size()) {
      out[i].defined = false;
      continue;
    }
    std::sort(values.begin(), values.end());
    out[i] = {percentile(values, tail), percentile(values, 0.5), percentile(values, 1.0 - tail), true};
  }
  return out;
}

std::string Functional::label() const {
  if (!name.empty()) return name;
  switch (kind) {
    case FunctionalKind::marginal_utility: return "mu_" + variable;
    case FunctionalKind::vott: return "vott_" + variable;
    case FunctionalKind::odds_ratio: return "odds_ratio_" + variable;
  }
  return variable;
}

nlohmann::json to_json(const Functional& f) {
  nlohmann::json j;
  switch (f.kind) {
    case FunctionalKind::marginal_utility:
      j = {{"kind", "marginal_utility"}, {"variable", f.variable}};
      break;
    case FunctionalKind::vott:
      j = {{"kind", "vott"}, {"time", f.variable}, {"cost", f.cost_variable}};
      break;
    case FunctionalKind::odds_ratio:
      j = {{"kind", "odds_ratio"}, {"variable", f.variable}, {"delta", f.delta}};
      break;
  }
  j["alternative"] = f.alternative;
  j["name"] = f.label();
  return j;
}

Functional functional_from_json(const nlohmann::json& j) {
  Functional f;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "marginal_utility") {
      f.kind = FunctionalKind::marginal_utility;
      f.variable = j.at("variable").get<std::string>();
    } else if (kind == "vott") {
      f.kind = FunctionalKind::vott;
      f.variable = j.at("time").get<std::string>();
      f.cost_variable = j.at("cost").get<std::string>();
    } else if (kind == "odds_ratio") {
      f.kind = FunctionalKind::odds_ratio;
      f.variable = j.at("variable").get<std::string>();
      f.delta = j.value("delta", 1.0);
    } else {
      throw ParameterError("unknown functional kind '" + kind + "' (expected marginal_utility, vott or odds_ratio)");
    }
    f.alternative = j.value("alternative", std::size_t{0});
    f.name = j.value("name", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("functional: ") + e.what());
  }
  return f;
}

std::vector<std::optional<double>> evaluate_functional(const ChoiceModel& model, const Weights& weights,
                                                       const AdjacencyGraph* graph, const ChoiceDataset& data,
                                                       const Functional& functional) {
  std::vector<std::optional<double>> out;
  switch (functional.kind) {
    case FunctionalKind::marginal_utility: {
      const auto mu = marginal_utilities(model, weights, graph, data, {functional.variable}, {functional.alternative});
      for (std::size_t i = 0; i < data.size(); ++i) out.emplace_back(mu.values(i, 0));
      break;
    }
    case FunctionalKind::vott: {
      const auto mu = marginal_utilities(model, weights, graph, data, {functional.variable, functional.cost_variable},
                                         {functional.alternative});
      out = vott(mu.values.col(0), mu.values.col(1)).values;
      break;
    }
    case FunctionalKind::odds_ratio: {
      for (double v : odds_ratio(model, weights, graph, data, functional.variable, functional.delta)) out.emplace_back(v);
      break;
    }
  }
  return out;
}

std::vector<Interval> posterior_intervals(const ChoiceModel& model, const PosteriorSamples& samples,
                                          const AdjacencyGraph* graph, const ChoiceDataset& data,
                                          const Functional& functional, double level) {
  if (!samples.batchnorm.empty() && samples.batchnorm.size() != samples.samples.size()) {
    throw ShapeError("posterior samples and their batch statistics differ in count");
  }
  std::vector<std::vector<std::optional<double>>> draws;
  draws.reserve(samples.samples.size());
  for (std::size_t s = 0; s < samples.samples.size(); ++s) {
    Weights w{samples.samples[s], samples.batchnorm.empty() ? ad::BatchNormStats{} : samples.batchnorm[s]};
    draws.push_back(evaluate_functional(model, w, graph, data, functional));
  }
  return credible_intervals(draws, level);
}

Histogram histogram(const std::vector<double>& values, std::size_t bins) {
  if (bins == 0) throw ParameterError("histogram needs at least one bin");
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  double lo = 0.0, hi = 1.0;
  if (!finite.empty()) {
    const auto [mn, mx] = std::minmax_element(finite.begin(), finite.end());
    lo = *mn;
    hi = *mx;
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  Histogram h;
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double v : finite) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

}  // namespace netchoice
