#include <algorithm>
#include <cmath>
#include <random>

#include "netchoice/dataio.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

std::string to_string(Process p) {
  switch (p) {
    case Process::logit: return "logit";
    case Process::sae: return "sae";
    case Process::sal: return "sal";
    case Process::sarar: return "sarar";
  }
  return "?";
}

namespace {

Process parse_process(const std::string& s) {
  if (s == "logit") return Process::logit;
  if (s == "sae") return Process::sae;
  if (s == "sal") return Process::sal;
  if (s == "sarar") return Process::sarar;
  throw ParameterError("unknown process '" + s + "' (expected logit, sae, sal or sarar)");
}

ErrorDistribution parse_error(const std::string& s) {
  if (s == "logistic") return ErrorDistribution::logistic;
  if (s == "normal") return ErrorDistribution::normal;
  throw ParameterError("unknown error distribution '" + s + "' (expected logistic or normal)");
}

void check_channel(const AdjacencyGraph& w, double rho, const char* name) {
  if (rho == 0.0) return;
  if (!std::isfinite(rho)) throw ParameterError(std::string(name) + " must be finite");
  if (std::abs(rho) * w.max_row_sum() < 1.0) return;
  const double radius = spectral_radius(w);
  if (std::abs(rho) * radius >= 1.0) {
    throw ParameterError(std::string("|") + name + "| * spectral_radius(W) = " + std::to_string(std::abs(rho) * radius) +
                         " must be below 1");
  }
}

std::vector<double> solve(const AdjacencyGraph& w, double rho, const std::vector<double>& z) {
  if (rho == 0.0) return z;
  return affine_fixed_point(w, rho, z);
}

}  // namespace

nlohmann::json to_json(const SimulationSpec& spec) {
  return {{"process", to_string(spec.process)},
          {"n", spec.n},
          {"rho", spec.rho},
          {"rho_eps", spec.rho_eps},
          {"rho_beta", spec.rho_beta},
          {"beta", spec.beta},
          {"gamma", spec.gamma},
          {"intercept", spec.intercept},
          {"tau_beta", spec.tau_beta},
          {"error", spec.error == ErrorDistribution::logistic ? "logistic" : "normal"},
          {"knn", spec.knn},
          {"symmetrize", spec.symmetrize},
          {"normalization", to_string(spec.normalization)}};
}

SimulationSpec simulation_spec_from_json(const nlohmann::json& j, SimulationSpec base) {
  if (!j.is_object()) throw ParameterError("simulation must be a JSON object");
  static const std::vector<std::string> known{"process", "n", "rho", "rho_eps", "rho_beta", "beta", "gamma",
                                              "intercept", "tau_beta", "error", "knn", "symmetrize", "normalization"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParameterError("unknown simulation field '" + key + "'");
    }
  }
  SimulationSpec s = base;
  try {
    if (j.contains("process")) s.process = parse_process(j.at("process").get<std::string>());
    if (j.contains("error")) s.error = parse_error(j.at("error").get<std::string>());
    if (j.contains("normalization")) s.normalization = parse_normalization(j.at("normalization").get<std::string>());
    s.n = j.value("n", s.n);
    s.rho = j.value("rho", s.rho);
    s.rho_eps = j.value("rho_eps", s.rho_eps);
    s.rho_beta = j.value("rho_beta", s.rho_beta);
    s.beta = j.value("beta", s.beta);
    s.gamma = j.value("gamma", s.gamma);
    s.intercept = j.value("intercept", s.intercept);
    s.tau_beta = j.value("tau_beta", s.tau_beta);
    s.knn = j.value("knn", s.knn);
    s.symmetrize = j.value("symmetrize", s.symmetrize);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("simulation: ") + e.what());
  }
  return s;
}

AdjacencyGraph simulation_graph(const SimulationSpec& spec, DenseMatrix* coords) {
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DenseMatrix xy(spec.n, 2);
  for (std::size_t i = 0; i < spec.n; ++i) {
    xy(i, 0) = unit(rng);
    xy(i, 1) = unit(rng);
  }
  AdjacencyGraph g = build_knn_graph(xy, spec.knn, spec.symmetrize);
  if (coords != nullptr) *coords = std::move(xy);
  return g;
}

Simulation simulate(const SimulationSpec& spec, const AdjacencyGraph& w) {
  const std::size_t n = spec.n;
  const std::size_t k = spec.beta.size();
  const std::size_t r = spec.gamma.size();
  if (n == 0) throw ParameterError("simulation needs n >= 1");
  if (w.n() != n) throw ShapeError("simulation graph has " + std::to_string(w.n()) + " nodes, n = " + std::to_string(n));
  if (!(spec.tau_beta >= 0.0)) throw ParameterError("tau_beta must be non-negative");
  const bool sae = spec.process == Process::sae || spec.process == Process::sarar;
  const bool sal = spec.process == Process::sal || spec.process == Process::sarar;
  const bool sarar = spec.process == Process::sarar;
  if (sae) check_channel(w, spec.rho_eps, "rho_eps");
  if (sal) check_channel(w, spec.rho, "rho");
  if (sarar) check_channel(w, spec.rho_beta, "rho_beta");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Simulation sim;
  ChoiceDataset& data = sim.data;
  data.x = DenseMatrix(n, k);
  data.q = DenseMatrix(n, r);
  for (double& v : data.x.data()) v = normal(rng);
  for (double& v : data.q.data()) v = normal(rng);
  sim.epsilon.resize(n);
  for (double& e : sim.epsilon) {
    if (spec.error == ErrorDistribution::normal) {
      e = normal(rng);
    } else {
      double u = unit(rng);
      while (u <= 0.0) u = unit(rng);
      e = std::log(u) - std::log1p(-u);
    }
  }
  DenseMatrix tau(n, k);
  if (sarar && spec.tau_beta > 0.0)
    for (double& v : tau.data()) v = spec.tau_beta * normal(rng);

  sim.private_utility.assign(n, spec.intercept);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) sim.private_utility[i] += data.x(i, c) * spec.beta[c];
    for (std::size_t c = 0; c < r; ++c) sim.private_utility[i] += data.q(i, c) * spec.gamma[c];
  }

  std::vector<double> z = sim.private_utility;
  if (sarar) {
    // Individual coefficient shifts (I - rho_beta W)^-1 tau, per attribute.
    const DenseMatrix shift = spec.rho_beta == 0.0 ? tau : affine_fixed_point(w, spec.rho_beta, tau);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) z[i] += data.x(i, c) * shift(i, c);
  }
  const std::vector<double> noise = sae ? solve(w, spec.rho_eps, sim.epsilon) : sim.epsilon;
  for (std::size_t i = 0; i < n; ++i) z[i] += noise[i];
  sim.latent = sal ? solve(w, spec.rho, z) : z;

  data.alternatives = 2;
  data.y.resize(n);
  data.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.y[i] = sim.latent[i] > 0.0 ? 1 : 0;
    data.ids[i] = std::to_string(i);
  }
  for (std::size_t c = 0; c < k; ++c) data.attribute_names.push_back("x" + std::to_string(c + 1));
  for (std::size_t c = 0; c < r; ++c) data.sociodemographic_names.push_back("q" + std::to_string(c + 1));
  data.graph = w;
  return sim;
}

}  // namespace netchoice
