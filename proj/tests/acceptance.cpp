// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (0 when all pass).

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "netchoice/cli.hpp"
#include "netchoice/econometrics.hpp"
#include "netchoice/dataio.hpp"
#include "netchoice/error.hpp"
#include "netchoice/estimation.hpp"
#include "support.hpp"

using namespace netchoice;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> random_weights(const ChoiceModel& m, std::mt19937_64& rng, double sd = 0.5) {
  return fixture::normal_vector(m.layout().size(), rng, sd);
}

// ---- AC1 ------------------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  struct Case {
    std::string name;
    ModelSpec spec;
    bool multinomial;
  };
  ModelSpec logit;
  logit.kind = ModelKind::logit;
  ModelSpec gcn;
  gcn.kind = ModelKind::gcn;
  gcn.gcn_layers = 2;
  gcn.gcn_width = 4;
  ModelSpec skip;
  skip.fc_layers = 1;
  skip.fc_width = 4;
  skip.gcn_layers = 3;
  ModelSpec iia = skip;
  iia.iia = true;
  iia.embed_dim = 2;
  iia.embed_entry_layer = 1;
  ModelSpec mlogit = logit;
  const std::vector<Case> cases{{"logit", logit, false},          {"conditional logit", mlogit, true},
                                {"gcn", gcn, false},              {"skip-gnn binary", skip, false},
                                {"skip-gnn multinomial", skip, true}, {"skip-gnn iia", iia, true}};
  double worst = 0.0;
  std::string worst_case;
  std::size_t checked = 0;
  for (const auto& c : cases) {
    const ChoiceDataset d =
        c.multinomial ? fixture::multinomial_data(20, 3, 2, 2, rng()) : fixture::binary_data(20, 2, 2, rng());
    const auto model = make_model(c.spec, d.dims());
    const auto w = random_weights(*model, rng);
    for (auto mode : {ad::Mode::train, ad::Mode::infer}) {
      const auto r = gradcheck::check(*model, w, d.x, d.q, d.graph_ptr(), d.y, rng, mode);
      const double e = std::max({r.params, r.x, r.q});
      checked += r.checked;
      if (e > worst) {
        worst = e;
        worst_case = c.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 60.0,
          fmt("%zu partials, worst relative error %.2e (%s), %.1fs", checked, worst, worst_case.c_str(), secs)};
}

// ---- AC2 ------------------------------------------------------------------------------------

Outcome sal_limit() {
  std::mt19937_64 rng(202);
  const std::size_t n = 50;
  const AdjacencyGraph w = fixture::random_graph(n, rng);
  const DenseMatrix x = fixture::normal_matrix(n, 2, rng);
  const DenseMatrix q(n, 0);
  const std::vector<double> beta{0.8, -1.3};
  const double c = 0.25;
  std::vector<double> u_pr(n);
  for (std::size_t i = 0; i < n; ++i) u_pr[i] = beta[0] * x(i, 0) + beta[1] * x(i, 1) + c;

  bool pass = true;
  std::string detail;
  for (double rho : {0.1, 0.3, 0.5}) {
    const auto target = affine_fixed_point(w, rho, u_pr, {1e-15, 1000000});
    double scale = 0.0;
    for (double t : target) scale = std::max(scale, std::abs(t));
    // Once both gaps sit at round-off, their order carries no information.
    const double noise = 16.0 * std::numeric_limits<double>::epsilon() * scale;
    double previous = INFINITY;
    bool monotone = true;
    double gap100 = 0.0;
    for (std::size_t L : {5, 10, 25, 50, 100}) {
      ModelSpec spec;
      spec.fc_layers = 0;
      spec.activation = Activation::identity;
      spec.gcn_layers = L;
      const auto model = make_model(spec, {2, 0, 2, false});
      const ParamLayout& layout = model->layout();
      std::vector<double> values(layout.size(), 0.0);
      values[layout.block(layout.index_of("beta")).offset] = beta[0];
      values[layout.block(layout.index_of("beta")).offset + 1] = beta[1];
      values[layout.block(layout.index_of("intercept")).offset] = c;
      // Hidden layers feed back only the scalar social channel, weighted rho.
      for (std::size_t l = 2; l <= L; ++l) values[layout.block(layout.index_of("gcn.theta" + std::to_string(l))).offset] = rho;
      const ForwardResult r = predict(*model, {values, {}}, x, q, &w);
      double gap = 0.0;
      for (std::size_t i = 0; i < n; ++i) gap = std::max(gap, std::abs(r.utilities(i, 0) - target[i]));
      monotone = monotone && gap <= previous + noise;
      previous = gap;
      if (L == 100) gap100 = gap;
    }
    pass = pass && monotone && gap100 <= 1e-6;
    detail += fmt("rho=%.1f gap(L=100)=%.1e%s; ", rho, gap100, monotone ? "" : " NOT monotone");
  }
  return {pass, detail};
}

// ---- AC3 ------------------------------------------------------------------------------------

Outcome fixed_point_vs_solve() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<std::size_t> size(5, 50);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int g = 0; g < 20; ++g) {
    const std::size_t n = size(rng);
    AdjacencyGraph w = fixture::random_weighted_graph(n, 0.2, rng);
    if (g % 2 == 0) w = normalize(w, Normalization::row);
    const double radius = oracle::spectral_radius(w);
    const double rho = radius > 0.0 ? 0.9 * unit(rng) / radius : unit(rng);
    const auto z = fixture::normal_vector(n, rng);
    const auto iterative = affine_fixed_point(w, rho, z, {1e-14, 1000000});
    const auto direct = oracle::spatial_solve(w, rho, z);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(iterative[i] - direct[i]));
  }
  return {worst <= 1e-8, fmt("20 graphs, max |iterative - direct| = %.2e", worst)};
}

// ---- AC4 ------------------------------------------------------------------------------------

double max_log_odds_shift(const ChoiceModel& model, const std::vector<double>& values, const ChoiceDataset& d,
                          ad::Mode mode) {
  Weights w{values, whole_sample_statistics(model, values, d.x, d.q, d.graph_ptr())};
  DenseMatrix x2 = d.x;
  std::mt19937_64 rng(4);
  const std::size_t k = d.attribute_names.size();
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t c = 0; c < k; ++c) x2(i, 2 * k + c) += 1.0 + fixture::normal_vector(1, rng)[0];
  const auto a = predict(model, w, d.x, d.q, d.graph_ptr(), mode).probabilities;
  const auto b = predict(model, w, x2, d.q, d.graph_ptr(), mode).probabilities;
  double worst = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double before = std::log(a(i, 0) / a(i, 1));
    const double after = std::log(b(i, 0) / b(i, 1));
    worst = std::max(worst, std::abs(after - before));
  }
  return worst;
}

Outcome structural_iia() {
  std::mt19937_64 rng(404);
  const ChoiceDataset d = fixture::multinomial_data(30, 3, 2, 2, 44);
  ModelSpec spec;
  spec.fc_layers = 1;
  spec.fc_width = 4;
  spec.gcn_layers = 2;
  spec.iia = true;
  spec.embed_dim = 2;
  const auto iia = make_model(spec, d.dims());
  const auto wi = random_weights(*iia, rng);
  spec.iia = false;
  const auto free = make_model(spec, d.dims());
  const auto wf = random_weights(*free, rng);
  const double iia_shift =
      std::max(max_log_odds_shift(*iia, wi, d, ad::Mode::infer), max_log_odds_shift(*iia, wi, d, ad::Mode::train));
  const double free_shift = max_log_odds_shift(*free, wf, d, ad::Mode::infer);
  return {iia_shift <= 1e-10 && free_shift > 1e-3,
          fmt("IIA max |d log(p1/p2)| = %.1e, unrestricted = %.3f", iia_shift, free_shift)};
}

// ---- AC5 ------------------------------------------------------------------------------------

Outcome identification_guard() {
  ModelSpec spec;
  spec.fc_layers = 0;
  spec.sociodemographic_alternatives = 3;
  const ModelDims dims{2, 2, 3, true};
  bool rejected = false;
  std::string message;
  try {
    validate(spec, dims);
  } catch (const IdentificationError& e) {
    rejected = true;
    message = e.what();
  }
  bool factory_rejects = false;
  try {
    make_model(spec, dims);
  } catch (const IdentificationError&) {
    factory_rejects = true;
  }
  spec.sociodemographic_alternatives = 2;
  bool accepted = true;
  try {
    validate(spec, dims);
  } catch (const Error&) {
    accepted = false;
  }
  return {rejected && factory_rejects && accepted,
          rejected ? "all-J wiring rejected: " + message : std::string("all-J wiring was accepted")};
}

// ---- AC6 ------------------------------------------------------------------------------------

Outcome sgld_calibration() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> unit;
  ChoiceDataset d;
  d.x = fixture::normal_matrix(50, 1, rng);
  d.q = DenseMatrix(50, 0);
  d.attribute_names = {"x"};
  std::vector<double> xs;
  for (std::size_t i = 0; i < 50; ++i) {
    d.ids.push_back(std::to_string(i));
    const double p = 1.0 / (1.0 + std::exp(-2.0 * d.x(i, 0)));
    d.y.push_back(unit(rng) < p ? 1 : 0);
    xs.push_back(d.x(i, 0));
  }
  const double prior_sd = 2.0;
  const auto grid = oracle::logistic_grid_posterior(xs, d.y, prior_sd, -10.0, 15.0, 10001);

  ModelSpec spec;
  spec.kind = ModelKind::logit;
  spec.intercept = false;
  const auto model = make_model(spec, d.dims());
  TrainConfig cfg;
  cfg.seed = 6;
  cfg.weight_decay = 1.0 / (prior_sd * prior_sd);
  cfg.sgld.enabled = true;
  cfg.sgld.steps = 400000;
  cfg.sgld.burn_in = 0.05;
  cfg.sgld.thinning = 20;
  cfg.sgld.step_size = 2e-3;
  const auto post = sgld_sample(*model, d, nullptr, cfg, {}, std::vector<double>{0.0});
  std::vector<double> b;
  for (const auto& s : post.samples) b.push_back(s[0]);
  double mean = 0.0;
  for (double v : b) mean += v;
  mean /= static_cast<double>(b.size());
  double var = 0.0;
  for (double v : b) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(b.size() - 1));
  std::sort(b.begin(), b.end());
  const double lo = percentile(b, 0.025), hi = percentile(b, 0.975);
  const double glo = grid.quantile(0.025), ghi = grid.quantile(0.975);
  const double secs = seconds_since(t0);
  const double e_mean = std::abs(mean - grid.mean) / std::abs(grid.mean);
  const double e_sd = std::abs(sd - grid.sd) / grid.sd;
  const double e_lo = std::abs(lo - glo) / std::abs(glo);
  const double e_hi = std::abs(hi - ghi) / std::abs(ghi);
  return {e_mean <= 0.05 && e_sd <= 0.10 && e_lo <= 0.10 && e_hi <= 0.10 && secs < 120.0,
          fmt("mean %.3f vs %.3f, sd %.3f vs %.3f, 95%% [%.3f, %.3f] vs [%.3f, %.3f], %zu samples, %.1fs", mean,
              grid.mean, sd, grid.sd, lo, hi, glo, ghi, b.size(), secs)};
}

// ---- AC7 ------------------------------------------------------------------------------------

Outcome swa_exactness() {
  const ChoiceDataset d = fixture::binary_data(60, 2, 1, 707);
  ModelSpec spec;
  spec.fc_layers = 1;
  spec.fc_width = 4;
  const auto model = make_model(spec, d.dims());
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.05;
  cfg.swa_cycle = 3;
  const TrainResult swa = train_swa(*model, d, d.graph_ptr(), cfg);
  const std::size_t m = swa.swa_iterates.size();
  double worst = 0.0, scale = 0.0;
  for (std::size_t p = 0; p < swa.weights.values.size(); ++p) {
    long double s = 0.0L;
    for (const auto& it : swa.swa_iterates) s += it[p];
    const double mean = static_cast<double>(s / static_cast<long double>(m));
    worst = std::max(worst, std::abs(mean - swa.weights.values[p]));
    scale = std::max(scale, std::abs(mean));
  }
  // The stored iterates must be the plain SGD trajectory at every cycle.
  const TrainResult sgd = train_sgd(*model, d, d.graph_ptr(), cfg);
  const bool trajectory = swa.updates % cfg.swa_cycle == 0 && m == swa.updates / cfg.swa_cycle &&
                          swa.swa_iterates.back() == sgd.weights.values;
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
  return {worst <= tol && trajectory && m > 1,
          fmt("%zu iterates, max |average - mean| = %.1e (tol %.1e), trajectory %s", m, worst, tol,
              trajectory ? "matches SGD" : "MISMATCH")};
}

// ---- AC8 ------------------------------------------------------------------------------------

Outcome parameter_recovery() {
  const auto t0 = Clock::now();
  std::size_t ok = 0;
  double worst_opt = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    SimulationSpec s;
    s.process = Process::logit;
    s.n = 500;
    s.beta = {1.0, -1.0};
    s.intercept = 0.5;
    s.seed = seed;
    const Simulation sim = simulate(s, simulation_graph(s));
    ModelSpec spec;
    spec.kind = ModelKind::logit;
    const auto model = make_model(spec, sim.data.dims());
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.weight_decay = 0.0;
    cfg.class_weights = {1.0, 1.0};
    cfg.learning_rate = 2.0;
    cfg.momentum = true;
    cfg.epochs = 400;
    const TrainResult fit = train_sgd(*model, sim.data, nullptr, cfg);
    const ParamLayout& layout = model->layout();
    const double b0 = fit.weights.values[layout.block(layout.index_of("beta")).offset];
    const double b1 = fit.weights.values[layout.block(layout.index_of("beta")).offset + 1];
    const double c = fit.weights.values[layout.block(layout.index_of("intercept")).offset];

    oracle::Mat x;
    for (std::size_t i = 0; i < s.n; ++i) x.push_back({sim.data.x(i, 0), sim.data.x(i, 1), 1.0});
    const auto mle = oracle::newton_logit(x, sim.data.y);
    worst_opt = std::max({worst_opt, std::abs(b0 - mle.coef[0]), std::abs(b1 - mle.coef[1]), std::abs(c - mle.coef[2])});
    const bool all = std::abs(b0 - 1.0) <= 3 * mle.se[0] && std::abs(b1 + 1.0) <= 3 * mle.se[1] &&
                     std::abs(c - 0.5) <= 3 * mle.se[2];
    ok += all;
  }
  return {ok >= 95 && worst_opt <= 1e-6,
          fmt("%zu/100 seeds within 3 SE on every coefficient; max |fit - Newton MLE| = %.1e, %.1fs", ok, worst_opt,
              seconds_since(t0))};
}

// ---- AC9 ------------------------------------------------------------------------------------

Outcome network_effect_detection() {
  const auto t0 = Clock::now();
  std::size_t wins = 0;
  double gnn_total = 0.0, logit_total = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SimulationSpec s;
    s.process = Process::sal;
    s.n = 400;
    s.rho = 0.5;
    s.beta = {2.0, -2.0};
    s.seed = seed;
    const Simulation sim = simulate(s, normalize(simulation_graph(s), Normalization::row));
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.learning_rate = 0.1;
    cfg.momentum = true;
    cfg.epochs = 300;
    cfg.weight_decay = 1e-3;
    ModelSpec gnn;
    gnn.fc_layers = 0;
    gnn.gcn_layers = 2;
    gnn.activation = Activation::identity;
    ModelSpec logit;
    logit.kind = ModelKind::logit;
    const double a_gnn = kfold_cv(gnn, sim.data, sim.data.graph_ptr(), cfg, 5).mean;
    const double a_logit = kfold_cv(logit, sim.data, nullptr, cfg, 5).mean;
    wins += a_gnn > a_logit;
    gnn_total += a_gnn;
    logit_total += a_logit;
  }
  return {wins >= 16, fmt("Skip-GNN ahead in %zu/20 seeds; mean accuracy %.4f vs %.4f, %.1fs", wins, gnn_total / 20,
                          logit_total / 20, seconds_since(t0))};
}

// ---- AC10 -----------------------------------------------------------------------------------

Outcome econometric_reductions() {
  const ChoiceDataset d = fixture::binary_data(80, 2, 0, 1010, false);
  ChoiceDataset named = d;
  named.attribute_names = {"time", "cost"};
  ModelSpec spec;
  spec.kind = ModelKind::logit;
  const auto model = make_model(spec, named.dims());
  TrainConfig cfg;
  cfg.seed = 10;
  cfg.epochs = 100;
  cfg.learning_rate = 0.5;
  const Weights w = train_sgd(*model, named, nullptr, cfg).weights;

  const auto mu = marginal_utilities(*model, w, nullptr, named, {"time", "cost"});
  double spread = 0.0;
  for (std::size_t c = 0; c < 2; ++c) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < named.size(); ++i) {
      lo = std::min(lo, mu.values(i, c));
      hi = std::max(hi, mu.values(i, c));
    }
    spread = std::max(spread, hi - lo);
  }
  const ParamLayout& layout = model->layout();
  const double bt = w.values[layout.block(layout.index_of("beta")).offset];
  const double bc = w.values[layout.block(layout.index_of("beta")).offset + 1];
  std::vector<double> mt, mc;
  for (std::size_t i = 0; i < named.size(); ++i) {
    mt.push_back(mu.values(i, 0));
    mc.push_back(mu.values(i, 1));
  }
  const VottEstimates v = vott(mt, mc);
  bool exact = true;
  for (const auto& e : v.values) exact = exact && e && *e == bt / bc * 60.0;
  const auto up = odds_ratio(*model, w, nullptr, named, "time", 5.0);
  const auto down = odds_ratio(*model, w, nullptr, named, "time", -5.0);
  double or_err = 0.0;
  for (std::size_t i = 0; i < up.size(); ++i) or_err = std::max(or_err, std::abs(up[i] * down[i] - 1.0));

  const Weights reported{logit_weights(*model, {{-0.022, -0.101}, {}, 0.0}), {}};
  const auto mu_r = marginal_utilities(*model, reported, nullptr, named, {"time", "cost"});
  const VottEstimates vr = vott({mu_r.values(0, 0)}, {mu_r.values(0, 1)});
  const double reported_vott = *vr.values[0];
  return {spread <= 1e-12 && exact && or_err <= 1e-12 && std::abs(reported_vott - 13.07) <= 0.01,
          fmt("mu spread %.1e, VOTT exact %s, max |OR(d)OR(-d) - 1| = %.1e, VOTT(-0.022, -0.101) = %.4f USD/h",
              spread, exact ? "yes" : "no", or_err, reported_vott)};
}

// ---- AC11 -----------------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"netchoice"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (rc != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return rc;
}

Outcome determinism() {
  fixture::TempDir dir("determinism");
  const auto cfg_path = dir / "run.json";
  {
    std::ofstream f(cfg_path);
    f << R"({"seed": 11,
  "data": {"features": "sim/features.csv", "graph": "sim/graph.csv", "manifest": "sim/manifest.json"},
  "simulation": {"process": "sal", "n": 120, "rho": 0.4},
  "model": {"kind": "skip_gnn", "fc_layers": 1, "fc_width": 6, "gcn_layers": 2},
  "train": {"learning_rate": 0.05, "epochs": 40, "batch_size": 32, "momentum": true,
            "sgld": {"enabled": true, "steps": 1000, "thinning": 40, "step_size": 1e-4}},
  "cv": {"folds": 4},
  "posterior": {"functionals": [{"kind": "marginal_utility", "variable": "x1"},
                                {"kind": "vott", "time": "x1", "cost": "x2"}]}})";
  }
  const std::string cfg = cfg_path.string();
  if (run_cli({"simulate", "--config", cfg, "--out", (dir / "sim").string()}) != 0) return {false, "simulate failed"};
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (const char* command : {"train", "cv", "posterior"}) {
    const auto a = dir / (std::string(command) + "-a");
    const auto b = dir / (std::string(command) + "-b");
    if (run_cli({command, "--config", cfg, "--out", a.string()}) != 0 ||
        run_cli({command, "--config", cfg, "--out", b.string()}) != 0)
      return {false, std::string(command) + " failed"};
    for (const auto& entry : std::filesystem::directory_iterator(a)) {
      ++files;
      const auto other = b / entry.path().filename();
      if (!std::filesystem::exists(other) || slurp(entry.path()) != slurp(other))
        differing.push_back(std::string(command) + "/" + entry.path().filename().string());
    }
    if (std::distance(std::filesystem::directory_iterator(b), {}) != std::distance(std::filesystem::directory_iterator(a), {}))
      differing.push_back(std::string(command) + " file sets");
  }
  std::string detail = fmt("%zu artifact files compared across train, cv, posterior reruns", files);
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && files > 0, detail};
}

// ---- AC12 -----------------------------------------------------------------------------------

Outcome batchnorm_contract() {
  std::mt19937_64 rng(1212);
  const std::size_t n = 64;
  DenseMatrix z = fixture::normal_matrix(n, 5, rng);
  for (std::size_t i = 0; i < n; ++i) {
    z(i, 1) = 1e3 + 40.0 * z(i, 1);
    z(i, 2) *= 1e-2;  // sd 0.01
    z(i, 3) = -7.0 + 1e4 * z(i, 3);
  }
  // Column 4 rescaled to variance exactly 1e-3 (the edge of the contract).
  {
    std::vector<double> mean, var;
    ad::column_moments(z, {}, mean, var);
    for (std::size_t i = 0; i < n; ++i) z(i, 4) = (z(i, 4) - mean[4]) * std::sqrt(1e-3 / var[4]) + 3.0;
  }
  ad::Tape tape;
  ad::BatchNormStats running;
  const ad::Var out = ad::batchnorm(tape.constant(z), ad::Mode::train, &running);
  std::vector<double> mean, var, in_mean, in_var;
  ad::column_moments(tape.value(out), {}, mean, var);
  ad::column_moments(z, {}, in_mean, in_var);
  double worst_mean = 0.0, worst_var = 0.0;
  for (std::size_t c = 0; c < 5; ++c) {
    if (in_var[c] < 1e-3 * (1 - 1e-12)) continue;
    worst_mean = std::max(worst_mean, std::abs(mean[c]));
    worst_var = std::max(worst_var, std::abs(var[c] - 1.0));
  }

  // Infer mode on a trained model: whole-sample statistics, independent of
  // how rows are ordered or batched.
  const ChoiceDataset d = fixture::binary_data(50, 2, 1, 1213);
  ModelSpec spec;
  spec.fc_layers = 1;
  spec.fc_width = 4;
  const auto model = make_model(spec, d.dims());
  TrainConfig cfg;
  cfg.seed = 12;
  cfg.epochs = 20;
  cfg.batch_size = 10;
  cfg.learning_rate = 0.05;
  const Weights w = train_sgd(*model, d, d.graph_ptr(), cfg).weights;
  const bool whole = w.batchnorm == whole_sample_statistics(*model, w.values, d.x, d.q, d.graph_ptr());

  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const ChoiceDataset shuffled = subset(d, perm);
  const auto base = predict(*model, w, d.x, d.q, d.graph_ptr()).utilities;
  const auto moved = predict(*model, w, shuffled.x, shuffled.q, shuffled.graph_ptr()).utilities;
  double order_gap = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) order_gap = std::max(order_gap, std::abs(moved(i, 0) - base(perm[i], 0)));

  // Row-level check on the layer itself: one row at a time equals the batch.
  ad::Tape t2;
  const ad::Var full = ad::batchnorm(t2.constant(z), ad::Mode::infer, &running);
  double row_gap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    DenseMatrix row(1, 5);
    for (std::size_t c = 0; c < 5; ++c) row(0, c) = z(i, c);
    const ad::Var one = ad::batchnorm(t2.constant(row), ad::Mode::infer, &running);
    for (std::size_t c = 0; c < 5; ++c) row_gap = std::max(row_gap, std::abs(t2.value(one)(0, c) - t2.value(full)(i, c)));
  }
  return {worst_mean <= 1e-9 && worst_var <= 1e-6 && whole && order_gap <= 1e-12 && row_gap == 0.0,
          fmt("train |mean| <= %.1e, |var-1| <= %.1e; infer whole-sample stats %s, reorder gap %.1e, row-wise gap %.1e",
              worst_mean, worst_var, whole ? "yes" : "NO", order_gap, row_gap)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"AC1", "gradient fidelity", gradient_fidelity},
      {"AC2", "SAL limit of the restricted Skip-GNN", sal_limit},
      {"AC3", "fixed point vs direct solve", fixed_point_vs_solve},
      {"AC4", "structural IIA", structural_iia},
      {"AC5", "identification guard", identification_guard},
      {"AC6", "SGLD calibration", sgld_calibration},
      {"AC7", "SWA exactness", swa_exactness},
      {"AC8", "parameter recovery", parameter_recovery},
      {"AC9", "network-effect detection", network_effect_detection},
      {"AC10", "econometric reductions", econometric_reductions},
      {"AC11", "determinism", determinism},
      {"AC12", "batch normalisation contract", batchnorm_contract},
  };
  const std::string only = argc > 1 ? argv[1] : "";
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && only != c.id) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %-5s %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
