#include "netchoice/cli.hpp"

#include <cmath>
#include <optional>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "netchoice/csv.hpp"
#include "netchoice/error.hpp"
#include "netchoice/log.hpp"

namespace netchoice::cli {

namespace {

namespace fs = std::filesystem;

Manifest run_manifest(const RunConfig& cfg) {
  if (cfg.data.manifest) return *cfg.data.manifest;
  if (cfg.data.manifest_path) return load_manifest(*cfg.data.manifest_path);
  throw ParameterError("config: data.manifest is required");
}

ChoiceDataset run_data(const RunConfig& cfg, const ModelSpec& spec) {
  if (cfg.data.features.empty()) throw ParameterError("config: data.features is required");
  const bool needs_graph = spec.kind != ModelKind::logit;
  if (needs_graph && !cfg.data.graph) {
    throw ParameterError("config: model '" + to_string(spec.kind) + "' needs data.graph");
  }
  return load_dataset(cfg.data.features, cfg.data.graph, run_manifest(cfg), cfg.data.normalization);
}

void prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out.string() + ": " + ec.message());
}

double train_accuracy(const ChoiceModel& model, const Weights& w, const ChoiceDataset& data) {
  const ForwardResult r = predict(model, w, data.x, data.q, data.graph_ptr());
  return weighted_accuracy(predict_classes(r.probabilities, model.head()), data.y, data.alternatives);
}

std::vector<double> defined_values(const std::vector<std::optional<double>>& v) {
  std::vector<double> out;
  for (const auto& x : v)
    if (x) out.push_back(*x);
  return out;
}

void cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  prepare_out(cfg);
  const SimulationSpec& spec = cfg.simulation;
  const AdjacencyGraph raw = simulation_graph(spec);
  const AdjacencyGraph w = spec.normalization == Normalization::none ? raw : normalize(raw, spec.normalization);
  const Simulation sim = simulate(spec, w);
  const Manifest manifest = default_manifest(sim.data);

  write_features(sim.data, manifest, cfg.out / "features.csv");
  write_json(to_json(manifest), cfg.out / "manifest.json");
  write_edge_list(raw, cfg.out / "graph.csv");
  csv::Writer latent(cfg.out / "latent.csv");
  latent.row({"id", "latent", "private_utility", "epsilon"});
  for (std::size_t i = 0; i < sim.latent.size(); ++i) {
    latent.row({sim.data.ids[i], csv::format_double(sim.latent[i]), csv::format_double(sim.private_utility[i]),
                csv::format_double(sim.epsilon[i])});
  }
  latent.close();

  double chosen = 0.0;
  for (int y : sim.data.y) chosen += y;
  ExportBundle bundle;
  bundle.config = to_json(cfg);
  bundle.metrics = {{"n", spec.n},
                    {"process", to_string(spec.process)},
                    {"edges", raw.nnz()},
                    {"share_choosing_1", chosen / static_cast<double>(spec.n)}};
  export_results(bundle, cfg.out);
  out << "simulated " << spec.n << " rows (" << to_string(spec.process) << ") into " << cfg.out.string() << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  const ChoiceDataset data = run_data(cfg, cfg.model);
  prepare_out(cfg);
  const auto model = make_model(cfg.model, data.dims());
  const TrainResult fit = cfg.train.swa_cycle > 0 ? train_swa(*model, data, data.graph_ptr(), cfg.train)
                                                  : train_sgd(*model, data, data.graph_ptr(), cfg.train);
  const Checkpoint checkpoint{cfg.model, data.dims(), fit.weights};
  const fs::path path = cfg.out / "checkpoint.json";
  save_checkpoint(checkpoint, path);
  if (load_checkpoint(path).weights != fit.weights) throw IoError("checkpoint " + path.string() + " failed to verify");

  csv::Writer log(cfg.out / "training_log.csv");
  log.row({"epoch", "loss"});
  for (std::size_t e = 0; e < fit.epoch_loss.size(); ++e) {
    log.row({std::to_string(e + 1), csv::format_double(fit.epoch_loss[e])});
  }
  log.close();

  ExportBundle bundle;
  bundle.config = to_json(cfg);
  bundle.metrics = {{"model", to_string(cfg.model.kind)},
                    {"parameters", model->layout().size()},
                    {"updates", fit.updates},
                    {"final_loss", fit.epoch_loss.back()},
                    {"train_weighted_accuracy", train_accuracy(*model, fit.weights, data)}};
  export_results(bundle, cfg.out);
  out << "trained " << to_string(cfg.model.kind) << " on " << data.size() << " rows; checkpoint " << path.string()
      << "\n";
}

void cmd_cv(const RunConfig& cfg, std::ostream& out) {
  const ChoiceDataset data = run_data(cfg, cfg.model);
  prepare_out(cfg);
  spdlog::info("fold assignment seed {}", cfg.train.seed);
  ExportBundle bundle;
  bundle.config = to_json(cfg);
  bundle.cv = kfold_cv(cfg.model, data, data.graph_ptr(), cfg.train, cfg.folds, cfg.jobs);
  bundle.metrics = {{"mean_weighted_accuracy", bundle.cv->mean}};
  export_results(bundle, cfg.out);
  out << cfg.folds << "-fold mean weighted accuracy " << csv::format_double(bundle.cv->mean) << "\n";
}

void cmd_gridsearch(const RunConfig& cfg, std::ostream& out) {
  const ChoiceDataset data = run_data(cfg, cfg.model);
  prepare_out(cfg);
  ExportBundle bundle;
  bundle.config = to_json(cfg);
  bundle.search = random_grid_search(cfg.model, cfg.space, cfg.trials, data, data.graph_ptr(), cfg.train, cfg.folds,
                                     cfg.jobs);
  const auto& best = bundle.search->trials[bundle.search->best];
  bundle.metrics = {{"best_trial", best.trial}, {"best_mean_weighted_accuracy", best.cv.mean}};
  export_results(bundle, cfg.out);
  out << bundle.search->trials.size() << " trials; best trial " << best.trial << " with mean weighted accuracy "
      << csv::format_double(best.cv.mean) << "\n";
}

void cmd_posterior(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.train.sgld.enabled) throw ParameterError("posterior needs train.sgld.enabled = true");
  const ChoiceDataset data = run_data(cfg, cfg.model);
  prepare_out(cfg);
  const auto model = make_model(cfg.model, data.dims());
  const AdjacencyGraph* graph = data.graph_ptr();
  std::vector<double> start;
  if (cfg.posterior.warm_start) start = train_sgd(*model, data, graph, cfg.train).weights.values;
  const PosteriorSamples samples = sgld_sample(*model, data, graph, cfg.train, {}, start);

  csv::Writer sw(cfg.out / "samples.csv");
  std::vector<std::string> header{"sample", "step", "step_size"};
  for (const auto& block : model->layout().blocks())
    for (std::size_t i = 0; i < block.size(); ++i) header.push_back(block.name + "[" + std::to_string(i) + "]");
  sw.row(header);
  for (std::size_t s = 0; s < samples.samples.size(); ++s) {
    std::vector<std::string> row{std::to_string(s), std::to_string(samples.steps[s]),
                                 csv::format_double(samples.step_sizes[s])};
    for (double v : samples.samples[s]) row.push_back(csv::format_double(v));
    sw.row(row);
  }
  sw.close();

  ExportBundle bundle;
  bundle.config = to_json(cfg);
  nlohmann::json summaries = nlohmann::json::object();
  for (const auto& f : cfg.posterior.functionals) {
    std::vector<std::vector<std::optional<double>>> draws;
    for (std::size_t s = 0; s < samples.samples.size(); ++s) {
      const Weights w{samples.samples[s], samples.batchnorm[s]};
      draws.push_back(evaluate_functional(*model, w, graph, data, f));
    }
    IndividualTable table;
    table.name = f.label();
    table.ids = data.ids;
    table.intervals = credible_intervals(draws, cfg.posterior.level);
    std::vector<double> medians;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& d : draws)
        if (d[i]) {
          sum += *d[i];
          ++count;
        }
      table.estimates.push_back(count > 0 && table.intervals[i].defined
                                    ? std::optional<double>(sum / static_cast<double>(count))
                                    : std::nullopt);
      if (table.intervals[i].defined) medians.push_back(table.intervals[i].median);
    }
    std::vector<double> sorted = medians;
    std::sort(sorted.begin(), sorted.end());
    summaries[table.name] = {{"individuals_defined", medians.size()},
                             {"median_of_medians", sorted.empty() ? nlohmann::json() : nlohmann::json(percentile(sorted, 0.5))}};
    bundle.histograms.push_back({table.name, histogram(medians, cfg.posterior.bins)});
    bundle.individuals.push_back(std::move(table));
  }
  bundle.metrics = {{"samples", samples.samples.size()}, {"level", cfg.posterior.level}, {"functionals", summaries}};
  export_results(bundle, cfg.out);
  out << "kept " << samples.samples.size() << " posterior samples\n";
}

void cmd_infer(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.checkpoint) throw ParameterError("config: infer.checkpoint is required");
  const Checkpoint checkpoint = load_checkpoint(*cfg.checkpoint);
  const ChoiceDataset data = run_data(cfg, checkpoint.spec);
  if (!(data.dims() == checkpoint.dims)) {
    throw DataError("dataset dimensions " + to_json(data.dims()).dump() + " do not match the checkpoint's " +
                    to_json(checkpoint.dims).dump());
  }
  prepare_out(cfg);
  const auto model = make_model(checkpoint.spec, checkpoint.dims);
  const AdjacencyGraph* graph = data.graph_ptr();
  const ForwardResult r = predict(*model, checkpoint.weights, data.x, data.q, graph);
  const std::vector<int> predicted = predict_classes(r.probabilities, model->head());

  csv::Writer pw(cfg.out / "predictions.csv");
  std::vector<std::string> header{"id", "choice", "predicted"};
  for (std::size_t c = 0; c < r.probabilities.cols(); ++c)
    header.push_back(model->head() == ad::Head::sigmoid ? "p_1" : "p_" + std::to_string(c));
  pw.row(header);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<std::string> row{data.ids[i], std::to_string(data.y[i]), std::to_string(predicted[i])};
    for (double p : r.probabilities.row(i)) row.push_back(csv::format_double(p));
    pw.row(row);
  }
  pw.close();

  ExportBundle bundle;
  bundle.config = to_json(cfg);
  nlohmann::json summaries = nlohmann::json::object();
  for (const auto& f : cfg.posterior.functionals) {
    IndividualTable table;
    table.name = f.label();
    table.ids = data.ids;
    table.estimates = evaluate_functional(*model, checkpoint.weights, graph, data, f);
    std::vector<double> values = defined_values(table.estimates);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    summaries[table.name] = {{"individuals_defined", values.size()},
                             {"median", sorted.empty() ? nlohmann::json() : nlohmann::json(percentile(sorted, 0.5))}};
    bundle.histograms.push_back({table.name, histogram(values, cfg.posterior.bins)});
    bundle.individuals.push_back(std::move(table));
  }
  bundle.metrics = {{"weighted_accuracy", weighted_accuracy(predicted, data.y, data.alternatives)},
                    {"loss", loss_weighted_xent(r.probabilities, data.y, {})},
                    {"functionals", summaries}};
  export_results(bundle, cfg.out);
  out << "scored " << data.size() << " rows with " << cfg.checkpoint->string() << "\n";
}

}  // namespace

void run_command(const std::string& command, const RunConfig& cfg, std::ostream& out) {
  if (command == "simulate") return cmd_simulate(cfg, out);
  if (command == "train") return cmd_train(cfg, out);
  if (command == "cv") return cmd_cv(cfg, out);
  if (command == "gridsearch") return cmd_gridsearch(cfg, out);
  if (command == "posterior") return cmd_posterior(cfg, out);
  if (command == "infer") return cmd_infer(cfg, out);
  throw ParameterError("unknown command '" + command + "'");
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Discrete choice estimation with network effects"};
  app.name("netchoice");
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> jobs;
  const char* descriptions[] = {"draw a synthetic dataset",
                                "fit a model and write a checkpoint",
                                "k-fold cross-validation",
                                "random grid search scored by cross-validation",
                                "SGLD posterior samples and credible intervals",
                                "predictions and economic quantities from a checkpoint"};
  std::size_t d = 0;
  for (const char* name : kCommands) {
    CLI::App* sub = app.add_subcommand(name, descriptions[d++]);
    sub->add_option("--config", config, "run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "override the run seed");
    sub->add_option("--out", out_dir, "override the output directory");
    sub->add_option("--jobs", jobs, "concurrent folds or trials")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig cfg = load_run_config(config);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out = *out_dir;
    if (jobs) cfg.jobs = *jobs;
    cfg.propagate_seed();
    run_command(command, cfg, out);
  } catch (const Error& e) {
    err << "netchoice " << command << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "netchoice " << command << ": unexpected failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace netchoice::cli
