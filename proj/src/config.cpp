#include "netchoice/config.hpp"

#include <algorithm>
#include <fstream>

#include "netchoice/error.hpp"

namespace netchoice {

namespace {

void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw ParameterError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParameterError("unknown " + what + " field '" + key + "'");
    }
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(where + "." + key + ": " + e.what());
  }
}

std::string schedule_name(StepSchedule s) { return s == StepSchedule::constant ? "constant" : "polynomial"; }

StepSchedule parse_schedule(const std::string& s) {
  if (s == "constant") return StepSchedule::constant;
  if (s == "polynomial") return StepSchedule::polynomial;
  throw ParameterError("unknown sgld schedule '" + s + "' (expected constant or polynomial)");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

// ---- training ----------------------------------------------------------------------------

nlohmann::json to_json(const TrainConfig& cfg) {
  const SgldConfig& s = cfg.sgld;
  return {{"learning_rate", cfg.learning_rate},
          {"weight_decay", cfg.weight_decay},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"momentum", cfg.momentum},
          {"class_weights", cfg.class_weights},
          {"swa_cycle", cfg.swa_cycle},
          {"sgld",
           {{"enabled", s.enabled},
            {"steps", s.steps},
            {"thinning", s.thinning},
            {"burn_in", s.burn_in},
            {"schedule", schedule_name(s.schedule)},
            {"step_size", s.step_size},
            {"decay_offset", s.decay_offset},
            {"noise", s.noise}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
  reject_unknown(j,
                 {"learning_rate", "weight_decay", "epochs", "batch_size", "momentum", "class_weights", "swa_cycle",
                  "sgld"},
                 "train");
  TrainConfig cfg = std::move(base);
  read(j, "learning_rate", cfg.learning_rate, "train");
  read(j, "weight_decay", cfg.weight_decay, "train");
  read(j, "epochs", cfg.epochs, "train");
  read(j, "batch_size", cfg.batch_size, "train");
  read(j, "momentum", cfg.momentum, "train");
  read(j, "class_weights", cfg.class_weights, "train");
  read(j, "swa_cycle", cfg.swa_cycle, "train");
  if (j.contains("sgld")) {
    const auto& s = j.at("sgld");
    reject_unknown(s, {"enabled", "steps", "thinning", "burn_in", "schedule", "step_size", "decay_offset", "noise"},
                   "train.sgld");
    read(s, "enabled", cfg.sgld.enabled, "train.sgld");
    read(s, "steps", cfg.sgld.steps, "train.sgld");
    read(s, "thinning", cfg.sgld.thinning, "train.sgld");
    read(s, "burn_in", cfg.sgld.burn_in, "train.sgld");
    std::string schedule = schedule_name(cfg.sgld.schedule);
    read(s, "schedule", schedule, "train.sgld");
    cfg.sgld.schedule = parse_schedule(schedule);
    read(s, "step_size", cfg.sgld.step_size, "train.sgld");
    read(s, "decay_offset", cfg.sgld.decay_offset, "train.sgld");
    read(s, "noise", cfg.sgld.noise, "train.sgld");
  }
  validate(cfg);
  return cfg;
}

nlohmann::json to_json(const SearchSpace& space) {
  return {{"fc_width", space.fc_width},
          {"fc_layers", space.fc_layers},
          {"gcn_layers", space.gcn_layers},
          {"weight_decay", space.weight_decay},
          {"learning_rate", space.learning_rate}};
}

SearchSpace search_space_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"fc_width", "fc_layers", "gcn_layers", "weight_decay", "learning_rate"}, "search.space");
  SearchSpace s;
  read(j, "fc_width", s.fc_width, "search.space");
  read(j, "fc_layers", s.fc_layers, "search.space");
  read(j, "gcn_layers", s.gcn_layers, "search.space");
  read(j, "weight_decay", s.weight_decay, "search.space");
  read(j, "learning_rate", s.learning_rate, "search.space");
  return s;
}

// ---- run configuration ---------------------------------------------------------------------

void RunConfig::propagate_seed() {
  train.seed = seed;
  simulation.seed = seed;
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j,
                 {"seed", "jobs", "out", "data", "model", "train", "cv", "search", "simulation", "posterior", "infer"},
                 "config");
  RunConfig cfg;
  read(j, "seed", cfg.seed, "config");
  read(j, "jobs", cfg.jobs, "config");
  if (j.contains("out")) {
    std::string out;
    read(j, "out", out, "config");
    cfg.out = resolve(base_dir, out);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"features", "graph", "manifest", "normalization"}, "data");
    std::string s;
    if (d.contains("features")) {
      read(d, "features", s, "data");
      cfg.data.features = resolve(base_dir, s);
    }
    if (d.contains("graph") && !d.at("graph").is_null()) {
      read(d, "graph", s, "data");
      cfg.data.graph = resolve(base_dir, s);
    }
    if (d.contains("manifest")) {
      if (d.at("manifest").is_object()) {
        try {
          cfg.data.manifest = manifest_from_json(d.at("manifest"));
        } catch (const LoadError& e) {
          throw ParameterError(std::string("data.manifest: ") + e.what());
        }
      } else {
        read(d, "manifest", s, "data");
        cfg.data.manifest_path = resolve(base_dir, s);
      }
    }
    if (d.contains("normalization")) {
      read(d, "normalization", s, "data");
      cfg.data.normalization = parse_normalization(s);
    }
  }
  if (j.contains("model")) cfg.model = model_spec_from_json(j.at("model"));
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  if (j.contains("cv")) {
    reject_unknown(j.at("cv"), {"folds"}, "cv");
    read(j.at("cv"), "folds", cfg.folds, "cv");
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    reject_unknown(s, {"trials", "space"}, "search");
    read(s, "trials", cfg.trials, "search");
    if (s.contains("space")) cfg.space = search_space_from_json(s.at("space"));
  }
  if (j.contains("simulation")) cfg.simulation = simulation_spec_from_json(j.at("simulation"));
  if (j.contains("posterior")) {
    const auto& p = j.at("posterior");
    reject_unknown(p, {"functionals", "level", "bins", "warm_start"}, "posterior");
    read(p, "level", cfg.posterior.level, "posterior");
    read(p, "bins", cfg.posterior.bins, "posterior");
    read(p, "warm_start", cfg.posterior.warm_start, "posterior");
    if (p.contains("functionals")) {
      if (!p.at("functionals").is_array()) throw ParameterError("posterior.functionals must be an array");
      for (const auto& f : p.at("functionals")) cfg.posterior.functionals.push_back(functional_from_json(f));
    }
  }
  if (j.contains("infer")) {
    reject_unknown(j.at("infer"), {"checkpoint"}, "infer");
    std::string s;
    read(j.at("infer"), "checkpoint", s, "infer");
    if (!s.empty()) cfg.checkpoint = resolve(base_dir, s);
  }
  if (cfg.jobs < 1) throw ParameterError("jobs must be at least 1");
  cfg.propagate_seed();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json data = {{"features", cfg.data.features.generic_string()},
                         {"normalization", to_string(cfg.data.normalization)}};
  data["graph"] = cfg.data.graph ? nlohmann::json(cfg.data.graph->generic_string()) : nlohmann::json();
  if (cfg.data.manifest)
    data["manifest"] = to_json(*cfg.data.manifest);
  else if (cfg.data.manifest_path)
    data["manifest"] = cfg.data.manifest_path->generic_string();
  nlohmann::json functionals = nlohmann::json::array();
  for (const auto& f : cfg.posterior.functionals) functionals.push_back(to_json(f));
  return {{"seed", cfg.seed},
          {"jobs", cfg.jobs},
          {"data", data},
          {"model", to_json(cfg.model)},
          {"train", to_json(cfg.train)},
          {"cv", {{"folds", cfg.folds}}},
          {"search", {{"trials", cfg.trials}, {"space", to_json(cfg.space)}}},
          {"simulation", to_json(cfg.simulation)},
          {"posterior",
           {{"functionals", functionals},
            {"level", cfg.posterior.level},
            {"bins", cfg.posterior.bins},
            {"warm_start", cfg.posterior.warm_start}}},
          {"infer",
           {{"checkpoint", cfg.checkpoint ? nlohmann::json(cfg.checkpoint->generic_string()) : nlohmann::json()}}}};
}

}  // namespace netchoice
