#include <fstream>
#include <sstream>

#include "netchoice/csv.hpp"
#include "netchoice/error.hpp"
#include "netchoice/models.hpp"

namespace netchoice {

namespace {

constexpr const char* kFormat = "netchoice-checkpoint";

// Doubles are written as shortest round-trip strings so nothing depends on
// the JSON library's float printing.
nlohmann::json encode(std::span<const double> v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(csv::format_double(x));
  return out;
}

std::vector<double> decode(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw LoadError(std::string("checkpoint field '") + what + "' must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& item : j) {
    if (!item.is_string()) throw LoadError(std::string("checkpoint field '") + what + "' holds a non-string entry");
    const auto v = csv::parse_double(item.get<std::string>());
    if (!v) throw LoadError(std::string("checkpoint field '") + what + "' holds '" + item.get<std::string>() + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["spec"] = to_json(checkpoint.spec);
  j["dims"] = to_json(checkpoint.dims);
  j["parameters"] = encode(checkpoint.weights.values);
  j["batchnorm"] = {{"ready", checkpoint.weights.batchnorm.ready},
                    {"mean", encode(checkpoint.weights.batchnorm.mean)},
                    {"var", encode(checkpoint.weights.batchnorm.var)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != kFormat) throw LoadError(path.string() + " is not a checkpoint file");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw LoadError("checkpoint " + path.string() + " has unsupported version " + j.value("version", nlohmann::json()).dump());
  }
  Checkpoint c;
  try {
    c.spec = model_spec_from_json(j.at("spec"));
    c.dims = model_dims_from_json(j.at("dims"));
    c.weights.values = decode(j.at("parameters"), "parameters");
    const auto& bn = j.at("batchnorm");
    c.weights.batchnorm.ready = bn.at("ready").get<bool>();
    c.weights.batchnorm.mean = decode(bn.at("mean"), "batchnorm.mean");
    c.weights.batchnorm.var = decode(bn.at("var"), "batchnorm.var");
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("checkpoint " + path.string() + ": " + e.what());
  } catch (const ParameterError& e) {
    throw LoadError("checkpoint " + path.string() + ": " + e.what());
  }
  const auto model = make_model(c.spec, c.dims);
  if (model->layout().size() != c.weights.values.size()) {
    throw LoadError("checkpoint " + path.string() + " holds " + std::to_string(c.weights.values.size()) +
                    " parameters, the model needs " + std::to_string(model->layout().size()));
  }
  return c;
}

}  // namespace netchoice
