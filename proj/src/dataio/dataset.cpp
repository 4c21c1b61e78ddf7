#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include <spdlog/spdlog.h>

#include "netchoice/csv.hpp"
#include "netchoice/dataio.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

void ChoiceDataset::validate() const {
  const std::size_t n = y.size();
  if (alternatives < 2) throw DataError("a choice dataset needs at least 2 alternatives");
  const ModelDims d = dims();
  if (x.rows() != n || x.cols() != d.x_cols()) {
    throw DataError("X is " + shape_string(x) + ", expected " + std::to_string(n) + "x" + std::to_string(d.x_cols()));
  }
  if (q.rows() != n || q.cols() != sociodemographic_names.size()) {
    throw DataError("Q is " + shape_string(q) + ", expected " + std::to_string(n) + "x" +
                    std::to_string(sociodemographic_names.size()));
  }
  if (!ids.empty() && ids.size() != n) throw DataError("id count differs from row count");
  if (!x.all_finite() || !q.all_finite()) throw DataError("dataset holds non-finite values");
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= alternatives) {
      throw DataError("choice " + std::to_string(y[i]) + " at row " + std::to_string(i) + " is outside [0, " +
                      std::to_string(alternatives) + ")");
    }
  }
  if (graph && graph->n() != n) {
    throw DataError("graph has " + std::to_string(graph->n()) + " nodes for " + std::to_string(n) + " rows");
  }
}

ChoiceDataset subset(const ChoiceDataset& data, const std::vector<std::size_t>& rows) {
  ChoiceDataset out;
  out.alternatives = data.alternatives;
  out.alternative_blocks = data.alternative_blocks;
  out.attribute_names = data.attribute_names;
  out.sociodemographic_names = data.sociodemographic_names;
  out.x = DenseMatrix(rows.size(), data.x.cols());
  out.q = DenseMatrix(rows.size(), data.q.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t r = rows[k];
    if (r >= data.size()) throw ParameterError("subset row " + std::to_string(r) + " out of range");
    std::copy(data.x.row(r).begin(), data.x.row(r).end(), out.x.row(k).begin());
    std::copy(data.q.row(r).begin(), data.q.row(r).end(), out.q.row(k).begin());
    out.y.push_back(data.y[r]);
    if (!data.ids.empty()) out.ids.push_back(data.ids[r]);
  }
  if (data.graph) out.graph = data.graph->induced_subgraph(rows);
  return out;
}

// ---- manifest -------------------------------------------------------------------

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json j;
  if (!m.id.empty()) j["id"] = m.id;
  j["choice"] = m.choice;
  j["n_alternatives"] = m.alternatives;
  if (m.multinomial()) {
    j["alternatives"] = m.alternative_columns;
    j["attribute_names"] = m.attribute_names;
  } else {
    j["attributes"] = m.attributes;
  }
  j["sociodemographics"] = m.sociodemographics;
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw LoadError("manifest must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const std::vector<std::string> known{"id", "choice", "n_alternatives", "attributes", "alternatives",
                                                "attribute_names", "sociodemographics"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw LoadError("unknown manifest field '" + key + "'");
    }
  }
  Manifest m;
  try {
    m.id = j.value("id", std::string());
    m.choice = j.at("choice").get<std::string>();
    m.alternatives = j.value("n_alternatives", std::size_t{2});
    m.attributes = j.value("attributes", std::vector<std::string>{});
    m.alternative_columns = j.value("alternatives", std::vector<std::vector<std::string>>{});
    m.attribute_names = j.value("attribute_names", std::vector<std::string>{});
    m.sociodemographics = j.value("sociodemographics", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("manifest: ") + e.what());
  }
  if (m.alternatives < 2) throw LoadError("manifest: n_alternatives must be at least 2");
  if (m.multinomial()) {
    if (!m.attributes.empty()) throw LoadError("manifest: give either 'attributes' or 'alternatives', not both");
    if (m.alternative_columns.size() != m.alternatives) {
      throw LoadError("manifest: " + std::to_string(m.alternative_columns.size()) + " alternative column lists for " +
                      std::to_string(m.alternatives) + " alternatives");
    }
    const std::size_t k = m.alternative_columns.front().size();
    for (const auto& cols : m.alternative_columns)
      if (cols.size() != k) throw LoadError("manifest: alternatives list different numbers of attributes");
    if (m.attribute_names.empty()) m.attribute_names = m.alternative_columns.front();
    if (m.attribute_names.size() != k) throw LoadError("manifest: attribute_names length differs from the blocks");
  } else {
    if (m.alternatives != 2) {
      throw LoadError("manifest: more than 2 alternatives need per-alternative 'alternatives' column lists");
    }
    m.attribute_names = m.attributes;
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest " + path.string());
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
}

Manifest default_manifest(const ChoiceDataset& data) {
  Manifest m;
  m.id = "id";
  m.choice = "choice";
  m.alternatives = data.alternatives;
  m.attribute_names = data.attribute_names;
  m.sociodemographics = data.sociodemographic_names;
  if (data.alternative_blocks) {
    for (std::size_t j = 0; j < data.alternatives; ++j) {
      std::vector<std::string> cols;
      for (const auto& a : data.attribute_names) cols.push_back(a + "_" + std::to_string(j));
      m.alternative_columns.push_back(cols);
    }
  } else {
    m.attributes = data.attribute_names;
  }
  return m;
}

// ---- features ------------------------------------------------------------------------

namespace {

bool is_missing(const std::string& cell) {
  std::string s;
  for (char c : cell)
    if (c != ' ' && c != '\t') s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return s.empty() || s == "na" || s == "nan" || s == "null";
}

std::vector<std::string> feature_columns(const Manifest& m) {
  std::vector<std::string> cols;
  if (m.multinomial()) {
    for (const auto& block : m.alternative_columns) cols.insert(cols.end(), block.begin(), block.end());
  } else {
    cols = m.attributes;
  }
  return cols;
}

}  // namespace

ChoiceDataset load_dataset(const std::filesystem::path& features, const std::optional<std::filesystem::path>& graph,
                           const Manifest& manifest, Normalization normalization) {
  if (!std::filesystem::exists(features)) throw LoadError("feature file not found: " + features.string());
  const csv::Table table = csv::read_table(features);
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < table.header.size(); ++c) index[table.header[c]] = c;
  auto column = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw LoadError(features.string() + ": manifest column '" + name + "' not in header");
    return it->second;
  };
  const std::size_t choice_col = column(manifest.choice);
  const std::optional<std::size_t> id_col =
      manifest.id.empty() ? std::nullopt : std::optional<std::size_t>(column(manifest.id));
  std::vector<std::size_t> x_cols, q_cols;
  for (const auto& name : feature_columns(manifest)) x_cols.push_back(column(name));
  for (const auto& name : manifest.sociodemographics) q_cols.push_back(column(name));

  std::vector<std::size_t> kept;
  std::vector<double> xv, qv;
  ChoiceDataset data;
  data.alternatives = manifest.alternatives;
  data.alternative_blocks = manifest.multinomial();
  data.attribute_names = manifest.attribute_names;
  data.sociodemographic_names = manifest.sociodemographics;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    const std::string where = features.string() + ":" + std::to_string(line);
    if (row.size() != table.header.size()) {
      throw LoadError(where + ": " + std::to_string(row.size()) + " cells, header has " +
                      std::to_string(table.header.size()));
    }
    bool missing = is_missing(row[choice_col]);
    for (const std::size_t c : x_cols) missing = missing || is_missing(row[c]);
    for (const std::size_t c : q_cols) missing = missing || is_missing(row[c]);
    if (missing) {
      spdlog::warn("{}: row dropped for missing values", where);
      continue;
    }
    auto number = [&](std::size_t c) {
      const auto v = csv::parse_double(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw LoadError(where + ": column '" + table.header[c] + "' holds non-numeric value '" + row[c] + "'");
      }
      return *v;
    };
    const double choice = number(choice_col);
    if (choice != std::floor(choice) || choice < 0.0 || choice >= static_cast<double>(manifest.alternatives)) {
      throw LoadError(where + ": choice " + row[choice_col] + " is outside [0, " +
                      std::to_string(manifest.alternatives) + ")");
    }
    for (const std::size_t c : x_cols) xv.push_back(number(c));
    for (const std::size_t c : q_cols) qv.push_back(number(c));
    data.y.push_back(static_cast<int>(choice));
    data.ids.push_back(id_col ? row[*id_col] : std::to_string(r));
    kept.push_back(r);
  }
  if (kept.size() < table.rows.size()) {
    spdlog::warn("{}: kept {} of {} rows", features.string(), kept.size(), table.rows.size());
  }
  data.x = DenseMatrix(kept.size(), x_cols.size(), std::move(xv));
  data.q = DenseMatrix(kept.size(), q_cols.size(), std::move(qv));

  if (graph) {
    if (!std::filesystem::exists(*graph)) throw LoadError("graph file not found: " + graph->string());
    AdjacencyGraph g = read_edge_list(*graph, table.rows.size());
    if (g.n() != table.rows.size()) {
      throw LoadError(graph->string() + ": graph has " + std::to_string(g.n()) + " nodes for " +
                      std::to_string(table.rows.size()) + " feature rows");
    }
    if (kept.size() < table.rows.size()) g = g.induced_subgraph(kept);
    data.graph = normalization == Normalization::none ? std::move(g) : normalize(g, normalization);
  }
  data.validate();
  return data;
}

void write_features(const ChoiceDataset& data, const Manifest& manifest, const std::filesystem::path& path) {
  const std::vector<std::string> x_names = feature_columns(manifest);
  if (x_names.size() != data.x.cols() || manifest.sociodemographics.size() != data.q.cols()) {
    throw ShapeError("write_features: manifest does not match the dataset columns");
  }
  csv::Writer out(path);
  std::vector<std::string> header{manifest.id.empty() ? "id" : manifest.id, manifest.choice};
  header.insert(header.end(), x_names.begin(), x_names.end());
  header.insert(header.end(), manifest.sociodemographics.begin(), manifest.sociodemographics.end());
  out.row(header);
  std::vector<std::string> cells;
  for (std::size_t i = 0; i < data.size(); ++i) {
    cells.clear();
    cells.push_back(data.ids.empty() ? std::to_string(i) : data.ids[i]);
    cells.push_back(std::to_string(data.y[i]));
    for (double v : data.x.row(i)) cells.push_back(csv::format_double(v));
    for (double v : data.q.row(i)) cells.push_back(csv::format_double(v));
    out.row(cells);
  }
  out.close();
}

}  // namespace netchoice
