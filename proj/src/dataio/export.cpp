#include <fstream>

#include "netchoice/csv.hpp"
#include "netchoice/dataio.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

namespace {

std::string cell(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

nlohmann::json cv_summary(const CvReport& cv) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : cv.folds) folds.push_back(f.accuracy);
  return {{"folds", cv.folds.size()}, {"mean_weighted_accuracy", cv.mean}, {"fold_seed", cv.seed},
          {"fold_accuracy", folds}};
}

void write_cv(const CvReport& cv, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.row({"fold", "train_size", "test_size", "seed", "weighted_accuracy", "flagged"});
  for (const auto& f : cv.folds) {
    out.row({std::to_string(f.fold), std::to_string(f.train_size), std::to_string(f.test_size), std::to_string(f.seed),
             csv::format_double(f.accuracy), f.flagged ? "1" : "0"});
  }
  out.close();
}

void write_trials(const SearchResult& search, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.row({"trial", "point", "fc_width", "fc_layers", "gcn_layers", "weight_decay", "learning_rate",
           "mean_weighted_accuracy"});
  for (const auto& t : search.trials) {
    out.row({std::to_string(t.trial), std::to_string(t.point), std::to_string(t.spec.fc_width),
             std::to_string(t.spec.fc_layers), std::to_string(t.spec.gcn_layers),
             csv::format_double(t.train.weight_decay), csv::format_double(t.train.learning_rate),
             csv::format_double(t.cv.mean)});
  }
  out.close();
}

void write_individuals(const IndividualTable& table, const std::filesystem::path& path) {
  const bool intervals = !table.intervals.empty();
  if (table.ids.size() != table.estimates.size() || (intervals && table.intervals.size() != table.ids.size())) {
    throw ShapeError("individual table '" + table.name + "' has columns of different lengths");
  }
  csv::Writer out(path);
  if (intervals)
    out.row({"id", "estimate", "lower", "median", "upper"});
  else
    out.row({"id", "estimate"});
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    if (!intervals) {
      out.row({table.ids[i], cell(table.estimates[i])});
      continue;
    }
    const Interval& iv = table.intervals[i];
    if (iv.defined)
      out.row({table.ids[i], cell(table.estimates[i]), csv::format_double(iv.lower), csv::format_double(iv.median),
               csv::format_double(iv.upper)});
    else
      out.row({table.ids[i], cell(table.estimates[i]), "", "", ""});
  }
  out.close();
}

void write_histogram(const Histogram& h, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.row({"lower", "upper", "count"});
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out.row({csv::format_double(h.edges[b]), csv::format_double(h.edges[b + 1]), std::to_string(h.counts[b])});
  }
  out.close();
}

}  // namespace

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::filesystem::path> export_results(const ExportBundle& bundle, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::filesystem::path& name) {
    written.push_back(out_dir / name);
    return written.back();
  };
  write_json(bundle.config, emit("config.json"));

  const bool any = !bundle.metrics.is_null() || bundle.cv || bundle.search || !bundle.individuals.empty() ||
                   !bundle.histograms.empty();
  if (!any) return written;

  nlohmann::json summary = nlohmann::json::object();
  if (!bundle.metrics.is_null()) summary["metrics"] = bundle.metrics;
  if (bundle.cv) {
    summary["cv"] = cv_summary(*bundle.cv);
    write_cv(*bundle.cv, emit("cv_folds.csv"));
  }
  if (bundle.search) {
    const auto& best = bundle.search->trials.at(bundle.search->best);
    summary["search"] = {{"trials", bundle.search->trials.size()},
                         {"best_trial", best.trial},
                         {"best_mean_weighted_accuracy", best.cv.mean},
                         {"best_model", to_json(best.spec)},
                         {"best_train", to_json(best.train)}};
    write_trials(*bundle.search, emit("trials.csv"));
  }
  nlohmann::json files = nlohmann::json::array();
  for (const auto& t : bundle.individuals) {
    write_individuals(t, emit(t.name + ".csv"));
    files.push_back(t.name + ".csv");
  }
  for (const auto& h : bundle.histograms) {
    write_histogram(h.histogram, emit(h.name + "_histogram.csv"));
    files.push_back(h.name + "_histogram.csv");
  }
  if (!files.empty()) summary["files"] = files;
  write_json(summary, emit("summary.json"));
  return written;
}

IndividualTable read_individual_table(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw LoadError("file not found: " + path.string());
  const csv::Table table = csv::read_table(path);
  IndividualTable out;
  out.name = path.stem().string();
  const bool intervals = table.header.size() == 5;
  if (table.header.size() != 2 && !intervals) throw LoadError(path.string() + ": unexpected header");
  auto value = [&](const std::string& s, std::size_t line) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    const auto v = csv::parse_double(s);
    if (!v) throw LoadError(path.string() + ":" + std::to_string(line) + ": non-numeric value '" + s + "'");
    return v;
  };
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    if (row.size() != table.header.size()) throw LoadError(path.string() + ":" + std::to_string(line) + ": bad row");
    out.ids.push_back(row[0]);
    out.estimates.push_back(value(row[1], line));
    if (intervals) {
      const auto lo = value(row[2], line), md = value(row[3], line), hi = value(row[4], line);
      out.intervals.push_back(lo ? Interval{*lo, *md, *hi, true} : Interval{0.0, 0.0, 0.0, false});
    }
  }
  return out;
}

}  // namespace netchoice
