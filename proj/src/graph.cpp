#include "netchoice/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "netchoice/csv.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

std::string to_string(Normalization mode) {
  switch (mode) {
    case Normalization::none: return "none";
    case Normalization::row: return "row";
    case Normalization::symmetric: return "symmetric";
  }
  return "none";
}

Normalization parse_normalization(const std::string& name) {
  if (name == "none" || name == "raw") return Normalization::none;
  if (name == "row") return Normalization::row;
  if (name == "symmetric") return Normalization::symmetric;
  throw ParameterError("unknown normalization '" + name + "'");
}

AdjacencyGraph::AdjacencyGraph(std::size_t n) : n_(n), row_ptr_(n + 1, 0), t_row_ptr_(n + 1, 0) {}

AdjacencyGraph::AdjacencyGraph(std::size_t n, std::vector<Edge> edges, Normalization normalization)
    : n_(n), normalization_(normalization) {
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) {
      std::ostringstream os;
      os << "edge (" << e.src << "," << e.dst << ") out of range for " << n << " nodes";
      throw DataError(os.str());
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      std::ostringstream os;
      os << "edge (" << e.src << "," << e.dst << ") has invalid weight " << e.weight;
      throw DataError(os.str());
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  row_ptr_.assign(n + 1, 0);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (!col_idx_.empty() && i > 0 && edges[i - 1].src == e.src && edges[i - 1].dst == e.dst) {
      values_.back() += e.weight;
      continue;
    }
    col_idx_.push_back(e.dst);
    values_.push_back(e.weight);
    ++row_ptr_[e.src + 1];
  }
  std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
  build_transpose();
}

AdjacencyGraph AdjacencyGraph::identity(std::size_t n) {
  std::vector<Edge> edges;
  edges.reserve(n);
  for (std::size_t i = 0; i < n; ++i) edges.push_back({i, i, 1.0});
  return AdjacencyGraph(n, std::move(edges));
}

AdjacencyGraph AdjacencyGraph::from_dense(const DenseMatrix& w) {
  if (w.rows() != w.cols()) throw ShapeError("adjacency matrix must be square, got " + shape_string(w));
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j)
      if (w(i, j) != 0.0) edges.push_back({i, j, w(i, j)});
  return AdjacencyGraph(w.rows(), std::move(edges));
}

void AdjacencyGraph::build_transpose() {
  t_row_ptr_.assign(n_ + 1, 0);
  for (std::size_t c : col_idx_) ++t_row_ptr_[c + 1];
  std::partial_sum(t_row_ptr_.begin(), t_row_ptr_.end(), t_row_ptr_.begin());
  t_col_idx_.assign(col_idx_.size(), 0);
  t_values_.assign(values_.size(), 0.0);
  std::vector<std::size_t> cursor(t_row_ptr_.begin(), t_row_ptr_.end() - 1);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
      const std::size_t slot = cursor[col_idx_[e]]++;
      t_col_idx_[slot] = i;
      t_values_[slot] = values_[e];
    }
  }
}

std::vector<Edge> AdjacencyGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(values_.size());
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e)
      out.push_back({i, col_idx_[e], values_[e]});
  return out;
}

CsrView AdjacencyGraph::csr() const noexcept { return {n_, n_, row_ptr_, col_idx_, values_}; }

CsrView AdjacencyGraph::csr_transposed() const noexcept {
  return {n_, n_, t_row_ptr_, t_col_idx_, t_values_};
}

DenseMatrix AdjacencyGraph::densify() const {
  DenseMatrix d(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) d(i, col_idx_[e]) += values_[e];
  return d;
}

std::vector<double> AdjacencyGraph::row_sums() const {
  std::vector<double> sums(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) sums[i] += values_[e];
  return sums;
}

double AdjacencyGraph::max_row_sum() const {
  const auto sums = row_sums();
  return sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
}

bool AdjacencyGraph::is_symmetric(double tol) const {
  // The transpose shares the sorted-CSR layout, so compare entry by entry.
  if (row_ptr_ != t_row_ptr_ || col_idx_ != t_col_idx_) return false;
  for (std::size_t e = 0; e < values_.size(); ++e)
    if (std::abs(values_[e] - t_values_[e]) > tol) return false;
  return true;
}

AdjacencyGraph AdjacencyGraph::induced_subgraph(std::span<const std::size_t> keep) const {
  std::vector<std::size_t> remap(n_, n_);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= n_) throw ParameterError("induced_subgraph: node index out of range");
    remap[keep[i]] = i;
  }
  std::vector<Edge> out;
  for (const auto& e : edges())
    if (remap[e.src] < n_ && remap[e.dst] < n_) out.push_back({remap[e.src], remap[e.dst], e.weight});
  return AdjacencyGraph(keep.size(), std::move(out), normalization_);
}

AdjacencyGraph build_knn_graph(const DenseMatrix& coords, std::size_t k, bool symmetrize,
                               bool self_loops) {
  const std::size_t n = coords.rows();
  if (coords.cols() != 2) throw ShapeError("knn coordinates must be n x 2, got " + shape_string(coords));
  if (!coords.all_finite()) throw ParameterError("knn coordinates must be finite");
  const std::size_t candidates = self_loops ? n : (n == 0 ? 0 : n - 1);
  if (k > 0 && k >= n) {
    throw ParameterError("knn: k = " + std::to_string(k) + " must be smaller than n = " +
                         std::to_string(n));
  }
  std::vector<Edge> edges;
  edges.reserve(n * k * (symmetrize ? 2 : 1));
  using Cand = std::pair<double, std::size_t>;
  std::vector<Cand> dist;
  dist.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i && !self_loops) continue;
      const double dx = coords(i, 0) - coords(j, 0);
      const double dy = coords(i, 1) - coords(j, 1);
      dist.emplace_back(dx * dx + dy * dy, j);
    }
    const std::size_t take = std::min(k, candidates);
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    for (std::size_t m = 0; m < take; ++m) {
      edges.push_back({i, dist[m].second, 1.0});
      if (symmetrize) edges.push_back({dist[m].second, i, 1.0});
    }
  }
  if (symmetrize) {
    // Union semantics: a mutual pair stays weight 1 instead of summing to 2.
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const Edge& a, const Edge& b) {
                              return a.src == b.src && a.dst == b.dst;
                            }),
                edges.end());
  }
  return AdjacencyGraph(n, std::move(edges));
}

AdjacencyGraph normalize(const AdjacencyGraph& g, Normalization mode) {
  auto edges = g.edges();
  const auto sums = g.row_sums();
  switch (mode) {
    case Normalization::none:
      break;
    case Normalization::row:
      for (auto& e : edges) e.weight /= sums[e.src];
      break;
    case Normalization::symmetric: {
      if (!g.is_symmetric(1e-12)) {
        throw ParameterError("symmetric normalization requires a symmetric edge set");
      }
      for (auto& e : edges) e.weight /= std::sqrt(sums[e.src]) * std::sqrt(sums[e.dst]);
      break;
    }
  }
  // Zero-weight edges from an all-zero row would divide 0 by 0; drop them so
  // isolated nodes keep an empty row.
  std::erase_if(edges, [](const Edge& e) { return !(e.weight > 0.0); });
  return AdjacencyGraph(g.n(), std::move(edges), mode);
}

double spectral_radius(const AdjacencyGraph& g, const PowerIterationOptions& options) {
  const std::size_t n = g.n();
  if (n == 0) throw ParameterError("spectral_radius: empty graph");
  if (g.nnz() == 0) return 0.0;

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = unif(rng);
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
  };
  double nx = norm(x);
  for (auto& v : x) v /= nx;

  const CsrView w = g.csr();
  double prev = -1.0;
  double prev_pair = -1.0;
  double last = 0.0;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    kernels::spmv(w, x, y);
    const double ratio = norm(y);
    if (ratio == 0.0) return 0.0;
    // Eigenvalues of equal modulus (e.g. +1 and -1 on bipartite graphs) make
    // the one-step ratio oscillate; the two-step geometric mean still settles.
    const double pair = prev > 0.0 ? std::sqrt(ratio * prev) : -1.0;
    const double scale = std::max(1.0, ratio);
    if (prev > 0.0 && std::abs(ratio - prev) <= options.tol * scale) return ratio;
    if (pair > 0.0 && prev_pair > 0.0 && std::abs(pair - prev_pair) <= options.tol * scale)
      return pair;
    prev_pair = pair;
    prev = ratio;
    last = ratio;
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ratio;
  }
  std::ostringstream os;
  os << "spectral_radius: power iteration did not converge in " << options.max_iter
     << " iterations; last estimate " << last;
  throw NumericError(os.str());
}

std::vector<double> affine_fixed_point(const AdjacencyGraph& g, double rho,
                                       std::span<const double> z,
                                       const FixedPointOptions& options) {
  const std::size_t n = g.n();
  if (z.size() != n) {
    throw ShapeError("affine_fixed_point: z has length " + std::to_string(z.size()) +
                     " but graph has " + std::to_string(n) + " nodes");
  }
  // |rho| * max row sum bounds the spectral radius of rho W from above; only
  // fall back to power iteration when that cheap bound is inconclusive.
  if (std::abs(rho) * g.max_row_sum() >= 1.0) {
    const double radius = spectral_radius(g);
    if (std::abs(rho) * radius >= 1.0) {
      std::ostringstream os;
      os << "affine_fixed_point: |rho| * spectral_radius(W) = " << std::abs(rho) * radius
         << " must be below 1";
      throw ParameterError(os.str());
    }
  }

  std::vector<double> u(z.begin(), z.end());
  std::vector<double> next(n);
  const CsrView w = g.csr();
  double prev_step = std::numeric_limits<double>::infinity();
  std::size_t growth_streak = 0;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    kernels::spmv(w, u, next);
    double step = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = rho * next[i] + z[i];
      step = std::max(step, std::abs(next[i] - u[i]));
    }
    if (!std::isfinite(step)) throw ConvergenceError("affine_fixed_point: iterate became non-finite");
    // step is exactly the residual of the current iterate u.
    if (step <= options.tol) return u;
    growth_streak = step > prev_step ? growth_streak + 1 : 0;
    if (growth_streak >= 10) {
      throw ConvergenceError("affine_fixed_point: residual grew for 10 consecutive iterations");
    }
    prev_step = step;
    u.swap(next);
  }
  throw ConvergenceError("affine_fixed_point: no convergence after " +
                         std::to_string(options.max_iter) + " iterations");
}

DenseMatrix affine_fixed_point(const AdjacencyGraph& g, double rho, const DenseMatrix& z,
                               const FixedPointOptions& options) {
  DenseMatrix out(z.rows(), z.cols());
  for (std::size_t c = 0; c < z.cols(); ++c) {
    const auto col = z.col(c);
    const auto u = affine_fixed_point(g, rho, col, options);
    for (std::size_t r = 0; r < z.rows(); ++r) out(r, c) = u[r];
  }
  return out;
}

AdjacencyGraph read_edge_list(const std::filesystem::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open graph file " + path.string());
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto cells = csv::split_line(line);
    if (first_content) {
      first_content = false;
      if (!csv::parse_double(cells.front())) continue;  // header
    }
    if (cells.size() != 3) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) +
                      ": expected src,dst,weight");
    }
    const auto s = csv::parse_double(cells[0]);
    const auto d = csv::parse_double(cells[1]);
    const auto w = csv::parse_double(cells[2]);
    if (!s || !d || !w || *s < 0 || *d < 0 || *s != std::floor(*s) || *d != std::floor(*d)) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": malformed edge");
    }
    if (*w < 0) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": negative weight");
    }
    Edge e{static_cast<std::size_t>(*s), static_cast<std::size_t>(*d), *w};
    max_index = std::max({max_index, e.src, e.dst});
    edges.push_back(e);
  }
  if (n == 0) n = edges.empty() ? 0 : max_index + 1;
  if (!edges.empty() && max_index >= n) {
    throw LoadError(path.string() + ": node index " + std::to_string(max_index) +
                    " out of range for " + std::to_string(n) + " nodes");
  }
  return AdjacencyGraph(n, std::move(edges));
}

void write_edge_list(const AdjacencyGraph& g, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.row({"src", "dst", "weight"});
  for (const auto& e : g.edges())
    out.row({std::to_string(e.src), std::to_string(e.dst), csv::format_double(e.weight)});
  out.close();
}

}  // namespace netchoice
