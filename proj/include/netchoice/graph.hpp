#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "netchoice/kernels.hpp"
#include "netchoice/matrix.hpp"

namespace netchoice {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double weight = 1.0;

  bool operator==(const Edge&) const = default;
};

enum class Normalization { none, row, symmetric };

std::string to_string(Normalization mode);
Normalization parse_normalization(const std::string& name);

/// Sparse n x n nonnegative weight matrix W. Row i lists the nodes whose
/// values flow into node i, so (W a)_i = sum_j W(i, j) a_j.
///
/// Stored as CSR together with its transpose (the transpose feeds the
/// reverse pass of W * A without scattered writes). Duplicate edges are
/// merged by summing their weights.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  explicit AdjacencyGraph(std::size_t n);
  AdjacencyGraph(std::size_t n, std::vector<Edge> edges,
                 Normalization normalization = Normalization::none);

  static AdjacencyGraph identity(std::size_t n);
  static AdjacencyGraph from_dense(const DenseMatrix& w);

  std::size_t n() const noexcept { return n_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  Normalization normalization() const noexcept { return normalization_; }

  std::vector<Edge> edges() const;
  CsrView csr() const noexcept;
  CsrView csr_transposed() const noexcept;
  DenseMatrix densify() const;
  std::vector<double> row_sums() const;
  double max_row_sum() const;
  bool is_symmetric(double tol = 0.0) const;

  /// Subgraph on the listed nodes, renumbered in the given order.
  AdjacencyGraph induced_subgraph(std::span<const std::size_t> keep) const;

 private:
  void build_transpose();

  std::size_t n_ = 0;
  Normalization normalization_ = Normalization::none;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
  std::vector<std::size_t> t_row_ptr_{0};
  std::vector<std::size_t> t_col_idx_;
  std::vector<double> t_values_;
};

/// Directed k-nearest-neighbour graph on 2-D coordinates with unit weights.
/// Node i points at its k closest nodes (ties broken by lower index).
AdjacencyGraph build_knn_graph(const DenseMatrix& coords, std::size_t k, bool symmetrize,
                               bool self_loops = false);

AdjacencyGraph normalize(const AdjacencyGraph& g, Normalization mode);

struct PowerIterationOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  std::uint64_t seed = 0;
};

double spectral_radius(const AdjacencyGraph& g, const PowerIterationOptions& options = {});

struct FixedPointOptions {
  double tol = 1e-10;
  std::size_t max_iter = 1000000;
};

/// Equilibrium of u(t+1) = rho * W u(t) + z, i.e. (I - rho W)^{-1} z.
std::vector<double> affine_fixed_point(const AdjacencyGraph& g, double rho,
                                       std::span<const double> z,
                                       const FixedPointOptions& options = {});

/// Column-wise affine_fixed_point.
DenseMatrix affine_fixed_point(const AdjacencyGraph& g, double rho, const DenseMatrix& z,
                               const FixedPointOptions& options = {});

/// Edge list: `src,dst,weight` per line, zero based. An optional header line
/// is recognised by a non-numeric first token. When n is 0 the node count is
/// one past the largest index.
AdjacencyGraph read_edge_list(const std::filesystem::path& path, std::size_t n = 0);
void write_edge_list(const AdjacencyGraph& g, const std::filesystem::path& path);

}  // namespace netchoice
