#pragma once

// Test-side references. Everything in `oracle` is written independently of
// the library (dense algebra, brute force, quadrature) so that tests compare
// two separate computations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "netchoice/dataset.hpp"
#include "netchoice/graph.hpp"
#include "netchoice/matrix.hpp"
#include "netchoice/models.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat dense(const netchoice::AdjacencyGraph& g) {
  Mat m(g.n(), std::vector<double>(g.n(), 0.0));
  for (const auto& e : g.edges()) m[e.src][e.dst] += e.weight;
  return m;
}

/// Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Mat a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

inline Mat inverse(const Mat& a) {
  const std::size_t n = a.size();
  Mat inv(n, std::vector<double>(n));
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> e(n, 0.0);
    e[c] = 1.0;
    const auto col = solve(a, e);
    for (std::size_t r = 0; r < n; ++r) inv[r][c] = col[r];
  }
  return inv;
}

/// (I - rho W)^-1 z by direct solve.
inline std::vector<double> spatial_solve(const netchoice::AdjacencyGraph& g, double rho, const std::vector<double>& z) {
  Mat a = dense(g);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) a[i][j] = (i == j ? 1.0 : 0.0) - rho * a[i][j];
  return solve(a, z);
}

/// Largest |eigenvalue| via repeated squaring of a dense nonnegative matrix.
inline double spectral_radius(const netchoice::AdjacencyGraph& g) {
  Mat m = dense(g);
  const std::size_t n = m.size();
  double log_scale = 0.0;
  std::size_t power = 1;
  for (int it = 0; it < 40; ++it) {
    Mat sq(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        if (m[i][k] != 0.0)
          for (std::size_t j = 0; j < n; ++j) sq[i][j] += m[i][k] * m[k][j];
    double mx = 0.0;
    for (auto& row : sq)
      for (double v : row) mx = std::max(mx, std::abs(v));
    if (mx == 0.0) return 0.0;
    for (auto& row : sq)
      for (double& v : row) v /= mx;
    log_scale = 2.0 * log_scale + std::log(mx);
    power *= 2;
    m = std::move(sq);
  }
  // ||M^p|| ~ rho^p up to a polynomial factor; p = 2^40 makes it negligible.
  return std::exp(log_scale / static_cast<double>(power));
}

/// Five-point central differences of a scalar function at x.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  auto at = [&](std::size_t i, double keep, double step) {
    x[i] = keep + step;
    return f(x);
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    const double d1 = at(i, keep, h) - at(i, keep, -h);
    const double d2 = at(i, keep, 2 * h) - at(i, keep, -2 * h);
    x[i] = keep;
    g[i] = (8.0 * d1 - d2) / (12.0 * h);
  }
  return g;
}

/// Magnitudes below `floor` count as `floor`, so partials that are exactly
/// zero are judged against the finite-difference round-off (~1e-10) scaled up.
inline double relative_error(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Directed kNN by full sort of distances, ties to the lower index.
inline std::vector<std::vector<std::size_t>> knn(const std::vector<std::pair<double, double>>& pts, std::size_t k) {
  std::vector<std::vector<std::size_t>> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      const double dx = pts[i].first - pts[j].first, dy = pts[i].second - pts[j].second;
      d.push_back({dx * dx + dy * dy, j});
    }
    std::sort(d.begin(), d.end());
    for (std::size_t m = 0; m < std::min(k, d.size()); ++m) out[i].push_back(d[m].second);
  }
  return out;
}

/// Binary logit maximum likelihood by Newton-Raphson. Columns of `x` are the
/// regressors (add a ones column for an intercept). Standard errors come from
/// the inverse observed information.
struct LogitFit {
  std::vector<double> coef;
  std::vector<double> se;
};

inline LogitFit newton_logit(const Mat& x, const std::vector<int>& y, double prior_precision = 0.0) {
  const std::size_t n = x.size(), p = x.front().size();
  std::vector<double> b(p, 0.0);
  Mat info;
  for (int it = 0; it < 100; ++it) {
    std::vector<double> g(p, 0.0);
    info.assign(p, std::vector<double>(p, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t c = 0; c < p; ++c) eta += x[i][c] * b[c];
      const double pr = 1.0 / (1.0 + std::exp(-eta));
      for (std::size_t c = 0; c < p; ++c) {
        g[c] += (y[i] - pr) * x[i][c];
        for (std::size_t d = 0; d < p; ++d) info[c][d] += pr * (1.0 - pr) * x[i][c] * x[i][d];
      }
    }
    for (std::size_t c = 0; c < p; ++c) {
      g[c] -= prior_precision * b[c];
      info[c][c] += prior_precision;
    }
    const auto step = solve(info, g);
    double size = 0.0;
    for (std::size_t c = 0; c < p; ++c) {
      b[c] += step[c];
      size = std::max(size, std::abs(step[c]));
    }
    if (size < 1e-13) break;
  }
  const Mat cov = inverse(info);
  LogitFit fit{b, std::vector<double>(p)};
  for (std::size_t c = 0; c < p; ++c) fit.se[c] = std::sqrt(cov[c][c]);
  return fit;
}

/// Posterior of a single logistic coefficient with a N(0, prior_sd^2) prior,
/// tabulated on an even grid.
struct GridPosterior {
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> grid;
  std::vector<double> cdf;

  double quantile(double p) const {
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), p);
    const std::size_t i = static_cast<std::size_t>(it - cdf.begin());
    if (i == 0) return grid.front();
    if (i >= grid.size()) return grid.back();
    const double t = (p - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
    return grid[i - 1] + t * (grid[i] - grid[i - 1]);
  }
};

inline GridPosterior logistic_grid_posterior(const std::vector<double>& x, const std::vector<int>& y, double prior_sd,
                                             double lo, double hi, std::size_t points = 10001) {
  GridPosterior post;
  std::vector<double> logp(points);
  double mx = -INFINITY;
  for (std::size_t g = 0; g < points; ++g) {
    const double b = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(points - 1);
    double lp = -0.5 * b * b / (prior_sd * prior_sd);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double eta = b * x[i];
      lp += y[i] == 1 ? -std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
    }
    post.grid.push_back(b);
    logp[g] = lp;
    mx = std::max(mx, lp);
  }
  std::vector<double> w(points);
  double z = 0.0;
  for (std::size_t g = 0; g < points; ++g) z += w[g] = std::exp(logp[g] - mx);
  double m1 = 0.0, m2 = 0.0, acc = 0.0;
  for (std::size_t g = 0; g < points; ++g) {
    const double p = w[g] / z;
    m1 += p * post.grid[g];
    m2 += p * post.grid[g] * post.grid[g];
    acc += p;
    post.cdf.push_back(acc);
  }
  post.mean = m1;
  post.sd = std::sqrt(m2 - m1 * m1);
  return post;
}

/// Confusion-matrix scores.
inline double balanced_recall(const std::vector<int>& pred, const std::vector<int>& y, int classes) {
  double total = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    int tp = 0, n = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) {
        ++n;
        tp += pred[i] == c;
      }
    if (n > 0) {
      total += static_cast<double>(tp) / n;
      ++present;
    }
  }
  return total / present;
}

inline double mean_precision(const std::vector<int>& pred, const std::vector<int>& y, int classes) {
  double total = 0.0;
  for (int c = 0; c < classes; ++c) {
    int tp = 0, n = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (pred[i] == c) {
        ++n;
        tp += y[i] == c;
      }
    if (n > 0) total += static_cast<double>(tp) / n;
  }
  return total / classes;
}

}  // namespace oracle

namespace fixture {

inline netchoice::DenseMatrix normal_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                            double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  netchoice::DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

inline std::vector<double> normal_vector(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

/// Symmetrised, row-normalised kNN graph on uniform points.
inline netchoice::AdjacencyGraph random_graph(std::size_t n, std::mt19937_64& rng, std::size_t k = 3) {
  std::uniform_real_distribution<double> unit;
  netchoice::DenseMatrix xy(n, 2);
  for (double& v : xy.data()) v = unit(rng);
  return netchoice::normalize(netchoice::build_knn_graph(xy, k, true), netchoice::Normalization::row);
}

/// Erdos-Renyi graph with uniform weights, no self loops.
inline netchoice::AdjacencyGraph random_weighted_graph(std::size_t n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit;
  std::vector<netchoice::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && unit(rng) < density) edges.push_back({i, j, unit(rng)});
  return netchoice::AdjacencyGraph(n, std::move(edges));
}

inline std::vector<std::string> names(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

/// Random binary dataset with labels drawn from a fixed logistic rule.
inline netchoice::ChoiceDataset binary_data(std::size_t n, std::size_t k, std::size_t r, std::uint64_t seed,
                                            bool with_graph = true) {
  std::mt19937_64 rng(seed);
  netchoice::ChoiceDataset d;
  d.x = normal_matrix(n, k, rng);
  d.q = normal_matrix(n, r, rng);
  d.attribute_names = names("x", k);
  d.sociodemographic_names = names("q", r);
  std::uniform_real_distribution<double> unit;
  for (std::size_t i = 0; i < n; ++i) {
    d.ids.push_back(std::to_string(i));
    double u = 0.0;
    for (std::size_t c = 0; c < k; ++c) u += (c % 2 == 0 ? 1.0 : -0.5) * d.x(i, c);
    d.y.push_back(unit(rng) < 1.0 / (1.0 + std::exp(-u)) ? 1 : 0);
  }
  if (with_graph) d.graph = random_graph(n, rng);
  return d;
}

/// Random multinomial dataset, J blocks of k attributes.
inline netchoice::ChoiceDataset multinomial_data(std::size_t n, std::size_t J, std::size_t k, std::size_t r,
                                                 std::uint64_t seed, bool with_graph = true) {
  std::mt19937_64 rng(seed);
  netchoice::ChoiceDataset d;
  d.alternatives = J;
  d.alternative_blocks = true;
  d.x = normal_matrix(n, J * k, rng);
  d.q = normal_matrix(n, r, rng);
  d.attribute_names = names("x", k);
  d.sociodemographic_names = names("q", r);
  std::uniform_real_distribution<double> unit;
  for (std::size_t i = 0; i < n; ++i) {
    d.ids.push_back(std::to_string(i));
    std::vector<double> e(J);
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) s += e[j] = std::exp(k > 0 ? d.x(i, j * k) : 0.0);
    double u = unit(rng) * s;
    int pick = static_cast<int>(J) - 1;
    for (std::size_t j = 0; j < J; ++j) {
      if (u < e[j]) {
        pick = static_cast<int>(j);
        break;
      }
      u -= e[j];
    }
    d.y.push_back(pick);
  }
  if (with_graph) d.graph = random_graph(n, rng);
  return d;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("netchoice-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture

namespace gradcheck {

struct Result {
  double params = 0.0;  // worst relative error over parameters
  double x = 0.0;       // over X entries
  double q = 0.0;       // over Q entries
  std::size_t checked = 0;
};

/// Scalar probe: mean choice NLL plus a random linear functional of the
/// probabilities, so that every utility column carries gradient.
inline double probe(const netchoice::ChoiceModel& model, const std::vector<double>& w, const netchoice::DenseMatrix& x,
                    const netchoice::DenseMatrix& q, const netchoice::AdjacencyGraph* graph,
                    const std::vector<int>& y, const netchoice::DenseMatrix& mix, netchoice::ad::Mode mode,
                    netchoice::ad::BatchNormStats stats, std::vector<double>* gw = nullptr, netchoice::DenseMatrix* gx = nullptr,
                    netchoice::DenseMatrix* gq = nullptr) {
  using namespace netchoice;
  ad::Tape tape;
  const BoundParams params = bind_params(tape, model.layout(), w);
  const ad::Var xv = tape.leaf(x);
  const ad::Var qv = tape.leaf(q);
  ForwardContext ctx{mode, mode == ad::Mode::infer ? &stats : nullptr, {}, graph};
  const ad::Var u = model.utilities(tape, params, xv, qv, ctx);
  const ad::Var p = probabilities(u, model.head());
  const ad::Var loss = ad::add(ad::choice_nll(u, model.head(), y, {}, {}, true),
                               ad::sum(ad::hadamard(p, tape.constant(mix))));
  if (gw != nullptr) {
    tape.backward(loss);
    *gw = collect_grads(tape, params, model.layout());
    *gx = tape.grad(xv);
    *gq = tape.grad(qv);
  }
  return tape.value(loss)(0, 0);
}

inline Result check(const netchoice::ChoiceModel& model, const std::vector<double>& w, const netchoice::DenseMatrix& x,
                    const netchoice::DenseMatrix& q, const netchoice::AdjacencyGraph* graph, const std::vector<int>& y,
                    std::mt19937_64& rng, netchoice::ad::Mode mode = netchoice::ad::Mode::train) {
  using netchoice::DenseMatrix;
  const std::size_t cols = model.head() == netchoice::ad::Head::sigmoid ? 1 : model.n_alternatives();
  const DenseMatrix mix = fixture::normal_matrix(x.rows(), cols, rng);
  // Infer mode differentiates with the statistics held fixed.
  const netchoice::ad::BatchNormStats stats =
      mode == netchoice::ad::Mode::infer ? netchoice::whole_sample_statistics(model, w, x, q, graph)
                                         : netchoice::ad::BatchNormStats{};
  std::vector<double> gw;
  DenseMatrix gx, gq;
  probe(model, w, x, q, graph, y, mix, mode, stats, &gw, &gx, &gq);
  Result r;
  const auto fw = oracle::central_difference(
      [&](const std::vector<double>& v) { return probe(model, v, x, q, graph, y, mix, mode, stats); }, w);
  for (std::size_t i = 0; i < w.size(); ++i) r.params = std::max(r.params, oracle::relative_error(gw[i], fw[i]));
  auto flat = [](const DenseMatrix& m) { return std::vector<double>(m.data().begin(), m.data().end()); };
  const auto fx = oracle::central_difference(
      [&](const std::vector<double>& v) {
        return probe(model, w, DenseMatrix(x.rows(), x.cols(), v), q, graph, y, mix, mode, stats);
      },
      flat(x));
  for (std::size_t i = 0; i < fx.size(); ++i) r.x = std::max(r.x, oracle::relative_error(gx.data()[i], fx[i]));
  const auto fq = oracle::central_difference(
      [&](const std::vector<double>& v) {
        return probe(model, w, x, DenseMatrix(q.rows(), q.cols(), v), graph, y, mix, mode, stats);
      },
      flat(q));
  for (std::size_t i = 0; i < fq.size(); ++i) r.q = std::max(r.q, oracle::relative_error(gq.data()[i], fq[i]));
  r.checked = w.size() + fx.size() + fq.size();
  return r;
}

}  // namespace gradcheck
