#include "mvi/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mvi/error.hpp"
#include "mvi/kernels.hpp"
#include "mvi/linalg.hpp"

namespace mvi {

Graph::Graph(std::size_t n) : adjacency_(n, n) {}

Graph Graph::from_adjacency(Matrix adjacency) {
  if (adjacency.rows() != adjacency.cols())
    throw ShapeError("graph adjacency must be square, got " + shape_string(adjacency));
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    if (adjacency(i, i) != 0.0) throw InvalidArgument("graph adjacency has a self-loop");
    for (std::size_t j = 0; j < adjacency.cols(); ++j) {
      const double w = adjacency(i, j);
      if (!(w >= 0.0) || !std::isfinite(w))
        throw InvalidArgument("graph weights must be finite and non-negative");
      if (w != adjacency(j, i)) throw InvalidArgument("graph adjacency is not symmetric");
    }
  }
  Graph g;
  g.adjacency_ = std::move(adjacency);
  return g;
}

Graph Graph::from_edges(std::size_t n, const std::vector<Edge>& edges) {
  Matrix w(n, n);
  for (const Edge& e : edges) {
    if (e.i >= n || e.j >= n) throw InvalidArgument("edge endpoint out of range");
    if (e.i == e.j) throw InvalidArgument("self-loop edge");
    w(e.i, e.j) = e.weight;
    w(e.j, e.i) = e.weight;
  }
  return from_adjacency(std::move(w));
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < n(); ++i)
    for (std::size_t j = i + 1; j < n(); ++j)
      if (adjacency_(i, j) != 0.0) out.push_back({i, j, adjacency_(i, j)});
  return out;
}

std::size_t Graph::edge_count() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n(); ++i)
    for (std::size_t j = i + 1; j < n(); ++j)
      if (adjacency_(i, j) != 0.0) ++c;
  return c;
}

double Graph::degree(std::size_t i) const {
  double d = 0.0;
  for (std::size_t j = 0; j < n(); ++j) d += adjacency_(i, j);
  return d;
}

bool Graph::is_connected() const {
  if (n() == 0) return true;
  std::vector<bool> seen(n(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < n(); ++v) {
      if (!seen[v] && adjacency_(u, v) != 0.0) {
        seen[v] = true;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  return reached == n();
}

namespace {

std::vector<double> inverse_sqrt_degrees(const Graph& g, const char* what) {
  std::vector<double> d(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) {
    const double deg = g.degree(i);
    if (deg <= 0.0) throw InvalidArgument(std::string(what) + ": node " + std::to_string(i) +
                                          " is isolated");
    d[i] = 1.0 / std::sqrt(deg);
  }
  return d;
}

void symmetrize(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
}

void require_rows(const Graph& g, const Matrix& x, const char* what) {
  if (x.rows() != g.n())
    throw ShapeError(std::string(what) + ": signal " + shape_string(x) + " on a graph with " +
                     std::to_string(g.n()) + " nodes");
}

}  // namespace

Matrix normalized_laplacian(const Graph& g) {
  const auto d = inverse_sqrt_degrees(g, "normalized_laplacian");
  Matrix l = Matrix::identity(g.n());
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = 0; j < g.n(); ++j) l(i, j) -= d[i] * g.adjacency()(i, j) * d[j];
  return l;
}

Matrix gcn_operator(const Graph& g) {
  Matrix w = g.adjacency();
  for (std::size_t i = 0; i < g.n(); ++i) w(i, i) += 1.0;
  std::vector<double> d(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.n(); ++j) s += w(i, j);
    d[i] = 1.0 / std::sqrt(s);
  }
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = 0; j < g.n(); ++j) w(i, j) *= d[i] * d[j];
  return w;
}

Matrix neighbor_mean_operator(const Graph& g) {
  Matrix m(g.n(), g.n());
  for (std::size_t i = 0; i < g.n(); ++i) {
    if (g.degree(i) <= 0.0)
      throw InvalidArgument("neighbor mean: node " + std::to_string(i) + " has no neighbours");
    // Unweighted mean over the neighbour set.
    std::size_t count = 0;
    for (std::size_t j = 0; j < g.n(); ++j)
      if (g.has_edge(i, j)) ++count;
    for (std::size_t j = 0; j < g.n(); ++j)
      if (g.has_edge(i, j)) m(i, j) = 1.0 / static_cast<double>(count);
  }
  return m;
}

Matrix rescaled_laplacian(const Graph& g) {
  Matrix l = normalized_laplacian(g);
  const double lambda_max = sym_eig_max(l);
  if (lambda_max <= 0.0) throw NumericError("rescaled_laplacian: zero spectrum");
  l *= 2.0 / lambda_max;
  for (std::size_t i = 0; i < g.n(); ++i) l(i, i) -= 1.0;
  symmetrize(l);
  return l;
}

std::vector<Matrix> chebyshev_polynomials(const Graph& g, std::size_t order) {
  if (order == 0) throw InvalidArgument("Chebyshev order must be at least 1");
  const Matrix lhat = rescaled_laplacian(g);
  std::vector<Matrix> out;
  Matrix prev = Matrix::identity(g.n());
  Matrix cur = lhat;
  out.push_back(cur);
  for (std::size_t k = 1; k < order; ++k) {
    Matrix next = matmul(lhat, cur) * 2.0 - prev;
    symmetrize(next);
    prev = std::move(cur);
    cur = std::move(next);
    out.push_back(cur);
  }
  return out;
}

Matrix gcn_filter(const Graph& g, const Matrix& x) {
  require_rows(g, x, "gcn_filter");
  return matmul(gcn_operator(g), x);
}

Matrix chebyshev_feature_map(const Graph& g, const Matrix& x, std::size_t order) {
  if (order == 0) throw InvalidArgument("Chebyshev order must be at least 1");
  require_rows(g, x, "chebyshev_feature_map");
  const Matrix lhat = rescaled_laplacian(g);
  const std::size_t c = x.cols();
  Matrix out(g.n(), order * c);
  Matrix prev = x;
  Matrix cur = matmul(lhat, x);
  for (std::size_t k = 0; k < order; ++k) {
    for (std::size_t r = 0; r < g.n(); ++r)
      for (std::size_t j = 0; j < c; ++j) out(r, k * c + j) = cur(r, j);
    Matrix next = matmul(lhat, cur) * 2.0 - prev;
    prev = std::move(cur);
    cur = std::move(next);
  }
  return out;
}

Matrix sage_feature_map(const Graph& g, const Matrix& x) {
  require_rows(g, x, "sage_feature_map");
  return hconcat(x, matmul(neighbor_mean_operator(g), x));
}

Graph erdos_renyi(std::size_t n, double p, RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("erdos_renyi: p must be in [0, 1]");
  constexpr int kAttempts = 1000;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Matrix w(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < p) {
          w(i, j) = 1.0;
          w(j, i) = 1.0;
        }
    Graph g = Graph::from_adjacency(std::move(w));
    if (g.is_connected()) return g;
  }
  throw NumericError("erdos_renyi: no connected sample in 1000 attempts (n=" + std::to_string(n) +
                     ", p=" + std::to_string(p) + ")");
}

Graph perturb_edges(const Graph& g, double frac, RngStream& rng, PerturbMode mode) {
  if (!(frac >= 0.0 && frac < 1.0)) throw InvalidArgument("perturb_edges: frac must be in [0, 1)");
  std::vector<std::pair<std::size_t, std::size_t>> present, absent;
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = i + 1; j < g.n(); ++j)
      (g.has_edge(i, j) ? present : absent).emplace_back(i, j);

  const auto n_remove = static_cast<std::size_t>(std::floor(frac * present.size()));
  const std::size_t n_insert =
      mode == PerturbMode::Literal ? static_cast<std::size_t>(std::floor(frac * absent.size()))
                                   : std::min(n_remove, absent.size());

  // Partial Fisher-Yates picks a uniform subset of each list.
  auto pick = [&](auto& pool, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  };
  pick(present, n_remove);
  pick(absent, n_insert);

  Matrix w = g.adjacency();
  for (std::size_t e = 0; e < n_remove; ++e) {
    auto [i, j] = present[e];
    w(i, j) = w(j, i) = 0.0;
  }
  for (std::size_t e = 0; e < n_insert; ++e) {
    auto [i, j] = absent[e];
    w(i, j) = w(j, i) = 1.0;
  }
  return Graph::from_adjacency(std::move(w));
}

namespace {

// Eigenpairs of the Laplacian ordered by descending |lambda|; stable with
// respect to the ascending order returned by the eigensolver.
SymmetricEigen energy_ordered(const Matrix& lap) {
  SymmetricEigen e = sym_eig(lap);
  const std::size_t n = e.values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(e.values[a]) > std::abs(e.values[b]);
  });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = e.values[order[c]];
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = e.vectors(r, order[c]);
  }
  return out;
}

Matrix outer_part(const SymmetricEigen& e, std::size_t first, std::size_t last) {
  const std::size_t n = e.vectors.rows();
  Matrix m(n, n);
  for (std::size_t c = first; c < last; ++c)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        m(i, j) += e.values[c] * e.vectors(i, c) * e.vectors(j, c);
  return m;
}

}  // namespace

SpectralSplit spectral_split(const Graph& g, std::size_t k) {
  if (k < 1 || k > g.n())
    throw InvalidArgument("spectral_split: k must be in [1, n], got " + std::to_string(k));
  const Matrix lap = normalized_laplacian(g);
  const SymmetricEigen e = energy_ordered(lap);
  SpectralSplit s;
  s.k = k;
  s.high = outer_part(e, 0, k);
  // The low part is taken as the residual so that high + low == L exactly up
  // to one rounding per entry.
  s.low = lap - s.high;
  s.low_basis = e.vectors.col_block(k, g.n() - k);
  return s;
}

Matrix low_energy_perturbation(const Graph& g, std::size_t k, double delta, RngStream& rng) {
  if (!(delta >= 0.0)) throw InvalidArgument("low_energy_perturbation: delta must be >= 0");
  const SpectralSplit split = spectral_split(g, k);
  const std::size_t m = g.n() - k;
  if (m == 0 || delta == 0.0) return normalized_laplacian(g);
  Matrix s = gaussian(rng, 0.0, 1.0, m, m);
  symmetrize(s);
  const double norm = spectral_norm(s);
  if (norm == 0.0) return normalized_laplacian(g);
  s *= delta / norm;
  const Matrix& u = split.low_basis;
  Matrix bump = matmul_nt(matmul(u, s), u);
  symmetrize(bump);
  return normalized_laplacian(g) + bump;
}

double mismatch_bound(double delta, double lipschitz, double mean_low_norm, double theta_norm) {
  if (delta < 0.0 || lipschitz < 0.0 || mean_low_norm < 0.0 || theta_norm < 0.0)
    throw InvalidArgument("mismatch_bound: inputs must be non-negative");
  return lipschitz * delta * mean_low_norm * theta_norm;
}

void write_edge_list(std::ostream& os, const Graph& g) {
  os << "n=" << g.n() << '\n';
  char buf[96];
  for (const Edge& e : g.edges()) {
    std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", e.i, e.j, e.weight);
    os << buf;
  }
}

Graph read_edge_list(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("n=", 0) != 0)
    throw ParseError("edge list: expected header 'n=<count>'");
  std::size_t n = 0;
  try {
    n = std::stoul(line.substr(2));
  } catch (const std::logic_error&) {
    throw ParseError("edge list: bad node count in '" + line + "'");
  }
  std::vector<Edge> edges;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Edge e;
    if (!(ls >> e.i >> e.j >> e.weight))
      throw ParseError("edge list line " + std::to_string(lineno) + ": expected 'i j weight'");
    if (e.i > e.j) std::swap(e.i, e.j);
    edges.push_back(e);
  }
  try {
    return Graph::from_edges(n, edges);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("edge list: ") + e.what());
  }
}

void save_edge_list(const std::string& path, const Graph& g) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  write_edge_list(os, g);
}

Graph load_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return read_edge_list(is);
}

}  // namespace mvi
