#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mvi/matrix.hpp"
#include "mvi/rng.hpp"

namespace mvi {

struct Edge {
  std::size_t i = 0;  // i < j
  std::size_t j = 0;
  double weight = 1.0;
  bool operator==(const Edge&) const = default;
};

/// Weighted undirected graph without self-loops.
///
/// The adjacency is stored dense and kept exactly symmetric; the edge list is
/// derived from its upper triangle in row-major order.
class Graph {
 public:
  Graph() = default;
  // Edgeless graph on n nodes.
  explicit Graph(std::size_t n);
  static Graph from_adjacency(Matrix adjacency);
  static Graph from_edges(std::size_t n, const std::vector<Edge>& edges);

  std::size_t n() const { return adjacency_.rows(); }
  const Matrix& adjacency() const { return adjacency_; }
  std::vector<Edge> edges() const;
  std::size_t edge_count() const;
  bool has_edge(std::size_t i, std::size_t j) const { return adjacency_(i, j) != 0.0; }
  double degree(std::size_t i) const;
  bool is_connected() const;

  bool operator==(const Graph&) const = default;

 private:
  Matrix adjacency_;
};

// I - D^{-1/2} W D^{-1/2}. Throws on an isolated node.
Matrix normalized_laplacian(const Graph& g);
// D~^{-1/2} (W + I) D~^{-1/2}.
Matrix gcn_operator(const Graph& g);
// Row-normalized neighbour mean D^{-1} W. Throws on an isolated node.
Matrix neighbor_mean_operator(const Graph& g);
// 2 L / lambda_max - I.
Matrix rescaled_laplacian(const Graph& g);
// T_1(L^), ..., T_K(L^) as dense n x n matrices.
std::vector<Matrix> chebyshev_polynomials(const Graph& g, std::size_t order);

// Filters on a single graph signal x (n x C).
Matrix gcn_filter(const Graph& g, const Matrix& x);
// [T_1(L^) x | ... | T_K(L^) x], n x (K C), by the three-term recurrence.
Matrix chebyshev_feature_map(const Graph& g, const Matrix& x, std::size_t order);
// [x | mean of neighbours], n x 2C.
Matrix sage_feature_map(const Graph& g, const Matrix& x);

// G(n, p) with unit weights, resampled until connected (at most 1000 tries).
Graph erdos_renyi(std::size_t n, double p, RngStream& rng);

enum class PerturbMode { Literal, Balanced };
// Literal: drop floor(frac |E|) edges and add floor(frac |E^c|) non-edges.
// Balanced: drop and add floor(frac |E|) each.
Graph perturb_edges(const Graph& g, double frac, RngStream& rng,
                    PerturbMode mode = PerturbMode::Literal);

struct SpectralSplit {
  std::size_t k = 0;
  Matrix high;  // top-k energy part of the Laplacian
  Matrix low;   // remainder
  Matrix low_basis;  // n x (n-k), orthonormal eigenvectors of the low part
};

// L = U diag(lambda) U^T with eigenvalues ordered by descending magnitude;
// `high` keeps the first k, `low` the rest.
SpectralSplit spectral_split(const Graph& g, std::size_t k);

// L' = L+ + L-' where L-' differs from L- by a random symmetric matrix that
// lives in the low-energy eigenspace and has spectral norm exactly delta.
Matrix low_energy_perturbation(const Graph& g, std::size_t k, double delta, RngStream& rng);

// K * delta * E||X-|| * ||Theta*||.
double mismatch_bound(double delta, double lipschitz, double mean_low_norm, double theta_norm);

// Edge-list text: header "n=<count>" then one "i j weight" line per edge.
void write_edge_list(std::ostream& os, const Graph& g);
Graph read_edge_list(std::istream& is);
void save_edge_list(const std::string& path, const Graph& g);
Graph load_edge_list(const std::string& path);

}  // namespace mvi
