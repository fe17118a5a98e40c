#include "mvi/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvi/error.hpp"
#include "mvi/kernels.hpp"

namespace mvi {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.nodes = nodes;
  out.graph = graph;
  out.x = Matrix(indices.size() * nodes, x.cols());
  out.y = Matrix(indices.size() * nodes, y.cols());
  if (has_expectation()) out.expectation = Matrix(indices.size() * nodes, expectation.cols());
  const std::size_t n = count();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= n) throw InvalidArgument("subset: sample index out of range");
    out.x.set_row_block(k * nodes, x.row_block(i * nodes, nodes));
    out.y.set_row_block(k * nodes, y.row_block(i * nodes, nodes));
    if (has_expectation())
      out.expectation.set_row_block(k * nodes, expectation.row_block(i * nodes, nodes));
  }
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > count()) throw InvalidArgument("slice: bad range");
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = begin + k;
  return subset(idx);
}

void Dataset::validate() const {
  if (nodes == 0) throw InvalidArgument("dataset: nodes must be positive");
  if (x.rows() % nodes != 0) throw ShapeError("dataset: feature rows not a multiple of nodes");
  if (y.rows() != x.rows()) throw ShapeError("dataset: features and labels are not aligned");
  if (has_expectation()) require_same_shape(expectation, y, "dataset expectation");
  if (graph && graph->n() != nodes) throw ShapeError("dataset: graph size differs from nodes");
  require_finite(x, "dataset features");
  for (double v : y.values())
    if (v != 0.0 && v != 1.0) throw InvalidArgument("dataset: labels must be 0 or 1");
  if (y.cols() > 1)
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) s += y(r, c);
      if (s != 1.0) throw InvalidArgument("dataset: one-hot label row does not sum to 1");
    }
  for (double v : expectation.values())
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("dataset: expectation outside [0,1]");
}

Dataset sample_teacher_data(const Network& teacher, std::size_t n, RngStream& data_rng,
                            double feature_mean) {
  if (n == 0) throw InvalidArgument("sample_teacher_data: need at least one sample");
  const Activation& act = teacher.spec(teacher.num_layers() - 1).activation;
  const bool softmax = act.kind == ActivationKind::Softmax;
  if (!softmax && act.kind != ActivationKind::Sigmoid && act.kind != ActivationKind::NormalCdf)
    throw InvalidArgument("teacher output must be sigmoid, normal-cdf or softmax");
  RngStream feat = data_rng.split(1);
  RngStream lab = data_rng.split(2);
  Dataset d;
  d.nodes = teacher.nodes();
  d.graph = teacher.graph();
  d.x = gaussian(feat, feature_mean, 1.0, n * d.nodes, teacher.spec(0).in);
  d.expectation = predict(teacher, d.x);
  d.y = Matrix(d.expectation.rows(), d.expectation.cols());
  for (std::size_t r = 0; r < d.y.rows(); ++r) {
    if (softmax) {
      const double u = lab.uniform();
      double acc = 0.0;
      std::size_t pick = d.y.cols() - 1;
      for (std::size_t c = 0; c < d.y.cols(); ++c) {
        acc += d.expectation(r, c);
        if (u < acc) {
          pick = c;
          break;
        }
      }
      d.y(r, pick) = 1.0;
    } else {
      for (std::size_t c = 0; c < d.y.cols(); ++c)
        d.y(r, c) = lab.bernoulli(d.expectation(r, c)) ? 1.0 : 0.0;
    }
  }
  return d;
}

TeacherData gen_probit(std::size_t n, std::size_t dim, RngStream& rng) {
  if (n == 0 || dim == 0) throw InvalidArgument("gen_probit: n and dim must be positive");
  LayerSpec spec{FilterSpec::dense(), Activation::normal_cdf(), dim, 1, true, BnMode::off()};
  Network teacher({spec});
  RngStream prm = rng.split(0);
  teacher.params()[0].weight = gaussian(prm, -0.05, 1.0, dim, 1);
  teacher.params()[0].bias = gaussian(prm, -0.1, 1.0, 1, 1);
  RngStream data_rng = rng.split(3);
  TeacherData out{sample_teacher_data(teacher, n, data_rng, 0.05), teacher};
  return out;
}

Dataset gen_two_moons(std::size_t n, double noise, RngStream& rng) {
  if (n == 0 || n % 2 != 0) throw InvalidArgument("gen_two_moons: n must be even and positive");
  if (noise < 0.0) throw InvalidArgument("gen_two_moons: noise must be non-negative");
  Dataset d;
  d.x = Matrix(n, 2);
  d.y = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::numbers::pi * rng.uniform();
    const bool moon_b = i % 2 == 1;
    double a = moon_b ? 1.0 - std::cos(t) : std::cos(t);
    double b = moon_b ? 0.5 - std::sin(t) : std::sin(t);
    if (noise > 0.0) {
      a += noise * rng.normal();
      b += noise * rng.normal();
    }
    d.x(i, 0) = a;
    d.x(i, 1) = b;
    d.y(i, moon_b ? 1 : 0) = 1.0;
  }
  return d;
}

Network make_gcn_teacher(const Graph& graph, std::vector<LayerSpec> specs,
                         RngStream& teacher_rng) {
  for (const LayerSpec& s : specs)
    if (s.bn.enabled()) throw InvalidArgument("teacher networks do not use batch norm");
  return init_params(std::move(specs), InitScheme::Teacher, teacher_rng, graph);
}

TeacherData gen_gcn_teacher(const Graph& graph, std::size_t n, std::vector<LayerSpec> specs,
                            RngStream& teacher_rng, RngStream& data_rng) {
  Network teacher = make_gcn_teacher(graph, std::move(specs), teacher_rng);
  Dataset d = sample_teacher_data(teacher, n, data_rng);
  return {std::move(d), std::move(teacher)};
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, std::size_t n_train) {
  if (n_train == 0 || n_train >= data.count())
    throw InvalidArgument("train_test_split: need 1 <= n_train < " +
                          std::to_string(data.count()));
  return {data.slice(0, n_train), data.slice(n_train, data.count())};
}

Dataset lag_features(const Matrix& panel, std::size_t d, std::size_t classes) {
  if (d == 0) throw InvalidArgument("lag_features: lag must be >= 1");
  const std::size_t steps = panel.rows(), nodes = panel.cols();
  if (steps <= d)
    throw InvalidArgument("lag_features: panel of length " + std::to_string(steps) +
                          " is too short for lag " + std::to_string(d));
  const std::size_t n = steps - d;
  const std::size_t width = classes <= 2 ? 1 : classes;
  Dataset out;
  out.nodes = nodes;
  out.x = Matrix(n * nodes, d);
  out.y = Matrix(n * nodes, width);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = s + d;
    for (std::size_t j = 0; j < nodes; ++j) {
      for (std::size_t k = 0; k < d; ++k) out.x(s * nodes + j, k) = panel(t - 1 - k, j);
      const double v = panel(t, j);
      if (width == 1) {
        out.y(s * nodes + j, 0) = v;
      } else {
        const auto cls = static_cast<std::size_t>(v);
        if (v < 0 || static_cast<double>(cls) != v || cls >= classes)
          throw InvalidArgument("lag_features: label " + std::to_string(v) + " out of range");
        out.y(s * nodes + j, cls) = 1.0;
      }
    }
  }
  return out;
}

Graph knn_graph_from_labels(const Matrix& train_labels, std::size_t k) {
  const std::size_t steps = train_labels.rows(), n = train_labels.cols();
  if (k == 0 || k >= n) throw InvalidArgument("knn graph: need 1 <= k < node count");
  if (steps < 2) throw InvalidArgument("knn graph: need at least two time steps");
  std::vector<double> mean(n, 0.0), sd(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t t = 0; t < steps; ++t) mean[j] += train_labels(t, j);
    mean[j] /= static_cast<double>(steps);
    for (std::size_t t = 0; t < steps; ++t)
      sd[j] += (train_labels(t, j) - mean[j]) * (train_labels(t, j) - mean[j]);
    sd[j] = std::sqrt(sd[j]);
    if (sd[j] == 0.0)
      throw NumericError("knn graph: node " + std::to_string(j) +
                         " has constant labels; correlation is undefined");
  }
  Matrix corr(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double s = 0.0;
      for (std::size_t t = 0; t < steps; ++t)
        s += (train_labels(t, a) - mean[a]) * (train_labels(t, b) - mean[b]);
      corr(a, b) = corr(b, a) = s / (sd[a] * sd[b]);
    }
  Matrix adj(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> peers;
    for (std::size_t b = 0; b < n; ++b)
      if (b != a) peers.push_back(b);
    std::stable_sort(peers.begin(), peers.end(),
                     [&](std::size_t p, std::size_t q) { return corr(a, p) > corr(a, q); });
    for (std::size_t m = 0; m < k; ++m) adj(a, peers[m]) = adj(peers[m], a) = 1.0;
  }
  return Graph::from_adjacency(adj);
}

Panel gen_synthetic_panel(const Graph& graph, const SyntheticPanelOptions& opts, RngStream& rng) {
  if (opts.steps < 2) throw InvalidArgument("synthetic panel: need at least two steps");
  if (!(std::abs(opts.rho) < 1.0)) throw InvalidArgument("synthetic panel: |rho| must be < 1");
  if (opts.classes != 2 && opts.classes != 3)
    throw InvalidArgument("synthetic panel: classes must be 2 or 3");
  const std::size_t n = graph.n();
  const Matrix mean_op = neighbor_mean_operator(graph);
  const double innov = std::sqrt(1.0 - opts.rho * opts.rho);
  Panel p;
  p.labels = Matrix(opts.steps, n);
  Matrix z = gaussian(rng, 0.0, 1.0, n, 1);
  for (std::size_t t = 0; t < opts.steps; ++t) {
    if (t > 0) {
      Matrix next = matmul(mean_op, z);
      for (std::size_t j = 0; j < n; ++j) next(j, 0) = opts.rho * next(j, 0) + innov * rng.normal();
      z = std::move(next);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double v = z(j, 0);
      double label = 0.0;
      if (v > opts.threshold) label = 1.0;
      else if (opts.classes == 3 && v < -opts.threshold) label = 2.0;
      p.labels(t, j) = label;
    }
    p.dates.push_back("t" + std::to_string(t));
  }
  for (std::size_t j = 0; j < n; ++j) p.columns.push_back("node" + std::to_string(j));
  return p;
}

}  // namespace mvi
