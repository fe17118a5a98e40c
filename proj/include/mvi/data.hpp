#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvi/graph.hpp"
#include "mvi/matrix.hpp"
#include "mvi/network.hpp"
#include "mvi/rng.hpp"

namespace mvi {

// Samples stacked row-wise: sample i owns rows [i*nodes, (i+1)*nodes) of
// x (features), y (labels in {0,1}) and, for teacher data, expectation
// (E[Y | X] under the teacher).
struct Dataset {
  Matrix x;
  Matrix y;
  Matrix expectation;
  std::size_t nodes = 1;
  std::optional<Graph> graph;

  std::size_t count() const { return nodes == 0 ? 0 : x.rows() / nodes; }
  bool has_expectation() const { return !expectation.empty(); }
  Dataset subset(const std::vector<std::size_t>& indices) const;
  Dataset slice(std::size_t begin, std::size_t end) const;
  // Alignment, finiteness and label-range checks; throws on violation.
  void validate() const;
};

struct TeacherData {
  Dataset data;
  Network teacher;
};

// Probit regression: X ~ N(0.05, 1), beta ~ N(-0.05, 1), b ~ N(-0.1, 1),
// y ~ Bernoulli(Phi(X beta + b)). The teacher is a one-layer NormalCdf net.
TeacherData gen_probit(std::size_t n, std::size_t dim, RngStream& rng);

// Interleaved half circles; samples alternate between moon A (label [1,0])
// and moon B (label [0,1]).
Dataset gen_two_moons(std::size_t n, double noise, RngStream& rng);
inline constexpr double kDefaultMoonNoise = 0.1;

// Teacher-student graph data: teacher parameters i.i.d. N(1,1) from
// teacher_rng, features N(0,1) and Bernoulli (sigmoid) or categorical
// (softmax) labels from data_rng.
TeacherData gen_gcn_teacher(const Graph& graph, std::size_t n, std::vector<LayerSpec> specs,
                            RngStream& teacher_rng, RngStream& data_rng);

// Regenerates the teacher alone (same draws as gen_gcn_teacher).
Network make_gcn_teacher(const Graph& graph, std::vector<LayerSpec> specs, RngStream& teacher_rng);

// Draws N(feature_mean, 1) features and labels for an existing teacher.
Dataset sample_teacher_data(const Network& teacher, std::size_t n, RngStream& data_rng,
                            double feature_mean = 0.0);

// First n_train samples form the training set, the rest the test set.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, std::size_t n_train);

// Time x node label panel with optional row/column names.
struct Panel {
  std::vector<std::string> dates;
  std::vector<std::string> columns;
  Matrix labels;  // time x node, integer class labels
};

struct PanelSpec {
  std::size_t lag = 5;
  std::size_t knn = 4;
  std::vector<std::string> label_columns;  // empty: every non-date column
  std::string date_column = "date";
};

// Sample t has features [Y_{t-1} ... Y_{t-d}] (node x d) and label Y_t:
// the raw value when classes <= 2, else a one-hot row of width `classes`.
Dataset lag_features(const Matrix& panel, std::size_t d, std::size_t classes = 2);

// Each node links to its k most correlated peers (Pearson, ties to the lower
// index), then the edge set is symmetrized by union.
Graph knn_graph_from_labels(const Matrix& train_labels, std::size_t k);

Panel load_panel_csv(const std::string& path, const PanelSpec& spec);
Panel read_panel_csv(std::istream& is, const PanelSpec& spec, const std::string& source = "<stream>");
void write_panel_csv(std::ostream& os, const Panel& panel, const std::string& date_column = "date");
void save_panel_csv(const std::string& path, const Panel& panel,
                    const std::string& date_column = "date");

// Artifact-only generator for exercising the panel path: a latent AR(1)
// field diffused over `graph`, z_t = rho * mean_nbr(z_{t-1}) + sqrt(1-rho^2) e_t,
// labelled 1 above `threshold` (binary) or 1/2 above/below +-threshold
// (three classes).
struct SyntheticPanelOptions {
  std::size_t steps = 400;
  double rho = 0.8;
  double threshold = 0.6;
  std::size_t classes = 2;
};
Panel gen_synthetic_panel(const Graph& graph, const SyntheticPanelOptions& opts, RngStream& rng);

}  // namespace mvi
