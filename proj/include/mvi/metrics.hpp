#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mvi/matrix.hpp"
#include "mvi/network.hpp"

namespace mvi {

// All metrics take stacked predictions/labels: sample i owns rows
// [i*nodes, (i+1)*nodes), one row per node.

// N^-1 sum_i sum_j ||pred_ij - y_ij||_2 (per-node norm, not squared).
double mse_loss(const Matrix& pred, const Matrix& y, std::size_t nodes);
// Same with squared per-node norms.
double mse_loss_squared(const Matrix& pred, const Matrix& y, std::size_t nodes);

// Mean over samples of summed per-node cross-entropy. Binary form
// -[y log p + (1-y) log(1-p)] per entry, or categorical -y^T log p per row.
// Probabilities are clamped to [1e-12, 1-1e-12].
double cross_entropy_loss(const Matrix& pred, const Matrix& y, std::size_t nodes, bool binary);
// Binary when there is a single output column.
double cross_entropy_loss(const Matrix& pred, const Matrix& y, std::size_t nodes);

// Predicted class of each node row: argmax with ties to the lower index, or
// p > 0.5 for a single column.
std::vector<std::size_t> predicted_classes(const Matrix& pred);
// Fraction of node rows whose predicted class differs from the label's.
double classification_error(const Matrix& pred, const Matrix& y);
// Per-class F1 weighted by true-class support.
double weighted_f1(const Matrix& pred, const Matrix& y);

enum class Norm { L2, Inf };
std::string to_string(Norm p);

// ||hat - star||_p over all stacked parameters; relative divides by ||star||_p.
double lp_param_error(const std::vector<LayerParams>& hat, const std::vector<LayerParams>& star,
                      Norm p, bool relative);
// N^-1 sum_i sum_j ||hat_ij - true_ij||_p; relative (p = 2 only) divides by
// the same sum for the true expectations.
double lp_model_error(const Matrix& hat, const Matrix& truth, std::size_t nodes, Norm p,
                      bool relative);

// sum y^T ln(E / (E - eps)) + (1-y)^T ln((1-E) / (1-E-eps)) over the given
// rows; requires eps < min(E, 1-E) entry-wise.
double ce_loss_gap_bound(const Matrix& truth, const Matrix& y, double eps);

// Ordered name -> value list.
struct MetricReport {
  std::vector<std::pair<std::string, double>> values;

  void set(const std::string& name, double v);
  bool has(const std::string& name) const;
  double get(const std::string& name) const;
};

struct MetricOptions {
  bool probabilities = false;  // outputs live in (0,1): add cross-entropy
  bool classification = false;  // add classification error and weighted F1
  LossKind loss = LossKind::Mse;
};

// Standard report for predictions on one split; `expectation` may be empty.
MetricReport evaluate_predictions(const Matrix& pred, const Matrix& y, const Matrix& expectation,
                                  std::size_t nodes, const MetricOptions& opts);

}  // namespace mvi
