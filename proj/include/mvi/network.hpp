#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mvi/activation.hpp"
#include "mvi/graph.hpp"
#include "mvi/matrix.hpp"
#include "mvi/rng.hpp"

namespace mvi {

enum class FilterKind { Dense, Gcn, Chebyshev, Sage };

// Parameter-free feature map eta of a decoupled layer eta(X) Theta.
//
// Multi-block filters stack their blocks horizontally:
//   Chebyshev(K): eta(X) = [T_1 X | ... | T_K X], Theta = [Theta_1; ...; Theta_K]
//   Sage:         eta(X) = [X | mean_nbr X],      Theta = [Theta_self; Theta_nbr]
struct FilterSpec {
  FilterKind kind = FilterKind::Dense;
  std::size_t order = 1;  // Chebyshev K

  static FilterSpec dense() { return {}; }
  static FilterSpec gcn() { return {FilterKind::Gcn, 1}; }
  static FilterSpec chebyshev(std::size_t k) { return {FilterKind::Chebyshev, k}; }
  static FilterSpec sage() { return {FilterKind::Sage, 1}; }

  // Width multiplier of eta relative to the layer input.
  std::size_t expansion() const;
  bool needs_graph() const { return kind != FilterKind::Dense; }
  bool operator==(const FilterSpec&) const = default;
};

std::string to_string(const FilterSpec& f);
FilterSpec parse_filter(const std::string& text);

enum class BnKind { Off, On, HalfFrozen };

struct BnMode {
  BnKind kind = BnKind::Off;
  // HalfFrozen: epoch after which running statistics are frozen; 0 means
  // ceil(E/2) of the training run.
  std::size_t freeze_epoch = 0;

  static BnMode off() { return {}; }
  static BnMode on() { return {BnKind::On, 0}; }
  static BnMode half_frozen(std::size_t epoch = 0) { return {BnKind::HalfFrozen, epoch}; }
  bool enabled() const { return kind != BnKind::Off; }
  bool operator==(const BnMode&) const = default;
};

std::string to_string(const BnMode& b);
BnMode parse_bn(const std::string& text);

struct LayerSpec {
  FilterSpec filter;
  Activation activation;
  std::size_t in = 0;
  std::size_t out = 0;
  bool bias = true;
  BnMode bn;

  std::size_t weight_rows() const { return in * filter.expansion(); }
  bool operator==(const LayerSpec&) const = default;
};

struct LayerParams {
  Matrix weight;  // weight_rows x out
  Matrix bias;    // 1 x out, or empty when the layer has no bias
  bool operator==(const LayerParams&) const = default;
};

struct BnState {
  Matrix running_mean;  // 1 x out
  Matrix running_var;   // 1 x out, biased batch variances
  bool frozen = false;
  bool operator==(const BnState&) const = default;
};

inline constexpr double kBnMomentum = 0.1;
inline constexpr double kBnSigmaFloor = 1e-5;

// Dense n x n filter blocks of one layer, with their transposes for the
// backward pass. Dense layers have no blocks and act as the identity.
class FilterBank {
 public:
  FilterBank() = default;
  FilterBank(const FilterSpec& spec, const Graph* graph);

  // eta(X) for stacked samples of `nodes` rows each.
  Matrix apply(const Matrix& x, std::size_t nodes) const;
  // Adjoint: d eta -> d X.
  Matrix apply_transpose(const Matrix& d_eta, std::size_t nodes) const;
  std::size_t blocks() const { return blocks_.empty() ? 1 : blocks_.size(); }

 private:
  std::vector<Matrix> blocks_;
  std::vector<Matrix> transposed_;
  std::vector<bool> is_identity_;
};

/// Layered decoupled model f(X, Theta) = phi_L(eta_L(X_L) Theta_L).
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<LayerSpec> specs, std::optional<Graph> graph = std::nullopt);

  std::size_t num_layers() const { return specs_.size(); }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  const LayerSpec& spec(std::size_t l) const { return specs_.at(l); }
  std::vector<LayerParams>& params() { return params_; }
  const std::vector<LayerParams>& params() const { return params_; }
  std::vector<BnState>& bn_states() { return bn_; }
  const std::vector<BnState>& bn_states() const { return bn_; }
  const std::optional<Graph>& graph() const { return graph_; }
  const FilterBank& filter(std::size_t l) const { return filters_.at(l); }

  // Rows per sample in stacked batches: the graph size, or 1 without a graph.
  std::size_t nodes() const { return nodes_; }
  void set_nodes(std::size_t nodes);
  // Swaps the graph used by every graph filter (e.g. a perturbed estimate).
  void set_graph(Graph g);

  bool operator==(const Network& other) const {
    return specs_ == other.specs_ && params_ == other.params_ && bn_ == other.bn_ &&
           graph_ == other.graph_ && nodes_ == other.nodes_;
  }

 private:
  void rebuild_filters();

  std::vector<LayerSpec> specs_;
  std::vector<LayerParams> params_;
  std::vector<BnState> bn_;
  std::optional<Graph> graph_;
  std::vector<FilterBank> filters_;
  std::size_t nodes_ = 1;
};

// Checks channel compatibility and activation placement; throws InvalidArgument.
void validate_specs(const std::vector<LayerSpec>& specs);

enum class InitScheme { GlorotUniform, Teacher };

// Glorot: weights U(+-sqrt(6/(fan_in+fan_out))), bias 0.
// Teacher: every weight and bias i.i.d. N(1, 1).
Network init_params(std::vector<LayerSpec> specs, InitScheme scheme, RngStream& rng,
                    std::optional<Graph> graph = std::nullopt);

enum class Mode { Train, Eval };

enum class BnUse { None, BatchStats, RunningStats };

struct LayerTrace {
  Matrix input;       // X_l
  Matrix eta;         // eta_l(X_l)
  Matrix pre;         // eta Theta + b
  Matrix normalized;  // BN(pre), or pre when BN is not applied
  Matrix output;      // X_{l+1} = phi(normalized)
  BnUse bn_use = BnUse::None;
  Matrix mean;   // 1 x out, statistics used for normalization
  Matrix sigma;  // 1 x out, >= kBnSigmaFloor
  Matrix batch_mean;  // batch statistics (BatchStats only) for running updates
  Matrix batch_var;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  std::size_t nodes = 1;
  std::size_t samples = 0;
  Mode mode = Mode::Eval;
  const Matrix& prediction() const { return layers.back().output; }
};

// Forward pass over stacked samples. Pure: Train-mode BN uses batch
// statistics but does not touch the running statistics; the owner applies
// them with update_running_stats.
ForwardTrace forward(const Network& net, const Matrix& x, Mode mode);
Matrix predict(const Network& net, const Matrix& x);
void update_running_stats(Network& net, const ForwardTrace& trace);

enum class LossKind { Mse, BinaryCe, CategoricalCe };

std::string to_string(LossKind k);
LossKind parse_loss(const std::string& text);

inline constexpr double kProbClamp = 1e-12;

// Per-sample loss summed over nodes and outputs, averaged over samples.
// MSE is 0.5 ||f - Y||_F^2 per sample.
double batch_loss(LossKind loss, const Matrix& pred, const Matrix& y, std::size_t samples);

struct LayerGrad {
  Matrix weight;
  Matrix bias;
};

struct BackwardResult {
  // d_output[l]: gradient of the scaled summed loss w.r.t. X_{l+1}; only
  // filled for hidden layers.
  std::vector<Matrix> d_output;
  std::vector<LayerGrad> params;
};

// Reverse-mode pass for loss scale * sum_j L_j. Sigmoid+BinaryCe and
// Softmax+CategoricalCe use the fused output gradient (f - Y).
BackwardResult backward(const Network& net, const ForwardTrace& trace, LossKind loss,
                        const Matrix& y, double scale, bool want_params = true);

// Gradient of sum_j L_j with respect to the output X_{l+1} of hidden layer
// l (0-based, l < L-1), stacked per sample.
Matrix grad_wrt_hidden(const Network& net, const ForwardTrace& trace, LossKind loss,
                       const Matrix& y, std::size_t l);

// Gradients of the batch-mean loss with respect to every raw (W, b).
std::vector<LayerGrad> param_gradient_sgd(const Network& net, const ForwardTrace& trace,
                                          LossKind loss, const Matrix& y);

}  // namespace mvi
