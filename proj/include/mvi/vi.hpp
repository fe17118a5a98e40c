#pragma once

#include <cstddef>
#include <vector>

#include "mvi/error.hpp"
#include "mvi/network.hpp"
#include "mvi/rng.hpp"

namespace mvi {

// Operator value for one layer, shaped like that layer's (weight, bias).
struct OperatorEstimate {
  std::size_t layer = 0;
  std::size_t batch = 0;
  Matrix weight;
  Matrix bias;  // empty when the layer has no bias
};

// Squared Euclidean norm over weight and bias parts.
double squared_norm(const OperatorEstimate& op);
double squared_norm(const LayerParams& p);
// <op, p> over matching weight and bias parts.
double inner(const OperatorEstimate& op, const LayerParams& p);

// Last layer: batch mean of eta^T (phi(Z) - Y); bias part is the column
// mean of phi(Z) - Y. With BN the result is rescaled per output channel by
// the normalizing sigma.
OperatorEstimate last_layer_operator(const Network& net, const ForwardTrace& trace,
                                     const Matrix& y);

// Hidden layer l < L-1: batch mean of eta_l^T grad_{X_{l+1}} L; bias part is
// the column mean of that gradient.
OperatorEstimate hidden_layer_operator(const Network& net, const ForwardTrace& trace,
                                       LossKind loss, const Matrix& y, std::size_t l);

// Every layer's operator from one forward trace and a single backward sweep.
std::vector<OperatorEstimate> layer_operators(const Network& net, const ForwardTrace& trace,
                                              LossKind loss, const Matrix& y);

// Convenience: Eval-mode forward then last_layer_operator.
OperatorEstimate last_layer_operator_at(const Network& net, const Matrix& x, const Matrix& y);

struct ModulusEstimate {
  double kappa = 0.0;
  double lipschitz = 0.0;
  std::size_t count = 0;
};

// kappa = (min activation derivative at the realized last-layer
// preactivations) * mean_j lambda_min(eta_j^T eta_j), and
// K2 = K_phi * mean_j ||eta_j||_2^2, where eta_j is sample j's last-layer
// feature block, augmented with a ones column when the layer has a bias.
ModulusEstimate estimate_modulus(const Network& net, const Matrix& x);
// Same, from an existing trace.
ModulusEstimate estimate_modulus(const Network& net, const ForwardTrace& trace);

// Second moment pieces of the modulus: mean lambda_min and mean ||.||_2^2 of
// the (augmented) last-layer feature blocks.
struct FeatureSpectrum {
  double mean_lambda_min = 0.0;
  double mean_sq_norm = 0.0;
};
FeatureSpectrum feature_spectrum(const Network& net, const ForwardTrace& trace);

struct ParamDomain {
  enum class Kind { Unconstrained, Ball };
  Kind kind = Kind::Unconstrained;
  double radius = 0.0;  // per layer, over the stacked (weight, bias)

  static ParamDomain unconstrained() { return {}; }
  static ParamDomain ball(double radius);
};

void project(LayerParams& p, const ParamDomain& domain);
void project(std::vector<LayerParams>& params, const ParamDomain& domain);

// Heavy-ball velocity for one layer; zero-initialized on first use.
struct Velocity {
  Matrix weight;
  Matrix bias;
};

// p <- Proj(p - gamma * direction), with direction = op when momentum is 0,
// else v <- momentum * v + op and direction = v.
void vi_step(LayerParams& p, const OperatorEstimate& op, double gamma, const ParamDomain& domain,
             Velocity* velocity = nullptr, double momentum = 0.0);

// Nesterov evaluation point p - gamma * momentum * v.
LayerParams lookahead(const LayerParams& p, const Velocity& v, double gamma, double momentum);

// 1 / (kappa (t + 1)); throws InvalidArgument when kappa <= 0.
double adaptive_step(double kappa, std::size_t t);

// p <- Proj(p - gamma [op + lambda (op - prev_op)]).
void oe_step(LayerParams& p, const OperatorEstimate& prev_op, const OperatorEstimate& op,
             double gamma, double lambda, const ParamDomain& domain);

// Uniform draw from {2, ..., T}; throws when T < 2.
std::size_t oe_select_index(std::size_t T, RngStream& rng);

// history[t] holds iterate t for t = 0..T.
template <class P>
const P& oe_select_iterate(const std::vector<P>& history, RngStream& rng) {
  if (history.size() < 3) throw InvalidArgument("oe_select_iterate: need iterates 0..T with T >= 2");
  return history[oe_select_index(history.size() - 1, rng)];
}

}  // namespace mvi
