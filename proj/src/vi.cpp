#include "mvi/vi.hpp"

#include <algorithm>
#include <cmath>

#include "mvi/error.hpp"
#include "mvi/kernels.hpp"
#include "mvi/linalg.hpp"

namespace mvi {

namespace {

void scale_columns(Matrix& m, const Matrix& sigma) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) *= sigma(0, c);
}

OperatorEstimate make_operator(const Network& net, const ForwardTrace& trace, std::size_t l,
                               const Matrix& upstream) {
  if (trace.samples == 0) throw InvalidArgument("operator: empty batch");
  const LayerTrace& t = trace.layers[l];
  const double inv_b = 1.0 / static_cast<double>(trace.samples);
  OperatorEstimate op;
  op.layer = l;
  op.batch = trace.samples;
  op.weight = matmul_tn(t.eta, upstream);
  op.weight *= inv_b;
  if (net.spec(l).bias) {
    op.bias = column_sums(upstream);
    op.bias *= inv_b;
  }
  if (t.bn_use != BnUse::None) {
    scale_columns(op.weight, t.sigma);
    if (!op.bias.empty()) scale_columns(op.bias, t.sigma);
  }
  return op;
}

Matrix augmented_block(const Matrix& eta, std::size_t row0, std::size_t nodes, bool bias) {
  Matrix block = eta.row_block(row0, nodes);
  if (!bias) return block;
  return hconcat(block, Matrix(nodes, 1, 1.0));
}

}  // namespace

double squared_norm(const OperatorEstimate& op) {
  return dot(op.weight, op.weight) + (op.bias.empty() ? 0.0 : dot(op.bias, op.bias));
}

double squared_norm(const LayerParams& p) {
  return dot(p.weight, p.weight) + (p.bias.empty() ? 0.0 : dot(p.bias, p.bias));
}

double inner(const OperatorEstimate& op, const LayerParams& p) {
  return dot(op.weight, p.weight) + (op.bias.empty() ? 0.0 : dot(op.bias, p.bias));
}

OperatorEstimate last_layer_operator(const Network& net, const ForwardTrace& trace,
                                     const Matrix& y) {
  const Matrix& f = trace.prediction();
  require_same_shape(f, y, "last_layer_operator");
  return make_operator(net, trace, net.num_layers() - 1, f - y);
}

OperatorEstimate hidden_layer_operator(const Network& net, const ForwardTrace& trace,
                                       LossKind loss, const Matrix& y, std::size_t l) {
  return make_operator(net, trace, l, grad_wrt_hidden(net, trace, loss, y, l));
}

std::vector<OperatorEstimate> layer_operators(const Network& net, const ForwardTrace& trace,
                                              LossKind loss, const Matrix& y) {
  const std::size_t layers = net.num_layers();
  std::vector<OperatorEstimate> ops;
  ops.reserve(layers);
  if (layers > 1) {
    const BackwardResult back = backward(net, trace, loss, y, 1.0, false);
    for (std::size_t l = 0; l + 1 < layers; ++l)
      ops.push_back(make_operator(net, trace, l, back.d_output[l]));
  }
  ops.push_back(last_layer_operator(net, trace, y));
  return ops;
}

OperatorEstimate last_layer_operator_at(const Network& net, const Matrix& x, const Matrix& y) {
  return last_layer_operator(net, forward(net, x, Mode::Eval), y);
}

FeatureSpectrum feature_spectrum(const Network& net, const ForwardTrace& trace) {
  if (trace.samples == 0) throw InvalidArgument("feature_spectrum: empty sample");
  const std::size_t l = net.num_layers() - 1;
  const Matrix& eta = trace.layers[l].eta;
  const bool bias = net.spec(l).bias;
  FeatureSpectrum out;
  for (std::size_t j = 0; j < trace.samples; ++j) {
    const Matrix block = augmented_block(eta, j * trace.nodes, trace.nodes, bias);
    const SymmetricEigen eig = sym_eig(matmul_tn(block, block));
    out.mean_lambda_min += std::max(eig.values.front(), 0.0);
    out.mean_sq_norm += eig.values.back();
  }
  out.mean_lambda_min /= static_cast<double>(trace.samples);
  out.mean_sq_norm /= static_cast<double>(trace.samples);
  return out;
}

ModulusEstimate estimate_modulus(const Network& net, const ForwardTrace& trace) {
  const std::size_t l = net.num_layers() - 1;
  const Activation& act = net.spec(l).activation;
  const FeatureSpectrum spec = feature_spectrum(net, trace);
  const double dmin = min_activation_derivative(act, trace.layers[l].normalized).value_or(0.0);
  ModulusEstimate m;
  m.kappa = dmin * spec.mean_lambda_min;
  m.lipschitz = activation_lipschitz(act) * spec.mean_sq_norm;
  m.count = trace.samples;
  return m;
}

ModulusEstimate estimate_modulus(const Network& net, const Matrix& x) {
  return estimate_modulus(net, forward(net, x, Mode::Eval));
}

ParamDomain ParamDomain::ball(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw InvalidArgument("ball radius must be positive");
  return {Kind::Ball, radius};
}

void project(LayerParams& p, const ParamDomain& domain) {
  if (domain.kind == ParamDomain::Kind::Unconstrained) return;
  const double norm = std::sqrt(squared_norm(p));
  if (norm <= domain.radius) return;
  const double s = domain.radius / norm;
  p.weight *= s;
  p.bias *= s;
}

void project(std::vector<LayerParams>& params, const ParamDomain& domain) {
  for (LayerParams& p : params) project(p, domain);
}

void vi_step(LayerParams& p, const OperatorEstimate& op, double gamma, const ParamDomain& domain,
             Velocity* velocity, double momentum) {
  if (!(gamma > 0.0)) throw InvalidArgument("vi_step: step size must be positive");
  require_same_shape(p.weight, op.weight, "vi_step weight");
  require_same_shape(p.bias, op.bias, "vi_step bias");
  if (velocity != nullptr && momentum != 0.0) {
    if (velocity->weight.empty() && !p.weight.empty()) {
      velocity->weight = Matrix(p.weight.rows(), p.weight.cols());
      velocity->bias = Matrix(p.bias.rows(), p.bias.cols());
    }
    velocity->weight *= momentum;
    velocity->weight += op.weight;
    velocity->bias *= momentum;
    velocity->bias += op.bias;
    p.weight -= velocity->weight * gamma;
    p.bias -= velocity->bias * gamma;
  } else {
    p.weight -= op.weight * gamma;
    p.bias -= op.bias * gamma;
  }
  project(p, domain);
}

LayerParams lookahead(const LayerParams& p, const Velocity& v, double gamma, double momentum) {
  LayerParams out = p;
  if (v.weight.empty()) return out;
  out.weight -= v.weight * (gamma * momentum);
  out.bias -= v.bias * (gamma * momentum);
  return out;
}

double adaptive_step(double kappa, std::size_t t) {
  if (!(kappa > 0.0))
    throw InvalidArgument("adaptive step needs a positive modulus; use operator extrapolation");
  return 1.0 / (kappa * static_cast<double>(t + 1));
}

void oe_step(LayerParams& p, const OperatorEstimate& prev_op, const OperatorEstimate& op,
             double gamma, double lambda, const ParamDomain& domain) {
  if (!(gamma > 0.0)) throw InvalidArgument("oe_step: step size must be positive");
  require_same_shape(prev_op.weight, op.weight, "oe_step");
  require_same_shape(p.weight, op.weight, "oe_step weight");
  require_same_shape(p.bias, op.bias, "oe_step bias");
  Matrix dw = op.weight * (1.0 + lambda);
  dw -= prev_op.weight * lambda;
  p.weight -= dw * gamma;
  if (!p.bias.empty()) {
    Matrix db = op.bias * (1.0 + lambda);
    db -= prev_op.bias * lambda;
    p.bias -= db * gamma;
  }
  project(p, domain);
}

std::size_t oe_select_index(std::size_t T, RngStream& rng) {
  if (T < 2) throw InvalidArgument("oe_select_index: need T >= 2");
  return 2 + static_cast<std::size_t>(rng.below(T - 1));
}

}  // namespace mvi
