#include "mvi/activation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "mvi/error.hpp"

namespace mvi {
namespace {

double softplus_value(double z, double beta) {
  const double bz = beta * z;
  // log1p(exp(x)) without overflow.
  return (bz > 0.0 ? bz + std::log1p(std::exp(-bz)) : std::log1p(std::exp(bz))) / beta;
}

double pointwise_derivative(const Activation& act, double z) {
  switch (act.kind) {
    case ActivationKind::Identity: return 1.0;
    case ActivationKind::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case ActivationKind::Softplus: return sigmoid(act.beta * z);
    case ActivationKind::NormalCdf: return normal_pdf(z);
    case ActivationKind::Softmax: break;
  }
  throw InvalidArgument("pointwise_derivative: softmax is not pointwise");
}

double pointwise_value(const Activation& act, double z) {
  switch (act.kind) {
    case ActivationKind::Identity: return z;
    case ActivationKind::ReLU: return z > 0.0 ? z : 0.0;
    case ActivationKind::Sigmoid: return sigmoid(z);
    case ActivationKind::Softplus: return softplus_value(z, act.beta);
    case ActivationKind::NormalCdf: return normal_cdf(z);
    case ActivationKind::Softmax: break;
  }
  throw InvalidArgument("pointwise_value: softmax is not pointwise");
}

Matrix softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto in = z.row_span(r);
    auto o = out.row_span(r);
    const double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - m);
      s += o[c];
    }
    for (double& v : o) v /= s;
  }
  return out;
}

}  // namespace

Activation Activation::softplus(double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("softplus beta must be positive");
  return {ActivationKind::Softplus, beta};
}

std::string to_string(const Activation& a) {
  switch (a.kind) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Softmax: return "softmax";
    case ActivationKind::NormalCdf: return "normal_cdf";
    case ActivationKind::Softplus: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "softplus:%.17g", a.beta);
      return buf;
    }
  }
  return "?";
}

Activation parse_activation(const std::string& text) {
  if (text == "identity") return Activation::identity();
  if (text == "relu") return Activation::relu();
  if (text == "sigmoid") return Activation::sigmoid();
  if (text == "softmax") return Activation::softmax();
  if (text == "normal_cdf") return Activation::normal_cdf();
  if (text == "softplus") return Activation::softplus(1.0);
  if (text.rfind("softplus:", 0) == 0) {
    try {
      return Activation::softplus(std::stod(text.substr(9)));
    } catch (const std::logic_error&) {
    }
  }
  throw ParseError("unknown activation '" + text + "'");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

Matrix apply_activation(const Activation& act, const Matrix& z) {
  if (act.kind == ActivationKind::Softmax) {
    if (z.cols() < 2) throw ShapeError("softmax needs at least two columns");
    return softmax_rows(z);
  }
  Matrix out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.size(); ++i) out.data()[i] = pointwise_value(act, z.data()[i]);
  return out;
}

Matrix activation_vjp(const Activation& act, const Matrix& z, const Matrix& upstream) {
  require_same_shape(z, upstream, "activation_vjp");
  Matrix out(z.rows(), z.cols());
  if (act.kind == ActivationKind::Softmax) {
    const Matrix p = apply_activation(act, z);
    // (diag(p) - p p^T) u = p * (u - <p, u>)
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto pr = p.row_span(r);
      auto ur = upstream.row_span(r);
      double inner = 0.0;
      for (std::size_t c = 0; c < pr.size(); ++c) inner += pr[c] * ur[c];
      for (std::size_t c = 0; c < pr.size(); ++c) out(r, c) = pr[c] * (ur[c] - inner);
    }
    return out;
  }
  for (std::size_t i = 0; i < z.size(); ++i)
    out.data()[i] = upstream.data()[i] * pointwise_derivative(act, z.data()[i]);
  return out;
}

std::optional<double> min_activation_derivative(const Activation& act, const Matrix& z) {
  switch (act.kind) {
    case ActivationKind::ReLU: return std::nullopt;
    case ActivationKind::Identity: return 1.0;
    case ActivationKind::Softmax: return 0.0;
    default: break;
  }
  if (z.empty()) throw InvalidArgument("min_activation_derivative: empty input");
  double m = std::numeric_limits<double>::infinity();
  for (double v : z.values()) m = std::min(m, pointwise_derivative(act, v));
  return m;
}

double activation_lipschitz(const Activation& act) {
  switch (act.kind) {
    case ActivationKind::Identity:
    case ActivationKind::ReLU:
    case ActivationKind::Softmax:
    case ActivationKind::Softplus: return 1.0;
    case ActivationKind::Sigmoid: return 0.25;
    case ActivationKind::NormalCdf: return 1.0 / std::sqrt(2.0 * std::numbers::pi);
  }
  return 1.0;
}

}  // namespace mvi
