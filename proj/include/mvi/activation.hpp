#pragma once

#include <optional>
#include <string>

#include "mvi/matrix.hpp"

namespace mvi {

enum class ActivationKind { Identity, ReLU, Sigmoid, Softmax, Softplus, NormalCdf };

struct Activation {
  ActivationKind kind = ActivationKind::Identity;
  // Softplus sharpness: log(1 + exp(beta z)) / beta.
  double beta = 1.0;

  static Activation identity() { return {ActivationKind::Identity}; }
  static Activation relu() { return {ActivationKind::ReLU}; }
  static Activation sigmoid() { return {ActivationKind::Sigmoid}; }
  static Activation softmax() { return {ActivationKind::Softmax}; }
  static Activation softplus(double beta);
  static Activation normal_cdf() { return {ActivationKind::NormalCdf}; }

  bool operator==(const Activation&) const = default;
};

std::string to_string(const Activation& a);
// Parses "relu", "sigmoid", "softplus:5", ...
Activation parse_activation(const std::string& text);

double sigmoid(double z);
// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

// Element-wise (or, for Softmax, row-wise) activation.
Matrix apply_activation(const Activation& act, const Matrix& z);

// upstream contracted with the Jacobian of apply_activation at z.
// ReLU'(0) is taken as 0.
Matrix activation_vjp(const Activation& act, const Matrix& z, const Matrix& upstream);

// Smallest eigenvalue of the activation Jacobian over the rows of z:
// Sigmoid/Softplus/NormalCdf give the minimal pointwise derivative, Identity
// gives 1 and Softmax exactly 0. Returns nullopt for ReLU, where no positive
// lower bound exists and callers should use 0.
std::optional<double> min_activation_derivative(const Activation& act, const Matrix& z);

// Global Lipschitz constant of the activation: Sigmoid 1/4, NormalCdf
// 1/sqrt(2 pi), Softmax/Softplus/ReLU/Identity 1.
double activation_lipschitz(const Activation& act);

}  // namespace mvi
