#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mvi {

// One empirical check: `measured` must fall in [lower, upper].
struct CheckResult {
  std::string name;
  double measured = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
  std::string detail;
};

CheckResult make_check(const std::string& name, double measured, double lower, double upper,
                       const std::string& detail = "");

// Operator equals the analytic CE gradient (max abs deviation) and the
// central finite-difference gradient (max relative deviation), over
// `instances` random one-layer Sigmoid+BCE and Softmax+CCE problems.
CheckResult check_equivalence_exact(std::uint64_t seed, std::size_t instances = 50);
CheckResult check_equivalence_fd(std::uint64_t seed, std::size_t instances = 50);

// F(Theta*) against stored conditional expectations (max abs) and against
// n sampled labels (||F|| / (sigma / sqrt(n))).
CheckResult check_operator_zero_exact(std::uint64_t seed);
CheckResult check_operator_zero_sampled(std::uint64_t seed, std::size_t n = 50000);

// Monotonicity, strong monotonicity and Lipschitz bounds over random
// parameter pairs on one-layer sigmoid instances. Each reports the worst
// margin.
struct MonotoneReport {
  CheckResult monotone;
  CheckResult strong;
  CheckResult lipschitz;
};
MonotoneReport check_monotone(std::uint64_t seed, std::size_t pairs = 200);

// Softmax last layer gives a modulus of exactly zero.
CheckResult check_softmax_kappa(std::uint64_t seed);

// Mean of per-sample operators equals the batch operator.
CheckResult check_unbiased(std::uint64_t seed);

// Log-log slope of the median ||Theta_T - Theta*||^2 for adaptive steps
// 1/(kappa (t+1)) on a one-layer GCN-sigmoid teacher-student problem.
struct RateResult {
  std::vector<double> horizons;
  std::vector<double> medians;
  double slope = 0.0;
};
RateResult adaptive_rate(std::uint64_t seed, std::size_t seeds = 5);
CheckResult check_adaptive_rate(std::uint64_t seed, std::size_t seeds = 5);

// Log-log slope of the median residual ||F_full(Theta_R)|| for operator
// extrapolation on a one-layer softmax teacher-student problem.
RateResult extrapolation_rate(std::uint64_t seed, std::size_t seeds = 5);
CheckResult check_extrapolation_rate(std::uint64_t seed, std::size_t seeds = 5);

// Reparameterized BN step maps back to the sigma-rescaled raw step.
CheckResult check_bn_algebra(std::uint64_t seed, std::size_t instances = 50);

// Grid-optimal perturbed-filter prediction gap over the mismatch bound
// (worst ratio; passes when <= 1).
CheckResult check_mismatch_bound(std::uint64_t seed, std::size_t instances = 20);

// Test-sample CE gap against the loss-gap bound at the measured l_inf
// model error (worst ratio over eligible samples).
CheckResult check_loss_gap_bound(std::uint64_t seed);

// Finite-difference checks of grad_wrt_hidden and param_gradient_sgd on
// random smooth networks (some with batch norm); worst relative error.
CheckResult check_hidden_gradient_fd(std::uint64_t seed, std::size_t nets = 20);
CheckResult check_param_gradient_fd(std::uint64_t seed, std::size_t nets = 20);

// ReLU units with all-negative preactivations: zero SGD rows, nonzero
// operator rows (reports the smallest operator row norm among them).
CheckResult check_inactive_neurons(std::uint64_t seed);

// Relative spread of final test MSE across batch sizes {50, 100, 200}.
CheckResult check_batch_insensitivity(std::uint64_t seed);

struct TheoryOptions {
  std::uint64_t seed = 0;
  bool rates = true;  // the slower rate and batch-size checks
};

std::vector<CheckResult> run_theory_checks(const TheoryOptions& opts);

// CSV: check,measured,lower,upper,pass,detail
void write_check_report(std::ostream& os, const std::vector<CheckResult>& checks);

}  // namespace mvi
