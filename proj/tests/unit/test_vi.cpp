#include <doctest.h>

#include <cmath>
#include <vector>

#include "mvi/error.hpp"
#include "mvi/kernels.hpp"
#include "mvi/network.hpp"
#include "mvi/vi.hpp"

using namespace mvi;

namespace {

LayerSpec layer(FilterSpec f, Activation a, std::size_t in, std::size_t out, bool bias = true,
                BnMode bn = BnMode::off()) {
  return {f, a, in, out, bias, bn};
}

LayerParams scalar(double v) { return {Matrix{{v}}, Matrix()}; }
OperatorEstimate scalar_op(double v) { return {0, 1, Matrix{{v}}, Matrix()}; }

// One-layer model on a 4-node graph with categorical or binary labels.
struct Classifier {
  Network net;
  Matrix x;
  Matrix y;
  LossKind loss;
};

Classifier classifier(std::uint64_t seed, bool softmax) {
  RngStream rng(seed, streams::kInit);
  RngStream grng(seed, streams::kGraph);
  const FilterSpec filters[] = {FilterSpec::dense(), FilterSpec::gcn(), FilterSpec::chebyshev(2),
                                FilterSpec::sage()};
  const std::size_t out = softmax ? 3 : 1;
  Network net = init_params({layer(filters[rng.below(4)],
                                   softmax ? Activation::softmax() : Activation::sigmoid(), 3, out)},
                            InitScheme::Teacher, rng, erdos_renyi(4, 0.6, grng));
  RngStream drng(seed, streams::kData);
  const std::size_t samples = 1 + drng.below(6);
  Matrix x = gaussian(drng, 0, 1, samples * 4, 3);
  Matrix y(samples * 4, out);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    if (softmax) y(r, drng.below(out)) = 1.0;
    else y(r, 0) = drng.below(2);
  }
  return {net, x, y, softmax ? LossKind::CategoricalCe : LossKind::BinaryCe};
}

double op_distance(const OperatorEstimate& a, const OperatorEstimate& b) {
  return std::max(max_abs(a.weight - b.weight), b.bias.size() ? max_abs(a.bias - b.bias) : 0.0);
}

}  // namespace

TEST_CASE("last-layer operator equals the parameter gradient for canonical links") {
  for (bool softmax : {false, true})
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Classifier c = classifier(seed, softmax);
      const ForwardTrace t = forward(c.net, c.x, Mode::Train);
      const OperatorEstimate op = last_layer_operator(c.net, t, c.y);
      const std::vector<LayerGrad> g = param_gradient_sgd(c.net, t, c.loss, c.y);
      CHECK(max_abs(op.weight - g[0].weight) <= 1e-12);
      CHECK(max_abs(op.bias - g[0].bias) <= 1e-12);
    }
}

TEST_CASE("last-layer operator vanishes at the conditional mean") {
  Classifier c = classifier(3, false);
  const ForwardTrace t = forward(c.net, c.x, Mode::Train);
  const OperatorEstimate op = last_layer_operator(c.net, t, t.prediction());
  CHECK(max_abs(op.weight) == 0.0);
  CHECK(max_abs(op.bias) == 0.0);
}

TEST_CASE("operator is the mean of per-sample operators") {
  Classifier c = classifier(11, true);
  const std::size_t n = 4, samples = c.x.rows() / n;
  const OperatorEstimate full = last_layer_operator_at(c.net, c.x, c.y);
  CHECK(full.batch == samples);
  Matrix w(full.weight.rows(), full.weight.cols()), b(1, full.bias.cols());
  for (std::size_t s = 0; s < samples; ++s) {
    const OperatorEstimate one =
        last_layer_operator_at(c.net, c.x.row_block(s * n, n), c.y.row_block(s * n, n));
    w = w + one.weight * (1.0 / samples);
    b = b + one.bias * (1.0 / samples);
  }
  CHECK(max_abs(w - full.weight) <= 1e-12);
  CHECK(max_abs(b - full.bias) <= 1e-12);
  CHECK_THROWS(last_layer_operator_at(c.net, Matrix(0, 3), Matrix(0, 3)));
}

TEST_CASE("last-layer operator formula on a dense instance") {
  Network net({layer({}, Activation::sigmoid(), 2, 1)});
  net.params()[0].weight = Matrix{{0.5}, {-1}};
  net.params()[0].bias = Matrix{{0.25}};
  const Matrix x{{1, 2}, {-1, 0.5}, {0, 3}};
  const Matrix y{{1}, {0}, {1}};
  const OperatorEstimate op = last_layer_operator_at(net, x, y);
  Matrix r(3, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    const double z = 0.5 * x(i, 0) - x(i, 1) + 0.25;
    r(i, 0) = 1.0 / (1.0 + std::exp(-z)) - y(i, 0);
  }
  CHECK(max_abs(op.weight - matmul_tn(x, r) * (1.0 / 3)) <= 1e-15);
  CHECK(std::abs(op.bias(0, 0) - (r(0, 0) + r(1, 0) + r(2, 0)) / 3) <= 1e-15);
}

TEST_CASE("batch-norm operator is the sigma-rescaled operator of the folded layer") {
  RngStream rng(2, streams::kInit);
  Network bn({layer(FilterSpec::dense(), Activation::sigmoid(), 3, 2, true, BnMode::on())});
  bn.params()[0].weight = gaussian(rng, 0, 1, 3, 2);
  bn.params()[0].bias = gaussian(rng, 0, 1, 1, 2);
  const Matrix x = gaussian(rng, 0, 1, 7, 3);
  Matrix y(7, 2);
  for (std::size_t i = 0; i < 7; ++i) y(i, i % 2) = 1;
  const ForwardTrace t = forward(bn, x, Mode::Train);
  const OperatorEstimate op = last_layer_operator(bn, t, y);
  const Matrix& mu = t.layers[0].mean;
  const Matrix& sigma = t.layers[0].sigma;

  Network plain({layer(FilterSpec::dense(), Activation::sigmoid(), 3, 2)});
  plain.params()[0].weight = bn.params()[0].weight;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t r = 0; r < 3; ++r) plain.params()[0].weight(r, c) /= sigma(0, c);
    plain.params()[0].bias(0, c) = (bn.params()[0].bias(0, c) - mu(0, c)) / sigma(0, c);
  }
  const ForwardTrace tp = forward(plain, x, Mode::Train);
  CHECK(max_abs(tp.prediction() - t.prediction()) <= 1e-12);
  const OperatorEstimate folded = last_layer_operator(plain, tp, y);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t r = 0; r < 3; ++r)
      CHECK(std::abs(op.weight(r, c) - sigma(0, c) * folded.weight(r, c)) <= 1e-12);
    CHECK(std::abs(op.bias(0, c) - sigma(0, c) * folded.bias(0, c)) <= 1e-12);
  }

  // A step g on the folded parameters, mapped back, is a step sigma * g on
  // the raw ones.
  const Matrix g = gaussian(rng, 0, 1, 3, 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < 3; ++r) {
      const double folded_after = plain.params()[0].weight(r, c) - g(r, c);
      const double raw_after = bn.params()[0].weight(r, c) - sigma(0, c) * g(r, c);
      CHECK(std::abs(sigma(0, c) * folded_after - raw_after) <= 1e-12);
    }
}

TEST_CASE("hidden-layer operator") {
  // 2-layer, identity last layer with Theta_2 = I, MSE.
  Network net({layer({}, Activation::sigmoid(), 2, 2), layer({}, Activation::identity(), 2, 2, false)});
  net.params()[0].weight = Matrix{{1, -1}, {0.5, 2}};
  net.params()[0].bias = Matrix{{0.1, -0.2}};
  net.params()[1].weight = Matrix::identity(2);
  const Matrix x{{1, 2}, {3, -1}};
  const Matrix y{{0.2, 0.4}, {0.9, 0.1}};
  const ForwardTrace t = forward(net, x, Mode::Train);
  const OperatorEstimate op = hidden_layer_operator(net, t, LossKind::Mse, y, 0);
  const Matrix r = t.prediction() - y;
  Matrix want(2, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) want(i, j) = (x(0, i) * r(0, j) + x(1, i) * r(1, j)) / 2;
  CHECK(max_abs(op.weight - want) <= 1e-15);
  CHECK(max_abs(op.bias - Matrix{{(r(0, 0) + r(1, 0)) / 2, (r(0, 1) + r(1, 1)) / 2}}) <= 1e-15);

  const OperatorEstimate zero = hidden_layer_operator(net, t, LossKind::Mse, t.prediction(), 0);
  CHECK(max_abs(zero.weight) == 0.0);
  CHECK_THROWS_AS(hidden_layer_operator(net, t, LossKind::Mse, y, 1), InvalidArgument);

  const std::vector<OperatorEstimate> all = layer_operators(net, t, LossKind::Mse, y);
  REQUIRE(all.size() == 2);
  CHECK(op_distance(all[0], op) <= 1e-15);
  CHECK(op_distance(all[1], last_layer_operator(net, t, y)) <= 1e-15);
}

TEST_CASE("estimate_modulus examples") {
  Network net({layer(FilterSpec::gcn(), Activation::sigmoid(), 3, 1, false)}, Graph(3));
  const Matrix x = Matrix::identity(3);
  const ModulusEstimate m = estimate_modulus(net, x);
  CHECK(m.kappa == doctest::Approx(0.25));
  CHECK(m.lipschitz == doctest::Approx(0.25));
  CHECK(m.count == 1);

  Classifier c = classifier(1, true);
  CHECK(estimate_modulus(c.net, c.x).kappa == 0.0);

  Network relu({layer({}, Activation::relu(), 2, 1)});
  relu.params()[0].weight = Matrix{{1}, {1}};
  CHECK(estimate_modulus(relu, Matrix{{1, 2}}).kappa == 0.0);
  CHECK(estimate_modulus(relu, Matrix{{1, 2}}).lipschitz == doctest::Approx(6.0));
}

TEST_CASE("kappa never exceeds K2") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(seed, streams::kInit);
    RngStream grng(seed, streams::kGraph);
    const Activation acts[] = {Activation::sigmoid(), Activation::normal_cdf(), Activation::softplus(3.0)};
    Network net = init_params({layer(FilterSpec::gcn(), acts[rng.below(3)], 2, 1)},
                              InitScheme::GlorotUniform, rng, erdos_renyi(6, 0.5, grng));
    const Matrix x = gaussian(rng, 0, 1, 6 * 5, 2);
    const ModulusEstimate m = estimate_modulus(net, x);
    CHECK(m.kappa >= 0.0);
    CHECK(m.kappa <= m.lipschitz + 1e-12);
  }
}

TEST_CASE("empirical monotonicity and Lipschitz bound on one-layer sigmoid models") {
  RngStream rng(9, streams::kInit);
  RngStream grng(9, streams::kGraph);
  Network net({layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 1)}, erdos_renyi(6, 0.5, grng));
  const Matrix x = gaussian(rng, 0, 1, 6 * 8, 2);
  Matrix y(x.rows(), 1);
  for (std::size_t r = 0; r < y.rows(); ++r) y(r, 0) = rng.below(2);
  for (int pair = 0; pair < 200; ++pair) {
    Network a = net, b = net;
    a.params()[0] = {gaussian(rng, 0, 2, 2, 1), gaussian(rng, 0, 2, 1, 1)};
    b.params()[0] = {gaussian(rng, 0, 2, 2, 1), gaussian(rng, 0, 2, 1, 1)};
    const OperatorEstimate fa = last_layer_operator_at(a, x, y);
    const OperatorEstimate fb = last_layer_operator_at(b, x, y);
    const OperatorEstimate df{0, 0, fa.weight - fb.weight, fa.bias - fb.bias};
    const LayerParams dp{a.params()[0].weight - b.params()[0].weight,
                         a.params()[0].bias - b.params()[0].bias};
    CHECK(inner(df, dp) >= -1e-10);
    // Both evaluation points bound the Lipschitz constant from above through
    // K_phi; either estimate's feature spectrum is the same.
    const double k2 = estimate_modulus(a, x).lipschitz;
    CHECK(std::sqrt(squared_norm(df)) <= k2 * std::sqrt(squared_norm(dp)) + 1e-8);
  }
}

TEST_CASE("projection") {
  LayerParams inside{Matrix{{0.3, 0.4}}, Matrix{{0.0}}};
  LayerParams copy = inside;
  project(copy, ParamDomain::ball(1.0));
  CHECK(copy == inside);
  LayerParams far{Matrix{{3, 0}}, Matrix{{4}}};
  project(far, ParamDomain::ball(2.5));
  CHECK(std::sqrt(squared_norm(far)) == doctest::Approx(2.5));
  CHECK(max_abs(far.weight - Matrix{{1.5, 0}}) <= 1e-15);
  LayerParams again = far;
  project(again, ParamDomain::ball(2.5));
  CHECK(max_abs(again.weight - far.weight) <= 1e-12);
  project(far, ParamDomain::unconstrained());
  CHECK(max_abs(again.weight - far.weight) == 0.0);
  CHECK_THROWS_AS(ParamDomain::ball(0.0), InvalidArgument);
}

TEST_CASE("vi_step") {
  LayerParams p = scalar(1.0);
  vi_step(p, scalar_op(0.0), 0.5, ParamDomain::unconstrained());
  CHECK(p.weight(0, 0) == 1.0);
  vi_step(p, scalar_op(2.0), 0.25, ParamDomain::unconstrained());
  CHECK(p.weight(0, 0) == 0.5);
  LayerParams q = scalar(0.0);
  vi_step(q, scalar_op(1.0), 1e6, ParamDomain::ball(3.0));
  CHECK(q.weight(0, 0) == doctest::Approx(-3.0));

  // Heavy ball: v1 = 1, v2 = 0.9 + 1.
  LayerParams h = scalar(0.0);
  Velocity v;
  vi_step(h, scalar_op(1.0), 0.1, ParamDomain::unconstrained(), &v, 0.9);
  vi_step(h, scalar_op(1.0), 0.1, ParamDomain::unconstrained(), &v, 0.9);
  CHECK(v.weight(0, 0) == doctest::Approx(1.9));
  CHECK(h.weight(0, 0) == doctest::Approx(-0.1 - 0.19));
  const LayerParams look = lookahead(h, v, 0.1, 0.9);
  CHECK(look.weight(0, 0) == doctest::Approx(-0.29 - 0.1 * 0.9 * 1.9));
}

TEST_CASE("adaptive_step") {
  CHECK(adaptive_step(0.5, 0) == 2.0);
  CHECK(adaptive_step(1.0, 9) == doctest::Approx(0.1));
  for (std::size_t t = 0; t < 100; ++t) CHECK(adaptive_step(0.3, t + 1) < adaptive_step(0.3, t));
  CHECK_THROWS_AS(adaptive_step(0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(adaptive_step(-1.0, 1), InvalidArgument);
}

TEST_CASE("oe_step examples") {
  LayerParams p = scalar(1.0);
  oe_step(p, scalar_op(1.0), scalar_op(1.0), 0.25, 1.0, ParamDomain::unconstrained());
  CHECK(p.weight(0, 0) == 0.75);
  LayerParams a = scalar(2.0), b = scalar(2.0);
  oe_step(a, scalar_op(0.7), scalar_op(0.7), 0.3, 1.0, ParamDomain::unconstrained());
  vi_step(b, scalar_op(0.7), 0.3, ParamDomain::unconstrained());
  CHECK(a == b);
}

TEST_CASE("oe iterates match the affine recursion for a linear operator") {
  RngStream rng(4, streams::kInit);
  const std::size_t d = 4;
  Matrix m = gaussian(rng, 0, 1, d, d);
  const Matrix a = matmul_tn(m, m) * 0.25;
  const double gamma = 0.1, lambda = 1.0;
  // [theta_{t+1}; theta_t] = B [theta_t; theta_{t-1}].
  Matrix big(2 * d, 2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      big(i, j) = (i == j ? 1.0 : 0.0) - gamma * (1 + lambda) * a(i, j);
      big(i, d + j) = gamma * lambda * a(i, j);
    }
    big(d + i, i) = 1.0;
  }
  const Matrix theta0 = gaussian(rng, 0, 1, d, 1);
  LayerParams p{theta0, Matrix()};
  OperatorEstimate prev{0, 1, matmul(a, theta0), Matrix()};
  Matrix state = vconcat({theta0, theta0});
  for (int t = 0; t < 30; ++t) {
    const OperatorEstimate op{0, 1, matmul(a, p.weight), Matrix()};
    oe_step(p, prev, op, gamma, lambda, ParamDomain::unconstrained());
    prev = op;
    state = matmul(big, state);
    CHECK(max_abs(p.weight - state.row_block(0, d)) <= 1e-10);
  }
}

TEST_CASE("oe_select_index") {
  RngStream rng(5, streams::kSelect);
  for (int i = 0; i < 20; ++i) CHECK(oe_select_index(2, rng) == 2);
  CHECK_THROWS_AS(oe_select_index(1, rng), InvalidArgument);
  std::vector<int> counts(11, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[oe_select_index(10, rng)]++;
  CHECK(counts[0] == 0);
  CHECK(counts[1] == 0);
  double chi2 = 0;
  const double expect = draws / 9.0;
  for (std::size_t k = 2; k <= 10; ++k) chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
  CHECK(chi2 < 20.09);  // chi-square, 8 dof, 0.01
  RngStream r1(6, streams::kSelect), r2(6, streams::kSelect);
  for (int i = 0; i < 10; ++i) CHECK(oe_select_index(10, r1) == oe_select_index(10, r2));
  std::vector<int> hist{0, 1, 2, 3};
  RngStream r3(6, streams::kSelect);
  CHECK(oe_select_iterate(hist, r3) >= 2);
}
