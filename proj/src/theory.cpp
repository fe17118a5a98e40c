#include "mvi/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mvi/data.hpp"
#include "mvi/error.hpp"
#include "mvi/format.hpp"
#include "mvi/graph.hpp"
#include "mvi/kernels.hpp"
#include "mvi/linalg.hpp"
#include "mvi/metrics.hpp"
#include "mvi/network.hpp"
#include "mvi/trainer.hpp"
#include "mvi/vi.hpp"

namespace mvi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Split tag reserved for auxiliary samples (pilot and evaluation sets) so
// they never coincide with per-iteration streams.
constexpr std::uint64_t kAuxTag = 1'000'000'000ULL;

std::string fmt(double v) { return format_real(v); }

LayerParams diff(const LayerParams& a, const LayerParams& b) {
  LayerParams d{a.weight - b.weight, a.bias.empty() ? Matrix() : a.bias - b.bias};
  return d;
}

LayerParams as_params(const OperatorEstimate& op) { return {op.weight, op.bias}; }

double sq(const LayerParams& p) { return squared_norm(p); }

double dot_params(const LayerParams& a, const LayerParams& b) {
  double s = dot(a.weight, b.weight);
  if (!a.bias.empty()) s += dot(a.bias, b.bias);
  return s;
}

double max_abs_params(const LayerParams& p) {
  double m = max_abs(p.weight);
  if (!p.bias.empty()) m = std::max(m, max_abs(p.bias));
  return m;
}

LayerParams random_params(const LayerSpec& s, RngStream& rng, double mean, double sd) {
  LayerParams p{gaussian(rng, mean, sd, s.weight_rows(), s.out), Matrix()};
  if (s.bias) p.bias = gaussian(rng, mean, sd, 1, s.out);
  return p;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Labels y for stacked predictions: one-hot for softmax outputs, Bernoulli
// 0/1 otherwise.
Matrix random_labels(const Matrix& shape_like, bool one_hot, RngStream& rng) {
  Matrix y(shape_like.rows(), shape_like.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    if (one_hot) {
      y(r, rng.below(y.cols())) = 1.0;
    } else {
      for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
  }
  return y;
}

struct CeInstance {
  Network net;
  Matrix x;
  Matrix y;
  LossKind loss;
};

// One-layer Sigmoid+BCE (even i) or Softmax+CCE (odd i) problem.
CeInstance ce_instance(std::uint64_t seed, std::size_t i) {
  RngStream rng = RngStream(seed, streams::kInit).split(i);
  const bool softmax = i % 2 == 1;
  const std::size_t d = 2 + rng.below(5);
  const std::size_t f = softmax ? 2 + rng.below(3) : 1;
  const std::size_t b = 5 + rng.below(16);
  LayerSpec s{FilterSpec::dense(), softmax ? Activation::softmax() : Activation::sigmoid(), d, f,
              true, BnMode::off()};
  Network net({s});
  net.params()[0] = random_params(s, rng, 0.0, 1.0);
  Matrix x = gaussian(rng, 0.0, 1.0, b, d);
  Matrix y = random_labels(Matrix(b, f), softmax, rng);
  return {std::move(net), std::move(x), std::move(y),
          softmax ? LossKind::CategoricalCe : LossKind::BinaryCe};
}

// Unfused chain rule: d loss / d f through the activation Jacobian.
LayerParams chain_rule_gradient(const Network& net, const ForwardTrace& tr, LossKind loss,
                                const Matrix& y) {
  const LayerTrace& lt = tr.layers.back();
  const Matrix& f = lt.output;
  Matrix up(f.rows(), f.cols());
  for (std::size_t r = 0; r < f.rows(); ++r) {
    for (std::size_t c = 0; c < f.cols(); ++c) {
      const double p = f(r, c);
      up(r, c) = loss == LossKind::BinaryCe ? -y(r, c) / p + (1.0 - y(r, c)) / (1.0 - p)
                                            : -y(r, c) / p;
    }
  }
  Matrix d_pre = activation_vjp(net.specs().back().activation, lt.pre, up);
  const double inv = 1.0 / static_cast<double>(tr.samples);
  LayerParams g{matmul_tn(lt.eta, d_pre) * inv, column_sums(d_pre) * inv};
  return g;
}

template <class F>
LayerParams finite_difference(LayerParams& p, F&& loss_at, double h) {
  LayerParams g{Matrix(p.weight.rows(), p.weight.cols()),
                p.bias.empty() ? Matrix() : Matrix(1, p.bias.cols())};
  auto probe = [&](double& slot, double& out) {
    const double keep = slot;
    slot = keep + h;
    const double up = loss_at();
    slot = keep - h;
    const double dn = loss_at();
    slot = keep;
    out = (up - dn) / (2.0 * h);
  };
  for (std::size_t k = 0; k < p.weight.size(); ++k) probe(p.weight.data()[k], g.weight.data()[k]);
  for (std::size_t k = 0; k < p.bias.size(); ++k) probe(p.bias.data()[k], g.bias.data()[k]);
  return g;
}

Graph fixed_graph(std::uint64_t seed, std::size_t n, double p) {
  RngStream rng(seed, streams::kGraph);
  return erdos_renyi(n, p, rng);
}

LayerSpec gcn_sigmoid(std::size_t c, std::size_t f) {
  return {FilterSpec::gcn(), Activation::sigmoid(), c, f, true, BnMode::off()};
}

// Per-sample last-layer operators of a bias-carrying layer, flattened.
std::vector<std::vector<double>> per_sample_operators(const ForwardTrace& tr, const Matrix& y) {
  const LayerTrace& lt = tr.layers.back();
  const std::size_t n = tr.nodes;
  std::vector<std::vector<double>> out(tr.samples);
  for (std::size_t j = 0; j < tr.samples; ++j) {
    Matrix eta = lt.eta.row_block(j * n, n);
    Matrix r = lt.output.row_block(j * n, n) - y.row_block(j * n, n);
    Matrix w = matmul_tn(eta, r);
    Matrix b = column_sums(r);
    std::vector<double>& v = out[j];
    v.assign(w.values().begin(), w.values().end());
    v.insert(v.end(), b.values().begin(), b.values().end());
  }
  return out;
}

Network sub_network(const Network& net, std::size_t first) {
  std::vector<LayerSpec> specs(net.specs().begin() + static_cast<std::ptrdiff_t>(first),
                               net.specs().end());
  Network sub(specs, net.graph());
  sub.set_nodes(net.nodes());
  for (std::size_t l = first; l < net.num_layers(); ++l) {
    sub.params()[l - first] = net.params()[l];
    sub.bn_states()[l - first] = net.bn_states()[l];
  }
  return sub;
}

struct RandomNet {
  Network net;
  Matrix x;
  Matrix y;
  LossKind loss;
};

// Random smooth network of 1..3 layers on a small graph, BN on some layers.
RandomNet random_smooth_net(std::uint64_t seed, std::size_t i) {
  RngStream rng = RngStream(seed, streams::kInit).split(100 + i);
  const std::size_t n = 5;
  RngStream grng = rng.split(1);
  Graph g = erdos_renyi(n, 0.5, grng);
  const std::size_t layers = 1 + rng.below(3);
  const FilterSpec filters[] = {FilterSpec::dense(), FilterSpec::gcn(), FilterSpec::chebyshev(2),
                                FilterSpec::sage()};
  const Activation hidden[] = {Activation::sigmoid(), Activation::softplus(2.0),
                               Activation::normal_cdf(), Activation::identity()};
  std::vector<LayerSpec> specs;
  std::size_t width = 2 + rng.below(2);
  const std::size_t in0 = width;
  for (std::size_t l = 0; l < layers; ++l) {
    LayerSpec s;
    s.filter = filters[rng.below(4)];
    s.in = width;
    const bool last = l + 1 == layers;
    if (last) {
      const std::size_t head = rng.below(3);
      s.activation = head == 0 ? Activation::softmax()
                     : head == 1 ? Activation::sigmoid()
                                 : Activation::identity();
      s.out = head == 0 ? 3 : 1 + rng.below(2);
    } else {
      s.activation = hidden[rng.below(4)];
      s.out = 2 + rng.below(3);
    }
    s.bias = rng.below(4) != 0;
    s.bn = rng.below(3) == 0 ? BnMode::on() : BnMode::off();
    specs.push_back(s);
    width = s.out;
  }
  Network net(specs, g);
  for (std::size_t l = 0; l < layers; ++l) net.params()[l] = random_params(specs[l], rng, 0.0, 0.7);
  const std::size_t b = 4;
  Matrix x = gaussian(rng, 0.0, 1.0, b * n, in0);
  const Activation& head = specs.back().activation;
  LossKind loss = LossKind::Mse;
  Matrix y;
  if (head.kind == ActivationKind::Softmax) {
    loss = LossKind::CategoricalCe;
    y = random_labels(Matrix(b * n, specs.back().out), true, rng);
  } else if (head.kind == ActivationKind::Sigmoid && rng.below(2) == 0) {
    loss = LossKind::BinaryCe;
    y = random_labels(Matrix(b * n, specs.back().out), false, rng);
  } else {
    y = gaussian(rng, 0.0, 1.0, b * n, specs.back().out);
  }
  return {std::move(net), std::move(x), std::move(y), loss};
}

std::string describe(const Network& net) {
  std::string s;
  for (const LayerSpec& l : net.specs()) {
    if (!s.empty()) s += ' ';
    s += to_string(l.filter) + "/" + to_string(l.activation) + "/bn=" + to_string(l.bn);
  }
  return s;
}

}  // namespace

CheckResult make_check(const std::string& name, double measured, double lower, double upper,
                       const std::string& detail) {
  CheckResult c{name, measured, lower, upper, false, detail};
  c.pass = std::isfinite(measured) && measured >= lower && measured <= upper;
  return c;
}

CheckResult check_equivalence_exact(std::uint64_t seed, std::size_t instances) {
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    CeInstance c = ce_instance(seed, i);
    ForwardTrace tr = forward(c.net, c.x, Mode::Train);
    LayerParams op = as_params(last_layer_operator(c.net, tr, c.y));
    LayerGrad g = param_gradient_sgd(c.net, tr, c.loss, c.y)[0];
    LayerParams sgd{g.weight, g.bias};
    LayerParams chain = chain_rule_gradient(c.net, tr, c.loss, c.y);
    worst = std::max({worst, max_abs_params(diff(op, sgd)), max_abs_params(diff(op, chain))});
  }
  return make_check("equivalence_exact", worst, 0.0, 1e-12,
                    "max abs |F - grad| over " + std::to_string(instances) +
                        " sigmoid/bce and softmax/cce instances");
}

CheckResult check_equivalence_fd(std::uint64_t seed, std::size_t instances) {
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    CeInstance c = ce_instance(seed, i);
    LayerParams op = as_params(last_layer_operator_at(c.net, c.x, c.y));
    const std::size_t b = c.x.rows();
    LayerParams& p = c.net.params()[0];
    LayerParams fd = finite_difference(
        p, [&] { return batch_loss(c.loss, predict(c.net, c.x), c.y, b); }, 1e-5);
    worst = std::max(worst, max_abs_params(diff(op, fd)) / std::max(max_abs_params(op), 1e-12));
  }
  return make_check("equivalence_fd", worst, 0.0, 1e-5,
                    "max relative |F - fd| (h=1e-5) over " + std::to_string(instances) +
                        " instances");
}

CheckResult check_operator_zero_exact(std::uint64_t seed) {
  double worst = 0.0;
  Graph g = fixed_graph(seed, 15, 0.15);
  RngStream trng(seed, streams::kTeacher);
  Network gcn = make_gcn_teacher(g, {gcn_sigmoid(2, 1)}, trng);
  RngStream drng(seed, streams::kData);
  Dataset a = sample_teacher_data(gcn, 500, drng);
  worst = std::max(worst, max_abs_params(as_params(last_layer_operator_at(gcn, a.x, a.expectation))));

  RngStream srng = RngStream(seed, streams::kTeacher).split(1);
  LayerSpec s{FilterSpec::dense(), Activation::softmax(), 4, 3, true, BnMode::off()};
  Network soft = init_params({s}, InitScheme::Teacher, srng);
  RngStream drng2 = RngStream(seed, streams::kData).split(1);
  Dataset b = sample_teacher_data(soft, 500, drng2);
  worst = std::max(worst, max_abs_params(as_params(last_layer_operator_at(soft, b.x, b.expectation))));
  return make_check("operator_zero_exact", worst, 0.0, 1e-10,
                    "max abs F(theta*) against E[Y|X], gcn-sigmoid and dense-softmax teachers");
}

CheckResult check_operator_zero_sampled(std::uint64_t seed, std::size_t n) {
  Graph g = fixed_graph(seed, 15, 0.15);
  RngStream trng(seed, streams::kTeacher);
  Network teacher = make_gcn_teacher(g, {gcn_sigmoid(2, 1)}, trng);
  RngStream drng = RngStream(seed, streams::kData).split(kAuxTag);
  Dataset d = sample_teacher_data(teacher, n, drng);
  ForwardTrace tr = forward(teacher, d.x, Mode::Eval);
  std::vector<std::vector<double>> per = per_sample_operators(tr, d.y);
  std::vector<double> mean(per[0].size(), 0.0);
  for (const auto& v : per)
    for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
  for (double& m : mean) m /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& v : per)
    for (std::size_t k = 0; k < v.size(); ++k) var += (v[k] - mean[k]) * (v[k] - mean[k]);
  const double sigma = std::sqrt(var / static_cast<double>(n - 1));
  const double norm = std::sqrt(squared_norm(last_layer_operator(teacher, tr, d.y)));
  const double scale = sigma / std::sqrt(static_cast<double>(n));
  return make_check("operator_zero_sampled", norm / scale, 0.0, 5.0,
                    "||F_hat(theta*)|| / (sigma/sqrt(N)), N=" + std::to_string(n) +
                        ", ||F_hat||=" + fmt(norm) + ", sigma=" + fmt(sigma));
}

MonotoneReport check_monotone(std::uint64_t seed, std::size_t pairs) {
  const std::size_t per_instance = 20;
  const std::size_t instances = (pairs + per_instance - 1) / per_instance;
  double mono = kInf, strong = kInf, lip = -kInf, kmin = kInf;
  std::size_t done = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    RngStream rng = RngStream(seed, streams::kInit).split(200 + i);
    const std::size_t c = 2 + rng.below(3);
    const std::size_t f = 1 + rng.below(2);
    RngStream grng = rng.split(1);
    Graph g = erdos_renyi(10, 0.3, grng);
    LayerSpec s{i % 2 == 0 ? FilterSpec::gcn() : FilterSpec::sage(), Activation::sigmoid(), c, f,
                true, BnMode::off()};
    Network net({s}, g);
    const std::size_t rows = 50 * net.nodes();
    Matrix x = gaussian(rng, 0.0, 1.0, rows, c);
    Matrix y = random_labels(Matrix(rows, f), false, rng);
    for (std::size_t k = 0; k < per_instance && done < pairs; ++k, ++done) {
      LayerParams t1 = random_params(s, rng, 0.0, 0.5);
      LayerParams t2 = random_params(s, rng, 0.0, 0.5);
      net.params()[0] = t1;
      ForwardTrace tr1 = forward(net, x, Mode::Eval);
      LayerParams f1 = as_params(last_layer_operator(net, tr1, y));
      net.params()[0] = t2;
      ForwardTrace tr2 = forward(net, x, Mode::Eval);
      LayerParams f2 = as_params(last_layer_operator(net, tr2, y));
      const double dphi = std::min(*min_activation_derivative(s.activation, tr1.layers[0].pre),
                                   *min_activation_derivative(s.activation, tr2.layers[0].pre));
      const FeatureSpectrum fs = feature_spectrum(net, tr1);
      const double k2 = estimate_modulus(net, tr1).lipschitz;
      LayerParams dt = diff(t1, t2);
      LayerParams df = diff(f1, f2);
      const double ip = dot_params(df, dt);
      const double dn = sq(dt);
      mono = std::min(mono, ip);
      kmin = std::min(kmin, dphi * fs.mean_lambda_min);
      strong = std::min(strong, ip - dphi * fs.mean_lambda_min * dn);
      lip = std::max(lip, std::sqrt(sq(df)) - k2 * std::sqrt(dn));
    }
  }
  const std::string n = std::to_string(pairs) + " pairs";
  return {make_check("monotone", mono, -1e-10, kInf, "min <dF, dTheta> over " + n),
          make_check("strongly_monotone", strong, -1e-8, kInf,
                     "min <dF, dTheta> - kappa~ ||dTheta||^2 over " + n + ", min kappa~ " +
                         fmt(kmin)),
          make_check("lipschitz", lip, -kInf, 1e-8, "max ||dF|| - K2 ||dTheta|| over " + n)};
}

CheckResult check_softmax_kappa(std::uint64_t seed) {
  RngStream rng(seed, streams::kInit);
  LayerSpec s{FilterSpec::dense(), Activation::softmax(), 4, 3, true, BnMode::off()};
  Network net = init_params({s}, InitScheme::GlorotUniform, rng);
  Matrix x = gaussian(rng, 0.0, 1.0, 200, 4);
  const double kappa = estimate_modulus(net, x).kappa;
  return make_check("softmax_kappa", kappa, 0.0, 0.0, "kappa of a softmax last layer");
}

CheckResult check_unbiased(std::uint64_t seed) {
  Graph g = fixed_graph(seed, 8, 0.4);
  RngStream rng = RngStream(seed, streams::kInit).split(300);
  std::vector<LayerSpec> specs{
      {FilterSpec::gcn(), Activation::relu(), 3, 4, true, BnMode::off()},
      {FilterSpec::gcn(), Activation::sigmoid(), 4, 1, true, BnMode::off()}};
  Network net = init_params(specs, InitScheme::GlorotUniform, rng, g);
  const std::size_t b = 30, n = g.n();
  Matrix x = gaussian(rng, 0.0, 1.0, b * n, 3);
  Matrix y = random_labels(Matrix(b * n, 1), false, rng);
  double worst = 0.0;
  for (LossKind loss : {LossKind::Mse, LossKind::BinaryCe}) {
    std::vector<OperatorEstimate> full =
        layer_operators(net, forward(net, x, Mode::Eval), loss, y);
    std::vector<LayerParams> mean;
    for (const OperatorEstimate& op : full)
      mean.push_back({Matrix(op.weight.rows(), op.weight.cols()),
                      Matrix(op.bias.rows(), op.bias.cols())});
    for (std::size_t j = 0; j < b; ++j) {
      Matrix xj = x.row_block(j * n, n);
      Matrix yj = y.row_block(j * n, n);
      std::vector<OperatorEstimate> one = layer_operators(net, forward(net, xj, Mode::Eval), loss, yj);
      for (std::size_t l = 0; l < one.size(); ++l) {
        mean[l].weight += one[l].weight * (1.0 / b);
        mean[l].bias += one[l].bias * (1.0 / b);
      }
    }
    for (std::size_t l = 0; l < full.size(); ++l)
      worst = std::max(worst, max_abs_params(diff(as_params(full[l]), mean[l])));
  }
  return make_check("unbiased", worst, 0.0, 1e-12,
                    "max abs |mean of per-sample operators - batch operator|, 2-layer gcn");
}

RateResult adaptive_rate(std::uint64_t seed, std::size_t seeds) {
  RateResult res;
  res.horizons = {1e2, 1e3, 1e4};
  std::vector<std::vector<double>> errs(res.horizons.size());
  Graph g = fixed_graph(seed, 15, 0.15);
  RngStream trng(seed, streams::kTeacher);
  Network teacher = make_gcn_teacher(g, {gcn_sigmoid(2, 1)}, trng);
  const ParamDomain dom = ParamDomain::ball(10.0);
  for (std::uint64_t s = seed; s < seed + seeds; ++s) {
    RngStream irng(s, streams::kInit);
    Network student = init_params(teacher.specs(), InitScheme::GlorotUniform, irng, g);
    RngStream data(s, streams::kData);
    RngStream pilot_rng = data.split(kAuxTag);
    Dataset pilot = sample_teacher_data(teacher, 2000, pilot_rng);
    const double kappa = estimate_modulus(student, pilot.x).kappa;
    std::size_t next = 0;
    const std::size_t T = static_cast<std::size_t>(res.horizons.back());
    for (std::size_t t = 0; t < T; ++t) {
      RngStream r = data.split(t);
      Dataset b = sample_teacher_data(teacher, 1, r);
      OperatorEstimate op = last_layer_operator_at(student, b.x, b.y);
      vi_step(student.params()[0], op, adaptive_step(kappa, t), dom);
      if (t + 1 == static_cast<std::size_t>(res.horizons[next])) {
        errs[next].push_back(sq(diff(student.params()[0], teacher.params()[0])));
        ++next;
      }
    }
  }
  for (auto& e : errs) res.medians.push_back(median(e));
  res.slope = log_log_slope(res.horizons, res.medians);
  return res;
}

CheckResult check_adaptive_rate(std::uint64_t seed, std::size_t seeds) {
  RateResult r = adaptive_rate(seed, seeds);
  std::string detail = "median ||theta_T - theta*||^2 at T=100,1000,10000:";
  for (double m : r.medians) detail += " " + fmt(m);
  return make_check("adaptive_rate_slope", r.slope, -1.3, -0.7, detail);
}

RateResult extrapolation_rate(std::uint64_t seed, std::size_t seeds) {
  RateResult res;
  res.horizons = {1e2, 1e3, 1e4};
  std::vector<std::vector<double>> errs(res.horizons.size());
  const std::size_t d = 4, f = 3, batch = 10;
  LayerSpec spec{FilterSpec::dense(), Activation::softmax(), d, f, true, BnMode::off()};
  RngStream trng(seed, streams::kTeacher);
  Network teacher = init_params({spec}, InitScheme::Teacher, trng);
  RngStream ev_rng = RngStream(seed, streams::kData).split(kAuxTag);
  Dataset ev = sample_teacher_data(teacher, 20000, ev_rng);
  for (std::uint64_t s = seed; s < seed + seeds; ++s) {
    RngStream irng(s, streams::kInit);
    Network student = init_params({spec}, InitScheme::GlorotUniform, irng);
    RngStream data(s, streams::kData);
    const double gamma = 1.0 / (4.0 * estimate_modulus(student, ev.x).lipschitz);
    for (std::size_t k = 0; k < res.horizons.size(); ++k) {
      const std::size_t T = static_cast<std::size_t>(res.horizons[k]);
      Network net = student;
      RngStream sel = RngStream(s, streams::kSelect).split(T);
      const std::size_t R = oe_select_index(T, sel);
      OperatorEstimate prev;
      for (std::size_t t = 0; t < R; ++t) {
        RngStream r = data.split(T * 100000 + t);
        Dataset b = sample_teacher_data(teacher, batch, r);
        OperatorEstimate op = last_layer_operator_at(net, b.x, b.y);
        oe_step(net.params()[0], t == 0 ? op : prev, op, gamma, 1.0, ParamDomain::unconstrained());
        prev = std::move(op);
      }
      errs[k].push_back(std::sqrt(squared_norm(last_layer_operator_at(net, ev.x, ev.expectation))));
    }
  }
  for (auto& e : errs) res.medians.push_back(median(e));
  res.slope = log_log_slope(res.horizons, res.medians);
  return res;
}

CheckResult check_extrapolation_rate(std::uint64_t seed, std::size_t seeds) {
  RateResult r = extrapolation_rate(seed, seeds);
  std::string detail = "median ||F(theta_R)|| at T=100,1000,10000:";
  for (double m : r.medians) detail += " " + fmt(m);
  return make_check("extrapolation_rate_slope", r.slope, -0.75, -0.3, detail);
}

CheckResult check_bn_algebra(std::uint64_t seed, std::size_t instances) {
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    RngStream rng = RngStream(seed, streams::kInit).split(400 + i);
    const bool softmax = i % 2 == 1;
    const bool graph = i % 3 == 0;
    const std::size_t c = 2 + rng.below(4);
    const std::size_t f = softmax ? 2 + rng.below(3) : 1 + rng.below(3);
    std::optional<Graph> g;
    if (graph) {
      RngStream grng = rng.split(1);
      g = erdos_renyi(6, 0.5, grng);
    }
    LayerSpec s{graph ? FilterSpec::gcn() : FilterSpec::dense(),
                softmax ? Activation::softmax() : Activation::sigmoid(), c, f, true, BnMode::on()};
    Network net({s}, g);
    net.params()[0] = random_params(s, rng, 0.0, 1.0);
    const std::size_t rows = (8 + rng.below(20)) * net.nodes();
    Matrix x = gaussian(rng, 0.0, 1.0, rows, c);
    Matrix y = random_labels(Matrix(rows, f), softmax, rng);
    const double gamma = 0.05 + 0.5 * rng.uniform();

    ForwardTrace tr = forward(net, x, Mode::Train);
    OperatorEstimate op = last_layer_operator(net, tr, y);
    LayerParams raw = net.params()[0];
    raw.weight -= op.weight * gamma;
    raw.bias -= op.bias * gamma;

    // Reparameterized model: normalized output = eta W~ + b~ with the batch
    // statistics held fixed.
    const LayerParams& p = net.params()[0];
    Matrix eta = tr.layers[0].eta;
    Matrix z = matmul(eta, p.weight);
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t k = 0; k < f; ++k) z(r, k) += p.bias(0, k);
    Matrix mu(1, f), sigma(1, f);
    for (std::size_t k = 0; k < f; ++k) {
      double m = 0.0;
      for (std::size_t r = 0; r < rows; ++r) m += z(r, k);
      m /= static_cast<double>(rows);
      double v = 0.0;
      for (std::size_t r = 0; r < rows; ++r) v += (z(r, k) - m) * (z(r, k) - m);
      mu(0, k) = m;
      sigma(0, k) = std::max(std::sqrt(v / static_cast<double>(rows)), kBnSigmaFloor);
    }
    Matrix wt = p.weight, bt = p.bias;
    for (std::size_t k = 0; k < f; ++k) {
      for (std::size_t r = 0; r < wt.rows(); ++r) wt(r, k) /= sigma(0, k);
      bt(0, k) = (bt(0, k) - mu(0, k)) / sigma(0, k);
    }
    Matrix zt = matmul(eta, wt);
    for (std::size_t r = 0; r < zt.rows(); ++r)
      for (std::size_t k = 0; k < f; ++k) zt(r, k) += bt(0, k);
    Matrix resid = apply_activation(s.activation, zt) - y;
    const double inv = 1.0 / static_cast<double>(tr.samples);
    Matrix gw = matmul_tn(eta, resid) * inv;
    Matrix gb = column_sums(resid) * inv;
    wt -= gw * gamma;
    bt -= gb * gamma;
    LayerParams back{wt, bt};
    for (std::size_t k = 0; k < f; ++k) {
      for (std::size_t r = 0; r < wt.rows(); ++r) back.weight(r, k) = wt(r, k) * sigma(0, k);
      back.bias(0, k) = bt(0, k) * sigma(0, k) + mu(0, k);
    }
    worst = std::max(worst, max_abs_params(diff(back, raw)));
  }
  return make_check("bn_algebra", worst, 0.0, 1e-12,
                    "max abs |mapped-back reparameterized step - sigma-scaled raw step| over " +
                        std::to_string(instances) + " instances");
}

CheckResult check_mismatch_bound(std::uint64_t seed, std::size_t instances) {
  const std::size_t n = 10, k = n / 2, samples = 200, half = 20;
  const double step = 0.025;
  double worst = 0.0;
  std::size_t at_star = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    RngStream rng = RngStream(seed, streams::kPerturb).split(i);
    RngStream grng = rng.split(1);
    Graph g = erdos_renyi(n, 0.4, grng);
    const double delta = i % 2 == 0 ? 0.01 : 0.05;
    Matrix lap = normalized_laplacian(g);
    RngStream prng = rng.split(2);
    Matrix lap2 = low_energy_perturbation(g, k, delta, prng);
    SpectralSplit split = spectral_split(g, k);
    Matrix theta = gaussian(rng, 1.0, 1.0, 2, 1);

    std::vector<Matrix> a(samples), target(samples);
    double low_norm = 0.0;
    for (std::size_t j = 0; j < samples; ++j) {
      Matrix x = gaussian(rng, 0.0, 1.0, n, 2);
      a[j] = matmul(lap2, x);
      target[j] = apply_activation(Activation::sigmoid(), matmul(matmul(lap, x), theta));
      low_norm += spectral_norm(matmul_tn(split.low_basis, x));
    }
    low_norm /= static_cast<double>(samples);
    auto gap = [&](double t0, double t1) {
      double total = 0.0;
      for (std::size_t j = 0; j < samples; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double e = sigmoid(a[j](r, 0) * t0 + a[j](r, 1) * t1) - target[j](r, 0);
          s += e * e;
        }
        total += std::sqrt(s);
      }
      return total / static_cast<double>(samples);
    };
    double best = kInf;
    bool star = false;
    for (int u = -static_cast<int>(half); u <= static_cast<int>(half); ++u) {
      for (int v = -static_cast<int>(half); v <= static_cast<int>(half); ++v) {
        const double e = gap(theta(0, 0) + u * step, theta(1, 0) + v * step);
        if (e < best) {
          best = e;
          star = u == 0 && v == 0;
        }
      }
    }
    at_star += star ? 1 : 0;
    const double bound = mismatch_bound(delta, 0.25, low_norm, frobenius_norm(theta));
    worst = std::max(worst, best / bound);
  }
  return make_check("mismatch_bound", worst, 0.0, 1.0,
                    "max gap/bound over " + std::to_string(instances) +
                        " instances (n=10, k=5, delta 0.01/0.05); grid minimum at theta* in " +
                        std::to_string(at_star));
}

CheckResult check_loss_gap_bound(std::uint64_t seed) {
  Graph g = fixed_graph(seed, 15, 0.15);
  RngStream trng(seed, streams::kTeacher);
  Network teacher = make_gcn_teacher(g, {gcn_sigmoid(2, 1)}, trng);
  RngStream drng(seed, streams::kData);
  Dataset all = sample_teacher_data(teacher, 3000, drng);
  auto [tr, te] = train_test_split(all, 2000);
  RngStream irng(seed, streams::kInit);
  Network student = init_params(teacher.specs(), InitScheme::GlorotUniform, irng, g);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 20;
  cfg.learning_rate = 0.02;
  cfg.loss = LossKind::BinaryCe;
  cfg.seed = seed;
  cfg.snapshot_every = cfg.epochs;
  train(student, tr, cfg);

  const std::size_t n = te.nodes;
  Matrix pred = predict(student, te.x);
  const double eps = max_abs(pred - te.expectation);
  std::size_t eligible = 0;
  double worst = 0.0;
  for (std::size_t j = 0; j < te.count(); ++j) {
    Matrix e = te.expectation.row_block(j * n, n);
    bool ok = true;
    for (double v : e.values()) ok = ok && eps < std::min(v, 1.0 - v);
    if (!ok) continue;
    ++eligible;
    Matrix y = te.y.row_block(j * n, n);
    Matrix p = pred.row_block(j * n, n);
    const double gap = std::abs(cross_entropy_loss(p, y, n, true) - cross_entropy_loss(e, y, n, true));
    worst = std::max(worst, gap / ce_loss_gap_bound(e, y, eps));
  }
  CheckResult c = make_check("loss_gap_bound", worst, 0.0, 1.0,
                             "max CE gap/bound over " + std::to_string(eligible) + " of " +
                                 std::to_string(te.count()) + " eligible test samples, eps=" +
                                 fmt(eps));
  if (eligible == 0) c.pass = false;
  return c;
}

CheckResult check_hidden_gradient_fd(std::uint64_t seed, std::size_t nets) {
  double worst = 0.0;
  std::size_t checked = 0;
  std::string worst_net;
  for (std::size_t i = 0; i < nets; ++i) {
    RandomNet rn = random_smooth_net(seed, i);
    const Network& net = rn.net;
    if (net.num_layers() < 2) continue;
    ForwardTrace tr = forward(net, rn.x, Mode::Train);
    const double samples = static_cast<double>(tr.samples);
    for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
      Matrix g = grad_wrt_hidden(net, tr, rn.loss, rn.y, l);
      Network sub = sub_network(net, l + 1);
      Matrix h = tr.layers[l].output;
      Matrix fd(h.rows(), h.cols());
      auto total = [&] {
        return samples * batch_loss(rn.loss, forward(sub, h, Mode::Train).prediction(), rn.y,
                                    tr.samples);
      };
      for (std::size_t k = 0; k < h.size(); ++k) {
        const double keep = h.data()[k];
        h.data()[k] = keep + 1e-5;
        const double up = total();
        h.data()[k] = keep - 1e-5;
        const double dn = total();
        h.data()[k] = keep;
        fd.data()[k] = (up - dn) / 2e-5;
      }
      const double err = max_abs(fd - g) / std::max(max_abs(g), 1e-12);
      if (err > worst) {
        worst = err;
        worst_net = describe(net);
      }
      ++checked;
    }
  }
  return make_check("grad_hidden_fd", worst, 0.0, 1e-5,
                    "max relative error over " + std::to_string(checked) + " hidden layers; worst: " +
                        (worst_net.empty() ? "-" : worst_net));
}

CheckResult check_param_gradient_fd(std::uint64_t seed, std::size_t nets) {
  double worst = 0.0;
  std::string worst_net;
  for (std::size_t i = 0; i < nets; ++i) {
    RandomNet rn = random_smooth_net(seed, i);
    Network& net = rn.net;
    ForwardTrace tr = forward(net, rn.x, Mode::Train);
    std::vector<LayerGrad> g = param_gradient_sgd(net, tr, rn.loss, rn.y);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      LayerParams fd = finite_difference(
          net.params()[l],
          [&] {
            return batch_loss(rn.loss, forward(net, rn.x, Mode::Train).prediction(), rn.y,
                              tr.samples);
          },
          1e-5);
      LayerParams an{g[l].weight, g[l].bias};
      const double err = max_abs_params(diff(fd, an)) / std::max(max_abs_params(an), 1e-12);
      if (err > worst) {
        worst = err;
        worst_net = describe(net);
      }
    }
  }
  return make_check("grad_param_fd", worst, 0.0, 1e-5,
                    "max relative error over " + std::to_string(nets) + " networks; worst: " +
                        (worst_net.empty() ? "-" : worst_net));
}

CheckResult check_inactive_neurons(std::uint64_t seed) {
  RngStream rng = RngStream(seed, streams::kInit).split(500);
  std::vector<LayerSpec> specs{
      {FilterSpec::dense(), Activation::relu(), 3, 6, true, BnMode::off()},
      {FilterSpec::dense(), Activation::sigmoid(), 6, 1, true, BnMode::off()}};
  Network net = init_params(specs, InitScheme::GlorotUniform, rng);
  const std::vector<std::size_t> dead{1, 4};
  for (std::size_t u : dead) net.params()[0].bias(0, u) = -100.0;
  Matrix x = gaussian(rng, 0.0, 1.0, 40, 3);
  Matrix y = random_labels(Matrix(40, 1), false, rng);
  ForwardTrace tr = forward(net, x, Mode::Eval);
  std::vector<LayerGrad> sgd = param_gradient_sgd(net, tr, LossKind::Mse, y);
  OperatorEstimate op = hidden_layer_operator(net, tr, LossKind::Mse, y, 0);
  double sgd_max = 0.0, op_min = kInf;
  for (std::size_t u : dead) {
    double norm = 0.0;
    for (std::size_t r = 0; r < op.weight.rows(); ++r) {
      sgd_max = std::max(sgd_max, std::abs(sgd[0].weight(r, u)));
      norm += op.weight(r, u) * op.weight(r, u);
    }
    op_min = std::min(op_min, std::sqrt(norm));
  }
  CheckResult c = make_check("inactive_neurons", op_min, 1e-8, kInf,
                             "min operator norm over inactive units; max |SGD| there = " +
                                 fmt(sgd_max));
  if (sgd_max != 0.0) c.pass = false;
  return c;
}

CheckResult check_batch_insensitivity(std::uint64_t seed) {
  Graph g = fixed_graph(seed, 15, 0.15);
  RngStream trng(seed, streams::kTeacher);
  Network teacher = make_gcn_teacher(g, {gcn_sigmoid(5, 1)}, trng);
  const std::vector<std::size_t> batches{50, 100, 200};
  std::vector<double> mean(batches.size(), 0.0);
  const std::size_t seeds = 3;
  for (std::uint64_t s = seed; s < seed + seeds; ++s) {
    RngStream d(s, streams::kData);
    Dataset all = sample_teacher_data(teacher, 4000, d);
    auto [tr, te] = train_test_split(all, 2000);
    for (std::size_t k = 0; k < batches.size(); ++k) {
      RngStream irng(s, streams::kInit);
      Network student = init_params(teacher.specs(), InitScheme::GlorotUniform, irng, g);
      TrainConfig cfg;
      cfg.epochs = 200;
      cfg.batch_size = batches[k];
      cfg.learning_rate = 0.001;
      cfg.momentum = 0.99;
      cfg.nesterov = true;
      cfg.loss = LossKind::BinaryCe;
      cfg.seed = s;
      cfg.snapshot_every = cfg.epochs;
      train(student, tr, cfg);
      mean[k] += mse_loss(predict(student, te.x), te.y, te.nodes) / seeds;
    }
  }
  const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
  double avg = 0.0;
  for (double m : mean) avg += m / static_cast<double>(mean.size());
  std::string detail = "mean test MSE for B=50,100,200:";
  for (double m : mean) detail += " " + fmt(m);
  return make_check("batch_insensitivity", (*hi - *lo) / avg, 0.0, 0.05, detail);
}

std::vector<CheckResult> run_theory_checks(const TheoryOptions& opts) {
  const std::uint64_t s = opts.seed;
  std::vector<CheckResult> out;
  out.push_back(check_equivalence_exact(s));
  out.push_back(check_equivalence_fd(s));
  out.push_back(check_operator_zero_exact(s));
  out.push_back(check_operator_zero_sampled(s));
  MonotoneReport m = check_monotone(s);
  out.push_back(m.monotone);
  out.push_back(m.strong);
  out.push_back(m.lipschitz);
  out.push_back(check_softmax_kappa(s));
  out.push_back(check_unbiased(s));
  out.push_back(check_bn_algebra(s));
  out.push_back(check_mismatch_bound(s));
  out.push_back(check_loss_gap_bound(s));
  out.push_back(check_hidden_gradient_fd(s));
  out.push_back(check_param_gradient_fd(s));
  out.push_back(check_inactive_neurons(s));
  if (opts.rates) {
    out.push_back(check_adaptive_rate(s));
    out.push_back(check_extrapolation_rate(s));
    out.push_back(check_batch_insensitivity(s));
  }
  return out;
}

void write_check_report(std::ostream& os, const std::vector<CheckResult>& checks) {
  os << "check,measured,lower,upper,pass,detail\n";
  for (const CheckResult& c : checks) {
    std::string detail = c.detail;
    std::replace(detail.begin(), detail.end(), '"', '\'');
    os << c.name << ',' << fmt(c.measured) << ',' << fmt(c.lower) << ',' << fmt(c.upper) << ','
       << (c.pass ? "pass" : "fail") << ",\"" << detail << "\"\n";
  }
}

}  // namespace mvi
