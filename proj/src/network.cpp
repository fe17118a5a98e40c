#include "mvi/network.hpp"

#include <algorithm>
#include <cmath>

#include "mvi/error.hpp"
#include "mvi/kernels.hpp"

namespace mvi {

std::size_t FilterSpec::expansion() const {
  switch (kind) {
    case FilterKind::Dense:
    case FilterKind::Gcn: return 1;
    case FilterKind::Chebyshev: return order;
    case FilterKind::Sage: return 2;
  }
  return 1;
}

std::string to_string(const FilterSpec& f) {
  switch (f.kind) {
    case FilterKind::Dense: return "dense";
    case FilterKind::Gcn: return "gcn";
    case FilterKind::Chebyshev: return "cheb:" + std::to_string(f.order);
    case FilterKind::Sage: return "sage";
  }
  return "?";
}

FilterSpec parse_filter(const std::string& text) {
  if (text == "dense") return FilterSpec::dense();
  if (text == "gcn") return FilterSpec::gcn();
  if (text == "sage") return FilterSpec::sage();
  if (text.rfind("cheb:", 0) == 0) {
    try {
      const long k = std::stol(text.substr(5));
      if (k >= 1) return FilterSpec::chebyshev(static_cast<std::size_t>(k));
    } catch (const std::logic_error&) {
    }
  }
  throw ParseError("unknown filter '" + text + "'");
}

std::string to_string(const BnMode& b) {
  switch (b.kind) {
    case BnKind::Off: return "off";
    case BnKind::On: return "on";
    case BnKind::HalfFrozen: return "half:" + std::to_string(b.freeze_epoch);
  }
  return "?";
}

BnMode parse_bn(const std::string& text) {
  if (text == "off") return BnMode::off();
  if (text == "on") return BnMode::on();
  if (text == "half") return BnMode::half_frozen();
  if (text.rfind("half:", 0) == 0) {
    try {
      return BnMode::half_frozen(std::stoul(text.substr(5)));
    } catch (const std::logic_error&) {
    }
  }
  throw ParseError("unknown batch-norm mode '" + text + "'");
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::Mse: return "mse";
    case LossKind::BinaryCe: return "bce";
    case LossKind::CategoricalCe: return "cce";
  }
  return "?";
}

LossKind parse_loss(const std::string& text) {
  if (text == "mse") return LossKind::Mse;
  if (text == "bce") return LossKind::BinaryCe;
  if (text == "cce") return LossKind::CategoricalCe;
  throw ParseError("unknown loss '" + text + "'");
}

// ---------------------------------------------------------------- filters

FilterBank::FilterBank(const FilterSpec& spec, const Graph* graph) {
  if (!spec.needs_graph()) return;
  if (graph == nullptr) return;  // forward() reports the missing graph
  switch (spec.kind) {
    case FilterKind::Gcn: blocks_.push_back(gcn_operator(*graph)); break;
    case FilterKind::Chebyshev: blocks_ = chebyshev_polynomials(*graph, spec.order); break;
    case FilterKind::Sage:
      blocks_.push_back(Matrix::identity(graph->n()));
      blocks_.push_back(neighbor_mean_operator(*graph));
      break;
    case FilterKind::Dense: break;
  }
  for (const Matrix& b : blocks_) {
    transposed_.push_back(b.transpose());
    is_identity_.push_back(b == Matrix::identity(b.rows()));
  }
}

Matrix FilterBank::apply(const Matrix& x, std::size_t nodes) const {
  if (blocks_.empty()) return x;
  const std::size_t c = x.cols();
  if (blocks_.size() == 1) return kernels::block_left_multiply(blocks_[0], x, nodes);
  Matrix out(x.rows(), c * blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const Matrix part = is_identity_[k] ? x : kernels::block_left_multiply(blocks_[k], x, nodes);
    for (std::size_t r = 0; r < x.rows(); ++r)
      std::copy_n(part.data() + r * c, c, out.data() + r * out.cols() + k * c);
  }
  return out;
}

Matrix FilterBank::apply_transpose(const Matrix& d_eta, std::size_t nodes) const {
  if (blocks_.empty()) return d_eta;
  if (blocks_.size() == 1) return kernels::block_left_multiply(transposed_[0], d_eta, nodes);
  const std::size_t c = d_eta.cols() / blocks_.size();
  Matrix dx(d_eta.rows(), c);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const Matrix part = d_eta.col_block(k * c, c);
    dx += is_identity_[k] ? part : kernels::block_left_multiply(transposed_[k], part, nodes);
  }
  return dx;
}

// ---------------------------------------------------------------- network

void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw InvalidArgument("network needs at least one layer");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const LayerSpec& s = specs[l];
    const std::string where = "layer " + std::to_string(l);
    if (s.in == 0 || s.out == 0) throw InvalidArgument(where + ": zero channel count");
    if (s.filter.kind == FilterKind::Chebyshev && s.filter.order < 1)
      throw InvalidArgument(where + ": Chebyshev order must be >= 1");
    if (s.activation.kind == ActivationKind::Softmax && l + 1 != specs.size())
      throw InvalidArgument(where + ": softmax is only allowed on the final layer");
    if (s.activation.kind == ActivationKind::Softmax && s.out < 2)
      throw InvalidArgument(where + ": softmax needs at least two outputs");
    if (s.activation.kind == ActivationKind::Softplus && !(s.activation.beta > 0.0))
      throw InvalidArgument(where + ": softplus beta must be positive");
    if (s.bn.kind == BnKind::HalfFrozen && s.bn.freeze_epoch == 0) {
      // resolved to ceil(E/2) by the trainer
    }
    if (l > 0 && specs[l - 1].out != s.in)
      throw InvalidArgument(where + ": expects " + std::to_string(s.in) +
                            " input channels but previous layer emits " +
                            std::to_string(specs[l - 1].out));
  }
}

Network::Network(std::vector<LayerSpec> specs, std::optional<Graph> graph)
    : specs_(std::move(specs)), graph_(std::move(graph)) {
  validate_specs(specs_);
  nodes_ = graph_ ? graph_->n() : 1;
  for (const LayerSpec& s : specs_) {
    params_.push_back({Matrix(s.weight_rows(), s.out), s.bias ? Matrix(1, s.out) : Matrix()});
    BnState st;
    if (s.bn.enabled()) {
      st.running_mean = Matrix(1, s.out, 0.0);
      st.running_var = Matrix(1, s.out, 1.0);
    }
    bn_.push_back(std::move(st));
  }
  rebuild_filters();
}

void Network::set_nodes(std::size_t nodes) {
  if (nodes == 0) throw InvalidArgument("nodes must be positive");
  if (graph_ && graph_->n() != nodes) throw InvalidArgument("nodes must match the graph size");
  nodes_ = nodes;
}

void Network::set_graph(Graph g) {
  if (graph_ && g.n() != graph_->n()) throw InvalidArgument("replacement graph changes n");
  graph_ = std::move(g);
  nodes_ = graph_->n();
  rebuild_filters();
}

void Network::rebuild_filters() {
  filters_.clear();
  for (const LayerSpec& s : specs_)
    filters_.emplace_back(s.filter, graph_ ? &*graph_ : nullptr);
}

Network init_params(std::vector<LayerSpec> specs, InitScheme scheme, RngStream& rng,
                    std::optional<Graph> graph) {
  Network net(std::move(specs), std::move(graph));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    LayerParams& p = net.params()[l];
    if (scheme == InitScheme::GlorotUniform) {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(p.weight.rows() + p.weight.cols()));
      for (double& w : p.weight.values()) w = (2.0 * rng.uniform() - 1.0) * limit;
      for (double& b : p.bias.values()) b = 0.0;
    } else {
      for (double& w : p.weight.values()) w = 1.0 + rng.normal();
      for (double& b : p.bias.values()) b = 1.0 + rng.normal();
    }
  }
  return net;
}

// ---------------------------------------------------------------- forward

namespace {

bool uses_batch_stats(const LayerSpec& spec, const BnState& st, Mode mode) {
  if (!spec.bn.enabled() || mode == Mode::Eval) return false;
  return !(spec.bn.kind == BnKind::HalfFrozen && st.frozen);
}

}  // namespace

ForwardTrace forward(const Network& net, const Matrix& x, Mode mode) {
  const std::size_t nodes = net.nodes();
  if (x.cols() != net.spec(0).in)
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " channels, expected " +
                     std::to_string(net.spec(0).in));
  if (x.rows() == 0 || x.rows() % nodes != 0)
    throw ShapeError("forward: " + std::to_string(x.rows()) + " rows is not a whole number of " +
                     std::to_string(nodes) + "-node samples");
  ForwardTrace trace;
  trace.nodes = nodes;
  trace.samples = x.rows() / nodes;
  trace.mode = mode;
  trace.layers.resize(net.num_layers());

  const Matrix* current = &x;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const LayerSpec& spec = net.spec(l);
    const LayerParams& p = net.params()[l];
    const BnState& st = net.bn_states()[l];
    LayerTrace& t = trace.layers[l];
    if (spec.filter.needs_graph() && !net.graph())
      throw InvalidArgument("forward: layer " + std::to_string(l) + " needs a graph");

    t.input = *current;
    t.eta = net.filter(l).apply(t.input, nodes);
    t.pre = matmul(t.eta, p.weight);
    if (spec.bias)
      for (std::size_t r = 0; r < t.pre.rows(); ++r)
        for (std::size_t c = 0; c < t.pre.cols(); ++c) t.pre(r, c) += p.bias(0, c);

    if (!spec.bn.enabled()) {
      t.bn_use = BnUse::None;
      t.normalized = t.pre;
    } else {
      const std::size_t m = t.pre.rows(), out = t.pre.cols();
      if (uses_batch_stats(spec, st, mode)) {
        t.bn_use = BnUse::BatchStats;
        t.batch_mean = Matrix(1, out);
        t.batch_var = Matrix(1, out);
        for (std::size_t c = 0; c < out; ++c) {
          double mu = 0.0;
          for (std::size_t r = 0; r < m; ++r) mu += t.pre(r, c);
          mu /= static_cast<double>(m);
          double var = 0.0;
          for (std::size_t r = 0; r < m; ++r) var += (t.pre(r, c) - mu) * (t.pre(r, c) - mu);
          var /= static_cast<double>(m);
          t.batch_mean(0, c) = mu;
          t.batch_var(0, c) = var;
        }
        t.mean = t.batch_mean;
        t.sigma = Matrix(1, out);
        for (std::size_t c = 0; c < out; ++c)
          t.sigma(0, c) = std::max(std::sqrt(t.batch_var(0, c)), kBnSigmaFloor);
      } else {
        t.bn_use = BnUse::RunningStats;
        t.mean = st.running_mean;
        t.sigma = Matrix(1, out);
        for (std::size_t c = 0; c < out; ++c)
          t.sigma(0, c) = std::max(std::sqrt(st.running_var(0, c)), kBnSigmaFloor);
      }
      t.normalized = Matrix(m, out);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < out; ++c)
          t.normalized(r, c) = (t.pre(r, c) - t.mean(0, c)) / t.sigma(0, c);
    }
    t.output = apply_activation(spec.activation, t.normalized);
    current = &t.output;
  }
  return trace;
}

Matrix predict(const Network& net, const Matrix& x) {
  return forward(net, x, Mode::Eval).prediction();
}

void update_running_stats(Network& net, const ForwardTrace& trace) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const LayerTrace& t = trace.layers[l];
    if (t.bn_use != BnUse::BatchStats) continue;
    BnState& st = net.bn_states()[l];
    for (std::size_t c = 0; c < t.batch_mean.cols(); ++c) {
      st.running_mean(0, c) =
          (1.0 - kBnMomentum) * st.running_mean(0, c) + kBnMomentum * t.batch_mean(0, c);
      st.running_var(0, c) =
          (1.0 - kBnMomentum) * st.running_var(0, c) + kBnMomentum * t.batch_var(0, c);
    }
  }
}

// ---------------------------------------------------------------- losses

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

bool fused(const Activation& act, LossKind loss) {
  return (act.kind == ActivationKind::Sigmoid && loss == LossKind::BinaryCe) ||
         (act.kind == ActivationKind::Softmax && loss == LossKind::CategoricalCe);
}

// d(sum_j L_j)/df, scaled.
Matrix loss_output_gradient(LossKind loss, const Matrix& f, const Matrix& y, double scale) {
  Matrix g(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fv = f.data()[i], yv = y.data()[i];
    double d = 0.0;
    switch (loss) {
      case LossKind::Mse: d = fv - yv; break;
      case LossKind::BinaryCe: {
        const double p = clamp_prob(fv);
        d = -yv / p + (1.0 - yv) / (1.0 - p);
        break;
      }
      case LossKind::CategoricalCe: d = -yv / clamp_prob(fv); break;
    }
    g.data()[i] = scale * d;
  }
  return g;
}

// d loss / d pre given d loss / d normalized.
Matrix bn_backward(const LayerTrace& t, const Matrix& d_norm) {
  if (t.bn_use == BnUse::None) return d_norm;
  const std::size_t m = d_norm.rows(), out = d_norm.cols();
  Matrix d_pre(m, out);
  for (std::size_t c = 0; c < out; ++c) {
    const double sigma = t.sigma(0, c);
    if (t.bn_use == BnUse::RunningStats) {
      for (std::size_t r = 0; r < m; ++r) d_pre(r, c) = d_norm(r, c) / sigma;
      continue;
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      mean_d += d_norm(r, c);
      mean_dx += d_norm(r, c) * t.normalized(r, c);
    }
    mean_d *= inv_m;
    mean_dx *= inv_m;
    // A floored sigma no longer depends on the batch variance.
    const bool floored = std::sqrt(t.batch_var(0, c)) < kBnSigmaFloor;
    for (std::size_t r = 0; r < m; ++r) {
      double v = d_norm(r, c) - mean_d;
      if (!floored) v -= t.normalized(r, c) * mean_dx;
      d_pre(r, c) = v / sigma;
    }
  }
  return d_pre;
}

}  // namespace

double batch_loss(LossKind loss, const Matrix& pred, const Matrix& y, std::size_t samples) {
  require_same_shape(pred, y, "batch_loss");
  if (samples == 0) throw InvalidArgument("batch_loss: zero samples");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double f = pred.data()[i], t = y.data()[i];
    switch (loss) {
      case LossKind::Mse: total += 0.5 * (f - t) * (f - t); break;
      case LossKind::BinaryCe: {
        const double p = clamp_prob(f);
        total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
        break;
      }
      case LossKind::CategoricalCe: total -= t * std::log(clamp_prob(f)); break;
    }
  }
  return total / static_cast<double>(samples);
}

// ---------------------------------------------------------------- backward

BackwardResult backward(const Network& net, const ForwardTrace& trace, LossKind loss,
                        const Matrix& y, double scale, bool want_params) {
  const std::size_t layers = net.num_layers();
  require_same_shape(trace.prediction(), y, "backward");
  BackwardResult res;
  res.d_output.resize(layers);
  if (want_params) res.params.resize(layers);

  const LayerSpec& last = net.spec(layers - 1);
  const LayerTrace& lt = trace.layers.back();
  Matrix d_norm;
  if (fused(last.activation, loss)) {
    d_norm = lt.output - y;
    d_norm *= scale;
  } else {
    res.d_output[layers - 1] = loss_output_gradient(loss, lt.output, y, scale);
    d_norm = activation_vjp(last.activation, lt.normalized, res.d_output[layers - 1]);
  }

  for (std::size_t l = layers; l-- > 0;) {
    const LayerTrace& t = trace.layers[l];
    const LayerSpec& spec = net.spec(l);
    const Matrix d_pre = bn_backward(t, d_norm);
    if (want_params) {
      res.params[l].weight = matmul_tn(t.eta, d_pre);
      if (spec.bias) res.params[l].bias = column_sums(d_pre);
    }
    if (l == 0) break;
    const Matrix d_eta = matmul_nt(d_pre, net.params()[l].weight);
    res.d_output[l - 1] = net.filter(l).apply_transpose(d_eta, trace.nodes);
    const LayerTrace& below = trace.layers[l - 1];
    d_norm = activation_vjp(net.spec(l - 1).activation, below.normalized, res.d_output[l - 1]);
  }
  return res;
}

Matrix grad_wrt_hidden(const Network& net, const ForwardTrace& trace, LossKind loss,
                       const Matrix& y, std::size_t l) {
  if (l + 1 >= net.num_layers())
    throw InvalidArgument("grad_wrt_hidden: layer " + std::to_string(l) +
                          " is not a hidden layer");
  return backward(net, trace, loss, y, 1.0, false).d_output[l];
}

std::vector<LayerGrad> param_gradient_sgd(const Network& net, const ForwardTrace& trace,
                                          LossKind loss, const Matrix& y) {
  std::vector<LayerGrad> grads = backward(net, trace, loss, y, 1.0, true).params;
  const double inv_b = 1.0 / static_cast<double>(trace.samples);
  for (LayerGrad& g : grads) {
    g.weight *= inv_b;
    g.bias *= inv_b;
  }
  return grads;
}

}  // namespace mvi
