#include "mvi/trainer.hpp"

#include <cmath>
#include <ostream>

#include "mvi/dataset_io.hpp"
#include "mvi/error.hpp"
#include "mvi/format.hpp"

namespace mvi {

std::string to_string(Method m) {
  switch (m) {
    case Method::Svi: return "svi";
    case Method::Sgd: return "sgd";
    case Method::OeLastLayer: return "oe";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  if (text == "svi") return Method::Svi;
  if (text == "sgd") return Method::Sgd;
  if (text == "oe") return Method::OeLastLayer;
  throw ParseError("unknown method '" + text + "'");
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw InvalidArgument("batch size must be >= 1");
  if (cfg.snapshot_every == 0) throw InvalidArgument("snapshot_every must be >= 1");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw InvalidArgument("momentum must lie in [0, 1)");
  if (!cfg.adaptive_kappa && cfg.method != Method::OeLastLayer &&
      !(cfg.learning_rate > 0.0 && std::isfinite(cfg.learning_rate)))
    throw InvalidArgument("learning rate must be positive");
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch,
                                                   const RngStream& rng, std::size_t epoch) {
  if (n == 0) throw InvalidArgument("make_batches: no samples");
  if (batch == 0) throw InvalidArgument("make_batches: batch size must be >= 1");
  RngStream r = rng.split(epoch);
  const std::vector<std::size_t> order = permutation(r, n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch)));
  return out;
}

MetricReport evaluate(const Network& net, const Dataset& data, const EvalSets& eval) {
  const Matrix pred = predict(net, data.x);
  MetricReport r = evaluate_predictions(pred, data.y, data.expectation, data.nodes, eval.metrics);
  if (eval.reference != nullptr) {
    r.set("param_l2_rel", lp_param_error(net.params(), *eval.reference, Norm::L2, true));
    r.set("param_linf", lp_param_error(net.params(), *eval.reference, Norm::Inf, false));
  }
  return r;
}

namespace {

bool strongly_monotone_output(const Activation& a) {
  return a.kind == ActivationKind::Sigmoid || a.kind == ActivationKind::NormalCdf ||
         a.kind == ActivationKind::Softplus;
}

OperatorEstimate as_operator(const LayerGrad& g, std::size_t l, std::size_t batch) {
  return {l, batch, g.weight, g.bias};
}

std::size_t resolved_freeze(const BnMode& bn, std::size_t epochs) {
  if (bn.freeze_epoch != 0) return bn.freeze_epoch;
  return std::max<std::size_t>(1, (epochs + 1) / 2);
}

}  // namespace

TrainHistory train(Network& net, const Dataset& data, const TrainConfig& cfg,
                   const EvalSets& eval) {
  validate_config(cfg);
  const std::size_t n = data.count();
  if (n == 0) throw InvalidArgument("train: empty dataset");
  if (data.nodes != net.nodes())
    throw ShapeError("train: dataset has " + std::to_string(data.nodes) +
                     " nodes per sample, network expects " + std::to_string(net.nodes()));
  if (data.x.cols() != net.spec(0).in)
    throw ShapeError("train: feature width does not match the first layer");
  if (data.y.cols() != net.spec(net.num_layers() - 1).out)
    throw ShapeError("train: label width does not match the last layer");

  const std::size_t last = net.num_layers() - 1;
  TrainHistory hist;
  if (cfg.adaptive_kappa) {
    if (!strongly_monotone_output(net.spec(last).activation))
      throw InvalidArgument("adaptive steps need a sigmoid, normal-cdf or softplus output");
    hist.kappa = estimate_modulus(net, data.x).kappa;
    if (!(hist.kappa > 1e-12))
      throw NumericError("estimated modulus is " + format_real(hist.kappa) +
                         "; the operator is not strongly monotone here, use method=oe");
  }
  double oe_gamma = 0.0;
  if (cfg.method == Method::OeLastLayer) {
    hist.lipschitz = estimate_modulus(net, data.x).lipschitz;
    if (!(hist.lipschitz > 0.0)) throw NumericError("estimated Lipschitz constant is zero");
    oe_gamma = 1.0 / (4.0 * hist.lipschitz);
  }

  auto record = [&](std::size_t epoch, std::size_t iter) {
    EvalPoint p;
    p.epoch = epoch;
    p.iter = iter;
    p.train = evaluate(net, data, eval);
    if (eval.test != nullptr) p.test = evaluate(net, *eval.test, eval);
    if (cfg.keep_params) p.params = net.params();
    hist.points.push_back(std::move(p));
  };
  record(0, 0);

  const RngStream batch_rng(cfg.seed, streams::kBatches);
  std::vector<Velocity> velocity(net.num_layers());
  std::vector<LayerParams> oe_iterates;
  OperatorEstimate prev_op;
  if (cfg.method == Method::OeLastLayer) oe_iterates.push_back(net.params()[last]);
  std::uint64_t bh = 0xcbf29ce484222325ULL;

  std::size_t t = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const BnMode& bn = net.spec(l).bn;
      if (bn.kind == BnKind::HalfFrozen && e >= resolved_freeze(bn, cfg.epochs))
        net.bn_states()[l].frozen = true;
    }
    for (const std::vector<std::size_t>& idx : make_batches(n, cfg.batch_size, batch_rng, e)) {
      bh = fnv1a(std::string(reinterpret_cast<const char*>(idx.data()),
                             idx.size() * sizeof(std::size_t)),
                 bh);
      const Dataset batch = data.subset(idx);

      if (cfg.method == Method::OeLastLayer) {
        const ForwardTrace trace = forward(net, batch.x, Mode::Train);
        update_running_stats(net, trace);
        const OperatorEstimate op = last_layer_operator(net, trace, batch.y);
        oe_step(net.params()[last], t == 0 ? op : prev_op, op, oe_gamma, cfg.oe_lambda,
                cfg.domain);
        prev_op = op;
        oe_iterates.push_back(net.params()[last]);
        ++t;
        continue;
      }

      const double gamma =
          cfg.adaptive_kappa ? adaptive_step(hist.kappa, t) : cfg.learning_rate;
      const bool look = cfg.nesterov && cfg.momentum > 0.0;
      std::optional<Network> ahead;
      if (look) {
        ahead = net;
        for (std::size_t l = 0; l < net.num_layers(); ++l)
          ahead->params()[l] = lookahead(net.params()[l], velocity[l], gamma, cfg.momentum);
      }
      const Network& eval_net = look ? *ahead : net;
      const ForwardTrace trace = forward(eval_net, batch.x, Mode::Train);
      std::vector<OperatorEstimate> ops;
      if (cfg.method == Method::Svi) {
        ops = layer_operators(eval_net, trace, cfg.loss, batch.y);
      } else {
        const std::vector<LayerGrad> g = param_gradient_sgd(eval_net, trace, cfg.loss, batch.y);
        for (std::size_t l = 0; l < g.size(); ++l) ops.push_back(as_operator(g[l], l, idx.size()));
      }
      update_running_stats(net, trace);
      for (std::size_t l = 0; l < net.num_layers(); ++l)
        vi_step(net.params()[l], ops[l], gamma, cfg.domain, &velocity[l], cfg.momentum);
      for (const LayerParams& p : net.params()) {
        if (!all_finite(p.weight) || !all_finite(p.bias))
          throw NumericError("training diverged at iteration " + std::to_string(t));
      }
      ++t;
    }
    if (cfg.method == Method::OeLastLayer && e + 1 == cfg.epochs && oe_iterates.size() >= 3) {
      RngStream sel(cfg.seed, streams::kSelect);
      hist.oe_index = oe_select_index(oe_iterates.size() - 1, sel);
      net.params()[last] = oe_iterates[hist.oe_index];
    }
    if ((e + 1) % cfg.snapshot_every == 0 || e + 1 == cfg.epochs) record(e + 1, t);
  }
  hist.batch_hash = bh;
  return hist;
}

void write_history_csv(std::ostream& os, const TrainHistory& h, bool header) {
  if (header) os << "epoch,iter,split,metric,value\n";
  for (const EvalPoint& p : h.points) {
    for (const auto& [name, v] : p.train.values)
      os << p.epoch << ',' << p.iter << ",train," << name << ',' << format_real(v) << '\n';
    for (const auto& [name, v] : p.test.values)
      os << p.epoch << ',' << p.iter << ",test," << name << ',' << format_real(v) << '\n';
  }
}

namespace {

void require_dynamics_shape(const TrainHistory& h) {
  if (h.points.empty() || !h.points.front().params)
    throw InvalidArgument("dynamics: history has no parameter snapshots");
  const auto& p = *h.points.front().params;
  if (p.size() != 2 || p[1].weight.cols() != 1 || p[1].weight.rows() != p[0].weight.cols())
    throw InvalidArgument("dynamics: needs a two-layer network with a scalar output");
}

}  // namespace

void write_dynamics_csv(std::ostream& os, const TrainHistory& h, bool header) {
  require_dynamics_shape(h);
  if (header) os << "snapshot,neuron,signed_norm,out_weight\n";
  const Matrix& w0 = (*h.points.front().params)[0].weight;
  for (std::size_t s = 0; s < h.points.size(); ++s) {
    if (!h.points[s].params) continue;
    const auto& ps = *h.points[s].params;
    for (std::size_t k = 0; k < w0.cols(); ++k) {
      double ip = 0.0, n0 = 0.0;
      for (std::size_t r = 0; r < w0.rows(); ++r) {
        ip += ps[0].weight(r, k) * w0(r, k);
        n0 += w0(r, k) * w0(r, k);
      }
      const double signed_norm = n0 > 0.0 ? ip / std::sqrt(n0) : 0.0;
      os << s << ',' << k << ',' << format_real(signed_norm) << ','
         << format_real(ps[1].weight(k, 0)) << '\n';
    }
  }
}

double total_displacement(const TrainHistory& h) {
  require_dynamics_shape(h);
  const Matrix& w0 = (*h.points.front().params)[0].weight;
  const Matrix& w1 = (*h.points.back().params)[0].weight;
  double total = 0.0;
  for (std::size_t k = 0; k < w0.cols(); ++k) {
    double d = 0.0;
    for (std::size_t r = 0; r < w0.rows(); ++r) d += (w1(r, k) - w0(r, k)) * (w1(r, k) - w0(r, k));
    total += std::sqrt(d);
  }
  return total;
}

}  // namespace mvi
