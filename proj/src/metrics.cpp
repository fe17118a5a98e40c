#include "mvi/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mvi/error.hpp"

namespace mvi {

namespace {

std::size_t sample_count(const Matrix& m, std::size_t nodes, const char* what) {
  if (nodes == 0 || m.rows() % nodes != 0 || m.rows() == 0)
    throw ShapeError(std::string(what) + ": " + std::to_string(m.rows()) +
                     " rows is not a whole number of " + std::to_string(nodes) + "-node samples");
  return m.rows() / nodes;
}

double row_norm(const Matrix& a, const Matrix& b, std::size_t r, Norm p) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double d = a(r, c) - (b.empty() ? 0.0 : b(r, c));
    if (p == Norm::L2) acc += d * d;
    else acc = std::max(acc, std::abs(d));
  }
  return p == Norm::L2 ? std::sqrt(acc) : acc;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

std::vector<double> flatten(const std::vector<LayerParams>& ps) {
  std::vector<double> out;
  for (const LayerParams& p : ps) {
    out.insert(out.end(), p.weight.values().begin(), p.weight.values().end());
    out.insert(out.end(), p.bias.values().begin(), p.bias.values().end());
  }
  return out;
}

double vec_norm(const std::vector<double>& v, Norm p) {
  double acc = 0.0;
  for (double x : v) {
    if (p == Norm::L2) acc += x * x;
    else acc = std::max(acc, std::abs(x));
  }
  return p == Norm::L2 ? std::sqrt(acc) : acc;
}

}  // namespace

double mse_loss(const Matrix& pred, const Matrix& y, std::size_t nodes) {
  require_same_shape(pred, y, "mse_loss");
  const std::size_t n = sample_count(pred, nodes, "mse_loss");
  double total = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) total += row_norm(pred, y, r, Norm::L2);
  return total / static_cast<double>(n);
}

double mse_loss_squared(const Matrix& pred, const Matrix& y, std::size_t nodes) {
  require_same_shape(pred, y, "mse_loss_squared");
  const std::size_t n = sample_count(pred, nodes, "mse_loss_squared");
  const Matrix d = pred - y;
  return dot(d, d) / static_cast<double>(n);
}

double cross_entropy_loss(const Matrix& pred, const Matrix& y, std::size_t nodes, bool binary) {
  require_same_shape(pred, y, "cross_entropy_loss");
  const std::size_t n = sample_count(pred, nodes, "cross_entropy_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_prob(pred.data()[i]), t = y.data()[i];
    total -= binary ? t * std::log(p) + (1.0 - t) * std::log(1.0 - p) : t * std::log(p);
  }
  return total / static_cast<double>(n);
}

double cross_entropy_loss(const Matrix& pred, const Matrix& y, std::size_t nodes) {
  return cross_entropy_loss(pred, y, nodes, pred.cols() == 1);
}

std::vector<std::size_t> predicted_classes(const Matrix& pred) {
  std::vector<std::size_t> cls(pred.rows(), 0);
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    if (pred.cols() == 1) {
      cls[r] = pred(r, 0) > 0.5 ? 1 : 0;
      continue;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < pred.cols(); ++c)
      if (pred(r, c) > pred(r, best)) best = c;
    cls[r] = best;
  }
  return cls;
}

double classification_error(const Matrix& pred, const Matrix& y) {
  require_same_shape(pred, y, "classification_error");
  if (pred.rows() == 0) throw ShapeError("classification_error: empty input");
  const auto p = predicted_classes(pred), t = predicted_classes(y);
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < p.size(); ++r) wrong += p[r] != t[r];
  return static_cast<double>(wrong) / static_cast<double>(p.size());
}

double weighted_f1(const Matrix& pred, const Matrix& y) {
  require_same_shape(pred, y, "weighted_f1");
  if (pred.rows() == 0) throw ShapeError("weighted_f1: empty input");
  const std::size_t classes = std::max<std::size_t>(pred.cols(), 2);
  const auto p = predicted_classes(pred), t = predicted_classes(y);
  std::vector<double> tp(classes), fp(classes), fn(classes), support(classes);
  for (std::size_t r = 0; r < p.size(); ++r) {
    support[t[r]] += 1;
    if (p[r] == t[r]) {
      tp[p[r]] += 1;
    } else {
      fp[p[r]] += 1;
      fn[t[r]] += 1;
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    const double f1 = denom > 0 ? 2 * tp[c] / denom : 0.0;
    total += f1 * support[c];
  }
  return total / static_cast<double>(p.size());
}

std::string to_string(Norm p) { return p == Norm::L2 ? "l2" : "linf"; }

double lp_param_error(const std::vector<LayerParams>& hat, const std::vector<LayerParams>& star,
                      Norm p, bool relative) {
  const std::vector<double> a = flatten(hat), b = flatten(star);
  if (a.size() != b.size() || hat.size() != star.size())
    throw ShapeError("lp_param_error: parameter shapes differ");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double err = vec_norm(d, p);
  if (!relative) return err;
  const double denom = vec_norm(b, p);
  if (denom == 0.0) throw NumericError("lp_param_error: reference parameters are zero");
  return err / denom;
}

double lp_model_error(const Matrix& hat, const Matrix& truth, std::size_t nodes, Norm p,
                      bool relative) {
  require_same_shape(hat, truth, "lp_model_error");
  if (relative && p != Norm::L2)
    throw InvalidArgument("lp_model_error: relative error is defined for p = 2 only");
  const std::size_t n = sample_count(hat, nodes, "lp_model_error");
  double err = 0.0, ref = 0.0;
  for (std::size_t r = 0; r < hat.rows(); ++r) {
    err += row_norm(hat, truth, r, p);
    if (relative) ref += row_norm(truth, Matrix(), r, p);
  }
  if (!relative) return err / static_cast<double>(n);
  if (ref == 0.0) throw NumericError("lp_model_error: true expectations are zero");
  return err / ref;
}

double ce_loss_gap_bound(const Matrix& truth, const Matrix& y, double eps) {
  require_same_shape(truth, y, "ce_loss_gap_bound");
  if (eps < 0.0) throw InvalidArgument("ce_loss_gap_bound: eps must be non-negative");
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth.data()[i], t = y.data()[i];
    if (!(eps < e && eps < 1.0 - e))
      throw InvalidArgument("ce_loss_gap_bound: eps " + std::to_string(eps) +
                            " is not below min(E, 1-E) = " + std::to_string(std::min(e, 1.0 - e)));
    total += t * std::log(e / (e - eps)) + (1.0 - t) * std::log((1.0 - e) / (1.0 - e - eps));
  }
  return total;
}

void MetricReport::set(const std::string& name, double v) {
  for (auto& kv : values)
    if (kv.first == name) {
      kv.second = v;
      return;
    }
  values.emplace_back(name, v);
}

bool MetricReport::has(const std::string& name) const {
  return std::any_of(values.begin(), values.end(),
                     [&](const auto& kv) { return kv.first == name; });
}

double MetricReport::get(const std::string& name) const {
  for (const auto& kv : values)
    if (kv.first == name) return kv.second;
  throw InvalidArgument("metric '" + name + "' not recorded");
}

MetricReport evaluate_predictions(const Matrix& pred, const Matrix& y, const Matrix& expectation,
                                  std::size_t nodes, const MetricOptions& opts) {
  MetricReport r;
  const std::size_t n = sample_count(pred, nodes, "evaluate_predictions");
  r.set("loss", batch_loss(opts.loss, pred, y, n));
  r.set("mse", mse_loss(pred, y, nodes));
  if (opts.probabilities) r.set("cross_entropy", cross_entropy_loss(pred, y, nodes));
  if (opts.classification) {
    r.set("class_error", classification_error(pred, y));
    r.set("weighted_f1", weighted_f1(pred, y));
  }
  if (!expectation.empty()) {
    r.set("model_l2", lp_model_error(pred, expectation, nodes, Norm::L2, false));
    r.set("model_l2_rel", lp_model_error(pred, expectation, nodes, Norm::L2, true));
    r.set("model_linf", lp_model_error(pred, expectation, nodes, Norm::Inf, false));
  }
  return r;
}

}  // namespace mvi
