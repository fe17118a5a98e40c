#include "mvi/experiments.hpp"

#include <cmath>
#include <map>
#include <ostream>

#include "mvi/error.hpp"
#include "mvi/format.hpp"

namespace mvi {

RunResult run_setting(const Setting& s, Method method, std::uint64_t seed) {
  RunResult r;
  r.setting = s.name;
  r.method = method;
  r.seed = seed;
  r.final_net = s.student;
  TrainConfig cfg = s.config;
  cfg.method = method;
  cfg.seed = seed;
  EvalSets eval;
  eval.test = &s.test;
  eval.reference = s.reference ? &*s.reference : nullptr;
  eval.metrics = s.metrics;
  r.history = train(r.final_net, s.train, cfg, eval);
  return r;
}

TrainConfig train_config_from(Config& cfg, const TrainConfig& d) {
  TrainConfig t = d;
  t.epochs = cfg.get_count("train.epochs", d.epochs);
  t.batch_size = cfg.get_count("train.batch_size", d.batch_size);
  t.learning_rate = cfg.get_real("train.lr", d.learning_rate);
  t.momentum = cfg.get_real("train.momentum", d.momentum);
  t.nesterov = cfg.get_bool("train.nesterov", d.nesterov);
  t.adaptive_kappa = cfg.get_bool("train.adaptive_kappa", d.adaptive_kappa);
  t.loss = parse_loss(cfg.get_string("train.loss", to_string(d.loss)));
  t.snapshot_every = cfg.get_count("train.snapshot_every", d.snapshot_every);
  t.oe_lambda = cfg.get_real("train.oe_lambda", d.oe_lambda);
  const double radius = cfg.get_real(
      "train.ball_radius", d.domain.kind == ParamDomain::Kind::Ball ? d.domain.radius : 0.0);
  t.domain = radius > 0.0 ? ParamDomain::ball(radius) : ParamDomain::unconstrained();
  validate_config(t);
  return t;
}

namespace {

std::string setting_name(const std::string& key, std::size_t v) {
  return key + "=" + std::to_string(v);
}

Network glorot(std::vector<LayerSpec> specs, std::optional<Graph> graph, std::uint64_t seed) {
  RngStream init(seed, streams::kInit);
  return init_params(std::move(specs), InitScheme::GlorotUniform, init, std::move(graph));
}

}  // namespace

// ---------------------------------------------------------------- probit

ProbitOptions::ProbitOptions() {
  train.epochs = 200;
  train.batch_size = 200;
  train.learning_rate = 0.005;
  train.momentum = 0.9;
  train.loss = LossKind::Mse;
}

ProbitOptions probit_options(Config& cfg) {
  ProbitOptions o;
  o.n_train = cfg.get_count("data.n_train", o.n_train);
  o.n_test = cfg.get_count("data.n_test", o.n_test);
  o.dims = cfg.get_counts("data.dims", o.dims);
  o.train = train_config_from(cfg, o.train);
  return o;
}

Setting probit_setting(const ProbitOptions& o, std::size_t dim, std::uint64_t seed) {
  RngStream data_rng(seed, streams::kData);
  TeacherData td = gen_probit(o.n_train + o.n_test, dim, data_rng);
  auto [train, test] = train_test_split(td.data, o.n_train);
  Setting s;
  s.name = setting_name("dim", dim);
  s.train = std::move(train);
  s.test = std::move(test);
  s.student = glorot(td.teacher.specs(), std::nullopt, seed);
  s.reference = td.teacher.params();
  s.metrics = {true, true, o.train.loss};
  s.config = o.train;
  return s;
}

// ---------------------------------------------------------------- two-moon

TwoMoonOptions::TwoMoonOptions() {
  train.epochs = 100;
  train.batch_size = 100;
  train.learning_rate = 0.15;
  train.loss = LossKind::Mse;
}

TwoMoonOptions two_moon_options(Config& cfg) {
  TwoMoonOptions o;
  o.n_train = cfg.get_count("data.n_train", o.n_train);
  o.n_test = cfg.get_count("data.n_test", o.n_test);
  o.noise = cfg.get_real("data.noise", o.noise);
  o.hidden = cfg.get_counts("model.hidden", o.hidden);
  o.train = train_config_from(cfg, o.train);
  return o;
}

Setting two_moon_setting(const TwoMoonOptions& o, std::size_t hidden, std::uint64_t seed) {
  RngStream data_rng(seed, streams::kData);
  RngStream train_rng = data_rng.split(1), test_rng = data_rng.split(2);
  Setting s;
  s.name = setting_name("hidden", hidden);
  s.train = gen_two_moons(o.n_train, o.noise, train_rng);
  s.test = gen_two_moons(o.n_test, o.noise, test_rng);
  s.student = glorot({{FilterSpec::dense(), Activation::relu(), 2, hidden, true, BnMode::off()},
                      {FilterSpec::dense(), Activation::softmax(), hidden, 2, true, BnMode::off()}},
                     std::nullopt, seed);
  s.metrics = {true, true, o.train.loss};
  s.config = o.train;
  return s;
}

// ---------------------------------------------------------------- recovery

RecoverOptions::RecoverOptions() {
  train.epochs = 200;
  train.batch_size = 100;
  train.learning_rate = 0.001;
  train.momentum = 0.99;
  train.nesterov = true;
  train.loss = LossKind::Mse;
}

RecoverOptions recover_options(Config& cfg) {
  RecoverOptions o;
  o.nodes = cfg.get_count("graph.nodes", o.nodes);
  o.edge_prob = cfg.get_real("graph.edge_prob", o.edge_prob);
  o.perturb = cfg.get_real("graph.perturb", o.perturb);
  const std::string mode = cfg.get_string("graph.perturb_mode", "literal");
  if (mode == "literal") o.perturb_mode = PerturbMode::Literal;
  else if (mode == "balanced") o.perturb_mode = PerturbMode::Balanced;
  else throw ParseError(cfg.source() + ": key 'graph.perturb_mode': expected literal or balanced");
  o.graph_seed = cfg.get_u64("graph.seed", o.graph_seed);
  o.graphs = cfg.get_list("graph.variants", o.graphs);
  for (const std::string& g : o.graphs)
    if (g != "known" && g != "perturbed")
      throw ParseError(cfg.source() + ": key 'graph.variants': unknown variant '" + g + "'");
  o.in_channels = cfg.get_count("data.in_channels", o.in_channels);
  o.out_channels = cfg.get_count("data.out_channels", o.out_channels);
  o.n_train = cfg.get_count("data.n_train", o.n_train);
  o.n_test = cfg.get_count("data.n_test", o.n_test);
  o.teacher_hidden = cfg.get_count("teacher.hidden", o.teacher_hidden);
  o.teacher_seed = cfg.get_u64("teacher.seed", o.teacher_seed);
  o.layers = cfg.get_count("model.layers", o.layers);
  if (o.layers != 2 && o.layers != 3)
    throw ParseError(cfg.source() + ": key 'model.layers': expected 2 or 3");
  o.hidden = cfg.get_counts("model.hidden", o.hidden);
  o.student_hidden_activation =
      parse_activation(cfg.get_string("model.activation", to_string(o.student_hidden_activation)));
  o.bn = parse_bn(cfg.get_string("model.bn", to_string(o.bn)));
  o.dynamics = cfg.get_bool("output.dynamics", o.dynamics);
  o.train = train_config_from(cfg, o.train);
  return o;
}

Graph recover_graph(const RecoverOptions& o) {
  RngStream rng(o.graph_seed, streams::kGraph);
  return erdos_renyi(o.nodes, o.edge_prob, rng);
}

Graph recover_student_graph(const RecoverOptions& o, bool perturbed) {
  Graph g = recover_graph(o);
  if (!perturbed) return g;
  RngStream rng(o.graph_seed, streams::kPerturb);
  return perturb_edges(g, o.perturb, rng, o.perturb_mode);
}

namespace {

std::vector<LayerSpec> gcn_stack(std::size_t in, std::size_t hidden, std::size_t out,
                                 std::size_t layers, const Activation& hidden_act, BnMode bn) {
  std::vector<LayerSpec> specs;
  specs.push_back({FilterSpec::gcn(), hidden_act, in, hidden, true, bn});
  if (layers == 3) specs.push_back({FilterSpec::gcn(), hidden_act, hidden, hidden, true, bn});
  const Activation head = out == 1 ? Activation::sigmoid() : Activation::softmax();
  specs.push_back({FilterSpec::gcn(), head, hidden, out, true, bn});
  return specs;
}

}  // namespace

Network recover_teacher(const RecoverOptions& o) {
  RngStream rng(o.teacher_seed, streams::kTeacher);
  return make_gcn_teacher(recover_graph(o),
                          gcn_stack(o.in_channels, o.teacher_hidden, o.out_channels, o.layers,
                                    Activation::relu(), BnMode::off()),
                          rng);
}

Setting recover_setting(const RecoverOptions& o, std::size_t hidden, bool perturbed,
                        std::uint64_t seed) {
  const Network teacher = recover_teacher(o);
  RngStream data_rng(seed, streams::kData);
  Dataset all = sample_teacher_data(teacher, o.n_train + o.n_test, data_rng);
  auto [train, test] = train_test_split(all, o.n_train);
  Setting s;
  s.name = std::string(perturbed ? "perturbed" : "known") + "/hidden=" + std::to_string(hidden);
  s.train = std::move(train);
  s.test = std::move(test);
  s.student = glorot(gcn_stack(o.in_channels, hidden, o.out_channels, o.layers,
                               o.student_hidden_activation, o.bn),
                     recover_student_graph(o, perturbed), seed);
  s.metrics = {true, true, o.train.loss};
  s.config = o.train;
  s.config.keep_params = o.dynamics;
  return s;
}

// ---------------------------------------------------------------- panel

PanelOptions::PanelOptions() {
  spec.lag = 5;
  spec.knn = 4;
  train.epochs = 100;
  train.batch_size = 30;
  train.learning_rate = 0.001;
  train.momentum = 0.99;
  train.nesterov = true;
  train.loss = LossKind::Mse;
}

PanelOptions panel_options(Config& cfg) {
  PanelOptions o;
  o.csv = cfg.get_string("data.csv", o.csv);
  o.spec.lag = cfg.get_count("data.lag", o.spec.lag);
  o.spec.knn = cfg.get_count("data.knn", o.spec.knn);
  o.spec.date_column = cfg.get_string("data.date_column", o.spec.date_column);
  o.spec.label_columns = cfg.get_list("data.label_columns", o.spec.label_columns);
  o.classes = cfg.get_count("data.classes", o.classes);
  o.train_fraction = cfg.get_real("data.train_fraction", o.train_fraction);
  o.synthetic.steps = cfg.get_count("synthetic.steps", o.synthetic.steps);
  o.synthetic.rho = cfg.get_real("synthetic.rho", o.synthetic.rho);
  o.synthetic.threshold = cfg.get_real("synthetic.threshold", o.synthetic.threshold);
  o.synthetic_nodes = cfg.get_count("synthetic.nodes", o.synthetic_nodes);
  o.synthetic_edge_prob = cfg.get_real("synthetic.edge_prob", o.synthetic_edge_prob);
  o.synthetic_seed = cfg.get_u64("synthetic.seed", o.synthetic_seed);
  o.hidden = cfg.get_counts("model.hidden", o.hidden);
  o.train = train_config_from(cfg, o.train);
  if (o.spec.lag == 0 || o.spec.knn == 0) throw ParseError(cfg.source() + ": lag and knn must be >= 1");
  if (o.classes < 2) throw ParseError(cfg.source() + ": key 'data.classes': need at least 2");
  if (!(o.train_fraction > 0.0 && o.train_fraction < 1.0))
    throw ParseError(cfg.source() + ": key 'data.train_fraction': expected a value in (0,1)");
  o.synthetic.classes = o.classes;
  return o;
}

Panel panel_data(const PanelOptions& o) {
  if (!o.csv.empty()) return load_panel_csv(o.csv, o.spec);
  RngStream grng(o.synthetic_seed, streams::kGraph);
  const Graph g = erdos_renyi(o.synthetic_nodes, o.synthetic_edge_prob, grng);
  RngStream rng(o.synthetic_seed, streams::kData);
  return gen_synthetic_panel(g, o.synthetic, rng);
}

Setting panel_setting(const PanelOptions& o, const Panel& panel, std::size_t hidden,
                      std::uint64_t seed) {
  const Dataset all = lag_features(panel.labels, o.spec.lag, o.classes);
  const std::size_t count = all.count();
  if (count < 2)
    throw InvalidArgument("panel: lag " + std::to_string(o.spec.lag) + " leaves " +
                          std::to_string(count) + " sample(s); need at least 2");
  std::size_t n_train = static_cast<std::size_t>(std::floor(o.train_fraction * count));
  n_train = std::clamp<std::size_t>(n_train, 1, count - 1);
  // The graph only sees label rows that precede the test period.
  const Matrix train_rows = panel.labels.row_block(0, n_train + o.spec.lag);
  const Graph g = knn_graph_from_labels(train_rows, o.spec.knn);
  auto [train, test] = train_test_split(all, n_train);
  train.graph = g;
  test.graph = g;
  const std::size_t out = o.classes <= 2 ? 1 : o.classes;
  Setting s;
  s.name = setting_name("hidden", hidden);
  s.train = std::move(train);
  s.test = std::move(test);
  s.student = glorot(gcn_stack(o.spec.lag, hidden, out, 3, Activation::relu(), BnMode::off()), g,
                     seed);
  s.metrics = {true, true, o.train.loss};
  s.config = o.train;
  return s;
}

// ---------------------------------------------------------------- summary

std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs) {
  struct Acc {
    SummaryRow row;
    std::vector<double> values;
  };
  std::vector<Acc> acc;
  std::map<std::string, std::size_t> index;
  for (const RunResult& r : runs) {
    if (r.history.points.empty()) continue;
    const EvalPoint& last = r.history.points.back();
    for (const auto* split : {&last.train, &last.test}) {
      const std::string split_name = split == &last.train ? "train" : "test";
      for (const auto& [metric, v] : split->values) {
        const std::string key =
            r.setting + '\x1f' + to_string(r.method) + '\x1f' + metric + '\x1f' + split_name;
        auto it = index.find(key);
        if (it == index.end()) {
          it = index.emplace(key, acc.size()).first;
          acc.push_back({{r.setting, to_string(r.method), metric, split_name}, {}});
        }
        acc[it->second].values.push_back(v);
      }
    }
  }
  std::vector<SummaryRow> rows;
  for (Acc& a : acc) {
    const double n = static_cast<double>(a.values.size());
    double mean = 0.0;
    for (double v : a.values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : a.values) var += (v - mean) * (v - mean);
    a.row.mean = mean;
    a.row.stderr_ = a.values.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0;
    rows.push_back(a.row);
  }
  return rows;
}

const SummaryRow& find_row(const std::vector<SummaryRow>& rows, const std::string& setting,
                           const std::string& method, const std::string& metric,
                           const std::string& split) {
  for (const SummaryRow& r : rows)
    if (r.setting == setting && r.method == method && r.metric == metric && r.split == split)
      return r;
  throw InvalidArgument("summary has no row " + setting + "/" + method + "/" + metric + "/" +
                        split);
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "setting,method,metric,split,mean,stderr\n";
  for (const SummaryRow& r : rows) {
    const bool quote = r.setting.find(',') != std::string::npos;
    os << (quote ? "\"" + r.setting + "\"" : r.setting) << ',' << r.method << ',' << r.metric
       << ',' << r.split << ',' << format_real(r.mean) << ',' << format_real(r.stderr_) << '\n';
  }
}

}  // namespace mvi
