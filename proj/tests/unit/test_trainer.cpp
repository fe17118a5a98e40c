#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "mvi/data.hpp"
#include "mvi/error.hpp"
#include "mvi/experiments.hpp"
#include "mvi/trainer.hpp"

using namespace mvi;

namespace {

LayerSpec layer(FilterSpec f, Activation a, std::size_t in, std::size_t out, bool bias = true,
                BnMode bn = BnMode::off()) {
  return {f, a, in, out, bias, bn};
}

struct Problem {
  Network net;
  Dataset data;
};

// Small teacher-student graph problem with a sigmoid output.
Problem graph_problem(std::vector<LayerSpec> student, std::size_t n = 60) {
  RngStream g(0, streams::kGraph), t(0, streams::kTeacher), d(0, streams::kData), i(0, streams::kInit);
  const Graph graph = erdos_renyi(6, 0.5, g);
  TeacherData td = gen_gcn_teacher(graph, n, {layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 1)}, t, d);
  td.data.graph = graph;
  return {init_params(std::move(student), InitScheme::GlorotUniform, i, graph), td.data};
}

TrainConfig config(Method m, std::size_t epochs, std::size_t batch, double lr) {
  TrainConfig c;
  c.method = m;
  c.epochs = epochs;
  c.batch_size = batch;
  c.learning_rate = lr;
  c.loss = LossKind::BinaryCe;
  c.keep_params = true;
  return c;
}

std::string history_text(const TrainHistory& h) {
  std::ostringstream os;
  write_history_csv(os, h);
  return os.str();
}

}  // namespace

TEST_CASE("make_batches") {
  const RngStream rng(0, streams::kBatches);
  const auto b = make_batches(5, 2, rng, 0);
  REQUIRE(b.size() == 3);
  CHECK(b[0].size() == 2);
  CHECK(b[1].size() == 2);
  CHECK(b[2].size() == 1);
  std::set<std::size_t> seen;
  for (const auto& batch : b) seen.insert(batch.begin(), batch.end());
  CHECK(seen.size() == 5);
  CHECK(make_batches(5, 9, rng, 0).size() == 1);
  CHECK(make_batches(100, 7, rng, 3) == make_batches(100, 7, RngStream(0, streams::kBatches), 3));
  CHECK(make_batches(100, 7, rng, 3) != make_batches(100, 7, rng, 4));
  CHECK_THROWS_AS(make_batches(0, 1, rng, 0), InvalidArgument);
}

TEST_CASE("config validation") {
  Problem p = graph_problem({layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 1)});
  TrainConfig c = config(Method::Svi, 1, 0, 0.1);
  CHECK_THROWS_AS(train(p.net, p.data, c), InvalidArgument);
  c = config(Method::Svi, 1, 4, 0.1);
  c.momentum = 1.0;
  CHECK_THROWS_AS(train(p.net, p.data, c), InvalidArgument);
  c = config(Method::Svi, 1, 4, -0.1);
  CHECK_THROWS_AS(train(p.net, p.data, c), InvalidArgument);
  CHECK(parse_method(to_string(Method::OeLastLayer)) == Method::OeLastLayer);
  CHECK_THROWS(parse_method("adam"));
}

TEST_CASE("zero epochs leave the parameters alone") {
  Problem p = graph_problem({layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 1)});
  const Network before = p.net;
  const TrainHistory h = train(p.net, p.data, config(Method::Svi, 0, 4, 0.1));
  CHECK(p.net == before);
  CHECK(h.points.size() == 1);
  CHECK(h.points[0].epoch == 0);
}

TEST_CASE("SVI and SGD trajectories coincide for a one-layer sigmoid cross-entropy model") {
  for (bool nesterov : {false, true}) {
    Problem p = graph_problem({layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 1)});
    Network a = p.net, b = p.net;
    TrainConfig c = config(Method::Svi, 5, 7, 0.3);
    c.momentum = 0.9;
    c.nesterov = nesterov;
    const TrainHistory hs = train(a, p.data, c);
    c.method = Method::Sgd;
    const TrainHistory hg = train(b, p.data, c);
    CHECK(a == b);
    REQUIRE(hs.points.size() == hg.points.size());
    for (std::size_t i = 0; i < hs.points.size(); ++i) CHECK(*hs.points[i].params == *hg.points[i].params);
    CHECK(history_text(hs) == history_text(hg));
  }
}

TEST_CASE("SVI and SGD see the same batches and initialization; runs are deterministic") {
  std::vector<LayerSpec> specs{layer(FilterSpec::gcn(), Activation::relu(), 2, 4),
                               layer(FilterSpec::gcn(), Activation::sigmoid(), 4, 1)};
  Problem p = graph_problem(specs);
  Network a = p.net, b = p.net, c = p.net;
  TrainConfig cfg = config(Method::Svi, 3, 8, 0.2);
  cfg.snapshot_every = 2;
  const TrainHistory h1 = train(a, p.data, cfg);
  const TrainHistory h2 = train(c, p.data, cfg);
  cfg.method = Method::Sgd;
  const TrainHistory hg = train(b, p.data, cfg);
  CHECK(h1.batch_hash == hg.batch_hash);
  CHECK(*h1.points.front().params == *hg.points.front().params);
  CHECK_FALSE(a == b);
  CHECK(history_text(h1) == history_text(h2));
  CHECK(a == c);

  // Evaluations at epoch 0, every snapshot_every epochs and the final one;
  // t = e * ceil(N/B).
  REQUIRE(h1.points.size() == 3);
  CHECK(h1.points[1].epoch == 2);
  CHECK(h1.points[2].epoch == 3);
  for (std::size_t i = 0; i < h1.points.size(); ++i) CHECK(h1.points[i].iter == h1.points[i].epoch * 8);
  CHECK(history_text(h1).rfind("epoch,iter,split,metric,value\n", 0) == 0);
}

TEST_CASE("adaptive steps need a strongly monotone output") {
  Problem p = graph_problem({layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 1)});
  TrainConfig c = config(Method::Svi, 2, 10, 0.0);
  c.adaptive_kappa = true;
  c.domain = ParamDomain::ball(10.0);
  const TrainHistory h = train(p.net, p.data, c);
  CHECK(h.kappa > 0.0);
  CHECK(h.points.back().train.get("loss") < h.points.front().train.get("loss"));

  RngStream i(1, streams::kInit);
  Network soft = init_params({layer({}, Activation::softmax(), 2, 2)}, InitScheme::GlorotUniform, i);
  RngStream d(1, streams::kData);
  Dataset moons = gen_two_moons(20, 0.1, d);
  c.loss = LossKind::CategoricalCe;
  CHECK_THROWS_AS(train(soft, moons, c), InvalidArgument);
  Network ident = init_params({layer({}, Activation::identity(), 2, 2)}, InitScheme::GlorotUniform, i);
  CHECK_THROWS_AS(train(ident, moons, c), InvalidArgument);
}

TEST_CASE("OE last layer freezes earlier layers and selects an iterate") {
  std::vector<LayerSpec> specs{layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 3),
                               layer(FilterSpec::gcn(), Activation::sigmoid(), 3, 1)};
  Problem p = graph_problem(specs);
  const LayerParams first = p.net.params()[0];
  TrainConfig c = config(Method::OeLastLayer, 3, 10, 0.0);
  const TrainHistory h = train(p.net, p.data, c);
  CHECK(p.net.params()[0] == first);
  CHECK(h.lipschitz > 0.0);
  CHECK(h.oe_index >= 2);
  CHECK(h.oe_index <= 18);
}

TEST_CASE("half-frozen batch norm freezes at half the epochs") {
  std::vector<LayerSpec> specs{layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 3, true, BnMode::half_frozen()),
                               layer(FilterSpec::gcn(), Activation::sigmoid(), 3, 1)};
  Problem p = graph_problem(specs);
  Network a = p.net;
  train(a, p.data, config(Method::Svi, 1, 10, 0.1));
  CHECK_FALSE(a.bn_states()[0].frozen);
  const BnState after_one = a.bn_states()[0];
  Network b = p.net;
  train(b, p.data, config(Method::Svi, 2, 10, 0.1));
  CHECK(b.bn_states()[0].frozen);
  // The second epoch runs on frozen statistics, so the running stats match
  // those after one epoch.
  CHECK(b.bn_states()[0].running_mean == after_one.running_mean);
  CHECK(b.bn_states()[0].running_var == after_one.running_var);
}

TEST_CASE("dynamics csv") {
  std::vector<LayerSpec> specs{layer(FilterSpec::gcn(), Activation::softplus(1.0), 2, 4),
                               layer(FilterSpec::gcn(), Activation::sigmoid(), 4, 1)};
  Problem p = graph_problem(specs);
  const Matrix w0 = p.net.params()[0].weight;
  const TrainHistory frozen = train(p.net, p.data, config(Method::Svi, 2, 10, 1e-300));
  std::ostringstream os;
  write_dynamics_csv(os, frozen);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "snapshot,neuron,signed_norm,out_weight");
  std::vector<std::string> rows;
  while (std::getline(is, line)) rows.push_back(line.substr(line.find(',') + 1));
  REQUIRE(rows.size() == 12);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(rows[k] == rows[4 + k]);
    CHECK(rows[k] == rows[8 + k]);
    double norm = 0;
    for (std::size_t r = 0; r < w0.rows(); ++r) norm += w0(r, k) * w0(r, k);
    const std::string signed_norm = rows[k].substr(rows[k].find(',') + 1);
    CHECK(std::stod(signed_norm) == doctest::Approx(std::sqrt(norm)).epsilon(1e-12));
  }
  CHECK(total_displacement(frozen) == 0.0);

  Problem q = graph_problem({layer(FilterSpec::gcn(), Activation::sigmoid(), 2, 1)});
  const TrainHistory one = train(q.net, q.data, config(Method::Svi, 1, 10, 0.1));
  std::ostringstream sink;
  CHECK_THROWS(write_dynamics_csv(sink, one));
}

TEST_CASE("SVI displaces first-layer neurons further than SGD on the seeded recovery instance") {
  RecoverOptions o;
  o.student_hidden_activation = Activation::softplus(1.0);
  o.train.loss = LossKind::BinaryCe;
  o.train.batch_size = 200;
  o.train.epochs = 200;
  o.dynamics = true;
  const Setting s = recover_setting(o, 16, false, 0);
  const double svi = total_displacement(run_setting(s, Method::Svi, 0).history);
  const double sgd = total_displacement(run_setting(s, Method::Sgd, 0).history);
  MESSAGE("displacement svi " << svi << " sgd " << sgd);
  CHECK(svi >= sgd);
}
