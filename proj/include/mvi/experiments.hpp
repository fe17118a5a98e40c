#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvi/config.hpp"
#include "mvi/data.hpp"
#include "mvi/trainer.hpp"

namespace mvi {

// One sweep value for one seed: data, the shared initial network and the
// training configuration. Every method trained from a Setting sees the same
// data, initialization and batch order.
struct Setting {
  std::string name;
  Dataset train;
  Dataset test;
  Network student;
  std::optional<std::vector<LayerParams>> reference;
  MetricOptions metrics;
  TrainConfig config;
};

struct RunResult {
  std::string setting;
  Method method = Method::Svi;
  std::uint64_t seed = 0;
  TrainHistory history;
  Network final_net;
};

RunResult run_setting(const Setting& s, Method method, std::uint64_t seed);

// Shared training fields, read from the [train] section.
TrainConfig train_config_from(Config& cfg, const TrainConfig& defaults);

struct ProbitOptions {
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  std::vector<std::size_t> dims{50};
  TrainConfig train;
  ProbitOptions();
};
ProbitOptions probit_options(Config& cfg);
Setting probit_setting(const ProbitOptions& o, std::size_t dim, std::uint64_t seed);

struct TwoMoonOptions {
  std::size_t n_train = 500;
  std::size_t n_test = 500;
  double noise = kDefaultMoonNoise;
  std::vector<std::size_t> hidden{64};
  TrainConfig train;
  TwoMoonOptions();
};
TwoMoonOptions two_moon_options(Config& cfg);
Setting two_moon_setting(const TwoMoonOptions& o, std::size_t hidden, std::uint64_t seed);

struct RecoverOptions {
  std::size_t nodes = 15;
  double edge_prob = 0.15;
  double perturb = 0.2;
  PerturbMode perturb_mode = PerturbMode::Literal;
  std::size_t in_channels = 2;
  std::size_t out_channels = 1;
  std::size_t teacher_hidden = 2;
  std::size_t layers = 2;  // teacher and student depth (2 or 3)
  Activation student_hidden_activation = Activation::relu();
  std::size_t n_train = 2000;
  std::size_t n_test = 2000;
  std::vector<std::size_t> hidden{2, 4, 8, 16, 32};
  std::vector<std::string> graphs{"known", "perturbed"};
  BnMode bn;
  std::uint64_t graph_seed = 0;
  std::uint64_t teacher_seed = 0;
  bool dynamics = false;
  TrainConfig train;
  RecoverOptions();
};
RecoverOptions recover_options(Config& cfg);
// The true graph and the graph given to the student.
Graph recover_graph(const RecoverOptions& o);
Graph recover_student_graph(const RecoverOptions& o, bool perturbed);
Network recover_teacher(const RecoverOptions& o);
Setting recover_setting(const RecoverOptions& o, std::size_t hidden, bool perturbed,
                        std::uint64_t seed);

struct PanelOptions {
  std::string csv;  // empty: synthetic panel
  PanelSpec spec;
  std::size_t classes = 2;
  double train_fraction = 0.5;
  std::vector<std::size_t> hidden{8, 16, 32, 64};
  SyntheticPanelOptions synthetic;
  std::size_t synthetic_nodes = 10;
  double synthetic_edge_prob = 0.3;
  std::uint64_t synthetic_seed = 0;
  TrainConfig train;
  PanelOptions();
};
PanelOptions panel_options(Config& cfg);
Panel panel_data(const PanelOptions& o);
Setting panel_setting(const PanelOptions& o, const Panel& panel, std::size_t hidden,
                      std::uint64_t seed);

struct SummaryRow {
  std::string setting;
  std::string method;
  std::string metric;
  std::string split;
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Final-epoch metrics averaged over seeds, grouped by setting and method in
// first-appearance order; stderr is the sample standard deviation / sqrt(n).
std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs);
const SummaryRow& find_row(const std::vector<SummaryRow>& rows, const std::string& setting,
                           const std::string& method, const std::string& metric,
                           const std::string& split);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

}  // namespace mvi
