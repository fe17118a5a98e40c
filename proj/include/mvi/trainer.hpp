#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvi/data.hpp"
#include "mvi/metrics.hpp"
#include "mvi/network.hpp"
#include "mvi/vi.hpp"

namespace mvi {

enum class Method { Svi, Sgd, OeLastLayer };
std::string to_string(Method m);
Method parse_method(const std::string& text);

struct TrainConfig {
  Method method = Method::Svi;
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  double learning_rate = 0.01;
  bool adaptive_kappa = false;  // gamma_t = 1 / (kappa (t + 1))
  double momentum = 0.0;
  bool nesterov = false;
  ParamDomain domain;
  LossKind loss = LossKind::Mse;
  std::uint64_t seed = 0;
  std::size_t snapshot_every = 1;
  double oe_lambda = 1.0;
  bool keep_params = false;  // store a parameter snapshot at every evaluation
};

void validate_config(const TrainConfig& cfg);

// Per-epoch batches: a fresh shuffle from rng.split(epoch) cut into
// ceil(N/B) contiguous chunks, the last possibly short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch,
                                                   const RngStream& rng, std::size_t epoch);

struct EvalPoint {
  std::size_t epoch = 0;
  std::size_t iter = 0;
  MetricReport train;
  MetricReport test;
  std::optional<std::vector<LayerParams>> params;
};

struct TrainHistory {
  std::vector<EvalPoint> points;
  double kappa = 0.0;      // adaptive runs
  double lipschitz = 0.0;  // OE runs
  std::size_t oe_index = 0;
  std::uint64_t batch_hash = 0;  // FNV-1a over every batch index
};

// Extra material for evaluation: an optional held-out split and optional
// reference parameters for parameter-recovery errors.
struct EvalSets {
  const Dataset* test = nullptr;
  const std::vector<LayerParams>* reference = nullptr;
  MetricOptions metrics;
};

MetricReport evaluate(const Network& net, const Dataset& data, const EvalSets& eval);

// Runs the configured method on `net` in place. Evaluations happen at epoch
// 0, every snapshot_every epochs and at the final epoch.
TrainHistory train(Network& net, const Dataset& data, const TrainConfig& cfg,
                   const EvalSets& eval = {});

// Long-format rows: epoch,iter,split,metric,value.
void write_history_csv(std::ostream& os, const TrainHistory& h, bool header = true);

// Rows snapshot,neuron,signed_norm,out_weight for a two-layer network with a
// scalar output; needs parameter snapshots (keep_params).
void write_dynamics_csv(std::ostream& os, const TrainHistory& h, bool header = true);

// Sum over first-layer neurons of ||w_final - w_initial||_2, from the first
// and last parameter snapshots.
double total_displacement(const TrainHistory& h);

}  // namespace mvi
