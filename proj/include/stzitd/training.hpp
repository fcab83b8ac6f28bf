#pragma once

#include <span>
#include <vector>

#include "stzitd/loss.hpp"
#include "stzitd/model.hpp"
#include "stzitd/road_data.hpp"

namespace stzitd {

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 0.01;  // decoupled, applied before the Adam delta
  std::size_t epochs = 20;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_stabilizer = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; 0 disables clipping
  LossConfig loss;
};

struct AdamState {
  std::vector<Tensor> m, v;  // first/second moments, aligned with the parameter order
  std::size_t step = 0;

  static AdamState init(std::span<Parameter* const> params);
};

// Bias-corrected Adam with decoupled weight decay: each parameter is scaled
// by (1 - lr wd) before the update. Throws NumericError on non-finite
// gradients.
void adam_step(std::span<Parameter* const> params, AdamState& state, const TrainConfig& cfg);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_gradients(std::span<Parameter* const> params, double max_norm);

enum class StopDecision { Continue, Stop };

// Stop once the best validation value lies more than `patience` epochs back.
StopDecision early_stop_check(std::span<const double> validation_history, std::size_t patience);

struct EpochRecord {
  std::size_t epoch = 0;       // 1-based
  double train_loss = 0.0;     // mean objective per cell over the epoch
  double validation_nll = 0.0;  // mean NLL per validation cell
};

struct Checkpoint {
  ModelState model;
  std::size_t epoch = 0;
  double validation_loss = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  bool early_stopped = false;
  bool aborted_non_finite = false;
  std::size_t rho_clamp_events = 0;
};

struct Dataset {
  RoadGraph graph;
  FeatureTensor features;  // standardized on the training block
  Tensor risk;             // N x T
  DatasetSplit split;
};

// Splits on the full time axis and freezes training-block feature statistics.
Dataset make_dataset(RoadGraph graph, FeatureTensor raw_features, Tensor risk);

WindowTensors build_window(const Dataset& data, const Window& w, std::size_t history,
                           std::size_t horizon);

// One window per optimizer step, windows in chronological order, fully
// deterministic per (seed, data, config).
TrainResult train_loop(Dataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg);

// Historical average: each road's training-period mean, repeated across the
// horizon.
Tensor ha_baseline(const Tensor& risk, const TimeRange& train_range, std::size_t horizon);

void write_loss_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace stzitd
