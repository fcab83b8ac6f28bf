#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stzitd/decoder.hpp"
#include "stzitd/encoder.hpp"
#include "stzitd/road_data.hpp"

namespace stzitd {

struct ModelConfig {
  std::size_t feature_dim = 0;  // d, taken from the data
  std::size_t history = 14;     // t, input window length
  std::size_t horizon = 14;     // p, prediction steps
  EncoderConfig encoder;
  EpsilonConfig eps;
};

// All learnable weights. Parameter order is fixed and is the order used by
// the optimizer, checkpoints, and gradient checks.
struct ModelState {
  ModelConfig cfg;
  EncoderWeights enc;
  DecoderWeights dec;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  // Xavier-uniform weights, zero biases, deterministic per seed.
  static ModelState init(const ModelConfig& cfg, std::uint64_t seed);
};

// Inputs of one training/evaluation window.
struct WindowTensors {
  std::vector<SlotInput> slots;  // history slots, each N x d and N x 1
  Tensor targets;                // N x horizon
  std::size_t target_begin = 0;  // absolute slot of the first target column
};

// encode -> decode on one window. Forward values live on the tape. A
// non-null dropout_rng enables training-mode dropout when configured.
ZitdHeads model_forward(Tape& tape, ParamBinding& bind, ModelState& model,
                        const WindowTensors& window, const RoadGraph& graph,
                        Rng* dropout_rng = nullptr);

// Versioned JSON checkpoint of all named parameter tensors plus a hash of
// the model configuration.
void save_checkpoint(const std::string& path, const ModelState& model, std::size_t epoch,
                     double validation_loss);
struct LoadedCheckpoint {
  ModelState model;
  std::size_t epoch = 0;
  double validation_loss = 0.0;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// FNV-1a over the canonical config serialization.
std::string config_hash(const ModelConfig& cfg);

}  // namespace stzitd
