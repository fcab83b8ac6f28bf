#pragma once

#include <vector>

#include "stzitd/rng.hpp"
#include "stzitd/road_data.hpp"
#include "stzitd/tape.hpp"

namespace stzitd {

struct EncoderConfig {
  std::size_t temporal_dim = 42;   // F
  std::size_t spatial_dim = 42;    // F'
  std::size_t heads = 3;           // M
  double leaky_slope = 0.2;
  double dropout = 0.0;  // off by default; baselines use it, this model does not
};

// Gates map the concatenation [h_{t-1}, x_t, y_t] of width F + d + 1 to F.
struct GruWeights {
  Parameter w_reset, w_update, w_candidate;  // (F + d + 1) x F
  Parameter b_reset, b_update, b_candidate;  // F
};

// One attention head: a projection and the split attention vector, stored as
// its two halves so the edge logit is src_score_i + dst_score_j.
struct GatHeadWeights {
  Parameter w;         // in_dim x F'
  Parameter attn_src;  // F' x 1, first half of the attention vector
  Parameter attn_dst;  // F' x 1, second half
};

struct GatLayerWeights {
  std::vector<GatHeadWeights> heads;
};

enum class GatMode { Concat, Average };

// One time slot of input for every road.
struct SlotInput {
  Tensor x;  // N x d
  Tensor y;  // N x 1
};

// h_t for one slot; all tensors live on the given tape.
ValueId gru_cell(Tape& tape, ValueId x_t, ValueId y_t, ValueId h_prev, ParamBinding& bind,
                 GruWeights& w);

// Rolls the cell over the window from h_0 = 0 and returns Z_T (N x F).
ValueId gru_encode(Tape& tape, const std::vector<SlotInput>& window, ParamBinding& bind,
                   GruWeights& w, std::size_t temporal_dim);

// Neighbourhood mask used by the attention softmax: adjacency plus the self
// loop, which keeps isolated roads well-defined.
Tensor attention_mask(const RoadGraph& graph);

// Attention coefficients of one head (N x N, rows summing to 1 over the
// masked neighbourhood).
ValueId gat_attention(Tape& tape, ValueId z, const Tensor& mask, ParamBinding& bind,
                      GatHeadWeights& head, double leaky_slope);

// Multi-head layer: per-head aggregation under sigmoid, heads concatenated
// (width M F') or averaged inside the sigmoid (width F').
ValueId gat_layer(Tape& tape, ValueId z, const Tensor& mask, ParamBinding& bind,
                  GatLayerWeights& layer, GatMode mode, double leaky_slope);

struct EncoderWeights {
  GruWeights gru;
  GatLayerWeights gat1;  // concat layer, heads map F -> F'
  GatLayerWeights gat2;  // average layer, heads map M F' -> F'
};

// Full pipeline: GRU over the window, then the two GAT layers. Output N x F'.
// When cfg.dropout > 0 and dropout_rng is given (training mode), inverted
// dropout is applied to the temporal embedding and the first GAT layer's
// output; evaluation passes no rng and is deterministic.
ValueId encode(Tape& tape, const std::vector<SlotInput>& window, const RoadGraph& graph,
               ParamBinding& bind, EncoderWeights& w, const EncoderConfig& cfg,
               Rng* dropout_rng = nullptr);

}  // namespace stzitd
