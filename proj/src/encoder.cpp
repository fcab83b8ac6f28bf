#include "stzitd/encoder.hpp"

#include <array>

#include "stzitd/errors.hpp"

namespace stzitd {

ValueId gru_cell(Tape& tape, ValueId x_t, ValueId y_t, ValueId h_prev, ParamBinding& bind,
                 GruWeights& w) {
  const std::array<ValueId, 3> cat_in{h_prev, x_t, y_t};
  const ValueId cat = tape.concat_cols(cat_in);

  const ValueId r = tape.sigmoid(tape.add_rowvec(tape.matmul(cat, bind.use(w.w_reset)),
                                                 bind.use(w.b_reset)));
  const ValueId u = tape.sigmoid(tape.add_rowvec(tape.matmul(cat, bind.use(w.w_update)),
                                                 bind.use(w.b_update)));

  const std::array<ValueId, 3> cand_in{tape.mul(r, h_prev), x_t, y_t};
  const ValueId cand_cat = tape.concat_cols(cand_in);
  const ValueId h_tilde = tape.tanh(tape.add_rowvec(tape.matmul(cand_cat, bind.use(w.w_candidate)),
                                                    bind.use(w.b_candidate)));

  // h_t = (1 - u) . h_prev + u . h_tilde
  return tape.add(tape.mul(tape.one_minus(u), h_prev), tape.mul(u, h_tilde));
}

ValueId gru_encode(Tape& tape, const std::vector<SlotInput>& window, ParamBinding& bind,
                   GruWeights& w, std::size_t temporal_dim) {
  if (window.empty()) throw ContractError("gru_encode: empty window");
  const std::size_t n = window[0].x.rows();
  ValueId h = tape.input(Tensor{{n, temporal_dim}});
  for (const SlotInput& slot : window) {
    const ValueId x_t = tape.input(slot.x);
    const ValueId y_t = tape.input(slot.y);
    h = gru_cell(tape, x_t, y_t, h, bind, w);
  }
  return h;
}

Tensor attention_mask(const RoadGraph& graph) {
  Tensor mask = graph.adjacency;
  for (std::size_t i = 0; i < graph.n_roads; ++i) mask.at(i, i) = 1.0;
  return mask;
}

ValueId gat_attention(Tape& tape, ValueId z, const Tensor& mask, ParamBinding& bind,
                      GatHeadWeights& head, double leaky_slope) {
  const std::size_t n = tape.value(z).rows();
  const ValueId h = tape.matmul(z, bind.use(head.w));  // N x F'

  // Edge logit a^T [h_i || h_j] splits into a source and a destination score;
  // broadcasting via rank-1 products keeps everything on the tape.
  const ValueId s_src = tape.matmul(h, bind.use(head.attn_src));  // N x 1
  const ValueId s_dst = tape.matmul(h, bind.use(head.attn_dst));  // N x 1
  const ValueId ones_row = tape.input(Tensor::full({1, n}, 1.0));
  const ValueId ones_col = tape.input(Tensor::full({n, 1}, 1.0));
  const ValueId logits = tape.add(tape.matmul(s_src, ones_row),
                                  tape.matmul(ones_col, tape.transpose(s_dst)));
  return tape.masked_row_softmax(tape.leaky_relu(logits, leaky_slope), mask);
}

ValueId gat_layer(Tape& tape, ValueId z, const Tensor& mask, ParamBinding& bind,
                  GatLayerWeights& layer, GatMode mode, double leaky_slope) {
  if (layer.heads.empty()) throw ContractError("gat_layer: no heads");
  std::vector<ValueId> per_head;
  per_head.reserve(layer.heads.size());
  for (GatHeadWeights& head : layer.heads) {
    const ValueId alpha = gat_attention(tape, z, mask, bind, head, leaky_slope);
    const ValueId h = tape.matmul(z, bind.use(head.w));
    per_head.push_back(tape.matmul(alpha, h));  // N x F'
  }
  if (mode == GatMode::Concat) {
    std::vector<ValueId> activated;
    activated.reserve(per_head.size());
    for (ValueId v : per_head) activated.push_back(tape.sigmoid(v));
    return tape.concat_cols(activated);
  }
  ValueId acc = per_head[0];
  for (std::size_t m = 1; m < per_head.size(); ++m) acc = tape.add(acc, per_head[m]);
  return tape.sigmoid(tape.affine(acc, 1.0 / static_cast<double>(per_head.size()), 0.0));
}

namespace {

// Inverted dropout as a constant mask; scaling by 1/(1-p) keeps the
// expected activation unchanged.
ValueId apply_dropout(Tape& tape, ValueId x, double p, Rng& rng) {
  const Tensor& v = tape.value(x);
  Tensor mask{v.shape()};
  const double keep = 1.0 - p;
  for (std::size_t i = 0; i < mask.numel(); ++i)
    mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return tape.mul(x, tape.input(std::move(mask)));
}

}  // namespace

ValueId encode(Tape& tape, const std::vector<SlotInput>& window, const RoadGraph& graph,
               ParamBinding& bind, EncoderWeights& w, const EncoderConfig& cfg,
               Rng* dropout_rng) {
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw ContractError("encode: dropout must be in [0, 1)");
  const bool drop = cfg.dropout > 0.0 && dropout_rng != nullptr;
  const Tensor mask = attention_mask(graph);
  ValueId z_temporal = gru_encode(tape, window, bind, w.gru, cfg.temporal_dim);
  if (drop) z_temporal = apply_dropout(tape, z_temporal, cfg.dropout, *dropout_rng);
  ValueId z1 = gat_layer(tape, z_temporal, mask, bind, w.gat1, GatMode::Concat, cfg.leaky_slope);
  if (drop) z1 = apply_dropout(tape, z1, cfg.dropout, *dropout_rng);
  return gat_layer(tape, z1, mask, bind, w.gat2, GatMode::Average, cfg.leaky_slope);
}

}  // namespace stzitd
