#include "stzitd/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "stzitd/errors.hpp"
#include "stzitd/rng.hpp"

namespace stzitd {

using nlohmann::json;

namespace {

Parameter xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                 std::vector<std::size_t> shape, Rng& rng) {
  Tensor t{std::move(shape)};
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = (2.0 * rng.uniform() - 1.0) * limit;
  return Parameter{name, std::move(t)};
}

Parameter zeros(const std::string& name, std::vector<std::size_t> shape) {
  return Parameter{name, Tensor{std::move(shape)}};
}

GatLayerWeights init_gat_layer(const std::string& prefix, std::size_t in_dim, std::size_t out_dim,
                               std::size_t heads, Rng& rng) {
  GatLayerWeights layer;
  layer.heads.reserve(heads);
  for (std::size_t m = 0; m < heads; ++m) {
    const std::string h = prefix + ".h" + std::to_string(m);
    GatHeadWeights head;
    head.w = xavier(h + ".w", in_dim, out_dim, {in_dim, out_dim}, rng);
    // The attention vector has length 2 F'; both halves share its fan.
    head.attn_src = xavier(h + ".attn_src", 2 * out_dim, 1, {out_dim, 1}, rng);
    head.attn_dst = xavier(h + ".attn_dst", 2 * out_dim, 1, {out_dim, 1}, rng);
    layer.heads.push_back(std::move(head));
  }
  return layer;
}

}  // namespace

ModelState ModelState::init(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.feature_dim == 0) throw ContractError("ModelState::init: feature_dim not set");
  if (cfg.horizon == 0 || cfg.history == 0)
    throw ContractError("ModelState::init: history and horizon must be positive");
  Rng rng(Rng::mix(seed, 0x6d6f64656cULL));
  ModelState m;
  m.cfg = cfg;

  const std::size_t f = cfg.encoder.temporal_dim;
  const std::size_t fp = cfg.encoder.spatial_dim;
  const std::size_t heads = cfg.encoder.heads;
  const std::size_t gate_in = f + cfg.feature_dim + 1;

  m.enc.gru.w_reset = xavier("gru.w_reset", gate_in, f, {gate_in, f}, rng);
  m.enc.gru.w_update = xavier("gru.w_update", gate_in, f, {gate_in, f}, rng);
  m.enc.gru.w_candidate = xavier("gru.w_candidate", gate_in, f, {gate_in, f}, rng);
  m.enc.gru.b_reset = zeros("gru.b_reset", {f});
  m.enc.gru.b_update = zeros("gru.b_update", {f});
  m.enc.gru.b_candidate = zeros("gru.b_candidate", {f});

  m.enc.gat1 = init_gat_layer("gat1", f, fp, heads, rng);
  m.enc.gat2 = init_gat_layer("gat2", heads * fp, fp, heads, rng);

  const std::size_t p = cfg.horizon;
  m.dec.w_pi = xavier("dec.w_pi", fp, p, {fp, p}, rng);
  m.dec.w_mu = xavier("dec.w_mu", fp, p, {fp, p}, rng);
  m.dec.w_phi = xavier("dec.w_phi", fp, p, {fp, p}, rng);
  m.dec.w_rho = xavier("dec.w_rho", fp, p, {fp, p}, rng);
  // Head biases start at data-appropriate operating points instead of zero.
  // The embedding is a sigmoid output, so Z is positive and correlated
  // across roads; with zero biases whole horizon columns of the ReLU mu/phi
  // heads start (or are pushed) below zero, and a dead column never recovers
  // because ReLU passes no gradient. A phi column pinned at epsilon costs
  // ~1e5 per positive cell under the lower-bound objective. Starting pi near
  // the zero-inflation base rate also weakens the early pressure of the
  // overwhelming zero cells on mu, which otherwise kills the mu head before
  // pi can absorb the zero mass.
  m.dec.b_pi = Parameter{"dec.b_pi", Tensor::full({p}, 3.0)};
  m.dec.b_mu = Parameter{"dec.b_mu", Tensor::full({p}, 3.0)};
  m.dec.b_phi = Parameter{"dec.b_phi", Tensor::full({p}, 2.0)};
  m.dec.b_rho = zeros("dec.b_rho", {p});
  return m;
}

std::vector<Parameter*> ModelState::parameters() {
  std::vector<Parameter*> out{&enc.gru.w_reset,     &enc.gru.w_update, &enc.gru.w_candidate,
                              &enc.gru.b_reset,     &enc.gru.b_update, &enc.gru.b_candidate};
  for (auto* layer : {&enc.gat1, &enc.gat2})
    for (GatHeadWeights& h : layer->heads) {
      out.push_back(&h.w);
      out.push_back(&h.attn_src);
      out.push_back(&h.attn_dst);
    }
  for (Parameter* p : {&dec.w_pi, &dec.b_pi, &dec.w_mu, &dec.b_mu, &dec.w_phi, &dec.b_phi,
                       &dec.w_rho, &dec.b_rho})
    out.push_back(p);
  return out;
}

std::vector<const Parameter*> ModelState::parameters() const {
  auto mut = const_cast<ModelState*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

ZitdHeads model_forward(Tape& tape, ParamBinding& bind, ModelState& model,
                        const WindowTensors& window, const RoadGraph& graph, Rng* dropout_rng) {
  if (window.slots.size() != model.cfg.history)
    throw ContractError("model_forward: window has " + std::to_string(window.slots.size()) +
                        " slots, model expects " + std::to_string(model.cfg.history));
  const ValueId z =
      encode(tape, window.slots, graph, bind, model.enc, model.cfg.encoder, dropout_rng);
  return decode(tape, z, bind, model.dec, model.cfg.eps);
}

namespace {

json config_to_json(const ModelConfig& cfg) {
  return json{{"feature_dim", cfg.feature_dim},
              {"history", cfg.history},
              {"horizon", cfg.horizon},
              {"temporal_dim", cfg.encoder.temporal_dim},
              {"spatial_dim", cfg.encoder.spatial_dim},
              {"heads", cfg.encoder.heads},
              {"leaky_slope", cfg.encoder.leaky_slope},
              {"dropout", cfg.encoder.dropout},
              {"epsilon", cfg.eps.epsilon}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.feature_dim = j.at("feature_dim").get<std::size_t>();
  cfg.history = j.at("history").get<std::size_t>();
  cfg.horizon = j.at("horizon").get<std::size_t>();
  cfg.encoder.temporal_dim = j.at("temporal_dim").get<std::size_t>();
  cfg.encoder.spatial_dim = j.at("spatial_dim").get<std::size_t>();
  cfg.encoder.heads = j.at("heads").get<std::size_t>();
  cfg.encoder.leaky_slope = j.at("leaky_slope").get<double>();
  cfg.encoder.dropout = j.at("dropout").get<double>();
  cfg.eps.epsilon = j.at("epsilon").get<double>();
  return cfg;
}

}  // namespace

std::string config_hash(const ModelConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_checkpoint(const std::string& path, const ModelState& model, std::size_t epoch,
                     double validation_loss) {
  json j;
  j["format_version"] = 1;
  j["config"] = config_to_json(model.cfg);
  j["config_hash"] = config_hash(model.cfg);
  j["epoch"] = epoch;
  j["validation_loss"] = validation_loss;
  json params = json::object();
  for (const Parameter* p : model.parameters()) {
    params[p->name] = json{{"shape", p->value.shape()},
                           {"values", std::vector<double>(p->value.data().begin(),
                                                          p->value.data().end())}};
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write checkpoint " + path);
  out << j.dump(1) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open checkpoint " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IngestError("checkpoint " + path + ": " + e.what());
  }
  if (j.at("format_version").get<int>() != 1)
    throw IngestError("checkpoint " + path + ": unsupported format version");

  LoadedCheckpoint out;
  out.model = ModelState::init(config_from_json(j.at("config")), 0);
  out.epoch = j.at("epoch").get<std::size_t>();
  out.validation_loss = j.at("validation_loss").get<double>();
  const json& params = j.at("params");
  for (Parameter* p : out.model.parameters()) {
    const json& entry = params.at(p->name);
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != p->value.shape())
      throw IngestError("checkpoint " + path + ": shape mismatch for " + p->name);
    const auto values = entry.at("values").get<std::vector<double>>();
    if (values.size() != p->value.numel())
      throw IngestError("checkpoint " + path + ": size mismatch for " + p->name);
    for (std::size_t i = 0; i < values.size(); ++i) p->value[i] = values[i];
  }
  return out;
}

}  // namespace stzitd
