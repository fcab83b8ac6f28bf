#include "stzitd/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "stzitd/errors.hpp"

namespace stzitd {

AdamState AdamState::init(std::span<Parameter* const> params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Parameter* p : params) {
    s.m.push_back(Tensor::zeros(p->value.shape()));
    s.v.push_back(Tensor::zeros(p->value.shape()));
  }
  return s;
}

void adam_step(std::span<Parameter* const> params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size())
    throw ContractError("adam_step: state does not match parameter list");
  for (const Parameter* p : params)
    p->grad.ensure_finite("adam_step(" + p->name + ")");

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double g = p.grad[i];
      p.value[i] *= decay;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_stabilizer);
    }
  }
}

double clip_gradients(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (std::size_t i = 0; i < p->grad.numel(); ++i) sq += p->grad[i] * p->grad[i];
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : params)
      for (std::size_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= scale;
  }
  return norm;
}

StopDecision early_stop_check(std::span<const double> validation_history, std::size_t patience) {
  if (validation_history.empty()) throw ContractError("early_stop_check: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < validation_history.size(); ++i)
    if (validation_history[i] < validation_history[best]) best = i;
  const std::size_t last = validation_history.size() - 1;
  return (last - best) > patience ? StopDecision::Stop : StopDecision::Continue;
}

Dataset make_dataset(RoadGraph graph, FeatureTensor raw_features, Tensor risk) {
  if (raw_features.n_roads != risk.rows() || raw_features.n_slots != risk.cols())
    throw IngestError("make_dataset: features and risk disagree on dimensions");
  if (graph.n_roads != risk.rows())
    throw IngestError("make_dataset: graph and risk disagree on road count");
  for (std::size_t i = 0; i < risk.numel(); ++i)
    if (risk[i] < 0.0) throw IngestError("make_dataset: negative risk value");
  Dataset d;
  d.graph = std::move(graph);
  d.risk = std::move(risk);
  d.split = temporal_split(d.risk.cols());
  standardize_features(raw_features, d.split.train);
  d.features = std::move(raw_features);
  return d;
}

WindowTensors build_window(const Dataset& data, const Window& w, std::size_t history,
                           std::size_t horizon) {
  const std::size_t n = data.risk.rows();
  const std::size_t d = data.features.dim;
  WindowTensors out;
  out.slots.reserve(history);
  for (std::size_t s = 0; s < history; ++s) {
    const std::size_t t = w.input_begin + s;
    SlotInput slot{Tensor{{n, d}}, Tensor{{n, 1}}};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) slot.x.at(i, k) = data.features.at(i, t, k);
      slot.y.at(i, 0) = data.risk.at(i, t);
    }
    out.slots.push_back(std::move(slot));
  }
  out.targets = Tensor{{n, horizon}};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < horizon; ++j)
      out.targets.at(i, j) = data.risk.at(i, w.target_begin + j);
  out.target_begin = w.target_begin;
  return out;
}

namespace {

// Validation tracks the exact series NLL, not the training bound: the bound
// keeps improving as the dispersion head drifts toward the degenerate
// all-zero regime, while the exact likelihood of the positive cells blows
// up there, so only the exact NLL gives early stopping something to catch.
double validation_nll(ModelState& model, const Dataset& data,
                      const std::vector<WindowTensors>& windows, const LossConfig& loss_cfg) {
  double sum = 0.0;
  std::size_t windows_seen = 0;
  for (const WindowTensors& w : windows) {
    Tape tape;
    ParamBinding bind(tape);
    const ZitdHeads heads = model_forward(tape, bind, model, w, data.graph);
    const ZitdField field = field_from_heads(tape, heads);
    sum += exact_nll_mean(w.targets, field, loss_cfg.epsilon);
    ++windows_seen;
  }
  return windows_seen > 0 ? sum / static_cast<double>(windows_seen) : 0.0;
}

}  // namespace

TrainResult train_loop(Dataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg) {
  const auto train_windows_idx = make_windows(data.split.train, mcfg.history, mcfg.horizon);
  const auto val_windows_idx = make_windows(data.split.validation, mcfg.history, mcfg.horizon);
  if (train_windows_idx.empty()) throw ContractError("train_loop: no training windows");

  std::vector<WindowTensors> train_windows, val_windows;
  for (const Window& w : train_windows_idx)
    train_windows.push_back(build_window(data, w, mcfg.history, mcfg.horizon));
  for (const Window& w : val_windows_idx)
    val_windows.push_back(build_window(data, w, mcfg.history, mcfg.horizon));

  for (const Window& w : val_windows_idx)
    if (w.target_begin + mcfg.horizon > data.split.test.begin)
      throw ContractError("train_loop: validation window reaches into the test block");

  TrainResult result;
  ModelState model = ModelState::init(mcfg, tcfg.seed);
  auto params = model.parameters();
  AdamState adam = AdamState::init(params);

  result.best = Checkpoint{model, 0, std::numeric_limits<double>::infinity()};
  std::vector<double> val_history;
  Rng dropout_rng(Rng::mix(tcfg.seed, 0x64726f70ULL));
  Rng* drop = mcfg.encoder.dropout > 0.0 ? &dropout_rng : nullptr;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t epoch_cells = 0;
    try {
      for (const WindowTensors& w : train_windows) {
        Tape tape;
        ParamBinding bind(tape);
        const ZitdHeads heads = model_forward(tape, bind, model, w, data.graph, drop);
        ValueId loss = zitd_nll_op(tape, heads, w.targets, tcfg.loss, &result.rho_clamp_events);
        const auto bound = bind.bound_ids();
        loss = add_l2_penalty(tape, loss, bound, tcfg.loss.eta);
        tape.backward(loss);
        bind.pull_grads();
        clip_gradients(params, tcfg.clip_norm);
        adam_step(params, adam, tcfg);
        epoch_loss += tape.value(loss).scalar_value();
        epoch_cells += w.targets.numel();
      }
    } catch (const NumericError& e) {
      std::cerr << "train_loop: aborting at epoch " << epoch << ": " << e.what() << "\n";
      result.aborted_non_finite = true;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_cells > 0 ? epoch_loss / static_cast<double>(epoch_cells) : 0.0;
    rec.validation_nll = val_windows.empty()
                             ? rec.train_loss
                             : validation_nll(model, data, val_windows, tcfg.loss);
    result.history.push_back(rec);
    val_history.push_back(rec.validation_nll);

    if (rec.validation_nll < result.best.validation_loss) {
      result.best = Checkpoint{model, epoch, rec.validation_nll};
    }
    if (early_stop_check(val_history, tcfg.patience) == StopDecision::Stop) {
      result.early_stopped = true;
      break;
    }
  }

  if (result.best.epoch == 0) result.best = Checkpoint{model, 0, val_history.empty() ? 0.0 : val_history.back()};
  return result;
}

Tensor ha_baseline(const Tensor& risk, const TimeRange& train_range, std::size_t horizon) {
  if (train_range.length() == 0) throw ContractError("ha_baseline: empty training block");
  const std::size_t n = risk.rows();
  Tensor pred{{n, horizon}};
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t t = train_range.begin; t < train_range.end; ++t) sum += risk.at(i, t);
    const double mean = sum / static_cast<double>(train_range.length());
    for (std::size_t j = 0; j < horizon; ++j) pred.at(i, j) = mean;
  }
  return pred;
}

void write_loss_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path);
  out.precision(17);
  out << "epoch,train_loss,validation_nll\n";
  for (const EpochRecord& r : history)
    out << r.epoch << "," << r.train_loss << "," << r.validation_nll << "\n";
}

}  // namespace stzitd
