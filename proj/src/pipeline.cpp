#include "stzitd/pipeline.hpp"

#include <fstream>

#include "stzitd/errors.hpp"
#include "stzitd/rng.hpp"

namespace stzitd {

PredictionSet summarize_field(const ZitdField& field, std::size_t target_begin,
                              const EvalOptions& opt) {
  const std::size_t n = field.n_roads();
  const std::size_t p = field.horizon();
  PredictionSet out{Tensor{{n, p}}, Tensor{{n, p}}, Tensor{{n, p}}, Tensor{{n, p}}};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const ZitdParams z = field.at(i, j);
      out.y_hat.at(i, j) = zitd_moments(z).mean;
      out.p_zero.at(i, j) = zitd_zero_mass(z);
      const std::uint64_t cell_seed =
          Rng::mix(Rng::mix(opt.seed, i), target_begin + j);
      const Interval iv = zitd_interval(z, opt.lower_q, opt.upper_q, opt.interval_method,
                                        opt.mc_samples, cell_seed);
      out.lower.at(i, j) = iv.lower;
      out.upper.at(i, j) = iv.upper;
    }
  return out;
}

EvalResult evaluate_range(ModelState& model, const Dataset& data, const TimeRange& range,
                          const EvalOptions& opt) {
  const std::size_t history = model.cfg.history;
  const std::size_t horizon = model.cfg.horizon;
  const auto windows = make_windows(range, history, horizon);
  if (windows.empty())
    throw ContractError("evaluate_range: range of length " + std::to_string(range.length()) +
                        " admits no windows for t=" + std::to_string(history) +
                        ", p=" + std::to_string(horizon));

  const std::size_t n = data.risk.rows();
  EvalResult result;
  result.y_true = Tensor{{n, windows.size() * horizon}};
  result.pred = PredictionSet{Tensor{{n, windows.size() * horizon}},
                              Tensor{{n, windows.size() * horizon}},
                              Tensor{{n, windows.size() * horizon}},
                              Tensor{{n, windows.size() * horizon}}};

  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    const WindowTensors wt = build_window(data, windows[wi], history, horizon);
    Tape tape;
    ParamBinding bind(tape);
    const ZitdHeads heads = model_forward(tape, bind, model, wt, data.graph);
    const ZitdField field = field_from_heads(tape, heads);
    const PredictionSet summary = summarize_field(field, wt.target_begin, opt);

    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < horizon; ++j) {
        const std::size_t col = wi * horizon + j;
        result.y_true.at(i, col) = wt.targets.at(i, j);
        result.pred.y_hat.at(i, col) = summary.y_hat.at(i, j);
        result.pred.lower.at(i, col) = summary.lower.at(i, j);
        result.pred.upper.at(i, col) = summary.upper.at(i, j);
        result.pred.p_zero.at(i, col) = summary.p_zero.at(i, j);
        result.cells.push_back(PredictionCell{i, wt.target_begin + j, summary.y_hat.at(i, j),
                                              summary.lower.at(i, j), summary.upper.at(i, j),
                                              summary.p_zero.at(i, j), wt.targets.at(i, j)});
      }
  }
  result.report = build_metric_report(result.y_true, result.pred, horizon, opt.zr_threshold,
                                      opt.acc_fraction);
  return result;
}

std::vector<PredictionCell> predict_future(ModelState& model, const Dataset& data,
                                           const EvalOptions& opt) {
  const std::size_t history = model.cfg.history;
  const std::size_t horizon = model.cfg.horizon;
  const std::size_t n_slots = data.risk.cols();
  if (n_slots < history)
    throw ContractError("predict_future: need at least " + std::to_string(history) + " slots");

  Window w{n_slots - history, n_slots};
  // Targets do not exist beyond the data; build inputs only.
  WindowTensors wt;
  wt.target_begin = n_slots;
  const std::size_t n = data.risk.rows();
  const std::size_t d = data.features.dim;
  for (std::size_t s = 0; s < history; ++s) {
    const std::size_t t = w.input_begin + s;
    SlotInput slot{Tensor{{n, d}}, Tensor{{n, 1}}};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) slot.x.at(i, k) = data.features.at(i, t, k);
      slot.y.at(i, 0) = data.risk.at(i, t);
    }
    wt.slots.push_back(std::move(slot));
  }
  wt.targets = Tensor{{n, horizon}};

  Tape tape;
  ParamBinding bind(tape);
  const ZitdHeads heads = model_forward(tape, bind, model, wt, data.graph);
  const ZitdField field = field_from_heads(tape, heads);
  const PredictionSet summary = summarize_field(field, wt.target_begin, opt);

  std::vector<PredictionCell> cells;
  cells.reserve(n * horizon);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < horizon; ++j)
      cells.push_back(PredictionCell{i, wt.target_begin + j, summary.y_hat.at(i, j),
                                     summary.lower.at(i, j), summary.upper.at(i, j),
                                     summary.p_zero.at(i, j), 0.0});
  return cells;
}

void write_predictions_csv(const std::string& path, const std::vector<PredictionCell>& cells,
                           bool with_truth) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path);
  out.precision(17);
  out << (with_truth ? "road,step,mean,L,U,P0,y_true\n" : "road,step,mean,L,U,P0\n");
  for (const PredictionCell& c : cells) {
    out << c.road << "," << c.step << "," << c.mean << "," << c.lower << "," << c.upper << ","
        << c.p_zero;
    if (with_truth) out << "," << c.y_true;
    out << "\n";
  }
}

}  // namespace stzitd
