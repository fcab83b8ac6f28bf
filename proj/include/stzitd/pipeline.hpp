#pragma once

#include <string>
#include <vector>

#include "stzitd/metrics.hpp"
#include "stzitd/training.hpp"
#include "stzitd/tweedie.hpp"

namespace stzitd {

struct EvalOptions {
  double lower_q = 0.05;
  double upper_q = 0.95;
  IntervalMethod interval_method = IntervalMethod::MonteCarlo;
  std::size_t mc_samples = 2000;
  std::uint64_t seed = 1;  // interval seeds derive from (road, step, seed)
  double zr_threshold = 0.5;
  double acc_fraction = 0.2;
};

// One evaluated cell; rows of the predictions CSV. `step` is the absolute
// time slot of the target, so stride-1 windows may repeat (road, step) pairs
// with forecasts from different origins.
struct PredictionCell {
  std::size_t road = 0;
  std::size_t step = 0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double p_zero = 0.0;
  double y_true = 0.0;
};

struct EvalResult {
  MetricReport report;
  std::vector<PredictionCell> cells;
  Tensor y_true;       // N x (windows * horizon)
  PredictionSet pred;  // same layout
};

// Distribution summaries for one decoded field. Interval seeds mix (road,
// absolute step, options seed).
PredictionSet summarize_field(const ZitdField& field, std::size_t target_begin,
                              const EvalOptions& opt);

// Forward + summaries + metrics over every stride-1 window inside `range`.
EvalResult evaluate_range(ModelState& model, const Dataset& data, const TimeRange& range,
                          const EvalOptions& opt);

// Forecast the horizon immediately after the last observed slot.
std::vector<PredictionCell> predict_future(ModelState& model, const Dataset& data,
                                           const EvalOptions& opt);

void write_predictions_csv(const std::string& path, const std::vector<PredictionCell>& cells,
                           bool with_truth);

}  // namespace stzitd
