#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stzitd/tensor.hpp"

namespace stzitd {

// Distribution summaries for every evaluated cell. Columns are horizon steps
// of one window, or several windows' steps laid side by side; metric
// aggregation is cell-wise except for the per-column ranking in the hit rate.
struct PredictionSet {
  Tensor y_hat;   // point estimate (1-pi) mu
  Tensor lower;   // interval lower bound
  Tensor upper;   // interval upper bound
  Tensor p_zero;  // zero-probability mass
};

struct PointMetrics {
  double mae = 0.0;
  std::optional<double> mape;  // averaged over y > 0 cells; empty when none exist
  double rmse = 0.0;
};

struct IntervalMetrics {
  double mpiw = 0.0;
  double picp = 0.0;
};

PointMetrics point_metrics(const Tensor& y_true, const Tensor& y_hat);

// PICP counts cells with lower <= y <= upper, bounds inclusive.
IntervalMetrics interval_metrics(const Tensor& y_true, const Tensor& lower, const Tensor& upper);

// Fraction of all cells where the truth is zero and the predicted zero mass
// exceeds `threshold`.
double zero_rate(const Tensor& y_true, const Tensor& p_zero, double threshold = 0.5);

// Per column: the ceil(a N) roads with the highest y_hat (ties broken by
// road index) form the predicted high-risk set; the column score is the
// fraction of that column's crash cells inside the set. Averaged over
// columns that contain a crash; empty when none do.
std::optional<double> acc_hit_rate(const Tensor& y_true, const Tensor& y_hat, double a = 0.2);

struct MetricValues {
  double mae = 0.0;
  std::optional<double> mape;
  double rmse = 0.0;
  double mpiw = 0.0;
  double picp = 0.0;
  double zr = 0.0;
  std::optional<double> acc_hr;
};

struct MetricReport {
  MetricValues overall;
  std::vector<MetricValues> per_step;  // by horizon step, aggregated across windows
  double zr_threshold = 0.5;
  double acc_fraction = 0.2;
};

// `horizon` is the number of steps per window; the column count must be a
// multiple of it. Checks RMSE >= MAE on every row it produces.
MetricReport build_metric_report(const Tensor& y_true, const PredictionSet& pred,
                                 std::size_t horizon, double zr_threshold = 0.5,
                                 double acc_fraction = 0.2);

std::string metric_report_to_json(const MetricReport& report);
void write_metric_report_json(const std::string& path, const MetricReport& report);
// One row per step plus an "overall" row.
void write_metric_report_csv(const std::string& path, const MetricReport& report);

}  // namespace stzitd
