#include "stzitd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "stzitd/errors.hpp"

namespace stzitd {

using nlohmann::json;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": shapes " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

PointMetrics point_metrics(const Tensor& y_true, const Tensor& y_hat) {
  require_same_shape(y_true, y_hat, "point_metrics");
  if (y_true.numel() == 0) throw ContractError("point_metrics: no cells");
  PointMetrics out;
  double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < y_true.numel(); ++i) {
    const double err = y_true[i] - y_hat[i];
    abs_sum += std::abs(err);
    sq_sum += err * err;
    if (y_true[i] > 0.0) {
      ape_sum += std::abs(err) / y_true[i];
      ++positives;
    }
  }
  const double n = static_cast<double>(y_true.numel());
  out.mae = abs_sum / n;
  out.rmse = std::sqrt(sq_sum / n);
  if (positives > 0) out.mape = ape_sum / static_cast<double>(positives);
  if (out.rmse < out.mae - 1e-12)
    throw NumericError("point_metrics: RMSE < MAE, aggregation is broken");
  return out;
}

IntervalMetrics interval_metrics(const Tensor& y_true, const Tensor& lower, const Tensor& upper) {
  require_same_shape(y_true, lower, "interval_metrics");
  require_same_shape(y_true, upper, "interval_metrics");
  if (y_true.numel() == 0) throw ContractError("interval_metrics: no cells");
  IntervalMetrics out;
  std::size_t covered = 0;
  double width_sum = 0.0;
  for (std::size_t i = 0; i < y_true.numel(); ++i) {
    if (lower[i] > upper[i])
      throw ContractError("interval_metrics: lower > upper at flat index " + std::to_string(i));
    width_sum += upper[i] - lower[i];
    if (y_true[i] >= lower[i] && y_true[i] <= upper[i]) ++covered;
  }
  out.mpiw = width_sum / static_cast<double>(y_true.numel());
  out.picp = static_cast<double>(covered) / static_cast<double>(y_true.numel());
  return out;
}

double zero_rate(const Tensor& y_true, const Tensor& p_zero, double threshold) {
  require_same_shape(y_true, p_zero, "zero_rate");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ContractError("zero_rate: threshold must be in (0, 1)");
  if (y_true.numel() == 0) throw ContractError("zero_rate: no cells");
  std::size_t matched = 0;
  for (std::size_t i = 0; i < y_true.numel(); ++i)
    if (y_true[i] == 0.0 && p_zero[i] > threshold) ++matched;
  return static_cast<double>(matched) / static_cast<double>(y_true.numel());
}

std::optional<double> acc_hit_rate(const Tensor& y_true, const Tensor& y_hat, double a) {
  require_same_shape(y_true, y_hat, "acc_hit_rate");
  if (!(a > 0.0 && a <= 1.0)) throw ContractError("acc_hit_rate: a must be in (0, 1]");
  const std::size_t n = y_true.rows();
  const std::size_t cols = y_true.cols();
  const std::size_t k = static_cast<std::size_t>(std::ceil(a * static_cast<double>(n)));

  double score_sum = 0.0;
  std::size_t scored_cols = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < cols; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t u, std::size_t v) {
      if (y_hat.at(u, j) != y_hat.at(v, j)) return y_hat.at(u, j) > y_hat.at(v, j);
      return u < v;
    });
    std::size_t crashes = 0, captured = 0;
    std::vector<bool> in_top(n, false);
    for (std::size_t r = 0; r < k && r < n; ++r) in_top[order[r]] = true;
    for (std::size_t i = 0; i < n; ++i)
      if (y_true.at(i, j) > 0.0) {
        ++crashes;
        if (in_top[i]) ++captured;
      }
    if (crashes > 0) {
      score_sum += static_cast<double>(captured) / static_cast<double>(crashes);
      ++scored_cols;
    }
  }
  if (scored_cols == 0) return std::nullopt;
  return score_sum / static_cast<double>(scored_cols);
}

namespace {

Tensor select_step_columns(const Tensor& src, std::size_t horizon, std::size_t step) {
  const std::size_t windows = src.cols() / horizon;
  Tensor out{{src.rows(), windows}};
  for (std::size_t i = 0; i < src.rows(); ++i)
    for (std::size_t w = 0; w < windows; ++w) out.at(i, w) = src.at(i, w * horizon + step);
  return out;
}

MetricValues compute_values(const Tensor& y, const PredictionSet& pred, double zr_threshold,
                            double acc_fraction) {
  MetricValues v;
  const PointMetrics pm = point_metrics(y, pred.y_hat);
  const IntervalMetrics im = interval_metrics(y, pred.lower, pred.upper);
  v.mae = pm.mae;
  v.mape = pm.mape;
  v.rmse = pm.rmse;
  v.mpiw = im.mpiw;
  v.picp = im.picp;
  v.zr = zero_rate(y, pred.p_zero, zr_threshold);
  v.acc_hr = acc_hit_rate(y, pred.y_hat, acc_fraction);
  return v;
}

json values_to_json(const MetricValues& v) {
  json j{{"mae", v.mae},   {"rmse", v.rmse}, {"mpiw", v.mpiw},
         {"picp", v.picp}, {"zr", v.zr}};
  j["mape"] = v.mape ? json(*v.mape) : json(nullptr);
  j["acc_hr"] = v.acc_hr ? json(*v.acc_hr) : json(nullptr);
  return j;
}

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(17);
  s << *v;
  return s.str();
}

}  // namespace

MetricReport build_metric_report(const Tensor& y_true, const PredictionSet& pred,
                                 std::size_t horizon, double zr_threshold, double acc_fraction) {
  if (horizon == 0 || y_true.cols() % horizon != 0)
    throw ContractError("build_metric_report: column count " + std::to_string(y_true.cols()) +
                        " is not a multiple of the horizon " + std::to_string(horizon));
  MetricReport report;
  report.zr_threshold = zr_threshold;
  report.acc_fraction = acc_fraction;
  report.overall = compute_values(y_true, pred, zr_threshold, acc_fraction);
  report.per_step.reserve(horizon);
  for (std::size_t step = 0; step < horizon; ++step) {
    PredictionSet sub{select_step_columns(pred.y_hat, horizon, step),
                      select_step_columns(pred.lower, horizon, step),
                      select_step_columns(pred.upper, horizon, step),
                      select_step_columns(pred.p_zero, horizon, step)};
    report.per_step.push_back(compute_values(select_step_columns(y_true, horizon, step), sub,
                                             zr_threshold, acc_fraction));
  }
  return report;
}

std::string metric_report_to_json(const MetricReport& report) {
  json j;
  j["zr_threshold"] = report.zr_threshold;
  j["acc_fraction"] = report.acc_fraction;
  j["overall"] = values_to_json(report.overall);
  json steps = json::array();
  for (const MetricValues& v : report.per_step) steps.push_back(values_to_json(v));
  j["per_step"] = std::move(steps);
  return j.dump(1);
}

void write_metric_report_json(const std::string& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path);
  out << metric_report_to_json(report) << "\n";
}

void write_metric_report_csv(const std::string& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path);
  out.precision(17);
  out << "step,mae,mape,rmse,mpiw,picp,zr,acc_hr\n";
  for (std::size_t s = 0; s < report.per_step.size(); ++s) {
    const MetricValues& v = report.per_step[s];
    out << (s + 1) << "," << v.mae << "," << opt_str(v.mape) << "," << v.rmse << "," << v.mpiw
        << "," << v.picp << "," << v.zr << "," << opt_str(v.acc_hr) << "\n";
  }
  const MetricValues& v = report.overall;
  out << "overall," << v.mae << "," << opt_str(v.mape) << "," << v.rmse << "," << v.mpiw << ","
      << v.picp << "," << v.zr << "," << opt_str(v.acc_hr) << "\n";
}

}  // namespace stzitd
