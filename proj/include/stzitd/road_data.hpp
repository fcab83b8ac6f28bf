#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stzitd/tensor.hpp"
#include "stzitd/tweedie.hpp"

namespace stzitd {

// Undirected road connectivity. The adjacency matrix is symmetric with a
// zero diagonal; self-loops are a property of the attention neighbourhood,
// not of the graph, and are rejected on input.
struct RoadGraph {
  std::size_t n_roads = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // normalized i < j
  Tensor adjacency;                                        // n x n, binary

  std::vector<std::size_t> neighbors(std::size_t i) const;
};

struct CrashRecord {
  std::size_t road = 0;
  std::size_t time = 0;
  std::array<long, 3> counts{};  // minor, serious, fatal
};

// Severity weights used to turn crash counts into a risk score.
inline constexpr std::array<double, 3> kDefaultSeverityWeights{1.0, 2.0, 3.0};

// Per-road, per-slot features with the z-score statistics that were used to
// standardize them (fit on the training range only).
struct FeatureTensor {
  std::size_t n_roads = 0;
  std::size_t n_slots = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // road-major, then slot, then feature
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  bool standardized = false;

  double at(std::size_t road, std::size_t slot, std::size_t f) const {
    return values[(road * n_slots + slot) * dim + f];
  }
  double& at(std::size_t road, std::size_t slot, std::size_t f) {
    return values[(road * n_slots + slot) * dim + f];
  }
};

struct TimeRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t length() const { return end - begin; }
};

struct DatasetSplit {
  TimeRange train, validation, test;
};

struct Window {
  std::size_t input_begin = 0;  // input covers [input_begin, input_begin + history)
  std::size_t target_begin = 0;  // target covers [target_begin, target_begin + horizon)
};

// risk[i, t] = sum over records of severity-weighted counts for cell (i, t).
Tensor compute_risk_scores(const std::vector<CrashRecord>& records,
                           const std::array<double, 3>& weights, std::size_t n_roads,
                           std::size_t n_slots);

RoadGraph build_graph(std::size_t n_roads,
                      const std::vector<std::pair<std::size_t, std::size_t>>& edge_list);

// Contiguous 8:2:2 blocks: floor(8T/12), floor(2T/12), remainder.
DatasetSplit temporal_split(std::size_t n_slots);

// Stride-1 sliding windows fully inside `range`. Returns an empty list (with
// a warning on stderr) when the range is too short.
std::vector<Window> make_windows(const TimeRange& range, std::size_t history, std::size_t horizon);

// Fit standardization statistics on `fit_range` and apply them everywhere.
void standardize_features(FeatureTensor& features, const TimeRange& fit_range);

// ---- synthetic ground truth ----------------------------------------------

// Roads fall into two archetypes; a smooth seasonal signal modulates mu.
// Features expose exactly what generated the data: the road's base rate, the
// seasonal pair, and its degree.
struct SynthConfig {
  std::size_t n_roads = 30;
  std::size_t n_slots = 90;
  std::size_t feature_dim = 4;
  double edge_density = 0.12;  // probability of each extra chord beyond the ring
  double risky_fraction = 1.0 / 6.0;
  // Risky roads form a contiguous arc of the ring (dangerous corridors
  // cluster spatially); attention smoothing then reinforces rather than
  // dilutes their signal. Set false for scattered placement.
  bool risky_contiguous = true;
  double pi_safe = 0.997;
  double pi_risky = 0.75;
  double mu_safe = 1.0;
  double mu_risky = 3.0;
  double phi = 1.0;
  double rho = 1.5;
  double seasonal_amplitude = 0.5;
  double seasonal_period = 30.0;
  std::uint64_t seed = 1;
};

struct SynthDataset {
  RoadGraph graph;
  FeatureTensor features;  // raw (not standardized)
  Tensor risk;             // n_roads x n_slots
  std::vector<ZitdParams> true_params;  // road-major, then slot
  double empirical_zero_fraction = 0.0;

  const ZitdParams& true_at(std::size_t road, std::size_t slot) const {
    return true_params[road * risk.cols() + slot];
  }
};

SynthDataset synth_generate(const SynthConfig& cfg);

// ---- file formats ----------------------------------------------------------

// All files are CSV with a header row. Formats:
//   edges:    road_a,road_b
//   crashes:  road,time_slot,minor,serious,fatal
//   features: road,time_slot,f0..f{d-1}
//   risk:     road,time_slot,risk            (continuous labels, synthetic)
//   params:   road,time_slot,pi,mu,phi,rho   (synthetic ground truth)
// Dimensions are inferred from the largest indices present.
std::vector<std::pair<std::size_t, std::size_t>> load_edges_csv(const std::string& path);
std::vector<CrashRecord> load_crashes_csv(const std::string& path);
FeatureTensor load_features_csv(const std::string& path);
Tensor load_risk_csv(const std::string& path);

void write_edges_csv(const std::string& path, const RoadGraph& graph);
void write_features_csv(const std::string& path, const FeatureTensor& features);
void write_risk_csv(const std::string& path, const Tensor& risk);
void write_true_params_csv(const std::string& path, const SynthDataset& data);

}  // namespace stzitd
