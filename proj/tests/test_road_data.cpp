#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "stzitd/errors.hpp"
#include "stzitd/road_data.hpp"
#include "stzitd/tweedie.hpp"

using namespace stzitd;

TEST_CASE("risk scores from weighted severity counts") {
  std::vector<CrashRecord> records{
      {0, 0, {2, 0, 1}},  // 2*1 + 1*3 = 5
      {1, 2, {0, 1, 0}},  // 2
      {1, 2, {1, 0, 0}},  // accumulates to 3
  };
  const Tensor risk = compute_risk_scores(records, kDefaultSeverityWeights, 3, 4);
  CHECK(risk.at(0, 0) == 5.0);
  CHECK(risk.at(1, 2) == 3.0);
  CHECK(risk.at(2, 3) == 0.0);  // no records -> 0

  SUBCASE("ordering invariance") {
    std::reverse(records.begin(), records.end());
    const Tensor again = compute_risk_scores(records, kDefaultSeverityWeights, 3, 4);
    for (std::size_t i = 0; i < risk.numel(); ++i) CHECK(risk[i] == again[i]);
  }

  SUBCASE("out-of-range record names the cell") {
    records.push_back({7, 0, {1, 0, 0}});
    try {
      compute_risk_scores(records, kDefaultSeverityWeights, 3, 4);
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(std::string(e.what()).find("(7, 0)") != std::string::npos);
    }
  }
}

TEST_CASE("graph construction") {
  const RoadGraph g = build_graph(3, {{0, 1}});
  CHECK(g.adjacency.at(0, 1) == 1.0);
  CHECK(g.adjacency.at(1, 0) == 1.0);
  CHECK(g.adjacency.at(0, 0) == 0.0);
  CHECK(g.adjacency.at(2, 2) == 0.0);
  CHECK(g.neighbors(2).empty());  // isolated roads are allowed

  CHECK(build_graph(4, {}).edges.empty());
  CHECK_THROWS_AS(build_graph(3, {{0, 0}}), IngestError);
  CHECK_THROWS_AS(build_graph(3, {{0, 1}, {1, 0}}), IngestError);  // duplicate after normalization
  CHECK_THROWS_AS(build_graph(3, {{0, 5}}), IngestError);
}

TEST_CASE("temporal split ratios") {
  const DatasetSplit a = temporal_split(12);
  CHECK(a.train.length() == 8);
  CHECK(a.validation.length() == 2);
  CHECK(a.test.length() == 2);

  const DatasetSplit b = temporal_split(365);
  CHECK(b.train.length() == 243);
  CHECK(b.validation.length() == 60);
  CHECK(b.test.length() == 62);

  const DatasetSplit c = temporal_split(120);  // 12k scales linearly
  CHECK(c.train.length() == 80);
  CHECK(c.validation.length() == 20);
  CHECK(c.test.length() == 20);

  CHECK_THROWS_AS(temporal_split(11), ContractError);

  // Blocks are chronological, disjoint, and cover the axis.
  CHECK(b.train.end == b.validation.begin);
  CHECK(b.validation.end == b.test.begin);
  CHECK(b.test.end == 365);
}

TEST_CASE("window enumeration") {
  CHECK(make_windows({0, 10}, 3, 2).size() == 6);
  CHECK(make_windows({0, 5}, 3, 2).size() == 1);  // exactly one at the boundary
  CHECK(make_windows({0, 4}, 3, 2).empty());

  const auto ws = make_windows({100, 110}, 3, 2);
  CHECK(ws.front().input_begin == 100);
  CHECK(ws.front().target_begin == 103);
  CHECK(ws.back().input_begin == 105);
  CHECK(ws.back().target_begin == 108);
  // Never leaves the range.
  for (const Window& w : ws) CHECK(w.target_begin + 2 <= 110);
}

TEST_CASE("standardization fits on the training block only") {
  FeatureTensor f;
  f.n_roads = 2;
  f.n_slots = 6;
  f.dim = 1;
  f.values = {1, 1, 1, 9, 9, 9,   // road 0
              1, 1, 1, 9, 9, 9};  // road 1
  standardize_features(f, {0, 3});  // fit range sees only the 1s
  CHECK(f.feature_mean[0] == doctest::Approx(1.0));
  CHECK(f.feature_std[0] == 1.0);  // degenerate -> 1
  CHECK(f.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(f.at(0, 4, 0) == doctest::Approx(8.0));
  CHECK_THROWS_AS(standardize_features(f, {0, 3}), ContractError);
}

TEST_CASE("synthetic generation: determinism and zero fraction") {
  SynthConfig cfg;
  cfg.n_roads = 30;
  cfg.n_slots = 90;
  cfg.seed = 5;

  const SynthDataset a = synth_generate(cfg);
  const SynthDataset b = synth_generate(cfg);
  CHECK(a.risk.numel() == 30 * 90);
  for (std::size_t i = 0; i < a.risk.numel(); ++i) CHECK(a.risk[i] == b.risk[i]);
  CHECK(a.empirical_zero_fraction == b.empirical_zero_fraction);

  // Expected zero mass from the true parameter schedule.
  double expected = 0.0;
  for (std::size_t i = 0; i < cfg.n_roads; ++i)
    for (std::size_t t = 0; t < cfg.n_slots; ++t) expected += zitd_zero_mass(a.true_at(i, t));
  expected /= static_cast<double>(cfg.n_roads * cfg.n_slots);
  const double sigma =
      std::sqrt(expected * (1.0 - expected) / static_cast<double>(cfg.n_roads * cfg.n_slots));
  CHECK(std::abs(a.empirical_zero_fraction - expected) < 3.0 * sigma);
  CHECK(a.empirical_zero_fraction > 0.9);  // the default schedule is heavily zero-inflated
}

TEST_CASE("synthetic generation: uniform pi matches the closed-form zero mass") {
  SynthConfig cfg;
  cfg.n_roads = 30;
  cfg.n_slots = 90;
  cfg.pi_safe = 0.96;
  cfg.pi_risky = 0.96;  // uniform zero inflation
  cfg.mu_safe = 1.0;
  cfg.mu_risky = 1.0;
  cfg.seasonal_amplitude = 0.0;
  cfg.seed = 12;
  const SynthDataset d = synth_generate(cfg);
  const double lambda = compound_params(TweedieParams{1.0, cfg.phi, cfg.rho}).lambda;
  const double zm = 0.96 + 0.04 * std::exp(-lambda);
  const double sigma = std::sqrt(zm * (1.0 - zm) / (30.0 * 90.0));
  CHECK(std::abs(d.empirical_zero_fraction - zm) < 3.0 * sigma);
}

TEST_CASE("synthetic generation: pi = 1 gives an all-zero risk tensor") {
  SynthConfig cfg;
  cfg.n_roads = 10;
  cfg.n_slots = 20;
  cfg.pi_safe = 1.0;
  cfg.pi_risky = 1.0;
  const SynthDataset d = synth_generate(cfg);
  for (std::size_t i = 0; i < d.risk.numel(); ++i) CHECK(d.risk[i] == 0.0);
  CHECK(d.empirical_zero_fraction == 1.0);
}

TEST_CASE("csv round trips") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "stzitd_road_data_test";
  fs::create_directories(dir);

  SynthConfig cfg;
  cfg.n_roads = 8;
  cfg.n_slots = 15;
  cfg.seed = 9;
  const SynthDataset d = synth_generate(cfg);

  const std::string edges = (dir / "edges.csv").string();
  const std::string feats = (dir / "features.csv").string();
  const std::string risk = (dir / "risk.csv").string();
  write_edges_csv(edges, d.graph);
  write_features_csv(feats, d.features);
  write_risk_csv(risk, d.risk);

  const RoadGraph g2 = build_graph(cfg.n_roads, load_edges_csv(edges));
  for (std::size_t i = 0; i < d.graph.adjacency.numel(); ++i)
    CHECK(g2.adjacency[i] == d.graph.adjacency[i]);

  const FeatureTensor f2 = load_features_csv(feats);
  CHECK(f2.dim == d.features.dim);
  CHECK(f2.n_roads == d.features.n_roads);
  for (std::size_t i = 0; i < f2.values.size(); ++i)
    CHECK(f2.values[i] == doctest::Approx(d.features.values[i]).epsilon(1e-15));

  const Tensor r2 = load_risk_csv(risk);
  for (std::size_t i = 0; i < r2.numel(); ++i) CHECK(r2[i] == d.risk[i]);

  CHECK_THROWS_AS(load_edges_csv((dir / "missing.csv").string()), IngestError);
  fs::remove_all(dir);
}

TEST_CASE("crash csv parses counts") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "stzitd_crash_csv_test";
  fs::create_directories(dir);
  const std::string path = (dir / "crashes.csv").string();
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("road,time_slot,minor,serious,fatal\n0,0,2,0,1\n1,2,0,1,0\n", f);
    std::fclose(f);
  }
  const auto records = load_crashes_csv(path);
  REQUIRE(records.size() == 2);
  CHECK(records[0].counts[0] == 2);
  CHECK(records[0].counts[2] == 1);
  const Tensor risk = compute_risk_scores(records, kDefaultSeverityWeights, 2, 3);
  CHECK(risk.at(0, 0) == 5.0);
  CHECK(risk.at(1, 2) == 2.0);
  fs::remove_all(dir);
}
