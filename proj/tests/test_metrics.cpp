#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "stzitd/errors.hpp"
#include "stzitd/metrics.hpp"
#include "stzitd/rng.hpp"

using namespace stzitd;

TEST_CASE("point metrics: hand-computed anchor") {
  const Tensor y = Tensor::from_rows({{0.0}, {2.0}});
  const Tensor yhat = Tensor::from_rows({{1.0}, {1.0}});
  const PointMetrics m = point_metrics(y, yhat);
  CHECK(m.mae == doctest::Approx(1.0));
  CHECK(m.rmse == doctest::Approx(1.0));
  REQUIRE(m.mape.has_value());
  CHECK(*m.mape == doctest::Approx(0.5));  // only the y = 2 cell counts
}

TEST_CASE("point metrics: identity and constant offset") {
  Rng rng(3);
  Tensor y{{4, 5}};
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
  const PointMetrics ident = point_metrics(y, y);
  CHECK(ident.mae == 0.0);
  CHECK(ident.rmse == 0.0);
  if (ident.mape) CHECK(*ident.mape == 0.0);

  Tensor shifted{y.shape()};
  for (std::size_t i = 0; i < y.numel(); ++i) shifted[i] = y[i] + 0.3;
  const PointMetrics off = point_metrics(y, shifted);
  CHECK(off.mae == doctest::Approx(0.3));
  CHECK(off.rmse == doctest::Approx(0.3));
}

TEST_CASE("mape is undefined without positive truth cells") {
  const Tensor y = Tensor::zeros({2, 2});
  const Tensor yhat = Tensor::full({2, 2}, 0.1);
  CHECK_FALSE(point_metrics(y, yhat).mape.has_value());
}

TEST_CASE("rmse dominates mae") {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    Tensor y{{3, 4}}, yhat{{3, 4}};
    for (std::size_t i = 0; i < y.numel(); ++i) {
      y[i] = rng.uniform() < 0.6 ? 0.0 : 2.0 * rng.uniform();
      yhat[i] = rng.uniform();
    }
    const PointMetrics m = point_metrics(y, yhat);
    CHECK(m.rmse >= m.mae - 1e-12);
  }
}

TEST_CASE("interval metrics anchors") {
  SUBCASE("degenerate zero intervals covering zero truth") {
    const Tensor y = Tensor::zeros({2, 3});
    const Tensor zero = Tensor::zeros({2, 3});
    const IntervalMetrics m = interval_metrics(y, zero, zero);
    CHECK(m.mpiw == 0.0);
    CHECK(m.picp == 1.0);  // inclusive bounds
  }
  SUBCASE("unit intervals containing the truth") {
    const Tensor y = Tensor::full({2, 3}, 0.5);
    const IntervalMetrics m = interval_metrics(y, Tensor::zeros({2, 3}), Tensor::full({2, 3}, 1.0));
    CHECK(m.mpiw == doctest::Approx(1.0));
    CHECK(m.picp == 1.0);
  }
  SUBCASE("truth outside every interval") {
    const Tensor y = Tensor::full({2, 3}, 5.0);
    const IntervalMetrics m = interval_metrics(y, Tensor::zeros({2, 3}), Tensor::full({2, 3}, 1.0));
    CHECK(m.picp == 0.0);
  }
}

TEST_CASE("picp invariant under widening; mpiw grows by exactly delta") {
  Rng rng(8);
  Tensor y{{4, 4}}, lo{{4, 4}}, hi{{4, 4}};
  for (std::size_t i = 0; i < y.numel(); ++i) {
    y[i] = rng.uniform();
    lo[i] = 0.25 * rng.uniform();
    hi[i] = lo[i] + rng.uniform();
  }
  const IntervalMetrics base = interval_metrics(y, lo, hi);
  Tensor lo2{lo.shape()}, hi2{hi.shape()};
  const double delta = 0.37;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    lo2[i] = lo[i] - delta / 2;
    hi2[i] = hi[i] + delta / 2;
  }
  const IntervalMetrics wide = interval_metrics(y, lo2, hi2);
  CHECK(wide.picp >= base.picp);
  CHECK(wide.mpiw == doctest::Approx(base.mpiw + delta));
}

TEST_CASE("zero rate anchor: matched zeros over all cells") {
  const Tensor y = Tensor::from_rows({{0.0}, {0.0}, {1.0}});
  const Tensor p0 = Tensor::full({3, 1}, 0.9);  // predicted zero everywhere
  CHECK(zero_rate(y, p0) == doctest::Approx(2.0 / 3.0));

  const Tensor none = Tensor::from_rows({{1.0}, {2.0}});
  CHECK(zero_rate(none, Tensor::full({2, 1}, 0.9)) == 0.0);

  CHECK_THROWS_AS(zero_rate(y, p0, 0.0), ContractError);
  CHECK_THROWS_AS(zero_rate(y, p0, 1.0), ContractError);
}

TEST_CASE("zero rate on 96% zeros with perfect prediction") {
  Rng rng(11);
  Tensor y{{25, 4}}, p0{{25, 4}};
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    y[i] = i % 25 == 0 ? 1.0 : 0.0;  // exactly 96 of 100 cells zero
    if (y[i] == 0.0) ++zeros;
    p0[i] = y[i] == 0.0 ? 0.99 : 0.01;
  }
  REQUIRE(zeros == 96);
  CHECK(zero_rate(y, p0) == doctest::Approx(0.96));
}

TEST_CASE("zero rate is monotone nonincreasing in the threshold") {
  Rng rng(13);
  Tensor y{{10, 5}}, p0{{10, 5}};
  for (std::size_t i = 0; i < y.numel(); ++i) {
    y[i] = rng.uniform() < 0.8 ? 0.0 : 1.0;
    p0[i] = rng.uniform();
  }
  double prev = 1.1;
  for (double th : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double zr = zero_rate(y, p0, th);
    CHECK(zr <= prev);
    prev = zr;
  }
}

TEST_CASE("accuracy hit rate anchors on 5 roads") {
  // One crash on the top-ranked road; a = 0.2 keeps the single best road.
  Tensor y = Tensor::zeros({5, 1});
  Tensor yhat = Tensor::zeros({5, 1});
  for (std::size_t i = 0; i < 5; ++i) yhat.at(i, 0) = 1.0 - 0.1 * static_cast<double>(i);
  y.at(0, 0) = 2.0;
  CHECK(*acc_hit_rate(y, yhat, 0.2) == doctest::Approx(1.0));

  // Crash only on the bottom-ranked road.
  y.at(0, 0) = 0.0;
  y.at(4, 0) = 2.0;
  CHECK(*acc_hit_rate(y, yhat, 0.2) == doctest::Approx(0.0));

  // Full coverage captures everything.
  CHECK(*acc_hit_rate(y, yhat, 1.0) == doctest::Approx(1.0));

  // No crashes anywhere: undefined.
  CHECK_FALSE(acc_hit_rate(Tensor::zeros({5, 1}), yhat, 0.2).has_value());
}

TEST_CASE("hit rate averages only over columns containing crashes") {
  Tensor y = Tensor::zeros({5, 3});
  Tensor yhat = Tensor::zeros({5, 3});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) yhat.at(i, j) = 5.0 - static_cast<double>(i);
  y.at(0, 0) = 1.0;  // captured by the top-1 set
  y.at(4, 2) = 1.0;  // missed
  // Column 1 has no crashes and is excluded: mean of {1, 0}.
  CHECK(*acc_hit_rate(y, yhat, 0.2) == doctest::Approx(0.5));
}

TEST_CASE("hit rate is invariant under monotone transforms of the scores") {
  Rng rng(17);
  Tensor y{{8, 4}}, yhat{{8, 4}};
  for (std::size_t i = 0; i < y.numel(); ++i) {
    y[i] = rng.uniform() < 0.7 ? 0.0 : rng.uniform();
    yhat[i] = rng.uniform();
  }
  const auto base = acc_hit_rate(y, yhat, 0.25);
  Tensor warped{yhat.shape()};
  for (std::size_t i = 0; i < yhat.numel(); ++i) warped[i] = std::exp(3.0 * yhat[i]) + 7.0;
  CHECK(*acc_hit_rate(y, warped, 0.25) == doctest::Approx(*base));
}

TEST_CASE("ties in the ranking break by road index") {
  Tensor y = Tensor::zeros({4, 1});
  Tensor yhat = Tensor::full({4, 1}, 1.0);  // all tied
  y.at(0, 0) = 1.0;
  CHECK(*acc_hit_rate(y, yhat, 0.25) == doctest::Approx(1.0));  // road 0 wins the tie
  y.at(0, 0) = 0.0;
  y.at(3, 0) = 1.0;
  CHECK(*acc_hit_rate(y, yhat, 0.25) == doctest::Approx(0.0));
}

TEST_CASE("metric report aggregates, serializes, and prints per-step rows") {
  const std::size_t n = 6, p = 2, windows = 2;
  Rng rng(19);
  Tensor y{{n, p * windows}};
  PredictionSet pred{Tensor{{n, p * windows}}, Tensor{{n, p * windows}},
                     Tensor{{n, p * windows}}, Tensor{{n, p * windows}}};
  for (std::size_t i = 0; i < y.numel(); ++i) {
    y[i] = rng.uniform() < 0.75 ? 0.0 : 1.0 + rng.uniform();
    pred.y_hat[i] = 0.2 * rng.uniform();
    pred.lower[i] = 0.0;
    pred.upper[i] = rng.uniform() < 0.5 ? 0.0 : 2.0;
    pred.p_zero[i] = 0.5 + 0.5 * rng.uniform();
  }
  const MetricReport report = build_metric_report(y, pred, p);
  CHECK(report.per_step.size() == p);
  CHECK(report.overall.mae >= 0.0);

  const std::string json = metric_report_to_json(report);
  CHECK(json.find("\"overall\"") != std::string::npos);
  CHECK(json.find("\"per_step\"") != std::string::npos);

  const std::string path = "/tmp/stzitd_metrics_test.csv";
  write_metric_report_csv(path, report);
  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1 + p + 1);  // header + per-step + overall

  CHECK_THROWS_AS(build_metric_report(y, pred, 3), ContractError);
}
