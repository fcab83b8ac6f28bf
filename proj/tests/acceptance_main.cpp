// Acceptance suite: one line per criterion, exit code = number of failures.
//
// Criteria and tolerances are fixed here; the synthetic run is fully pinned
// by (generator config, seed) and is byte-reproducible.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "stzitd/distcheck.hpp"
#include "stzitd/loss.hpp"
#include "stzitd/metrics.hpp"
#include "stzitd/pipeline.hpp"
#include "stzitd/rng.hpp"

using namespace stzitd;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  if (!pass) ++failures;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const auto start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// --- criterion 1: series vs mixture oracle on the full grid, < 10 s --------
void criterion_distribution_oracle() {
  const double t0 = now_seconds();
  const CheckResult r = check_series_oracle_equivalence(1e-6);
  const double dt = now_seconds() - t0;
  report("distribution oracle equivalence", r.pass && dt < 10.0,
         r.detail + ", runtime " + fmt(dt) + " s");
}

// --- criterion 2: normalization over 12 settings ---------------------------
void criterion_normalization() {
  const CheckResult r = check_normalization(1e-3);
  report("normalization", r.pass, r.detail);
}

// --- criterion 3: Monte Carlo moments --------------------------------------
void criterion_monte_carlo_moments() {
  const CheckResult r = check_monte_carlo_moments(100000);
  report("monte carlo moments", r.pass, r.detail);
}

// --- criterion 4: positive-branch lower bound + anchor ----------------------
void criterion_lower_bound() {
  const CheckResult r = check_lower_bound(1e-9);
  report("lower-bound property", r.pass, r.detail);
}

// --- criterion 5: gradient check through the full model ---------------------
void criterion_grad_check() {
  const double t0 = now_seconds();
  const std::size_t n = 8, d = 3, t = 5, p = 2;
  ModelConfig mc;
  mc.feature_dim = d;
  mc.history = t;
  mc.horizon = p;
  mc.encoder.temporal_dim = 6;
  mc.encoder.spatial_dim = 6;
  mc.encoder.heads = 2;
  ModelState model = ModelState::init(mc, 20240);
  const RoadGraph graph =
      build_graph(n, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {0, 7}, {2, 6}});

  Rng rng(20241);
  WindowTensors w;
  for (std::size_t s = 0; s < t; ++s) {
    SlotInput slot{Tensor{{n, d}}, Tensor{{n, 1}}};
    for (std::size_t i = 0; i < slot.x.numel(); ++i) slot.x[i] = rng.normal();
    for (std::size_t i = 0; i < n; ++i)
      slot.y.at(i, 0) = rng.uniform() < 0.7 ? 0.0 : 1.0 + 2.0 * rng.uniform();
    w.slots.push_back(std::move(slot));
  }
  w.targets = Tensor{{n, p}};
  for (std::size_t i = 0; i < w.targets.numel(); ++i)
    w.targets[i] = rng.uniform() < 0.7 ? 0.0 : 1.0 + 2.0 * rng.uniform();

  LossConfig cfg;  // default eta > 0 exercises the L2 path as well
  auto eval = [&](bool with_grad) {
    Tape tape;
    ParamBinding bind(tape);
    const ZitdHeads heads = model_forward(tape, bind, model, w, graph);
    ValueId loss = zitd_nll_op(tape, heads, w.targets, cfg, nullptr);
    const auto ids = bind.bound_ids();
    loss = add_l2_penalty(tape, loss, ids, cfg.eta);
    if (with_grad) {
      tape.backward(loss);
      bind.pull_grads();
    }
    return tape.value(loss).scalar_value();
  };
  const auto params = model.parameters();
  const GradCheckReport r = grad_check(eval, params, 1e-5, 1e-4);
  const double dt = now_seconds() - t0;
  report("gradient correctness", r.pass(1e-4) && dt < 30.0,
         "max relative error " + fmt(r.max_rel_err) + " over " +
             std::to_string(r.entries_checked) + " entries (worst " + r.worst.param + "[" +
             std::to_string(r.worst.index) + "]), runtime " + fmt(dt) + " s");
}

// --- criterion 6: structural invariants -------------------------------------
void criterion_structural() {
  bool pass = true;
  std::string detail;

  // Decoder ranges over 1e4 random forwards.
  {
    const std::size_t n = 10, fp = 6, p = 4;
    const EpsilonConfig eps;
    Rng rng(555);
    bool ranges_ok = true;
    for (int rep = 0; rep < 250 && ranges_ok; ++rep) {
      ModelConfig mc;
      mc.feature_dim = 2;
      mc.history = 1;
      mc.horizon = p;
      mc.encoder.spatial_dim = fp;
      ModelState model = ModelState::init(mc, 7000 + rep);
      Tensor z{{n, fp}};
      for (std::size_t i = 0; i < z.numel(); ++i) z[i] = 3.0 * rng.normal();
      Tape tape;
      ParamBinding bind(tape);
      const ZitdField f = field_from_heads(tape, decode(tape, tape.input(z), bind, model.dec, eps));
      for (std::size_t i = 0; i < f.pi.numel(); ++i) {
        if (!(f.pi[i] > 0.0 && f.pi[i] < 1.0 && f.mu[i] >= 0.0 && f.phi[i] >= eps.epsilon &&
              f.rho[i] > 1.0 && f.rho[i] < 2.0 + 2 * eps.epsilon))
          ranges_ok = false;
      }
    }
    pass = pass && ranges_ok;
    detail += std::string("decoder ranges on 1e4 cells ") + (ranges_ok ? "hold" : "violated");
  }

  // Attention rows sum to 1 within 1e-6.
  {
    const std::size_t n = 12;
    const RoadGraph graph = build_graph(
        n, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {7, 8}, {9, 10}, {0, 11}});
    ModelConfig mc;
    mc.feature_dim = 2;
    mc.history = 1;
    mc.encoder.temporal_dim = 5;
    mc.encoder.spatial_dim = 5;
    mc.encoder.heads = 3;
    ModelState model = ModelState::init(mc, 901);
    Rng rng(902);
    Tensor z{{n, 5}};
    for (std::size_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
    Tape tape;
    ParamBinding bind(tape);
    const Tensor mask = attention_mask(graph);
    double worst = 0.0;
    for (GatHeadWeights& head : model.enc.gat1.heads) {
      const Tensor& a = tape.value(gat_attention(tape, tape.input(z), mask, bind, head, 0.2));
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += a.at(i, j);
        worst = std::max(worst, std::abs(row - 1.0));
      }
    }
    pass = pass && worst < 1e-6;
    detail += ", attention row-sum gap " + fmt(worst);
  }

  // Permutation equivariance of encode.
  {
    const std::size_t n = 9, d = 3, t = 3;
    ModelConfig mc;
    mc.feature_dim = d;
    mc.history = t;
    mc.horizon = 2;
    mc.encoder.temporal_dim = 5;
    mc.encoder.spatial_dim = 4;
    mc.encoder.heads = 2;
    ModelState model = ModelState::init(mc, 903);
    const RoadGraph graph =
        build_graph(n, {{0, 1}, {1, 2}, {2, 3}, {4, 5}, {5, 6}, {6, 7}, {7, 8}, {0, 8}});
    Rng rng(904);
    std::vector<SlotInput> window;
    for (std::size_t s = 0; s < t; ++s) {
      SlotInput slot{Tensor{{n, d}}, Tensor{{n, 1}}};
      for (std::size_t i = 0; i < slot.x.numel(); ++i) slot.x[i] = rng.normal();
      for (std::size_t i = 0; i < n; ++i) slot.y.at(i, 0) = rng.uniform() < 0.6 ? 0.0 : rng.uniform();
      window.push_back(std::move(slot));
    }
    const std::vector<std::size_t> perm{4, 7, 1, 8, 0, 3, 6, 2, 5};
    std::vector<std::size_t> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;
    std::vector<SlotInput> permuted = window;
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) permuted[s].x.at(i, k) = window[s].x.at(perm[i], k);
        permuted[s].y.at(i, 0) = window[s].y.at(perm[i], 0);
      }
    std::vector<std::pair<std::size_t, std::size_t>> pedges;
    for (auto [a, b] : graph.edges) pedges.emplace_back(inv[a], inv[b]);
    const RoadGraph pgraph = build_graph(n, pedges);

    Tape t1, t2;
    ParamBinding b1(t1), b2(t2);
    const Tensor& z1 = t1.value(encode(t1, window, graph, b1, model.enc, mc.encoder));
    const Tensor& z2 = t2.value(encode(t2, permuted, pgraph, b2, model.enc, mc.encoder));
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < z1.cols(); ++k)
        worst = std::max(worst, std::abs(z2.at(i, k) - z1.at(perm[i], k)));
    pass = pass && worst < 1e-9;
    detail += ", permutation-equivariance gap " + fmt(worst);
  }

  report("structural invariants", pass, detail);
}

// --- criteria 7 & 9: synthetic end-to-end and determinism -------------------
struct EndToEndOutcome {
  MetricReport report;
  double ha_mae = 0.0;
  std::string loss_history_csv;
  std::string metrics_json;
  double zero_fraction = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

EndToEndOutcome run_end_to_end() {
  SynthConfig scfg;  // defaults: 30 roads x 90 days, ~96% zeros
  scfg.seed = 3;
  const SynthDataset s = synth_generate(scfg);
  Dataset data = make_dataset(s.graph, s.features, s.risk);

  ModelConfig mc;
  mc.feature_dim = s.features.dim;
  // The 8:2:2 split of 90 days leaves 15-slot validation and test blocks, so
  // the default t = p = 14 admits no windows there; t = p = 7 is the pinned
  // acceptance geometry.
  mc.history = 7;
  mc.horizon = 7;

  TrainConfig tc;  // lr 0.01, wd 0.01, 20 epochs, patience 10, clip 5
  tc.seed = scfg.seed;

  EndToEndOutcome out;
  out.zero_fraction = s.empirical_zero_fraction;
  TrainResult r = train_loop(data, mc, tc);
  out.best_epoch = r.best.epoch;
  out.epochs_run = r.history.size();

  std::ostringstream hist;
  hist.precision(17);
  for (const EpochRecord& e : r.history)
    hist << e.epoch << "," << e.train_loss << "," << e.validation_nll << "\n";
  out.loss_history_csv = hist.str();

  EvalOptions opt;
  opt.seed = scfg.seed;
  const EvalResult ev = evaluate_range(r.best.model, data, data.split.test, opt);
  out.report = ev.report;
  out.metrics_json = metric_report_to_json(ev.report);

  const Tensor ha = ha_baseline(data.risk, data.split.train, mc.horizon);
  Tensor ha_wide{{ha.rows(), ev.y_true.cols()}};
  for (std::size_t i = 0; i < ha.rows(); ++i)
    for (std::size_t c = 0; c < ev.y_true.cols(); ++c) ha_wide.at(i, c) = ha.at(i, c % mc.horizon);
  out.ha_mae = point_metrics(ev.y_true, ha_wide).mae;
  return out;
}

void criterion_end_to_end_and_determinism() {
  const double t0 = now_seconds();
  const EndToEndOutcome a = run_end_to_end();
  const double dt = now_seconds() - t0;

  const MetricValues& v = a.report.overall;
  const double acc = v.acc_hr ? *v.acc_hr : 0.0;
  const bool zeros_ok = a.zero_fraction > 0.93 && a.zero_fraction < 0.99;
  const bool pass = v.picp >= 0.85 && v.mae <= a.ha_mae && acc >= 0.40 && dt < 300.0 && zeros_ok;
  report("synthetic end-to-end", pass,
         "zero fraction " + fmt(a.zero_fraction) + ", best epoch " +
             std::to_string(a.best_epoch) + "/" + std::to_string(a.epochs_run) + ", PICP " +
             fmt(v.picp) + " (>= 0.85), MAE " + fmt(v.mae) + " vs HA " + fmt(a.ha_mae) +
             ", AccHR@20 " + fmt(acc) + " (>= 0.40), runtime " + fmt(dt) + " s (< 300)");

  const EndToEndOutcome b = run_end_to_end();
  const bool same_hist = a.loss_history_csv == b.loss_history_csv;
  const bool same_metrics = a.metrics_json == b.metrics_json;
  report("determinism", same_hist && same_metrics,
         std::string("loss histories ") + (same_hist ? "byte-identical" : "differ") +
             ", metric reports " + (same_metrics ? "byte-identical" : "differ"));
}

// --- criterion 8: metric unit anchors ---------------------------------------
void criterion_metric_anchors() {
  bool pass = true;
  std::string detail;

  const Tensor y = Tensor::from_rows({{0.0}, {2.0}});
  const Tensor yhat = Tensor::from_rows({{1.0}, {1.0}});
  const PointMetrics pm = point_metrics(y, yhat);
  const bool point_ok = pm.mae == 1.0 && pm.rmse == 1.0 && pm.mape && *pm.mape == 0.5;
  pass = pass && point_ok;
  detail += std::string("MAE/RMSE/MAPE on [0,2] vs [1,1] ") + (point_ok ? "exact" : "wrong");

  const Tensor yz = Tensor::from_rows({{0.0}, {0.0}, {1.0}});
  const Tensor p0 = Tensor::full({3, 1}, 0.9);
  const double zr = zero_rate(yz, p0, 0.5);
  const bool zr_ok = std::abs(zr - 2.0 / 3.0) < 1e-15;
  pass = pass && zr_ok;
  detail += std::string(", ZR=2/3 ") + (zr_ok ? "exact" : "wrong");

  Tensor yc = Tensor::zeros({5, 1});
  Tensor sc = Tensor::zeros({5, 1});
  for (std::size_t i = 0; i < 5; ++i) sc.at(i, 0) = 1.0 - 0.1 * static_cast<double>(i);
  yc.at(0, 0) = 2.0;
  const bool top_ok = *acc_hit_rate(yc, sc, 0.2) == 1.0;
  yc.at(0, 0) = 0.0;
  yc.at(4, 0) = 2.0;
  const bool bottom_ok = *acc_hit_rate(yc, sc, 0.2) == 0.0;
  pass = pass && top_ok && bottom_ok;
  detail += std::string(", AccHR top/bottom ") + (top_ok && bottom_ok ? "exact" : "wrong");

  report("metric unit anchors", pass, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_distribution_oracle();
  criterion_normalization();
  criterion_monte_carlo_moments();
  criterion_lower_bound();
  criterion_grad_check();
  criterion_structural();
  criterion_end_to_end_and_determinism();
  criterion_metric_anchors();
  std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
