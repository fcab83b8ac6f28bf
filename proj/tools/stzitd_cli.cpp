// Batch command-line front end: synthetic data generation, training,
// evaluation, forecasting, and the distribution self-check.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "stzitd/distcheck.hpp"
#include "stzitd/errors.hpp"
#include "stzitd/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stzitd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = ".";

  std::string edges_path;
  std::string features_path;
  std::string crashes_path;  // integer severity counts
  std::string risk_path;     // continuous labels; alternative to crashes
  std::string checkpoint_path;

  ModelConfig model;
  TrainConfig train;
  EvalOptions eval;
  SynthConfig synth;

  json resolved() const;
};

json RunConfig::resolved() const {
  json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["data"] = {{"edges", edges_path},
               {"features", features_path},
               {"crashes", crashes_path},
               {"risk", risk_path},
               {"checkpoint", checkpoint_path}};
  j["model"] = {{"history", model.history},
                {"horizon", model.horizon},
                {"temporal_dim", model.encoder.temporal_dim},
                {"spatial_dim", model.encoder.spatial_dim},
                {"heads", model.encoder.heads},
                {"leaky_slope", model.encoder.leaky_slope},
                {"dropout", model.encoder.dropout},
                {"epsilon", model.eps.epsilon}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"weight_decay", train.weight_decay},
                {"epochs", train.epochs},
                {"patience", train.patience},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"adam_stabilizer", train.adam_stabilizer},
                {"clip_norm", train.clip_norm},
                {"eta", train.loss.eta},
                {"paper_literal_zero_branch", train.loss.paper_literal_zero_branch}};
  j["eval"] = {{"lower_q", eval.lower_q},
               {"upper_q", eval.upper_q},
               {"interval_method",
                eval.interval_method == IntervalMethod::MonteCarlo ? "monte_carlo"
                                                                   : "cdf_bisection"},
               {"mc_samples", eval.mc_samples},
               {"zr_threshold", eval.zr_threshold},
               {"acc_fraction", eval.acc_fraction}};
  j["synth"] = {{"n_roads", synth.n_roads},
                {"n_slots", synth.n_slots},
                {"feature_dim", synth.feature_dim},
                {"edge_density", synth.edge_density},
                {"risky_fraction", synth.risky_fraction},
                {"pi_safe", synth.pi_safe},
                {"pi_risky", synth.pi_risky},
                {"mu_safe", synth.mu_safe},
                {"mu_risky", synth.mu_risky},
                {"phi", synth.phi},
                {"rho", synth.rho},
                {"seasonal_amplitude", synth.seasonal_amplitude},
                {"seasonal_period", synth.seasonal_period}};
  return j;
}

// Rejects keys that are not part of the schema so typos fail loudly.
void check_known_keys(const json& j, const json& schema, const std::string& prefix) {
  for (const auto& [key, value] : j.items()) {
    if (!schema.contains(key))
      throw ContractError("config: unknown key '" + prefix + key + "'");
    if (value.is_object()) {
      if (!schema.at(key).is_object())
        throw ContractError("config: key '" + prefix + key + "' should not be an object");
      check_known_keys(value, schema.at(key), prefix + key + ".");
    }
  }
}

template <typename T>
void take(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

void apply_file(RunConfig& cfg, const json& j) {
  check_known_keys(j, cfg.resolved(), "");
  take(j, "seed", cfg.seed);
  take(j, "output_dir", cfg.output_dir);
  if (j.contains("data")) {
    const json& d = j.at("data");
    take(d, "edges", cfg.edges_path);
    take(d, "features", cfg.features_path);
    take(d, "crashes", cfg.crashes_path);
    take(d, "risk", cfg.risk_path);
    take(d, "checkpoint", cfg.checkpoint_path);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    take(m, "history", cfg.model.history);
    take(m, "horizon", cfg.model.horizon);
    take(m, "temporal_dim", cfg.model.encoder.temporal_dim);
    take(m, "spatial_dim", cfg.model.encoder.spatial_dim);
    take(m, "heads", cfg.model.encoder.heads);
    take(m, "leaky_slope", cfg.model.encoder.leaky_slope);
    take(m, "dropout", cfg.model.encoder.dropout);
    take(m, "epsilon", cfg.model.eps.epsilon);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    take(t, "learning_rate", cfg.train.learning_rate);
    take(t, "weight_decay", cfg.train.weight_decay);
    take(t, "epochs", cfg.train.epochs);
    take(t, "patience", cfg.train.patience);
    take(t, "beta1", cfg.train.beta1);
    take(t, "beta2", cfg.train.beta2);
    take(t, "adam_stabilizer", cfg.train.adam_stabilizer);
    take(t, "clip_norm", cfg.train.clip_norm);
    take(t, "eta", cfg.train.loss.eta);
    take(t, "paper_literal_zero_branch", cfg.train.loss.paper_literal_zero_branch);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    take(e, "lower_q", cfg.eval.lower_q);
    take(e, "upper_q", cfg.eval.upper_q);
    take(e, "mc_samples", cfg.eval.mc_samples);
    take(e, "zr_threshold", cfg.eval.zr_threshold);
    take(e, "acc_fraction", cfg.eval.acc_fraction);
    if (e.contains("interval_method")) {
      const std::string m = e.at("interval_method").get<std::string>();
      if (m == "monte_carlo") cfg.eval.interval_method = IntervalMethod::MonteCarlo;
      else if (m == "cdf_bisection") cfg.eval.interval_method = IntervalMethod::CdfBisection;
      else throw ContractError("config: interval_method must be monte_carlo or cdf_bisection");
    }
  }
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    take(s, "n_roads", cfg.synth.n_roads);
    take(s, "n_slots", cfg.synth.n_slots);
    take(s, "feature_dim", cfg.synth.feature_dim);
    take(s, "edge_density", cfg.synth.edge_density);
    take(s, "risky_fraction", cfg.synth.risky_fraction);
    take(s, "pi_safe", cfg.synth.pi_safe);
    take(s, "pi_risky", cfg.synth.pi_risky);
    take(s, "mu_safe", cfg.synth.mu_safe);
    take(s, "mu_risky", cfg.synth.mu_risky);
    take(s, "phi", cfg.synth.phi);
    take(s, "rho", cfg.synth.rho);
    take(s, "seasonal_amplitude", cfg.synth.seasonal_amplitude);
    take(s, "seasonal_period", cfg.synth.seasonal_period);
  }
}

RunConfig load_config(const std::string& config_path) {
  RunConfig cfg;
  if (config_path.empty()) return cfg;
  std::ifstream in(config_path);
  if (!in) throw ContractError("config: cannot open " + config_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return cfg;  // empty file: defaults
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractError("config: " + config_path + " is not valid JSON: " + e.what());
  }
  apply_file(cfg, j);
  return cfg;
}

void emit_resolved_config(const RunConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.output_dir);
  json j = cfg.resolved();
  j["command"] = command;
  std::ofstream out(fs::path(cfg.output_dir) / "resolved_config.json");
  if (!out) throw IngestError("cannot write resolved_config.json to " + cfg.output_dir);
  out << j.dump(1) << "\n";
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.edges_path.empty() || cfg.features_path.empty())
    throw ContractError("config: data.edges and data.features are required");
  if (cfg.crashes_path.empty() == cfg.risk_path.empty())
    throw ContractError("config: exactly one of data.crashes or data.risk is required");

  const FeatureTensor features = load_features_csv(cfg.features_path);
  const RoadGraph graph = build_graph(features.n_roads, load_edges_csv(cfg.edges_path));
  Tensor risk;
  if (!cfg.crashes_path.empty()) {
    risk = compute_risk_scores(load_crashes_csv(cfg.crashes_path), kDefaultSeverityWeights,
                               features.n_roads, features.n_slots);
  } else {
    risk = load_risk_csv(cfg.risk_path);
    if (risk.rows() != features.n_roads || risk.cols() != features.n_slots)
      throw IngestError("risk file dimensions disagree with the features file");
  }
  return make_dataset(graph, features, risk);
}

int cmd_synth_gen(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.synth.seed = cfg.seed;
  const SynthDataset d = synth_generate(cfg.synth);
  fs::create_directories(cfg.output_dir);
  const fs::path out(cfg.output_dir);
  write_edges_csv((out / "edges.csv").string(), d.graph);
  write_features_csv((out / "features.csv").string(), d.features);
  write_risk_csv((out / "risk.csv").string(), d.risk);
  write_true_params_csv((out / "true_params.csv").string(), d);
  emit_resolved_config(cfg, "synth-gen");
  std::cout << "synth-gen: " << cfg.synth.n_roads << " roads x " << cfg.synth.n_slots
            << " slots, " << d.graph.edges.size() << " edges, empirical zero fraction "
            << d.empirical_zero_fraction << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  Dataset data = load_dataset(cfg);
  cfg.model.feature_dim = data.features.dim;
  cfg.train.seed = cfg.seed;

  TrainResult result = train_loop(data, cfg.model, cfg.train);
  for (const EpochRecord& r : result.history)
    std::cout << "epoch " << r.epoch << ": train " << r.train_loss << ", val "
              << r.validation_nll << "\n";
  if (result.early_stopped)
    std::cout << "early stop after epoch " << result.history.back().epoch << "\n";
  if (result.rho_clamp_events > 0)
    std::cout << "rho clamp activated " << result.rho_clamp_events << " times\n";
  if (result.aborted_non_finite)
    std::cout << "aborted on non-finite loss; kept last good checkpoint\n";

  fs::create_directories(cfg.output_dir);
  const fs::path out(cfg.output_dir);
  save_checkpoint((out / "checkpoint.json").string(), result.best.model, result.best.epoch,
                  result.best.validation_loss);
  write_loss_history_csv((out / "loss_history.csv").string(), result.history);
  emit_resolved_config(cfg, "train");
  std::cout << "best epoch " << result.best.epoch << " (val " << result.best.validation_loss
            << "); wrote " << (out / "checkpoint.json").string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  if (cfg.checkpoint_path.empty())
    throw ContractError("evaluate: data.checkpoint (or --checkpoint) is required");
  Dataset data = load_dataset(cfg);
  LoadedCheckpoint ckpt = load_checkpoint(cfg.checkpoint_path);
  cfg.eval.seed = cfg.seed;

  const EvalResult result = evaluate_range(ckpt.model, data, data.split.test, cfg.eval);
  fs::create_directories(cfg.output_dir);
  const fs::path out(cfg.output_dir);
  write_metric_report_json((out / "metrics.json").string(), result.report);
  write_metric_report_csv((out / "metrics.csv").string(), result.report);
  write_predictions_csv((out / "predictions.csv").string(), result.cells, true);
  emit_resolved_config(cfg, "evaluate");

  const MetricValues& v = result.report.overall;
  std::cout << "test block: MAE " << v.mae << ", MAPE "
            << (v.mape ? std::to_string(*v.mape) : std::string("undefined")) << ", RMSE "
            << v.rmse << "\n"
            << "MPIW " << v.mpiw << ", PICP " << v.picp << ", ZR " << v.zr << ", AccHR@"
            << static_cast<int>(cfg.eval.acc_fraction * 100) << " "
            << (v.acc_hr ? std::to_string(*v.acc_hr) : std::string("undefined")) << "\n";
  return kExitOk;
}

int cmd_predict(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  if (cfg.checkpoint_path.empty())
    throw ContractError("predict: data.checkpoint (or --checkpoint) is required");
  Dataset data = load_dataset(cfg);
  LoadedCheckpoint ckpt = load_checkpoint(cfg.checkpoint_path);
  cfg.eval.seed = cfg.seed;

  const auto cells = predict_future(ckpt.model, data, cfg.eval);
  fs::create_directories(cfg.output_dir);
  write_predictions_csv((fs::path(cfg.output_dir) / "predictions.csv").string(), cells, false);
  emit_resolved_config(cfg, "predict");
  std::cout << "predict: wrote " << cells.size() << " cells\n";
  return kExitOk;
}

int cmd_dist_check() {
  bool all_pass = true;
  for (const CheckResult& r : run_distribution_checks()) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << (all_pass ? "PASS" : "FAIL") << "\n";
  return all_pass ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-inflated Tweedie spatiotemporal graph forecaster"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag, edges_flag, features_flag, crashes_flag, risk_flag,
      checkpoint_flag;
  std::optional<std::size_t> epochs_flag, history_flag, horizon_flag;

  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_flag, "Global seed (overrides the config file)");
  app.add_option("--out", out_flag, "Output directory");
  app.add_option("--edges", edges_flag, "Edges CSV");
  app.add_option("--features", features_flag, "Features CSV");
  app.add_option("--crashes", crashes_flag, "Crash records CSV");
  app.add_option("--risk", risk_flag, "Continuous risk CSV");
  app.add_option("--checkpoint", checkpoint_flag, "Model checkpoint JSON");
  app.add_option("--epochs", epochs_flag, "Training epochs");
  app.add_option("--history", history_flag, "Input window length t");
  app.add_option("--horizon", horizon_flag, "Prediction steps p");

  auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic dataset");
  auto* train = app.add_subcommand("train", "Train a model");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test block");
  auto* predict = app.add_subcommand("predict", "Forecast beyond the end of the data");
  auto* dist = app.add_subcommand("dist-check", "Run the distribution self-checks");
  for (auto* sub : {synth, train, evaluate, predict, dist}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    if (out_flag) cfg.output_dir = *out_flag;
    if (edges_flag) cfg.edges_path = *edges_flag;
    if (features_flag) cfg.features_path = *features_flag;
    if (crashes_flag) cfg.crashes_path = *crashes_flag;
    if (risk_flag) cfg.risk_path = *risk_flag;
    if (checkpoint_flag) cfg.checkpoint_path = *checkpoint_flag;
    if (epochs_flag) cfg.train.epochs = *epochs_flag;
    if (history_flag) cfg.model.history = *history_flag;
    if (horizon_flag) cfg.model.horizon = *horizon_flag;

    if (synth->parsed()) return cmd_synth_gen(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (predict->parsed()) return cmd_predict(cfg);
    if (dist->parsed()) return cmd_dist_check();
    return kExitUsage;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IngestError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConvergenceError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
