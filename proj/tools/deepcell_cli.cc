// Command-line front end: simulate data, run the offline stages, evaluate,
// sweep parameters and answer location queries.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deepcell/dataset_io.h"
#include "deepcell/errors.h"
#include "deepcell/estimator.h"
#include "deepcell/model.h"
#include "deepcell/pipeline.h"
#include "deepcell/random.h"
#include "deepcell/simulator.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace deepcell;

namespace {

constexpr char kRecordsFile[] = "records.jsonl";
constexpr char kFixesFile[] = "fixes.jsonl";
constexpr char kGroundTruthFile[] = "ground_truth.jsonl";

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string data;
};

PipelineConfig load_pipeline_config(const CommonOptions& common) {
  PipelineConfig cfg;
  if (!common.config.empty()) cfg = load_config_file(common.config);
  if (common.seed) cfg.seed = *common.seed;
  return cfg;
}

SimConfig sim_config(const CommonOptions& common, std::int64_t jitter_ms) {
  SimConfig sim;
  if (common.seed) sim.seed = *common.seed;
  sim.jitter_ms = jitter_ms;
  return sim;
}

// Reads --data, or simulates a default world when no directory is given.
Dataset load_dataset(const CommonOptions& common) {
  if (common.data.empty()) return dataset_from(generate(sim_config(common, 0)));
  const fs::path dir(common.data);
  return {read_records_file((dir / kRecordsFile).string()),
          read_fixes_file((dir / kFixesFile).string())};
}

GroundTruth load_ground_truth(const CommonOptions& common) {
  if (common.data.empty()) return generate(sim_config(common, 0)).ground_truth;
  return read_ground_truth_file((fs::path(common.data) / kGroundTruthFile).string());
}

fs::path out_path(const CommonOptions& common, const std::string& name) {
  fs::create_directories(common.out);
  return fs::path(common.out) / name;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void add_common(CLI::App* cmd, CommonOptions& common, bool with_data) {
  cmd->add_option("--config", common.config, "key = value configuration file");
  cmd->add_option("--seed", common.seed, "seed for simulation and training");
  cmd->add_option("--out", common.out, "output directory");
  if (with_data) {
    cmd->add_option("--data", common.data,
                    "directory with records.jsonl and fixes.jsonl "
                    "(simulated when omitted)");
  }
}

nlohmann::ordered_json summary_stats(const ErrorSummary& s) {
  return {{"min", s.min},       {"p25", s.p25}, {"median", s.median},
          {"p75", s.p75},       {"max", s.max},
          {"count", s.sorted_errors.size()}};
}

void write_cdf_file(const fs::path& path, const ErrorSummary& s) {
  std::ofstream out(path);
  write_cdf(out, s);
}

int run_simulate(const CommonOptions& common, std::int64_t jitter_ms) {
  const SimOutput sim = generate(sim_config(common, jitter_ms));
  write_records_file(out_path(common, kRecordsFile).string(), sim.records);
  write_fixes_file(out_path(common, kFixesFile).string(), sim.fixes);
  write_ground_truth_file(out_path(common, kGroundTruthFile).string(),
                          sim.ground_truth);
  std::printf("wrote %zu records, %zu fixes to %s\n", sim.records.size(),
              sim.fixes.size(), common.out.c_str());
  return 0;
}

int run_sync(const CommonOptions& common, std::optional<std::int64_t> psi_ms) {
  PipelineConfig cfg = load_pipeline_config(common);
  if (psi_ms) cfg.psi_ms = *psi_ms;
  const Dataset data = load_dataset(common);
  const GeoPoint origin = centroid_origin(data.fixes);
  const TowerRegistry registry = TowerRegistry::from_records(data.records);
  SyncConfig sync_cfg;
  sync_cfg.psi_ms = cfg.psi_ms;
  const SyncResult r =
      synchronize(data.records, data.fixes, sync_cfg, origin, registry);
  write_samples_file(out_path(common, "sparse_samples.jsonl").string(),
                     {registry.ids(), origin, r.samples});
  std::ofstream(out_path(common, "sync_report.json")) << r.report.to_json() << '\n';
  std::cout << r.report.to_json() << '\n';
  return 0;
}

int run_augment(const CommonOptions& common) {
  const PipelineConfig cfg = load_pipeline_config(common);
  const Dataset data = load_dataset(common);
  const GeoPoint origin = centroid_origin(data.fixes);
  const TowerRegistry registry = TowerRegistry::from_records(data.records);
  SyncConfig sync_cfg;
  sync_cfg.psi_ms = cfg.psi_ms;
  const SyncResult synced =
      synchronize(data.records, data.fixes, sync_cfg, origin, registry);
  AugmentConfig aug = cfg.augment;
  aug.n_augmented = cfg.n_augmented;
  aug.seed = derive_seed(cfg.seed, 0xA06);
  const auto traces = fix_traces(data.fixes, origin);
  const AugmentResult r = augment(synced.samples, traces, aug, cfg.gp, registry);
  write_samples_file(out_path(common, "dense_samples.jsonl").string(),
                     {registry.ids(), origin, r.samples});
  std::printf("sparse %zu, synthesized %zu, warnings %zu\n",
              synced.samples.size(), r.synthesized, r.warnings);
  return 0;
}

int run_train(const CommonOptions& common) {
  const PipelineConfig cfg = load_pipeline_config(common);
  const Dataset data = load_dataset(common);
  const auto idx = all_indices(data.records.size());
  const OfflineModel offline = build_offline_model(data, idx, cfg);
  save_model(offline.model, out_path(common, "model.txt").string());
  std::ofstream loss(out_path(common, "training_loss.tsv"));
  loss << "epoch\tloss\n";
  for (std::size_t e = 0; e < offline.trace.epoch_loss.size(); ++e) {
    loss << e + 1 << '\t' << offline.trace.epoch_loss[e] << '\n';
  }
  std::printf("trained on %zu samples (%zu synchronized), %zu cells, final loss %.4f\n",
              offline.dense.size(), offline.sparse.size(),
              offline.model.grid().cell_count(), offline.trace.final_loss);
  return 0;
}

int run_evaluate(const CommonOptions& common) {
  const PipelineConfig cfg = load_pipeline_config(common);
  const Dataset data = load_dataset(common);
  const GroundTruth truth = load_ground_truth(common);
  const PipelineResult r = run_pipeline(data, truth, cfg);
  nlohmann::ordered_json j;
  j["fingerprint_model"] = to_string(cfg.fingerprint_model);
  j["test_records"] = r.test_records;
  j["sparse_samples"] = r.sparse_samples;
  j["dense_samples"] = r.dense_samples;
  j["final_loss"] = r.trace.final_loss;
  j["deepcell"] = summary_stats(r.deepcell);
  j["deepcell_cell"] = summary_stats(r.deepcell_cell);
  j["serving_cell"] = summary_stats(r.serving_cell);
  j["knn"] = summary_stats(r.knn);
  std::ofstream(out_path(common, "summary.json")) << j.dump(2) << '\n';
  write_cdf_file(out_path(common, "cdf_deepcell.txt"), r.deepcell);
  write_cdf_file(out_path(common, "cdf_serving_cell.txt"), r.serving_cell);
  write_cdf_file(out_path(common, "cdf_knn.txt"), r.knn);
  save_model(r.model, out_path(common, "model.txt").string());
  std::printf("median error: deepcell %.1f m, serving cell %.1f m, knn %.1f m\n",
              r.deepcell.median, r.serving_cell.median, r.knn.median);
  return 0;
}

int run_sweep_cmd(const CommonOptions& common, const std::string& param,
                  const std::vector<std::string>& values, bool extrapolate) {
  const PipelineConfig cfg = load_pipeline_config(common);
  SweepSpec spec;
  spec.parameter = parse_sweep_parameter(param);
  spec.values = values;
  spec.allow_extrapolation = extrapolate;
  validate(spec);
  const Dataset data = load_dataset(common);
  const GroundTruth truth = load_ground_truth(common);
  const auto points = run_sweep(spec, data, truth, cfg, common.out);
  for (const auto& p : points) {
    std::printf("%s = %s: median %.1f m (serving cell %.1f, knn %.1f)\n",
                to_string(spec.parameter).c_str(), p.value.c_str(),
                p.deepcell.median, p.serving_cell.median, p.knn.median);
  }
  return 0;
}

int run_locate(const std::string& model_path, const std::string& records_path,
               const std::string& phone_id, std::size_t top_n) {
  const NetworkModel net = load_model(model_path);
  const RecordStore store(read_records_file(records_path));
  EstimatorOptions options;
  options.top_n = top_n;
  const LocationEstimate est =
      estimate_location(net, store.fetch_by_phone_id(phone_id), options);
  std::cout << render_estimate(phone_id, est, net.origin()) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cellular fingerprint localization toolkit"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset");
  add_common(simulate, common, false);
  std::int64_t jitter_ms = 0;
  simulate->add_option("--jitter-ms", jitter_ms,
                       "uniform timestamp jitter on provider records");

  auto* sync = app.add_subcommand("sync", "label provider records with GPS fixes");
  add_common(sync, common, true);
  std::optional<std::int64_t> psi_ms;
  sync->add_option("--psi-ms", psi_ms, "matching tolerance in milliseconds");

  auto* aug = app.add_subcommand("augment", "synthesize samples along GPS traces");
  add_common(aug, common, true);

  auto* train_cmd = app.add_subcommand("train", "train a model on all records");
  add_common(train_cmd, common, true);

  auto* evaluate = app.add_subcommand(
      "evaluate", "train on a split and score DeepCell and the baselines");
  add_common(evaluate, common, true);

  auto* sweep = app.add_subcommand("sweep", "evaluate over parameter values");
  add_common(sweep, common, true);
  std::string param;
  std::vector<std::string> values;
  bool extrapolate = false;
  sweep->add_option("--param", param, "parameter to vary")->required();
  sweep->add_option("--values", values, "comma separated values")
      ->required()
      ->delimiter(',');
  sweep->add_flag("--allow-extrapolation", extrapolate,
                  "accept values outside the studied ranges");

  auto* locate = app.add_subcommand("locate", "estimate a phone's location");
  std::string model_path;
  std::string records_path;
  std::string phone_id;
  std::size_t top_n = 0;
  locate->add_option("--model", model_path, "trained model file")->required();
  locate->add_option("--records", records_path, "provider records file")->required();
  locate->add_option("--phone-id", phone_id, "phone to locate")->required();
  locate->add_option("--top-n", top_n, "fuse only the n most probable cells");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(common, jitter_ms);
    if (*sync) return run_sync(common, psi_ms);
    if (*aug) return run_augment(common);
    if (*train_cmd) return run_train(common);
    if (*evaluate) return run_evaluate(common);
    if (*sweep) return run_sweep_cmd(common, param, values, extrapolate);
    if (*locate) return run_locate(model_path, records_path, phone_id, top_n);
  } catch (const NotFound& e) {
    std::cerr << "not found: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
