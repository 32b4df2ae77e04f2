#ifndef DEEPCELL_PIPELINE_H_
#define DEEPCELL_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepcell/augmenter.h"
#include "deepcell/domain.h"
#include "deepcell/grid.h"
#include "deepcell/metrics.h"
#include "deepcell/model.h"
#include "deepcell/simulator.h"
#include "deepcell/synchronizer.h"

namespace deepcell {

enum class FingerprintModel {
  kRssOnly,
  kRssWithActiveCells,
  kSpatialAugmentation,
  kAll,
};

std::string to_string(FingerprintModel model);
// Accepts the display names ("RSS only", ...) or snake_case ("rss_only").
FingerprintModel parse_fingerprint_model(const std::string& text);
bool uses_active_bits(FingerprintModel model);
bool uses_augmentation(FingerprintModel model);

struct PipelineConfig {
  double grid_cell_length_m = 100.0;
  std::size_t n_augmented = 1000;
  int epochs = 500;
  double learning_rate = 1e-4;
  double tower_density_pct = 100.0;
  FingerprintModel fingerprint_model = FingerprintModel::kAll;

  std::int64_t psi_ms = SyncConfig::kDefaultPsiMs;
  double train_fraction = 0.7;
  std::uint64_t seed = 1;
  std::size_t knn_k = 4;
  std::size_t fusion_top_n = 0;

  // epochs, learning_rate and seed above override the copies in here.
  NetworkConfig network;
  GpHyperparams gp;
  AugmentConfig augment;
};

// Sets one key. Keys mirror the experiment parameter names
// (grid_cell_length_m, n_augmented, epochs, learning_rate, tower_density_pct,
// fingerprint_model) plus the secondary knobs; unknown keys throw.
void set_config_value(PipelineConfig& cfg, const std::string& key,
                      const std::string& value);
// Flat "key = value" lines; '#' starts a comment.
void apply_config(PipelineConfig& cfg, std::istream& in);
PipelineConfig load_config_file(const std::string& path);
std::string describe_config(const PipelineConfig& cfg);

// Everything the offline phase may see. Ground truth lives elsewhere.
struct Dataset {
  std::vector<ProviderRecord> records;
  std::vector<GpsFix> fixes;
};

using GroundTruth = std::vector<GroundTruthEntry>;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle of record indices; both halves come back sorted.
Split split_records(std::size_t n_records, double train_fraction,
                    std::uint64_t seed);

// GPS fixes grouped per phone into time-ordered polylines, broken at gaps
// longer than `max_gap_ms`.
std::vector<std::vector<PlanarPoint>> fix_traces(std::span<const GpsFix> fixes,
                                                 const GeoPoint& origin,
                                                 std::int64_t max_gap_ms = 10'000);

// Keeps round(pct% of the towers) (at least one), chosen by a seeded shuffle.
TowerRegistry mask_towers(const TowerRegistry& full, double density_pct,
                          std::uint64_t seed);

// Offline phase on the training records: synchronize, augment, grid, train.
struct OfflineModel {
  GeoPoint origin;
  SyncReport sync;
  std::vector<LabeledSample> sparse;
  std::vector<LabeledSample> dense;
  NetworkModel model;
  TrainingTrace trace;
};

OfflineModel build_offline_model(const Dataset& data,
                                 std::span<const std::size_t> train_records,
                                 const PipelineConfig& cfg);

// Cell-ID style comparator: mean training location of samples sharing the
// probe's strongest active tower, else the global training centroid.
std::vector<PlanarPoint> serving_cell_estimates(
    std::span<const FeatureVector> probes,
    std::span<const LabeledSample> training);

// Mean location of the k nearest training fingerprints (normalized space).
std::vector<PlanarPoint> knn_estimates(std::span<const FeatureVector> probes,
                                       std::span<const LabeledSample> training,
                                       std::size_t k,
                                       const NormalizationBounds& bounds);

ErrorSummary score(std::span<const PlanarPoint> estimates,
                   std::span<const PlanarPoint> truths);

struct PipelineResult {
  NetworkModel model;
  TrainingTrace trace;
  SyncReport sync;
  std::size_t sparse_samples = 0;
  std::size_t dense_samples = 0;
  std::size_t test_records = 0;
  ErrorSummary deepcell;       // probability-weighted location
  ErrorSummary deepcell_cell;  // centroid of the most probable cell
  ErrorSummary serving_cell;
  ErrorSummary knn;
};

// Split, offline phase on the training part, then score every test record
// against the ground truth.
PipelineResult run_pipeline(const Dataset& data, const GroundTruth& truth,
                            const PipelineConfig& cfg);

enum class SweepParameter {
  kGridCellLength,
  kNAugmented,
  kTowerDensity,
  kEpochs,
  kLearningRate,
  kFingerprintModel,
};

std::string to_string(SweepParameter parameter);
SweepParameter parse_sweep_parameter(const std::string& text);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::kGridCellLength;
  std::vector<std::string> values;
  // Values outside the studied ranges are rejected unless this is set.
  bool allow_extrapolation = false;
};

void validate(const SweepSpec& spec);

struct SweepPoint {
  std::string value;
  ErrorSummary deepcell;
  ErrorSummary deepcell_cell;
  ErrorSummary serving_cell;
  ErrorSummary knn;
};

// One pipeline run per value with everything else from `base`. When
// `out_dir` is given, writes sweep_<param>.tsv and one CDF file per value.
std::vector<SweepPoint> run_sweep(const SweepSpec& spec, const Dataset& data,
                                  const GroundTruth& truth,
                                  const PipelineConfig& base,
                                  const std::optional<std::string>& out_dir = {});

PipelineConfig with_sweep_value(const PipelineConfig& base,
                                SweepParameter parameter,
                                const std::string& value);

// Splits a simulator run into the training-visible dataset and ground truth.
Dataset dataset_from(const SimOutput& sim);

}  // namespace deepcell

#endif  // DEEPCELL_PIPELINE_H_
