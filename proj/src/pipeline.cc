#include "deepcell/pipeline.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "deepcell/errors.h"
#include "deepcell/estimator.h"
#include "deepcell/random.h"

namespace deepcell {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string normalize_token(std::string s) {
  s = trim(s);
  for (auto& c : s) {
    c = c == ' ' || c == '-' ? '_' : static_cast<char>(std::tolower(c));
  }
  return s;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': not a number: " + value);
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': not an integer: " + value);
  }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  const long long v = parse_int(key, value);
  if (v < 0) throw InvalidInput("config key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = normalize_token(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidInput("config key '" + key + "': not a boolean: " + value);
}

std::vector<std::size_t> parse_widths(const std::string& key,
                                      const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_count(key, trim(item)));
  }
  return out;
}

PlanarPoint mean_location(std::span<const LabeledSample> samples) {
  PlanarPoint c{0.0, 0.0};
  for (const auto& s : samples) {
    c.x += s.location.x;
    c.y += s.location.y;
  }
  const auto n = static_cast<double>(samples.size());
  return {c.x / n, c.y / n};
}

// Strongest active tower, else strongest heard; nullopt when silent.
std::optional<std::size_t> serving_tower(const FeatureVector& f) {
  std::optional<std::size_t> best;
  bool best_active = false;
  for (std::size_t j = 0; j < f.towers(); ++j) {
    if (!f.heard(j)) continue;
    const bool active = f.active_bits[j] != 0.0;
    if (!best || (active && !best_active) ||
        (active == best_active && f.rss[j] > f.rss[*best])) {
      best = j;
      best_active = active;
    }
  }
  return best;
}

Eigen::VectorXd normalized_features(const FeatureVector& f,
                                    const NormalizationBounds& b) {
  const std::size_t m = f.towers();
  const double span = b.rss_max_dbm - b.rss_min_dbm;
  Eigen::VectorXd x(static_cast<Eigen::Index>(2 * m));
  for (std::size_t j = 0; j < m; ++j) {
    x[static_cast<Eigen::Index>(j)] =
        f.heard(j) ? (f.rss[j] - b.rss_min_dbm) / span : 0.0;
    x[static_cast<Eigen::Index>(m + j)] = f.active_bits[j];
  }
  return x;
}

NetworkConfig network_config_for(const PipelineConfig& cfg) {
  NetworkConfig net = cfg.network;
  net.epochs = cfg.epochs;
  net.learning_rate = cfg.learning_rate;
  net.seed = derive_seed(cfg.seed, 0x7EA);
  net.use_active_bits = uses_active_bits(cfg.fingerprint_model);
  return net;
}

std::string file_token(const std::string& value) {
  std::string out;
  for (char c : value) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-'
               ? c
               : '_';
  }
  return out;
}

}  // namespace

std::string to_string(FingerprintModel model) {
  switch (model) {
    case FingerprintModel::kRssOnly:
      return "RSS only";
    case FingerprintModel::kRssWithActiveCells:
      return "RSS with active cells";
    case FingerprintModel::kSpatialAugmentation:
      return "Spatial augmentation";
    case FingerprintModel::kAll:
      return "All";
  }
  return "All";
}

FingerprintModel parse_fingerprint_model(const std::string& text) {
  const auto t = normalize_token(text);
  if (t == "rss_only") return FingerprintModel::kRssOnly;
  if (t == "rss_with_active_cells") return FingerprintModel::kRssWithActiveCells;
  if (t == "spatial_augmentation") return FingerprintModel::kSpatialAugmentation;
  if (t == "all") return FingerprintModel::kAll;
  throw InvalidInput("unknown fingerprint model: " + text);
}

bool uses_active_bits(FingerprintModel model) {
  return model == FingerprintModel::kRssWithActiveCells ||
         model == FingerprintModel::kAll;
}

bool uses_augmentation(FingerprintModel model) {
  return model == FingerprintModel::kSpatialAugmentation ||
         model == FingerprintModel::kAll;
}

void set_config_value(PipelineConfig& cfg, const std::string& raw_key,
                      const std::string& raw_value) {
  const std::string key = normalize_token(raw_key);
  const std::string value = trim(raw_value);
  if (key == "grid_cell_length_m") {
    cfg.grid_cell_length_m = parse_double(key, value);
  } else if (key == "n_augmented") {
    cfg.n_augmented = parse_count(key, value);
  } else if (key == "epochs") {
    cfg.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "learning_rate") {
    cfg.learning_rate = parse_double(key, value);
  } else if (key == "tower_density_pct") {
    cfg.tower_density_pct = parse_double(key, value);
  } else if (key == "fingerprint_model") {
    cfg.fingerprint_model = parse_fingerprint_model(value);
  } else if (key == "psi_ms") {
    cfg.psi_ms = parse_int(key, value);
  } else if (key == "train_fraction") {
    cfg.train_fraction = parse_double(key, value);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "knn_k") {
    cfg.knn_k = parse_count(key, value);
  } else if (key == "fusion_top_n") {
    cfg.fusion_top_n = parse_count(key, value);
  } else if (key == "hidden_layers") {
    cfg.network.hidden_layers = parse_widths(key, value);
  } else if (key == "dropout_rate") {
    cfg.network.dropout_rate = parse_double(key, value);
  } else if (key == "batch_size") {
    cfg.network.batch_size = parse_count(key, value);
  } else if (key == "optimizer") {
    const auto v = normalize_token(value);
    if (v == "sgd") {
      cfg.network.optimizer = Optimizer::kSgd;
    } else if (v == "adam") {
      cfg.network.optimizer = Optimizer::kAdam;
    } else {
      throw InvalidInput("unknown optimizer: " + value);
    }
  } else if (key == "rss_min_dbm") {
    cfg.network.normalization.rss_min_dbm = parse_double(key, value);
  } else if (key == "rss_max_dbm") {
    cfg.network.normalization.rss_max_dbm = parse_double(key, value);
  } else if (key == "prune_empty_cells") {
    cfg.network.prune_empty_cells = parse_bool(key, value);
  } else if (key == "gp_length_scale_m") {
    cfg.gp.length_scale_m = parse_double(key, value);
  } else if (key == "gp_noise_variance") {
    cfg.gp.noise_variance = parse_double(key, value);
  } else if (key == "gp_indicator_noise_variance") {
    cfg.gp.indicator_noise_variance = parse_double(key, value);
  } else if (key == "gp_prior_mean") {
    const auto v = normalize_token(value);
    if (v == "zero_centered") {
      cfg.gp.prior_mean = PriorMean::kZeroCentered;
    } else if (v == "constant_training_mean") {
      cfg.gp.prior_mean = PriorMean::kConstantTrainingMean;
    } else {
      throw InvalidInput("unknown gp_prior_mean: " + value);
    }
  } else if (key == "path_spacing_m") {
    cfg.augment.path_spacing_m = parse_double(key, value);
  } else if (key == "active_bit_threshold") {
    cfg.augment.active_bit_threshold = parse_double(key, value);
  } else if (key == "heard_rss_floor_dbm") {
    cfg.augment.heard_rss_floor_dbm = parse_double(key, value);
  } else if (key == "coverage_threshold") {
    cfg.augment.coverage_threshold = parse_double(key, value);
  } else if (key == "max_heard_towers") {
    cfg.augment.max_heard_towers = parse_count(key, value);
  } else {
    throw InvalidInput("unknown config key: " + raw_key);
  }
}

void apply_config(PipelineConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) eq = line.find(':');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(line_no) +
                         ": expected key = value");
    }
    set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open config " + path);
  PipelineConfig cfg;
  apply_config(cfg, in);
  return cfg;
}

std::string describe_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "grid_cell_length_m = " << cfg.grid_cell_length_m << '\n'
      << "n_augmented = " << cfg.n_augmented << '\n'
      << "epochs = " << cfg.epochs << '\n'
      << "learning_rate = " << cfg.learning_rate << '\n'
      << "tower_density_pct = " << cfg.tower_density_pct << '\n'
      << "fingerprint_model = " << to_string(cfg.fingerprint_model) << '\n'
      << "psi_ms = " << cfg.psi_ms << '\n'
      << "train_fraction = " << cfg.train_fraction << '\n'
      << "seed = " << cfg.seed << '\n'
      << "knn_k = " << cfg.knn_k << '\n'
      << "optimizer = "
      << (cfg.network.optimizer == Optimizer::kAdam ? "adam" : "sgd") << '\n'
      << "dropout_rate = " << cfg.network.dropout_rate << '\n'
      << "batch_size = " << cfg.network.batch_size << '\n';
  return out.str();
}

Split split_records(std::size_t n_records, double train_fraction,
                    std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("train fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(n_records);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5917));
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n_records)));
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  split.test.assign(order.begin() + static_cast<long>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::vector<PlanarPoint>> fix_traces(std::span<const GpsFix> fixes,
                                                 const GeoPoint& origin,
                                                 std::int64_t max_gap_ms) {
  std::map<std::string, std::vector<const GpsFix*>> by_phone;
  for (const auto& f : fixes) by_phone[f.phone_id].push_back(&f);
  std::vector<std::vector<PlanarPoint>> traces;
  for (auto& [phone, list] : by_phone) {
    std::stable_sort(list.begin(), list.end(), [](const GpsFix* a, const GpsFix* b) {
      return a->timestamp_ms < b->timestamp_ms;
    });
    std::vector<PlanarPoint> trace;
    std::int64_t last = 0;
    for (const GpsFix* f : list) {
      if (!trace.empty() && f->timestamp_ms - last > max_gap_ms) {
        traces.push_back(std::move(trace));
        trace.clear();
      }
      trace.push_back(project_to_local(f->position(), origin));
      last = f->timestamp_ms;
    }
    if (!trace.empty()) traces.push_back(std::move(trace));
  }
  return traces;
}

TowerRegistry mask_towers(const TowerRegistry& full, double density_pct,
                          std::uint64_t seed) {
  if (!(density_pct > 0.0 && density_pct <= 100.0)) {
    throw InvalidInput("tower density must be in (0, 100]");
  }
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(
             density_pct / 100.0 * static_cast<double>(full.size()))));
  if (keep >= full.size()) return full;
  std::vector<std::string> ids = full.ids();
  Rng rng(derive_seed(seed, 0xDE5));
  rng.shuffle(std::span<std::string>(ids));
  ids.resize(keep);
  std::sort(ids.begin(), ids.end());
  return TowerRegistry(std::move(ids));
}

OfflineModel build_offline_model(const Dataset& data,
                                 std::span<const std::size_t> train_records,
                                 const PipelineConfig& cfg) {
  if (train_records.empty()) throw InvalidInput("no training records");
  const GeoPoint origin = centroid_origin(data.fixes);

  std::vector<ProviderRecord> records;
  records.reserve(train_records.size());
  for (std::size_t i : train_records) records.push_back(data.records.at(i));

  const TowerRegistry registry =
      mask_towers(TowerRegistry::from_records(records), cfg.tower_density_pct,
                  cfg.seed);

  SyncConfig sync_cfg;
  sync_cfg.psi_ms = cfg.psi_ms;
  SyncResult synced =
      synchronize(records, data.fixes, sync_cfg, origin, registry);
  if (synced.samples.empty()) {
    throw InvalidInput("no provider record matched a GPS fix within psi");
  }

  std::vector<LabeledSample> dense = synced.samples;
  if (uses_augmentation(cfg.fingerprint_model) && cfg.n_augmented > 0) {
    AugmentConfig aug = cfg.augment;
    aug.n_augmented = cfg.n_augmented;
    aug.seed = derive_seed(cfg.seed, 0xA06);
    const auto traces = fix_traces(data.fixes, origin);
    dense = augment(synced.samples, traces, aug, cfg.gp, registry).samples;
  }

  std::vector<PlanarPoint> locations;
  locations.reserve(dense.size());
  for (const auto& s : dense) locations.push_back(s.location);
  const VirtualGrid grid = build_grid(locations, cfg.grid_cell_length_m);

  TrainResult trained = train(dense, grid, registry, network_config_for(cfg));
  trained.model.set_origin(origin);
  return {origin,
          synced.report,
          std::move(synced.samples),
          std::move(dense),
          std::move(trained.model),
          std::move(trained.trace)};
}

std::vector<PlanarPoint> serving_cell_estimates(
    std::span<const FeatureVector> probes,
    std::span<const LabeledSample> training) {
  if (training.empty()) throw InvalidInput("serving-cell baseline needs training data");
  const PlanarPoint global = mean_location(training);
  std::map<std::size_t, std::pair<PlanarPoint, std::size_t>> sums;
  for (const auto& s : training) {
    if (auto t = serving_tower(s.features)) {
      auto& [sum, count] = sums[*t];
      sum.x += s.location.x;
      sum.y += s.location.y;
      ++count;
    }
  }
  std::vector<PlanarPoint> out;
  out.reserve(probes.size());
  for (const auto& f : probes) {
    const auto t = serving_tower(f);
    auto it = t ? sums.find(*t) : sums.end();
    if (it == sums.end()) {
      out.push_back(global);
    } else {
      const auto& [sum, count] = it->second;
      out.push_back({sum.x / static_cast<double>(count),
                     sum.y / static_cast<double>(count)});
    }
  }
  return out;
}

std::vector<PlanarPoint> knn_estimates(std::span<const FeatureVector> probes,
                                       std::span<const LabeledSample> training,
                                       std::size_t k,
                                       const NormalizationBounds& bounds) {
  if (training.empty()) throw InvalidInput("kNN baseline needs training data");
  if (k == 0) throw InvalidInput("k must be >= 1");
  k = std::min(k, training.size());
  std::vector<Eigen::VectorXd> train_x;
  train_x.reserve(training.size());
  for (const auto& s : training) {
    train_x.push_back(normalized_features(s.features, bounds));
  }
  std::vector<std::pair<double, std::size_t>> dist(training.size());
  std::vector<PlanarPoint> out;
  out.reserve(probes.size());
  for (const auto& f : probes) {
    const Eigen::VectorXd x = normalized_features(f, bounds);
    for (std::size_t i = 0; i < training.size(); ++i) {
      dist[i] = {(train_x[i] - x).squaredNorm(), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k),
                      dist.end());
    PlanarPoint est{0.0, 0.0};
    for (std::size_t i = 0; i < k; ++i) {
      est.x += training[dist[i].second].location.x;
      est.y += training[dist[i].second].location.y;
    }
    out.push_back({est.x / static_cast<double>(k), est.y / static_cast<double>(k)});
  }
  return out;
}

ErrorSummary score(std::span<const PlanarPoint> estimates,
                   std::span<const PlanarPoint> truths) {
  if (estimates.size() != truths.size()) {
    throw InvalidInput("estimate/truth count mismatch");
  }
  std::vector<double> errors;
  errors.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    errors.push_back(euclidean_error(estimates[i], truths[i]));
  }
  return summarize(errors);
}

PipelineResult run_pipeline(const Dataset& data, const GroundTruth& truth,
                            const PipelineConfig& cfg) {
  if (truth.size() != data.records.size()) {
    throw InvalidInput("ground truth must have one row per provider record");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].phone_id != data.records[i].phone_id ||
        truth[i].timestamp_ms != data.records[i].timestamp_ms) {
      throw InvalidInput("ground truth row " + std::to_string(i) +
                         " does not belong to its record");
    }
  }
  const Split split = split_records(data.records.size(), cfg.train_fraction,
                                    cfg.seed);
  if (split.test.empty()) throw InvalidInput("empty test split");
  OfflineModel offline = build_offline_model(data, split.train, cfg);
  const NetworkModel& net = offline.model;

  // Online phase: the test records, scored against ground truth.
  std::vector<FeatureVector> probes;
  std::vector<PlanarPoint> truths;
  probes.reserve(split.test.size());
  truths.reserve(split.test.size());
  for (std::size_t i : split.test) {
    probes.push_back(build_feature_vector(data.records[i], net.registry()).features);
    truths.push_back(project_to_local({truth[i].lat, truth[i].lon}, offline.origin));
  }

  EstimatorOptions options;
  options.top_n = cfg.fusion_top_n;
  std::vector<PlanarPoint> fused;
  std::vector<PlanarPoint> centers;
  fused.reserve(probes.size());
  centers.reserve(probes.size());
  for (const auto& f : probes) {
    const LocationEstimate est = estimate_from_features(net, f, options);
    fused.push_back(est.fused);
    centers.push_back(est.cell_center);
  }

  PipelineResult result{net,
                        offline.trace,
                        offline.sync,
                        offline.sparse.size(),
                        offline.dense.size(),
                        split.test.size(),
                        score(fused, truths),
                        score(centers, truths),
                        score(serving_cell_estimates(probes, offline.sparse), truths),
                        score(knn_estimates(probes, offline.sparse, cfg.knn_k,
                                            cfg.network.normalization),
                              truths)};
  return result;
}

std::string to_string(SweepParameter parameter) {
  switch (parameter) {
    case SweepParameter::kGridCellLength:
      return "grid_cell_length_m";
    case SweepParameter::kNAugmented:
      return "n_augmented";
    case SweepParameter::kTowerDensity:
      return "tower_density_pct";
    case SweepParameter::kEpochs:
      return "epochs";
    case SweepParameter::kLearningRate:
      return "learning_rate";
    case SweepParameter::kFingerprintModel:
      return "fingerprint_model";
  }
  return "";
}

SweepParameter parse_sweep_parameter(const std::string& text) {
  const auto t = normalize_token(text);
  if (t == "grid_cell_length_m" || t == "grid_cell_length") {
    return SweepParameter::kGridCellLength;
  }
  if (t == "n_augmented") return SweepParameter::kNAugmented;
  if (t == "tower_density_pct" || t == "tower_density") {
    return SweepParameter::kTowerDensity;
  }
  if (t == "epochs") return SweepParameter::kEpochs;
  if (t == "learning_rate") return SweepParameter::kLearningRate;
  if (t == "fingerprint_model") return SweepParameter::kFingerprintModel;
  throw InvalidInput("unknown sweep parameter: " + text);
}

void validate(const SweepSpec& spec) {
  if (spec.values.empty()) throw InvalidInput("sweep needs at least one value");
  if (spec.parameter == SweepParameter::kFingerprintModel) {
    for (const auto& v : spec.values) parse_fingerprint_model(v);
    return;
  }
  // Ranges studied in the original experiments.
  double lo = 0.0;
  double hi = 0.0;
  switch (spec.parameter) {
    case SweepParameter::kGridCellLength:
      lo = 50.0, hi = 1500.0;
      break;
    case SweepParameter::kNAugmented:
      lo = 0.0, hi = 1000.0;
      break;
    case SweepParameter::kTowerDensity:
      lo = 25.0, hi = 100.0;
      break;
    case SweepParameter::kEpochs:
      lo = 50.0, hi = 500.0;
      break;
    case SweepParameter::kLearningRate:
      lo = 0.0001, hi = 0.01;
      break;
    case SweepParameter::kFingerprintModel:
      break;
  }
  for (const auto& v : spec.values) {
    const double x = parse_double(to_string(spec.parameter), v);
    if ((x < lo || x > hi) && !spec.allow_extrapolation) {
      throw InvalidInput(to_string(spec.parameter) + " value " + v +
                         " outside the studied range; enable extrapolation");
    }
  }
}

PipelineConfig with_sweep_value(const PipelineConfig& base,
                                SweepParameter parameter,
                                const std::string& value) {
  PipelineConfig cfg = base;
  set_config_value(cfg, to_string(parameter), value);
  return cfg;
}

std::vector<SweepPoint> run_sweep(const SweepSpec& spec, const Dataset& data,
                                  const GroundTruth& truth,
                                  const PipelineConfig& base,
                                  const std::optional<std::string>& out_dir) {
  validate(spec);
  std::vector<SweepPoint> points;
  for (const auto& value : spec.values) {
    const PipelineResult r =
        run_pipeline(data, truth, with_sweep_value(base, spec.parameter, value));
    points.push_back({value, r.deepcell, r.deepcell_cell, r.serving_cell, r.knn});
  }
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    const std::string name = to_string(spec.parameter);
    std::ofstream table(*out_dir + "/sweep_" + name + ".tsv");
    table << name
          << "\tmedian_m\tmedian_cell_m\tserving_cell_median_m\tknn_median_m\n";
    for (const auto& p : points) {
      table << p.value << '\t' << p.deepcell.median << '\t'
            << p.deepcell_cell.median << '\t' << p.serving_cell.median << '\t'
            << p.knn.median << '\n';
      std::ofstream cdf(*out_dir + "/cdf_" + name + "_" + file_token(p.value) +
                        ".txt");
      write_cdf(cdf, p.deepcell);
    }
  }
  return points;
}

Dataset dataset_from(const SimOutput& sim) { return {sim.records, sim.fixes}; }

}  // namespace deepcell
