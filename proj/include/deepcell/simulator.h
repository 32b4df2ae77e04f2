#ifndef DEEPCELL_SIMULATOR_H_
#define DEEPCELL_SIMULATOR_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepcell/domain.h"
#include "deepcell/random.h"

namespace deepcell {

// Synthetic drive-test scenario. Defaults give a 2040 m x 1000 m area, 42
// towers and roughly 2000 provider records.
struct SimConfig {
  double width_m = 2040.0;
  double height_m = 1000.0;
  std::size_t n_towers = 42;
  double tower_margin_m = 100.0;

  double tx_power_dbm = 43.0;
  double path_loss_exponent = 3.5;
  // Spatially correlated lognormal shadowing, per tower.
  double shadowing_sigma_dbm = 6.0;
  double shadowing_decorrelation_m = 50.0;
  // Independent per-measurement noise on top of shadowing.
  double measurement_noise_dbm = 4.0;
  double noise_floor_dbm = -113.0;

  std::size_t active_set_size = 3;
  // Active plus neighbor cells reported per record.
  std::size_t max_reported_cells = 6;

  double gps_rate_hz = 1.0;
  double event_probability_per_fix = 0.3;
  std::size_t n_phones = 3;
  std::size_t fixes_per_phone = 2237;
  double min_speed_mps = 5.0;
  double max_speed_mps = 15.0;
  // Record timestamps are offset from their fix by uniform [-jitter, jitter].
  std::int64_t jitter_ms = 0;

  std::int64_t start_time_ms = 1'514'764'800'000;  // 2018-01-01T00:00:00Z
  GeoPoint origin{31.2, 29.9};  // south-west corner of the area
  std::uint64_t seed = 1;
};

void validate(const SimConfig& cfg);

struct SimTower {
  std::string id;
  std::string rnc;
  PlanarPoint position;
};

// Gaussian values on a square lattice, bilinearly blended and renormalized
// so the marginal standard deviation is `sigma` everywhere.
class ShadowingField {
 public:
  ShadowingField(PlanarPoint min_corner, double width, double height,
                 double spacing, double sigma, Rng& rng);
  double value_at(const PlanarPoint& p) const;

 private:
  PlanarPoint min_corner_;
  double spacing_;
  std::size_t cols_;
  std::size_t rows_;
  std::vector<double> nodes_;
};

struct TrajectoryPoint {
  std::int64_t timestamp_ms;
  PlanarPoint position;
};

struct Trajectory {
  std::string phone_id;
  std::vector<TrajectoryPoint> points;  // strictly increasing timestamps

  // Linear interpolation, clamped to the ends.
  PlanarPoint at(std::int64_t timestamp_ms) const;
};

struct SimWorld {
  SimConfig config;
  std::vector<SimTower> towers;
  std::vector<ShadowingField> shadowing;
  std::vector<Trajectory> trajectories;
};

SimWorld build_world(const SimConfig& cfg);

// Deterministic part of the received power: tx - 10 n log10(max(d, 1)) plus
// the tower's shadowing at p.
double mean_rss_dbm(const SimWorld& world, std::size_t tower,
                    const PlanarPoint& p);

// mean_rss_dbm plus measurement noise drawn from `rng`; nullopt when below
// the noise floor.
std::optional<double> rss_at(const SimWorld& world, std::size_t tower,
                             const PlanarPoint& p, Rng& rng);

struct GroundTruthEntry {
  std::string phone_id;
  std::int64_t timestamp_ms = 0;
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GroundTruthEntry&,
                         const GroundTruthEntry&) = default;
};

struct SimOutput {
  std::vector<ProviderRecord> records;
  std::vector<GpsFix> fixes;
  // Parallel to `records`. Only the evaluation scorer may read it.
  std::vector<GroundTruthEntry> ground_truth;
  // Events that heard no tower and were not logged.
  std::size_t silent_events = 0;
};

SimOutput generate(const SimWorld& world);
SimOutput generate(const SimConfig& cfg);

}  // namespace deepcell

#endif  // DEEPCELL_SIMULATOR_H_
